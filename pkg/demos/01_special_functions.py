"""Meijer-G by Mellin-Barnes contour integration, checked against closed forms."""
import math

from scipy import special

from hapirs.specfun import DegenerateParametersError, meijer_g, meijer_signature

# G^{1,0}_{0,1}(x | -; 0) is e^{-x}
for x in (1e-3, 0.5, 7.0, 60.0):
    g = meijer_g(meijer_signature([], [], [0.0], []), x)
    print(f"G10_01({x:g}) = {g.value:.15e}   exp(-x) = {math.exp(-x):.15e}   rel {abs(g.value / math.exp(-x) - 1):.1e}")

# G^{2,0}_{0,2}(x | -; a, b) is 2 x^{(a+b)/2} K_{a-b}(2 sqrt x)
a, b = 1.3, 0.4
for x in (0.01, 1.0, 25.0):
    g = meijer_g(meijer_signature([], [], [a, b], []), x).value
    ref = 2 * x ** ((a + b) / 2) * special.kv(a - b, 2 * math.sqrt(x))
    print(f"G20_02({x:g}; {a}, {b}) = {g:.12e}   Bessel form {ref:.12e}")

# a double pole of Γ(−s)²: strict mode refuses, default mode perturbs and reports the shift
sig = meijer_signature([0.0], [], [0.0, 0.0], [])
try:
    meijer_g(sig, 1.0, perturb=False)
except DegenerateParametersError as e:
    print("strict:", e)
res = meijer_g(sig, 1.0)
ref = math.e * special.exp1(1.0)
print(f"perturbed: {res.value:.8f} vs e*E1(1) = {ref:.8f}, shift {res.perturbation:.1e}")

# a pinched contour (left and right poles meet) is undefined and always an error
try:
    meijer_g(meijer_signature([1.0], [], [0.0, 0.0], []), 1.0)
except DegenerateParametersError as e:
    print("pinched:", e)
