"""The optical uplink from the ground station to the platform."""
import math

import numpy as np

from hapirs.fso import (FsoGeometry, PointingParams, attenuation_coefficient, fso_derived,
                        fso_snr_cdf, slant_distance_m)

geom = FsoGeometry(q_V=1.6)
print(f"slant distance {slant_distance_m(geom) / 1e3:.2f} km")
print(f"C_h with q_V=1.6: {attenuation_coefficient(1550, 10, 1.6):.4f} /km, "
      f"with the visibility rule: {attenuation_coefficient(1550, 10):.4f} /km")

for q in (1.0, 0.7):
    d = fso_derived(geom, PointingParams(q_H=q))
    print(f"q_H={q}: alpha={d.alpha:.3f} beta={d.beta:.3f} A0={d.A0:.4f} "
          f"eta_s={d.eta_s:.3f} h_al={d.h_al:.4f} sigma_B^2={d.sigma_B2:.3f}")

# outage of the optical hop alone, at a 2 dB threshold
d = fso_derived(geom, PointingParams())
gth = 10 ** 0.2
for r, name in ((1, "heterodyne"), (2, "IM/DD")):
    row = [float(fso_snr_cdf(gth, d, r, 10 ** (db / 10))) for db in (20, 40, 60)]
    print(f"{name:10s} F_H(2 dB) at 20/40/60 dB: " + "  ".join(f"{v:.3e}" for v in row))

# smaller zenith angle, shorter path, weaker turbulence
for z in (20, 40, 60):
    d = fso_derived(FsoGeometry(q_V=1.6, zenith=math.radians(z)), PointingParams())
    print(f"zenith {z}: alpha={d.alpha:.2f} beta={d.beta:.2f} "
          f"F_H at 40 dB = {float(fso_snr_cdf(gth, d, 1, 1e4)):.3e}")
