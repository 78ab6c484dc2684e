"""The IRS-assisted RF downlink: link budget, CLT law and mixture-Gamma fit."""
import numpy as np

from hapirs.montecarlo import RngStream, sample_rf_snr
from hapirs.rf import (SHADOWING, NakagamiParams, RfLinkBudget, average_snr_u, cdf_sup_distance,
                       clt_params, effective_power, fit_mixture_gamma, gamma_u_cdf, mixture_cdf)

budget = RfLinkBudget()
gbar = average_snr_u(budget)
print(f"received power {effective_power(budget):.2f} dBm, mean RF SNR {10 * np.log10(gbar):.2f} dB")

nak = NakagamiParams()
for name, sr in SHADOWING.items():
    clt = clt_params(50, sr, nak)
    lam = clt.mu_Z ** 2 / clt.sigma_Z2
    dist = {n: cdf_sup_distance(fit_mixture_gamma(clt, gbar, n), clt, gbar) for n in (25, 50, 75, 100)}
    print(f"{name}: lambda={lam:6.1f}  sup|F_mix - F_clt| " +
          "  ".join(f"N_x={n}: {v:.1e}" for n, v in dist.items()))

# the CLT law against a direct simulation of 50 IRS elements
sr = SHADOWING["HS"]
clt = clt_params(50, sr, nak)
x = np.sort(sample_rf_snr(RngStream(1), 50, sr, nak, gbar, 200_000))
q = np.quantile(x, [0.1, 0.5, 0.9])
emp = np.searchsorted(x, q) / x.size
print("HS quantiles", np.array2string(10 * np.log10(q), precision=2), "dB")
print("CLT CDF there", np.array2string(gamma_u_cdf(q, clt, gbar), precision=4),
      " empirical", np.array2string(emp, precision=4))
m = fit_mixture_gamma(clt, gbar, 75)
print("mixture CDF there", np.array2string(mixture_cdf(q, m), precision=4))
