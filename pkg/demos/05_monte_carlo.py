"""Physical-chain simulation as an independent check of the closed forms."""
import numpy as np

from hapirs.e2e import E2EConfig, avg_ber, ergodic_capacity, modulation_params, outage_probability
from hapirs.fso import FsoGeometry, PointingParams, fso_derived
from hapirs.montecarlo import ChainParams, RngStream, estimate_all
from hapirs.rf import SHADOWING, NakagamiParams, RfLinkBudget, average_snr_u, clt_params, fit_mixture_gamma

pointing = PointingParams(q_H=0.7)
d = fso_derived(FsoGeometry(q_V=1.6), pointing)
gbar = average_snr_u(RfLinkBudget())
mix = fit_mixture_gamma(clt_params(50, SHADOWING["AS"], NakagamiParams()), gbar, 75)
cfg = E2EConfig()
chain = ChainParams(d, pointing, 50, SHADOWING["AS"], NakagamiParams(), gbar, cfg)
bpsk = modulation_params("bpsk")

for i, db in enumerate((10.0, 20.0, 30.0)):
    gh = 10 ** (db / 10)
    mc = estimate_all(RngStream(2024, i), 300_000, chain, gh, (bpsk,))
    exact = {"op": outage_probability(d, mix, cfg, gh), "cap": ergodic_capacity(d, mix, cfg, gh),
             "ber:2-PSK": avg_ber(bpsk, d, mix, cfg, gh)}
    for key, ref in exact.items():
        z = (mc[key].value - float(ref)) / mc[key].stderr
        print(f"{db:4.0f} dB {key:10s} exact {float(ref):.5e}  MC {mc[key].value:.5e} "
              f"+- {mc[key].stderr:.1e}  ({z:+.2f} SE)")
