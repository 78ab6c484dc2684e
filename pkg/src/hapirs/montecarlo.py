"""Seeded simulation of the physical chain (turbulence, pointing, IRS cascade,
fixed-gain relay) used as the independent check on every analytic metric."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .e2e import E2EConfig, ModulationScheme
from .fso import FsoDerived, PointingParams, pointing_derived
from .rf import NakagamiParams, ShadowedRicianParams

__all__ = [
    "RngStream", "McEstimate", "ChainParams", "sample_turbulence", "sample_pointing",
    "sample_sr_amplitude", "sample_nakagami_amplitude", "sample_rf_snr", "sample_e2e_snr",
    "estimate_op", "estimate_ber", "estimate_capacity", "estimate_all", "CHUNK",
]

CHUNK = 50_000
MIN_SAMPLES = 10_000


@dataclass(frozen=True)
class RngStream:
    """Counter-based stream keyed by (seed, stream id); Philox keeps the
    draws identical across platforms and independent of scheduling."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence([self.seed & (2 ** 64 - 1), self.stream_id])
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    n: int


@dataclass(frozen=True)
class ChainParams:
    """Everything needed to draw end-to-end SNR samples."""

    fso: FsoDerived
    pointing: PointingParams
    N: int
    sr: ShadowedRicianParams
    nak: NakagamiParams
    gamma_u_bar: float
    cfg: E2EConfig


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


def sample_turbulence(rng, alpha: float, beta: float, size: int) -> np.ndarray:
    """Unit-mean Gamma-Gamma gain as the product of two unit-mean Gamma variates."""
    g = _rng(rng)
    x = np.ones(size) if math.isinf(alpha) else g.gamma(alpha, 1.0 / alpha, size)
    y = np.ones(size) if math.isinf(beta) else g.gamma(beta, 1.0 / beta, size)
    return x * y


def sample_pointing(rng, pointing: PointingParams, size: int) -> np.ndarray:
    """Gaussian-beam collection fraction under Hoyt jitter (horizontal std q_H σ_s)."""
    g = _rng(rng)
    _, A0, _, w_eq = pointing_derived(pointing)
    x = g.normal(0.0, pointing.q_H * pointing.sigma_s, size)
    y = g.normal(0.0, pointing.sigma_s, size)
    return A0 * np.exp(-2.0 * (x * x + y * y) / (w_eq * w_eq))


def sample_sr_amplitude(rng, sr: ShadowedRicianParams, size) -> np.ndarray:
    """|ξ + w|: Nakagami(m_R, Ω_R) line of sight plus circular Gaussian scatter
    of total variance 2b_R (the LOS phase is irrelevant by circular symmetry)."""
    g = _rng(rng)
    los2 = g.gamma(sr.m_R, sr.Omega_R / sr.m_R, size) if sr.Omega_R > 0 else np.zeros(size)
    sd = math.sqrt(sr.b_R)
    re = np.sqrt(los2) + g.normal(0.0, sd, size)
    im = g.normal(0.0, sd, size)
    return np.hypot(re, im)


def sample_nakagami_amplitude(rng, nak: NakagamiParams, size) -> np.ndarray:
    g = _rng(rng)
    return np.sqrt(g.gamma(nak.m_N, nak.sigma_N2 / nak.m_N, size))


def sample_rf_snr(rng, N: int, sr: ShadowedRicianParams, nak: NakagamiParams,
                  gamma_u_bar: float, size: int) -> np.ndarray:
    """γ_U = γ̄_U (Σ_i α_i β_i)² for coherent IRS combining over N elements."""
    g = _rng(rng)
    a = sample_sr_amplitude(g, sr, (size, N))
    b = sample_nakagami_amplitude(g, nak, (size, N))
    z = np.sum(a * b, axis=1)
    return gamma_u_bar * z * z


def sample_e2e_snr(rng, p: ChainParams, gamma_h: float, size: int) -> np.ndarray:
    """γ = γ_H γ_U/(γ_U + C) with γ_H = γ̄_H (h_al h_at h_pl)^r."""
    g = _rng(rng)
    h = p.fso.h_al * sample_turbulence(g, p.fso.alpha, p.fso.beta, size) \
        * sample_pointing(g, p.pointing, size)
    gh = gamma_h * h ** p.cfg.r
    gu = sample_rf_snr(g, p.N, p.sr, p.nak, p.gamma_u_bar, size)
    if p.cfg.C == 0:
        return gh
    return gh * gu / (gu + p.cfg.C)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

class _Accumulator:
    """Running sums per statistic, merged in chunk order."""

    def __init__(self, fns: dict[str, Callable[[np.ndarray], np.ndarray]]):
        self.fns = fns
        self.s1 = dict.fromkeys(fns, 0.0)
        self.s2 = dict.fromkeys(fns, 0.0)
        self.n = 0

    def add(self, gamma: np.ndarray):
        for k, fn in self.fns.items():
            v = fn(gamma)
            self.s1[k] += float(np.sum(v))
            self.s2[k] += float(np.sum(v * v))
        self.n += gamma.size

    def result(self, key: str, binomial: bool = False) -> McEstimate:
        n = self.n
        mean = self.s1[key] / n
        if binomial:
            se = math.sqrt(max(mean * (1 - mean), 0.0) / n)
        else:
            var = max(self.s2[key] / n - mean * mean, 0.0) * n / max(n - 1, 1)
            se = math.sqrt(var / n)
        return McEstimate(mean, se, n)


def _run(rng, p: ChainParams, gamma_h: float, n: int, fns) -> _Accumulator:
    if n < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {n}")
    g = _rng(rng)
    acc = _Accumulator(fns)
    done = 0
    while done < n:
        m = min(CHUNK, n - done)
        acc.add(sample_e2e_snr(g, p, gamma_h, m))
        done += m
    return acc


def _ber_fn(mod: ModulationScheme):
    def fn(gamma):
        return 0.5 * mod.delta * sum(special.gammaincc(mod.p, q * gamma) for q in mod.q)
    return fn


def _cap_fn(c0: float):
    return lambda gamma: np.log1p(c0 * gamma)


def estimate_op(rng, n: int, gamma_th: float, p: ChainParams, gamma_h: float) -> McEstimate:
    acc = _run(rng, p, gamma_h, n, {"op": lambda g: (g < gamma_th).astype(float)})
    return acc.result("op", binomial=True)


def estimate_ber(rng, n: int, mod: ModulationScheme, p: ChainParams, gamma_h: float) -> McEstimate:
    """Rao-Blackwellised BER: mean of the conditional error probability."""
    return _run(rng, p, gamma_h, n, {"ber": _ber_fn(mod)}).result("ber")


def estimate_capacity(rng, n: int, p: ChainParams, gamma_h: float) -> McEstimate:
    return _run(rng, p, gamma_h, n, {"cap": _cap_fn(p.cfg.c0)}).result("cap")


def estimate_all(rng, n: int, p: ChainParams, gamma_h: float,
                 mods: tuple[ModulationScheme, ...] = ()) -> dict[str, McEstimate]:
    """OP, capacity and the BER of each modulation from one shared sample set."""
    fns = {"op": lambda g: (g < p.cfg.gamma_th).astype(float), "cap": _cap_fn(p.cfg.c0)}
    for m in mods:
        fns[f"ber:{m.name}"] = _ber_fn(m)
    acc = _run(rng, p, gamma_h, n, fns)
    return {k: acc.result(k, binomial=(k == "op")) for k in fns}
