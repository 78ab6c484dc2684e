"""HAP → IRS → user RF cascade: shadowed-Rician and Nakagami-m hops, link
budget, the CLT model of the coherently combined IRS sum, and its
mixture-Gamma approximation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .specfun import bessel_i, hyp1f1, hyp2f1, marcum_cdf_half

__all__ = [
    "ShadowedRicianParams", "NakagamiParams", "RfLinkBudget", "CltParams", "MixtureGammaModel",
    "SHADOWING", "sr_pdf", "sr_moment", "nak_pdf", "nak_moment",
    "pathloss_hap_irs", "pathloss_irs_user", "effective_power", "average_snr_u",
    "clt_params", "gamma_u_pdf", "gamma_u_cdf", "fit_mixture_gamma", "mixture_pdf",
    "mixture_cdf", "mixture_mean", "cdf_sup_distance",
]


@dataclass(frozen=True)
class ShadowedRicianParams:
    b_R: float
    m_R: float
    Omega_R: float

    def __post_init__(self):
        if not (self.b_R > 0 and self.m_R > 0 and self.Omega_R >= 0):
            raise ValueError("shadowed-Rician needs b_R > 0, m_R > 0, Omega_R >= 0")


SHADOWING = {
    "HS": ShadowedRicianParams(0.063, 1.0, 0.007),
    "AS": ShadowedRicianParams(0.251, 5.0, 0.279),
    "LS": ShadowedRicianParams(0.158, 19.0, 1.29),
}


@dataclass(frozen=True)
class NakagamiParams:
    m_N: float = 1.0
    sigma_N2: float = 2.0

    def __post_init__(self):
        if self.m_N < 0.5 or self.sigma_N2 <= 0:
            raise ValueError("Nakagami needs m_N >= 0.5 and sigma_N2 > 0")


def sr_pdf(x, p: ShadowedRicianParams):
    """Density of the shadowed-Rician *power* |α|²."""
    x = np.asarray(x, float)
    two_b = 2 * p.b_R
    den = two_b * p.m_R + p.Omega_R
    c = (two_b * p.m_R / den) ** p.m_R / two_b
    xp = np.maximum(x, 0.0)
    z = p.Omega_R * xp / (two_b * den)
    # Kummer: e^{-x/2b} 1F1(m,1,z) = e^{z - x/2b} 1F1(1-m,1,-z); the exponent is
    # -x·m/den, so nothing overflows for large x
    out = np.where(x >= 0, c * np.exp(-xp * p.m_R / den) * hyp1f1(1.0 - p.m_R, 1.0, -z), 0.0)
    return out[()]


def sr_moment(s, p: ShadowedRicianParams):
    """E[|α|^s] of the shadowed-Rician *amplitude*."""
    two_b = 2 * p.b_R
    den = two_b * p.m_R + p.Omega_R
    return ((two_b * p.m_R / den) ** p.m_R * two_b ** (s / 2) * special.gamma(s / 2 + 1)
            * hyp2f1(s / 2 + 1, p.m_R, 1.0, p.Omega_R / den))


def nak_pdf(x, p: NakagamiParams):
    x = np.asarray(x, float)
    m, w = p.m_N, p.sigma_N2
    with np.errstate(divide="ignore"):
        logv = (m * math.log(m / w) + math.log(2) - special.gammaln(m)
                + (2 * m - 1) * np.log(x) - m * x * x / w)
    return np.where(x > 0, np.exp(logv), 0.0)[()]


def nak_moment(s, p: NakagamiParams):
    m = p.m_N
    return math.exp(special.gammaln(m + s / 2) - special.gammaln(m)) * (p.sigma_N2 / m) ** (s / 2)


# ---------------------------------------------------------------------------
# link budget
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RfLinkBudget:
    f_c_ghz: float = 5.0
    d_HI0_km: float = 5.0
    d_IU0_m: float = 10.0
    H_H: float = 20e3
    H_I: float = 20.0
    H_U: float = 2.0
    L_rain_db_km: float = 0.01
    L_atm_db_km: float = 5.4e-3
    L_oth_db: float = 2.0
    G_tx_db: float = 50.0
    G_rx_db: float = 50.0
    P0_dbm: float = 0.0
    sigma_u2_w: float = 1e-16
    losses_per_km: bool = True
    gamma_u_db: float | None = None

    @property
    def d_HI_km(self) -> float:
        return math.hypot(self.d_HI0_km, (self.H_H - self.H_I) / 1e3)

    @property
    def d_IU_m(self) -> float:
        return math.hypot(self.d_IU0_m, self.H_I - self.H_U)


def pathloss_hap_irs(b: RfLinkBudget) -> float:
    d = b.d_HI_km
    fspl = 92.45 + 20 * math.log10(b.f_c_ghz) + 20 * math.log10(d)
    scale = d if b.losses_per_km else 1.0
    return fspl + (b.L_rain_db_km + b.L_atm_db_km) * scale + b.L_oth_db


def pathloss_irs_user(b: RfLinkBudget) -> float:
    return 40 * math.log10(b.d_IU_m) - 20 * math.log10(b.H_I) - 20 * math.log10(b.H_U)


def effective_power(b: RfLinkBudget) -> float:
    """Received power P_h in dBm."""
    return b.P0_dbm - pathloss_hap_irs(b) - pathloss_irs_user(b) + b.G_tx_db + b.G_rx_db


def average_snr_u(b: RfLinkBudget) -> float:
    """Linear γ̄_U = P_h/σ_U², or the configured override."""
    if b.gamma_u_db is not None:
        return 10 ** (b.gamma_u_db / 10)
    p_w = 10 ** ((effective_power(b) - 30) / 10)
    return p_w / b.sigma_u2_w


# ---------------------------------------------------------------------------
# CLT model of the IRS sum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CltParams:
    N: int
    mu_Z: float
    sigma_Z2: float


def clt_params(N: int, sr: ShadowedRicianParams, nak: NakagamiParams) -> CltParams:
    """Mean and variance of Z = Σ α_i β_i over N independent elements."""
    if N < 1:
        raise ValueError("N must be >= 1")
    m1 = sr_moment(1, sr) * nak_moment(1, nak)
    m2 = sr_moment(2, sr) * nak_moment(2, nak)
    return CltParams(N, N * m1, N * (m2 - m1 * m1))


def gamma_u_pdf(g, clt: CltParams, gbar: float):
    """Density of γ_U = γ̄_U Z² with Z ~ N(μ_Z, σ_Z²) (scaled non-central χ²₁)."""
    g = np.asarray(g, float)
    mu, s2 = clt.mu_Z, clt.sigma_Z2
    out = np.zeros_like(g)
    pos = g > 0
    x = g[pos] / (gbar * s2)          # non-central χ² variable
    lam = mu * mu / s2
    arg = np.sqrt(lam * x)
    # ½ e^{−(x+λ)/2} (x/λ)^{−1/4} I_{−1/2}(√(λx)) with I = ive·e^{arg}
    logv = (-0.5 * (np.sqrt(x) - math.sqrt(lam)) ** 2 - 0.25 * np.log(x / lam)
            + np.log(special.ive(-0.5, arg)) + math.log(0.5))
    out[pos] = np.exp(logv) / (gbar * s2)
    return out[()]


def gamma_u_cdf(g, clt: CltParams, gbar: float):
    g = np.asarray(g, float)
    b = np.sqrt(np.maximum(g, 0.0) / gbar) / math.sqrt(clt.sigma_Z2)
    return marcum_cdf_half(clt.mu_Z / math.sqrt(clt.sigma_Z2), b)


# ---------------------------------------------------------------------------
# mixture-Gamma approximation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixtureGammaModel:
    """f(γ) = Σ_i α_i γ^{β_i−1} e^{−ζ γ}, β_i = i − 1/2, common rate ζ.

    ``log_p`` holds log of the component probabilities p_i = α_i Γ(β_i) ζ^{−β_i}.
    """

    N_x: int
    betas: np.ndarray
    zeta: float
    log_p: np.ndarray

    @property
    def p(self) -> np.ndarray:
        return np.exp(self.log_p)

    @property
    def log_alpha(self) -> np.ndarray:
        return self.log_p - special.gammaln(self.betas) + self.betas * math.log(self.zeta)

    @property
    def alphas(self) -> np.ndarray:
        return np.exp(self.log_alpha)

    @property
    def log_weight_scale(self) -> np.ndarray:
        """log(α_i ζ^{−β_i}) = log p_i − log Γ(β_i)."""
        return self.log_p - special.gammaln(self.betas)


def fit_mixture_gamma(clt: CltParams, gbar: float, N_x: int) -> MixtureGammaModel:
    """PDF-matched mixture of N_x Gamma terms; θ_i are evaluated in log space."""
    if N_x < 1:
        raise ValueError("N_x must be >= 1")
    mu, s2 = clt.mu_Z, clt.sigma_Z2
    i = np.arange(1, N_x + 1, dtype=float)
    betas = i - 0.5
    zeta = 1.0 / (2 * gbar * s2)
    log_theta = (0.25 * math.log(gbar * mu * mu) - math.log(2 * gbar * s2) - mu * mu / (2 * s2)
                 - special.gammaln(i) - special.gammaln(i - 0.5)
                 + (2 * i - 2.5) * math.log(mu / (2 * s2 * math.sqrt(gbar))))
    log_unnorm = log_theta + special.gammaln(betas) - betas * math.log(zeta)
    if not np.all(np.isfinite(log_unnorm)):
        raise OverflowError("mixture weights are not finite; rescale gamma_u_bar or sigma_Z")
    log_p = log_unnorm - special.logsumexp(log_unnorm)
    return MixtureGammaModel(N_x, betas, zeta, log_p)


def mixture_pdf(g, m: MixtureGammaModel):
    g = np.asarray(g, float)
    out = np.zeros_like(g)
    pos = g > 0
    gp = g[pos][:, None]
    logt = (m.log_alpha[None, :] + (m.betas[None, :] - 1) * np.log(gp) - m.zeta * gp)
    out[pos] = np.exp(special.logsumexp(logt, axis=1))
    return out[()]


def mixture_cdf(g, m: MixtureGammaModel):
    g = np.asarray(g, float)
    x = np.maximum(g, 0.0)[..., None] * m.zeta
    return np.clip((special.gammainc(m.betas, x) * m.p).sum(axis=-1), 0.0, 1.0)[()]


def mixture_mean(m: MixtureGammaModel) -> float:
    return float(np.sum(m.p * m.betas) / m.zeta)


def cdf_sup_distance(m: MixtureGammaModel, clt: CltParams, gbar: float, n: int = 20001) -> float:
    """sup |mixture_cdf − gamma_u_cdf| on a uniform grid out to (μ_Z + 8σ_Z)² γ̄_U."""
    top = gbar * (clt.mu_Z + 8 * math.sqrt(clt.sigma_Z2)) ** 2
    grid = np.linspace(0.0, top, n)
    return float(np.max(np.abs(mixture_cdf(grid, m) - gamma_u_cdf(grid, clt, gbar))))
