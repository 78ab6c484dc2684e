"""Optical ground station to HAP link: attenuation, Gamma-Gamma turbulence,
Hoyt pointing error and the FSO SNR distribution for heterodyne (r=1) and
IM/DD (r=2) detection."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special

from .specfun import (DomainError, GammaFactor, GammaFactorList, GammaKernel, MixtureKernel,
                      bessel_k, line_batch)

__all__ = [
    "FsoGeometry", "PointingParams", "FsoDerived",
    "attenuation_coefficient", "visibility_exponent", "path_attenuation", "slant_distance_m",
    "hv_cn2", "rytov_variance", "log_variances", "gg_params", "pointing_derived", "fso_derived",
    "gg_pdf", "hoyt_pe_pdf", "angular_nodes", "fso_snr_pdf", "fso_snr_cdf", "fso_snr_sf",
    "QuadratureError",
]


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class FsoGeometry:
    """Link geometry and atmosphere.  Lengths in metres, visibility in km."""

    H_O: float = 10.0
    H_H: float = 20e3
    zenith: float = math.radians(40.0)
    wavelength: float = 1550e-9
    W0: float = 1e-3
    F0: float = math.inf
    collimated: bool = True
    wind: float = 30.0
    A: float = 1.7e-13
    V_km: float = 10.0
    q_V: float | None = None

    def __post_init__(self):
        if not self.H_H > self.H_O >= 0:
            raise ValueError("need H_H > H_O >= 0")
        if not 0 <= self.zenith < math.pi / 2:
            raise ValueError("zenith angle must lie in [0, pi/2)")
        if min(self.wavelength, self.W0, self.V_km) <= 0:
            raise ValueError("wavelength, W0 and V must be positive")


@dataclass(frozen=True)
class PointingParams:
    r_a: float = 5e-3
    omega_b: float = 15e-3
    sigma_s: float = 5e-3
    q_H: float = 1.0

    def __post_init__(self):
        if min(self.r_a, self.omega_b, self.sigma_s) <= 0:
            raise ValueError("pointing parameters must be positive")
        if not 0 < self.q_H <= 1:
            raise ValueError("q_H must lie in (0, 1]")


@dataclass(frozen=True)
class FsoDerived:
    alpha: float
    beta: float
    A0: float
    eta_s: float
    h_al: float
    q_H: float = 1.0
    sigma_B2: float = float("nan")
    sigma_lnX2: float = float("nan")
    sigma_lnY2: float = float("nan")
    d_oh: float = float("nan")
    omega_eq: float = float("nan")

    @property
    def scale(self) -> float:
        """αβ/(A0·h_al): maps the optical gain onto the Meijer-G argument."""
        return self.alpha * self.beta / (self.A0 * self.h_al)


# ---------------------------------------------------------------------------
# attenuation
# ---------------------------------------------------------------------------

def visibility_exponent(V_km: float) -> float:
    """Size-distribution exponent q_V of the Kim model."""
    if V_km > 50:
        return 1.6
    if V_km > 6:
        return 1.3
    return 0.585 * V_km ** (1.0 / 3.0)


def attenuation_coefficient(lambda_nm: float, V_km: float, q_V: float | None = None) -> float:
    """Beer-Lambert coefficient C_h in 1/km (λ in nm, V in km)."""
    if V_km <= 0 or lambda_nm <= 0:
        raise ValueError("wavelength and visibility must be positive")
    q = visibility_exponent(V_km) if q_V is None else q_V
    return 3.912 / V_km * (lambda_nm / 550.0) ** (-q)


def path_attenuation(C_h: float, d_km: float) -> float:
    if C_h < 0 or d_km < 0:
        raise ValueError("inputs must be non-negative")
    return math.exp(-C_h * d_km)


def slant_distance_m(geom: FsoGeometry) -> float:
    return (geom.H_H - geom.H_O) / math.cos(geom.zenith)


# ---------------------------------------------------------------------------
# turbulence
# ---------------------------------------------------------------------------

def hv_cn2(l, wind: float = 30.0, A: float = 1.7e-13):
    """Hufnagel-Valley C_n² profile at altitude ``l`` metres."""
    l = np.asarray(l, float)
    out = (0.00594 * (wind / 27.0) ** 2 * (1e-5 * l) ** 10 * np.exp(-l / 1000.0)
           + 2.7e-16 * np.exp(-l / 1500.0) + A * np.exp(-l / 1000.0))
    return out[()]


def _beam_parameters(geom: FsoGeometry, d_oh: float) -> tuple[float, float]:
    k_w = 2 * math.pi / geom.wavelength
    lam0 = 2 * d_oh / (k_w * geom.W0 ** 2)
    theta0 = 1.0 if geom.collimated or math.isinf(geom.F0) else 1.0 - d_oh / geom.F0
    den = lam0 ** 2 + theta0 ** 2
    return lam0 / den, theta0 / den


def rytov_variance(geom: FsoGeometry, d_oh: float | None = None, cn2=None) -> float:
    """Uplink Rytov variance of a Gaussian beam.

    ``d_oh`` (metres) defaults to the slant distance; passing it explicitly
    keeps the beam parameters fixed when only the zenith angle changes.
    ``cn2`` overrides the Hufnagel-Valley profile (a callable of altitude).
    """
    if d_oh is None:
        d_oh = slant_distance_m(geom)
    Lam, Theta = _beam_parameters(geom, d_oh)
    Theta_bar = 1.0 - Theta
    k_w = 2 * math.pi / geom.wavelength
    prof = cn2 if cn2 is not None else (lambda l: hv_cn2(l, geom.wind, geom.A))
    H_O, H_H = geom.H_O, geom.H_H

    def f(l):
        xi = (l - H_H) / (H_O - H_H)
        z = complex(Lam * xi ** 2, xi * (1.0 - Theta_bar * xi))
        return prof(l) * ((z ** (5.0 / 6.0)).real - Lam ** (5.0 / 6.0) * xi ** (5.0 / 3.0))

    # the profile has structure near the ground and around 10 km
    pts = [p for p in (1e3, 5e3, 1e4, 1.5e4) if H_O < p < H_H]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, H_O, H_H, points=pts or None, epsrel=1e-10,
                                      epsabs=0.0, limit=400)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"Rytov integral did not converge on [{H_O}, {H_H}] m "
                                  f"with breakpoints {pts}: {exc}") from exc
    pref = 8.7 * k_w ** (7.0 / 6.0) * (H_H - H_O) ** (5.0 / 6.0) / math.cos(geom.zenith) ** (11.0 / 6.0)
    return max(pref * val, 0.0)


def log_variances(sigma_B2: float, Theta: float) -> tuple[float, float]:
    """Large- and small-scale log variances."""
    sb125 = sigma_B2 ** 1.2
    sx = 0.49 * sigma_B2 / (1 + 0.56 * (1 + Theta) * sb125) ** (7.0 / 6.0)
    sy = 0.51 * sigma_B2 / (1 + 0.69 * sb125) ** (5.0 / 6.0)
    return sx, sy


def gg_params(sigma_lnX2: float, sigma_lnY2: float) -> tuple[float, float]:
    """(α, β) from the log variances; zero variance gives ``inf`` (no turbulence)."""
    def inv(v):
        return math.inf if v <= 0 else 1.0 / math.expm1(v)
    return inv(sigma_lnX2), inv(sigma_lnY2)


def pointing_derived(p: PointingParams) -> tuple[float, float, float, float]:
    """(v_e, A0, η_s, ω_eq) of the equivalent-beam pointing model."""
    v_e = p.r_a * math.sqrt(math.pi / 2) / p.omega_b
    A0 = math.erf(v_e) ** 2
    w_eq2 = p.omega_b ** 2 * math.sqrt(math.pi) * math.erf(v_e) / (2 * v_e * math.exp(-v_e ** 2))
    w_eq = math.sqrt(w_eq2)
    return v_e, A0, w_eq / (2 * p.sigma_s), w_eq


def fso_derived(geom: FsoGeometry, pointing: PointingParams) -> FsoDerived:
    d_oh = slant_distance_m(geom)
    sB2 = rytov_variance(geom, d_oh)
    _, Theta = _beam_parameters(geom, d_oh)
    sx, sy = log_variances(sB2, Theta)
    alpha, beta = gg_params(sx, sy)
    C_h = attenuation_coefficient(geom.wavelength * 1e9, geom.V_km, geom.q_V)
    h_al = path_attenuation(C_h, d_oh / 1e3)
    _, A0, eta_s, w_eq = pointing_derived(pointing)
    return FsoDerived(alpha, beta, A0, eta_s, h_al, pointing.q_H, sB2, sx, sy, d_oh, w_eq)


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

def gg_pdf(h, alpha: float, beta: float):
    """Unit-mean Gamma-Gamma density."""
    h = np.asarray(h, float)
    out = np.zeros_like(h)
    pos = h > 0
    hp = h[pos]
    x = 2 * np.sqrt(alpha * beta * hp)
    logc = (math.log(2) + 0.5 * (alpha + beta) * math.log(alpha * beta)
            - special.gammaln(alpha) - special.gammaln(beta))
    # kve keeps the Bessel factor finite for large arguments
    with np.errstate(divide="ignore"):
        out[pos] = np.exp(logc + (0.5 * (alpha + beta) - 1) * np.log(hp)
                          + np.log(special.kve(alpha - beta, x)) - x)
    return out[()]


def angular_nodes(q_H: float, eta_s: float, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Nodes k_j = η_s²ξ(φ_j) and weights W_j with

        (η_s²/(2π q_H)) ∫_{−π}^{π} g(η_s²ξ(φ)) dφ  ≈  Σ_j W_j g(k_j).

    ξ(φ) is even and π-periodic in φ, so [−π, π] folds onto [0, π/2].
    """
    eta2 = eta_s ** 2
    if q_H == 1.0:
        return np.array([eta2]), np.array([eta2])
    x, w = leggauss(n)
    phi = 0.25 * math.pi * (x + 1)
    wphi = 0.25 * math.pi * w
    xi = (1 - (1 - q_H ** 2) * np.cos(phi) ** 2) / q_H ** 2
    return eta2 * xi, eta2 / (2 * math.pi * q_H) * 4 * wphi


def hoyt_pe_pdf(h, A0: float, eta_s: float, q_H: float, n: int = 64):
    """Hoyt pointing-error density; zero (with a warning) outside (0, A0]."""
    h = np.asarray(h, float)
    k, W = angular_nodes(q_H, eta_s, n)
    inside = (h > 0) & (h <= A0 * (1 + 1e-12))
    if not np.all(inside):
        warnings.warn("hoyt_pe_pdf evaluated outside its support (0, A0]", RuntimeWarning,
                      stacklevel=2)
    out = np.zeros_like(h)
    hi = np.minimum(h[inside], A0)
    # Σ_j W_j h^{k_j−1}/A0^{k_j}
    lg = np.log(hi / A0)[:, None] * k[None, :]
    out[inside] = (np.exp(lg) @ W) / hi
    return out[()]


# ---------------------------------------------------------------------------
# FSO SNR distribution
# ---------------------------------------------------------------------------

def _phi_kernel(k: np.ndarray, W: np.ndarray, sign: float) -> MixtureKernel:
    """Σ_j W_j Γ(k_j + sign·s)/Γ(1 + k_j + sign·s) = Σ_j W_j/(k_j + sign·s)."""
    lists = [GammaFactorList((GammaFactor(float(kj), (sign,)),),
                             (GammaFactor(1.0 + float(kj), (sign,)),), 1) for kj in k]
    return MixtureKernel(lists, np.log(W))


def _z_of(gamma, d: FsoDerived, r: int, gamma_h):
    g = np.asarray(gamma, float)
    return d.scale * (g / np.asarray(gamma_h, float)) ** (1.0 / r)


def _gg_log_norm(d: FsoDerived) -> float:
    return -special.gammaln(d.alpha) - special.gammaln(d.beta)


def _cdf_kernels(d: FsoDerived, n_phi: int, complement: bool):
    k, W = angular_nodes(d.q_H, d.eta_s, n_phi)
    if complement:
        # G^{4,0}_{2,4}[Z | 1+k, 1; k, 0, α, β]
        base = GammaFactorList((GammaFactor(d.alpha, (-1.0,)), GammaFactor(d.beta, (-1.0,)),
                                GammaFactor(0.0, (-1.0,))), (GammaFactor(1.0, (-1.0,)),), 1)
    else:
        # G^{3,1}_{2,4}[Z | 1, 1+k; k, α, β, 0]
        base = GammaFactorList((GammaFactor(d.alpha, (-1.0,)), GammaFactor(d.beta, (-1.0,)),
                                GammaFactor(0.0, (1.0,))), (GammaFactor(1.0, (1.0,)),), 1)
    return [GammaKernel(base), _phi_kernel(k, W, -1.0)]


def fso_snr_cdf(gamma, d: FsoDerived, r: int, gamma_h, n_phi: int = 64):
    """CDF of the FSO SNR.

    Below the median the direct Meijer-G^{3,1}_{2,4} form is used (no
    cancellation for deep tails); above it the complementary G^{4,0}_{2,4}
    form.  Both share the angular node set.
    """
    g = np.asarray(gamma, float)
    shape = np.broadcast(g, np.asarray(gamma_h)).shape
    g = np.broadcast_to(g, shape).ravel()
    gh = np.broadcast_to(np.asarray(gamma_h, float), shape).ravel()
    out = np.zeros(g.size)
    pos = g > 0
    if np.any(pos):
        lnz = np.log(_z_of(g[pos], d, r, gh[pos]))
        direct = line_batch(_cdf_kernels(d, n_phi, False), lnz, _gg_log_norm(d)).value
        vals = direct.copy()
        hi = direct > 0.5
        if np.any(hi):
            comp = line_batch(_cdf_kernels(d, n_phi, True), lnz[hi], _gg_log_norm(d)).value
            vals[hi] = 1.0 - comp
        out[pos] = vals
    return out.reshape(shape)[()]


def fso_snr_sf(gamma, d: FsoDerived, r: int, gamma_h, n_phi: int = 64):
    """1 − CDF, accurate in the upper tail."""
    g = np.asarray(gamma, float)
    shape = np.broadcast(g, np.asarray(gamma_h)).shape
    g = np.broadcast_to(g, shape).ravel()
    gh = np.broadcast_to(np.asarray(gamma_h, float), shape).ravel()
    out = np.ones(g.size)
    pos = g > 0
    if np.any(pos):
        lnz = np.log(_z_of(g[pos], d, r, gh[pos]))
        out[pos] = line_batch(_cdf_kernels(d, n_phi, True), lnz, _gg_log_norm(d)).value
    return out.reshape(shape)[()]


def fso_snr_pdf(gamma, d: FsoDerived, r: int, gamma_h, n_phi: int = 64):
    """PDF of the FSO SNR: (1/(rγΓ(α)Γ(β)))·Σ_φ W·G^{3,0}_{1,3}[Z | 1+k; k, α, β]."""
    g = np.asarray(gamma, float)
    shape = np.broadcast(g, np.asarray(gamma_h)).shape
    g = np.broadcast_to(g, shape).ravel()
    gh = np.broadcast_to(np.asarray(gamma_h, float), shape).ravel()
    out = np.zeros(g.size)
    pos = g > 0
    if np.any(pos):
        k, W = angular_nodes(d.q_H, d.eta_s, n_phi)
        base = GammaFactorList((GammaFactor(d.alpha, (-1.0,)), GammaFactor(d.beta, (-1.0,))), (), 1)
        kern = [GammaKernel(base), _phi_kernel(k, W, -1.0)]
        lnz = np.log(_z_of(g[pos], d, r, gh[pos]))
        lpf = _gg_log_norm(d) - math.log(r) - np.log(g[pos])
        out[pos] = line_batch(kern, lnz, lpf).value
    return out.reshape(shape)[()]
