"""End-to-end statistics of the fixed-gain relay link γ = γ_H γ_U/(γ_U + C).

Every metric is available through two routes:

* a Mellin–Barnes route ("analytic").  ``form="direct"`` splits the CDF as
  F(γ) = F_H(γ) + T2(γ) where T2 ≥ 0 is the relay correction, so deep
  outage tails are computed without subtracting from 1.  ``form="complement"``
  evaluates the complementary bivariate Fox-H representation,
  F = 1 − H-sum.
* a conditioning quadrature ("oracle"), F(γ) = E_x[F_H(γ(1 + C/x))] over the
  mixture-Gamma RF SNR x, used to cross-check the contour route.

Angular (Hoyt) averages and mixture sums are folded into the contour
integrands so that one contour serves all components.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special

from .fso import FsoDerived, _phi_kernel, angular_nodes, fso_snr_cdf, fso_snr_pdf, fso_snr_sf
from .rf import MixtureGammaModel
from .specfun import (DegenerateParametersError, GammaFactor, GammaFactorList, GammaKernel,
                      MixtureKernel, integrate_line, line_batch, plane_batch)

log = logging.getLogger(__name__)

__all__ = [
    "E2EConfig", "ModulationScheme", "MetricPoint", "ContractError", "NumericalError",
    "modulation_params", "e2e_cdf", "e2e_cdf_oracle", "e2e_pdf", "moments",
    "outage_probability", "outage_asymptotic", "asymptotic_terms", "diversity_order",
    "avg_ber", "avg_ber_asymptotic", "avg_ber_oracle", "ergodic_capacity",
    "ergodic_capacity_oracle", "relay_mellin", "relay_nodes",
]


class ContractError(ValueError):
    """Called outside the validity range of a formula."""


class NumericalError(ArithmeticError):
    """A probability left [0, 1] by more than the quadrature tolerance."""


def _c0_for(r: int) -> float:
    return 1.0 if r == 1 else math.e / (2 * math.pi)


@dataclass(frozen=True)
class E2EConfig:
    """Relay gain C, detection exponent r (1 heterodyne, 2 IM/DD), outage
    threshold and FSO average SNR (both linear)."""

    C: float = 1.0
    r: int = 1
    gamma_th: float = 10 ** 0.2
    gamma_h: float = 1e4
    c0: float | None = None

    def __post_init__(self):
        if self.r not in (1, 2):
            raise ValueError("detection exponent r must be 1 or 2")
        if self.C < 0:
            raise ValueError("relay gain C must be >= 0")
        c0 = _c0_for(self.r)
        if self.c0 is None:
            object.__setattr__(self, "c0", c0)
        elif not math.isclose(self.c0, c0, rel_tol=1e-12):
            raise ValueError(f"c0 is fixed by r={self.r}: expected {c0}")


@dataclass(frozen=True)
class ModulationScheme:
    name: str
    M: int
    delta: float
    p: float
    q: tuple[float, ...]
    N_B: int
    detection: str

    @property
    def r(self) -> int:
        return 1 if self.detection == "heterodyne" else 2


@dataclass
class MetricPoint:
    gamma_h_db: float
    analytic: float
    asymptotic: float | None = None
    oracle: float | None = None
    mc: float | None = None
    mc_stderr: float | None = None
    error: float = 0.0


def modulation_params(name: str, M: int = 2) -> ModulationScheme:
    """Rows of the unified BER parameter table (OOK, M-PSK, square M-QAM)."""
    key = name.lower()
    if key == "ook":
        return ModulationScheme("OOK", 2, 1.0, 0.5, (0.5,), 1, "imdd")
    if key in ("bpsk", "psk", "mpsk"):
        if key == "bpsk":
            M = 2
        if M < 2 or M & (M - 1):
            raise ValueError(f"M-PSK needs M a power of two >= 2, got {M}")
        lm = math.log2(M)
        nb = max(M // 4, 1)
        q = tuple(math.sin((2 * k - 1) * math.pi / M) ** 2 * lm for k in range(1, nb + 1))
        return ModulationScheme(f"{M}-PSK", M, 2.0 / max(lm, 2.0), 0.5, q, nb, "heterodyne")
    if key in ("qam", "mqam"):
        root = math.isqrt(M)
        if M < 4 or root * root != M or M & (M - 1):
            raise ValueError(f"M-QAM needs a square power of two M >= 4, got {M}")
        lm = math.log2(M)
        nb = root // 2
        q = tuple(3 * (2 * k - 1) ** 2 / (2 * (M - 1)) * lm for k in range(1, nb + 1))
        return ModulationScheme(f"{M}-QAM", M, 4 / lm * (1 - 1 / root), 0.5, q, nb, "heterodyne")
    raise ValueError(f"unsupported modulation {name!r}")


# ---------------------------------------------------------------------------
# shared kernels
# ---------------------------------------------------------------------------

def _gl(*factors, nvars=1, den=()):
    return GammaFactorList(tuple(factors), tuple(den), nvars)


def _F(offset, *coeffs):
    return GammaFactor(float(offset), tuple(float(c) for c in coeffs))


def _mix_kernel(mix: MixtureGammaModel) -> MixtureKernel:
    """Σ_i α_i ζ^{−β_i} Γ(β_i − s): the mixture Mellin transform E[(C/x)^s]/(ζC)^s."""
    lists = [_gl(_F(b, -1.0)) for b in mix.betas]
    return MixtureKernel(lists, mix.log_weight_scale)


def _norm(d: FsoDerived) -> float:
    return -float(special.gammaln(d.alpha) + special.gammaln(d.beta))


def _as_pair(gamma, gamma_h):
    g = np.asarray(gamma, float)
    gh = np.asarray(gamma_h, float)
    shape = np.broadcast(g, gh).shape
    return np.broadcast_to(g, shape).ravel(), np.broadcast_to(gh, shape).ravel(), shape


def _phi(d: FsoDerived, n_phi: int, sign: float):
    k, W = angular_nodes(d.q_H, d.eta_s, n_phi)
    return _phi_kernel(k, W, sign)


def _with_vars(kernel, vars):
    kernel.vars = vars
    return kernel


def _s_kernels(mix: MixtureGammaModel, direct: bool):
    """s-dependent factors of the relay correction."""
    if direct:
        # −Γ(−s) written as Γ(1−s)Γ(s)/Γ(1+s): the s=0 pole moves to the left family
        base = _gl(_F(1.0, -1.0), _F(0.0, 1.0), den=(_F(1.0, 1.0),))
    else:
        base = _gl(_F(0.0, -1.0))
    return [GammaKernel(_promote(base, 0), vars=(0,)),
            _with_vars(_promote_mix(_mix_kernel(mix), 0), (0,))]


def _promote(flist: GammaFactorList, var: int) -> GammaFactorList:
    def up(f):
        c = [0.0, 0.0]
        c[var] = f.coeffs[0]
        return GammaFactor(f.offset, tuple(c))
    return GammaFactorList(tuple(up(f) for f in flist.numerator),
                           tuple(up(f) for f in flist.denominator), 2)


def _promote_mix(mk: MixtureKernel, var: int) -> MixtureKernel:
    return MixtureKernel([_promote(fl, var) for fl in mk.flists], mk.log_weights)


def _coupling(r: int, sign: float = 1.0) -> GammaKernel:
    """Γ(s + sign·t/r)."""
    return GammaKernel(_gl(_F(0.0, 1.0, sign / r), nvars=2), vars=(0, 1))


# ---------------------------------------------------------------------------
# CDF / PDF
# ---------------------------------------------------------------------------

def _clamp(F: np.ndarray, what: str) -> np.ndarray:
    lo, hi = F.min(initial=0.0), F.max(initial=0.0)
    if lo < -1e-9 or hi > 1 + 1e-9:
        raise NumericalError(f"{what} left [0, 1]: range [{lo:.3g}, {hi:.3g}]")
    if lo < 0 or hi > 1:
        log.info("%s clamped from [%.3g, %.3g] to [0, 1]", what, lo, hi)
    return np.clip(F, 0.0, 1.0)


def _relay_correction(lnx, d, mix, r, C, n_phi, t_kernel, log_prefactor):
    """−(1/(2πi)²)∬ [Γ(1−s)Γ(s)/Γ(1+s)·Σα_iζ^{−β_i}Γ(β_i−s)](ζC)^s Γ(s+t/r) K_t(t) X^t."""
    kern = _s_kernels(mix, True) + [_coupling(r)] + t_kernel + [_with_vars(_promote_mix(_phi(d, n_phi, 1.0), 1), (1,))]
    res = plane_batch(kern, math.log(mix.zeta * C), lnx, log_prefactor)
    return -res.value, res.error


def _t_cdf_kernel(d, r):
    # Γ(α+t)Γ(β+t)Γ(−t)/(Γ(1−t)Γ(t/r))
    return [GammaKernel(_promote(_gl(_F(d.alpha, 1.0), _F(d.beta, 1.0), _F(0.0, -1.0),
                                     den=(_F(1.0, -1.0), _F(0.0, 1.0 / r))), 1), vars=(1,))]


def e2e_cdf(gamma, fso: FsoDerived, mix: MixtureGammaModel, cfg: E2EConfig, gamma_h=None,
            form: str = "direct", n_phi: int = 64):
    """CDF of the end-to-end SNR at ``gamma`` (broadcast against ``gamma_h``)."""
    gh = cfg.gamma_h if gamma_h is None else gamma_h
    g, ghv, shape = _as_pair(gamma, gh)
    out = np.zeros(g.size)
    pos = g > 0
    if not np.any(pos):
        return out.reshape(shape)[()]
    d, r = fso, cfg.r
    lnZ = np.log(d.scale) + np.log(g[pos] / ghv[pos]) / r
    if form == "direct":
        FH = fso_snr_cdf(g[pos], d, r, ghv[pos], n_phi)
        if cfg.C > 0:
            t2, _ = _relay_correction(-lnZ, d, mix, r, cfg.C, n_phi, _t_cdf_kernel(d, r), _norm(d))
        else:
            t2 = 0.0
        vals = FH + t2
    elif form == "complement":
        vals = 1.0 - _complement_cdf_sum(-lnZ, d, mix, r, cfg.C, n_phi)
    else:
        raise ValueError(f"unknown form {form!r}")
    out[pos] = _clamp(vals, "end-to-end CDF")
    return out.reshape(shape)[()]


def _complement_cdf_sum(lnx, d, mix, r, C, n_phi, pdf=False):
    """(1/(rΓ(α)Γ(β)))·Σ_i α_iζ^{−β_i}·Σ_φ W·H^{0,1;2,0;0,3}_{1,0;0,2;3,2}[ζC, X]."""
    if pdf:
        t_den = (_F(0.0, 1.0 / r),)             # 1/Γ(t/r)
    else:
        t_den = (_F(1.0, 1.0 / r),)             # 1/Γ(1 + t/r)
    kt = GammaKernel(_promote(_gl(_F(d.alpha, 1.0), _F(d.beta, 1.0), den=t_den), 1), vars=(1,))
    kern = _s_kernels(mix, False) + [_coupling(r), kt,
                                      _with_vars(_promote_mix(_phi(d, n_phi, 1.0), 1), (1,))]
    res = plane_batch(kern, math.log(mix.zeta * C), lnx, _norm(d) - math.log(r))
    return res.value


def e2e_pdf(gamma, fso: FsoDerived, mix: MixtureGammaModel, cfg: E2EConfig, gamma_h=None,
            form: str = "direct", n_phi: int = 64):
    gh = cfg.gamma_h if gamma_h is None else gamma_h
    g, ghv, shape = _as_pair(gamma, gh)
    out = np.zeros(g.size)
    pos = g > 0
    if not np.any(pos):
        return out.reshape(shape)[()]
    d, r = fso, cfg.r
    gp = g[pos]
    lnZ = np.log(d.scale) + np.log(gp / ghv[pos]) / r
    lpf = _norm(d) - math.log(r) - np.log(gp)
    if form == "direct":
        fH = fso_snr_pdf(gp, d, r, ghv[pos], n_phi)
        if cfg.C > 0:
            kt = [GammaKernel(_promote(_gl(_F(d.alpha, 1.0), _F(d.beta, 1.0),
                                           den=(_F(0.0, 1.0 / r),)), 1), vars=(1,))]
            t2, _ = _relay_correction(-lnZ, d, mix, r, cfg.C, n_phi, kt, lpf)
        else:
            t2 = 0.0
        vals = fH + t2
    elif form == "complement":
        vals = _complement_cdf_sum(-lnZ, d, mix, r, cfg.C, n_phi, pdf=True) / gp
    else:
        raise ValueError(f"unknown form {form!r}")
    # γ·f is dimensionless; negative noise below the CDF tolerance is dropped
    neg = vals < 0
    if np.any(neg):
        worst = float(np.max(-vals[neg] * gp[neg]))
        if worst > 1e-9:
            raise NumericalError(f"end-to-end density negative: γ·f = {-worst:.3g}")
        vals = np.where(neg, 0.0, vals)
    out[pos] = vals
    return out.reshape(shape)[()]


def outage_probability(fso, mix, cfg: E2EConfig, gamma_h=None, form: str = "direct", n_phi: int = 64):
    """P(γ < γ_th) for each FSO average SNR in ``gamma_h``."""
    gh = cfg.gamma_h if gamma_h is None else gamma_h
    return e2e_cdf(cfg.gamma_th, fso, mix, cfg, gh, form, n_phi)


# ---------------------------------------------------------------------------
# conditioning-quadrature oracle
# ---------------------------------------------------------------------------

def relay_nodes(mix: MixtureGammaModel, C: float, n: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature (x_j, w_j) for E[g(x)] under the mixture density.

    With x = v²/ζ the density becomes 2e^{−v²}Σ_i α_iζ^{−β_i} v^{2i−2}, which is
    smooth in v.  Panels are geometric around v_c = √(Cζ), where C/x ≈ 1,
    and uniform (width 1/2) up to √N_x + 8.
    """
    vc = math.sqrt(max(C, 1e-300) * mix.zeta)
    vmax = math.sqrt(mix.N_x) + 8.0
    geo = vc * 2.0 ** np.arange(-16, 8)
    uni = np.arange(0.0, vmax + 0.5, 0.5)
    edges = np.unique(np.concatenate([[0.0], geo[geo < vmax], uni]))
    x, w = leggauss(n)
    lo, hi = edges[:-1], edges[1:]
    v = (0.5 * (hi + lo))[:, None] + (0.5 * (hi - lo))[:, None] * x[None, :]
    wv = (0.5 * (hi - lo))[:, None] * w[None, :]
    v, wv = v.ravel(), wv.ravel()
    logdens = special.logsumexp(mix.log_weight_scale[None, :]
                                + (2 * mix.betas[None, :] - 1) * np.log(v)[:, None], axis=1)
    wts = 2 * wv * np.exp(logdens - v * v)
    return v * v / mix.zeta, wts


def e2e_cdf_oracle(gamma, fso: FsoDerived, mix: MixtureGammaModel, cfg: E2EConfig, gamma_h=None,
                   n_phi: int = 64):
    """F(γ) = ∫ F_H(γ(1 + C/x)) f_U(x) dx by composite Gauss-Legendre."""
    gh = cfg.gamma_h if gamma_h is None else gamma_h
    g, ghv, shape = _as_pair(gamma, gh)
    out = np.zeros(g.size)
    pos = g > 0
    if cfg.C == 0:
        out[pos] = fso_snr_cdf(g[pos], fso, cfg.r, ghv[pos], n_phi)
        return out.reshape(shape)[()]
    x, w = relay_nodes(mix, cfg.C)
    keep = w > 1e-18 * w.sum()
    x, w = x[keep], w[keep]
    idx = np.nonzero(pos)[0]
    y = g[idx, None] * (1.0 + cfg.C / x[None, :])
    FH = fso_snr_cdf(y, fso, cfg.r, np.broadcast_to(ghv[idx, None], y.shape), n_phi)
    out[idx] = FH @ w
    return out.reshape(shape)[()]


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def relay_factor(n: float, mix: MixtureGammaModel, C: float) -> float:
    """E[(x/(x + C))^n] = (1/Γ(n))·Σ_i α_iζ^{−β_i} G^{2,1}_{1,2}[ζC | 1−n; 0, β_i]."""
    if C == 0:
        return 1.0
    kern = [GammaKernel(_gl(_F(0.0, -1.0), _F(n, 1.0))), _mix_kernel(mix)]
    res = line_batch(kern, [math.log(mix.zeta * C)], -special.gammaln(n))
    return float(res.value[0])


def moments(n: float, fso: FsoDerived, mix: MixtureGammaModel, cfg: E2EConfig, gamma_h=None,
            n_phi: int = 64):
    """E[γ^n] = E[γ_H^n]·E[(x/(x+C))^n] (independent hops), n > 0."""
    if n <= 0:
        raise ValueError("moment order must be positive")
    d, r = fso, cfg.r
    gh = np.asarray(cfg.gamma_h if gamma_h is None else gamma_h, float)
    k, W = angular_nodes(d.q_H, d.eta_s, n_phi)
    u = r * n
    ang = float(np.sum(W / (k + u)))
    turb = math.exp(special.gammaln(d.alpha + u) + special.gammaln(d.beta + u) + _norm(d))
    return (gh ** n * d.scale ** (-u) * ang * turb * relay_factor(n, mix, cfg.C))[()]


# ---------------------------------------------------------------------------
# asymptotics
# ---------------------------------------------------------------------------

def _near_int(x: float, tol: float = 1e-6) -> bool:
    return abs(x - round(x)) < tol


def relay_mellin(u: float, mix: MixtureGammaModel, C: float, perturb: bool = True) -> float:
    """M(u) = Σ_i α_i C^{β_i} G^{2,1}_{1,2}[ζC | 1−β_i+u; 0, −β_i]/Γ(−u).

    For u < 1/2 this equals E[(1 + C/x)^u]; beyond it the expectation
    diverges and M is its analytic continuation, which is what the
    high-SNR expansion uses.  The Meijer-G sum has no separating line
    (left pole at w = u sits right of the right pole w = 0), so the
    integral runs along Re w < 0 and the left poles w = u − n > Re w are
    added as residues.
    """
    if C == 0:
        return 1.0
    bad = _near_int(u) or any(_near_int(u - b) for b in mix.betas)
    if bad:
        if not perturb:
            raise DegenerateParametersError(f"relay Mellin transform degenerate at u={u}")
        u = u + 1e-6 * (1 + abs(u))
    lnz = math.log(mix.zeta * C)
    frac = u - math.floor(u)
    sigma = 0.5 * (frac - 1.0)                 # midway between u−⌊u⌋−1 and 0
    kern = [GammaKernel(_gl(_F(0.0, -1.0), _F(-u, 1.0))), _mix_kernel(mix)]
    total = integrate_line(kern, [lnz], sigma).value[0]
    betas, lws = mix.betas, mix.log_weight_scale
    for n in range(int(math.floor(u)) + 1):
        w = u - n
        # residue of Γ(w − u) at w = u − n is (−1)^n/n!
        args = betas - w
        mixv = np.sum(special.gammasgn(args) * np.exp(lws + special.gammaln(args)))
        total += ((-1) ** n / math.factorial(n)) * special.gamma(-w) * mixv * math.exp(w * lnz)
    return float(total / special.gamma(-u))


@dataclass(frozen=True)
class _Term:
    exponent: float      # power of Z
    coeff: float


def asymptotic_terms(fso: FsoDerived, mix: MixtureGammaModel, cfg: E2EConfig, n_phi: int = 64,
                     perturb: bool = True) -> list[_Term]:
    """High-SNR expansion F(γ) ≈ Σ c_j Z^{e_j}, Z = αβ/(A0 h_al)·(γ/γ̄_H)^{1/r}.

    Residues of the FSO Mellin–Barnes integrand at s = k, α, β, each
    multiplied by the relay factor M(s/r).
    """
    d, r = fso, cfg.r
    a, b = d.alpha, d.beta
    if _near_int(a - b):
        if not perturb:
            raise DegenerateParametersError(f"alpha - beta = {a - b} is an integer")
        b = b + 1e-6 * (1 + b)
    k, W = angular_nodes(d.q_H, d.eta_s, n_phi)
    norm = math.exp(_norm(d))
    terms = []
    cache: dict[float, float] = {}

    def M(u):
        if u not in cache:
            cache[u] = relay_mellin(u, mix, cfg.C, perturb)
        return cache[u]

    for kj, Wj in zip(k, W):
        if _near_int(a - kj) or _near_int(b - kj):
            if not perturb:
                raise DegenerateParametersError(f"pointing exponent {kj} collides with alpha/beta")
            kj = kj + 1e-6 * (1 + kj)
        c_k = special.gamma(a - kj) * special.gamma(b - kj) / kj
        terms.append(_Term(kj, norm * Wj * c_k * M(kj / r)))
        terms.append(_Term(a, norm * Wj * special.gamma(b - a) / ((kj - a) * a) * M(a / r)))
        terms.append(_Term(b, norm * Wj * special.gamma(a - b) / ((kj - b) * b) * M(b / r)))
    return terms


def outage_asymptotic(fso, mix, cfg: E2EConfig, gamma_h=None, terms=None, n_phi: int = 64):
    gh = np.asarray(cfg.gamma_h if gamma_h is None else gamma_h, float)
    terms = asymptotic_terms(fso, mix, cfg, n_phi) if terms is None else terms
    Z = fso.scale * (cfg.gamma_th / gh) ** (1.0 / cfg.r)
    return sum(t.coeff * Z ** t.exponent for t in terms)[()]


def diversity_order(alpha: float, beta: float, eta_s: float, r: int, q_H: float = 1.0) -> float:
    """min(α, β, η_s²)/r; only defined for symmetric jitter (q_H = 1)."""
    if q_H != 1.0:
        raise ContractError("closed-form diversity order needs q_H = 1; "
                            "estimate the slope of outage_asymptotic instead")
    return min(alpha, beta, eta_s ** 2) / r


# ---------------------------------------------------------------------------
# average BER
# ---------------------------------------------------------------------------

def _check_mod(mod: ModulationScheme, cfg: E2EConfig):
    if mod.r != cfg.r:
        raise ContractError(f"{mod.name} uses {mod.detection} detection (r={mod.r}) "
                            f"but the configuration has r={cfg.r}")


def _ber_single(p, q, fso, mix, cfg, gh, form, n_phi):
    d, r = fso, cfg.r
    lnZ1 = math.log(d.scale) - np.log(gh) / r
    lg2p = -math.log(2) - special.gammaln(p)
    if form == "direct":
        # ∫ weight × F_H: Γ(α−u)Γ(β−u)Γ(p+u/r)Γ(u)/Γ(1+u)·Σ W/(k−u)·(Z1 q^{−1/r})^u
        kern = [GammaKernel(_gl(_F(d.alpha, -1.0), _F(d.beta, -1.0), _F(p, 1.0 / r), _F(0.0, 1.0),
                                den=(_F(1.0, 1.0),))), _phi(d, n_phi, -1.0)]
        ih = line_batch(kern, lnZ1 - math.log(q) / r, _norm(d) + lg2p).value
        if cfg.C > 0:
            kt = [GammaKernel(_promote(_gl(_F(d.alpha, 1.0), _F(d.beta, 1.0), _F(0.0, -1.0),
                                           _F(p, -1.0 / r),
                                           den=(_F(1.0, -1.0), _F(0.0, 1.0 / r))), 1), vars=(1,))]
            t2, _ = _relay_correction(-lnZ1 + math.log(q) / r, d, mix, r, cfg.C, n_phi, kt,
                                      _norm(d) + lg2p)
        else:
            t2 = 0.0
        return ih + t2
    if form == "complement":
        # 1/2 − (1/(2Γ(p) r Γ(α)Γ(β)))·H^{0,1;2,0;1,3}_{1,0;0,2;3,3}[ζC, X1 q^{1/r}]
        kt = GammaKernel(_promote(_gl(_F(d.alpha, 1.0), _F(d.beta, 1.0), _F(p, -1.0 / r),
                                      den=(_F(1.0, 1.0 / r),)), 1), vars=(1,))
        kern = _s_kernels(mix, False) + [_coupling(r), kt,
                                          _with_vars(_promote_mix(_phi(d, n_phi, 1.0), 1), (1,))]
        h = plane_batch(kern, math.log(mix.zeta * cfg.C), -lnZ1 + math.log(q) / r,
                        _norm(d) + lg2p - math.log(r)).value
        return 0.5 - h
    raise ValueError(f"unknown form {form!r}")


def avg_ber(mod: ModulationScheme, fso: FsoDerived, mix: MixtureGammaModel, cfg: E2EConfig,
            gamma_h=None, form: str = "direct", n_phi: int = 64):
    """P̄_e = δ_B Σ_k I(p_B, q_Bk)."""
    _check_mod(mod, cfg)
    gh = np.atleast_1d(np.asarray(cfg.gamma_h if gamma_h is None else gamma_h, float))
    total = sum(_ber_single(mod.p, q, fso, mix, cfg, gh, form, n_phi) for q in mod.q)
    out = mod.delta * np.asarray(total)
    return out.reshape(np.shape(cfg.gamma_h if gamma_h is None else gamma_h))[()]


def avg_ber_asymptotic(mod: ModulationScheme, fso, mix, cfg: E2EConfig, gamma_h=None, terms=None,
                       n_phi: int = 64):
    """Each c·Z^e term of the CDF expansion integrates to
    c·(scale·γ̄_H^{−1/r})^e·Γ(p + e/r) q^{−e/r}/(2Γ(p))."""
    _check_mod(mod, cfg)
    gh = np.asarray(cfg.gamma_h if gamma_h is None else gamma_h, float)
    terms = asymptotic_terms(fso, mix, cfg, n_phi) if terms is None else terms
    r, p = cfg.r, mod.p
    Z1 = fso.scale * gh ** (-1.0 / r)
    total = 0.0
    for q in mod.q:
        for t in terms:
            total = total + t.coeff * Z1 ** t.exponent * math.exp(
                special.gammaln(p + t.exponent / r) - special.gammaln(p)
                - (t.exponent / r) * math.log(q)) / 2
    return (mod.delta * np.asarray(total))[()]


def _log_u_grid(lo: float, hi: float, width: float = 0.25, n: int = 16):
    edges = np.arange(lo, hi + width, width)
    x, w = leggauss(n)
    a, b = edges[:-1], edges[1:]
    nodes = ((a + b)[:, None] + (b - a)[:, None] * x[None, :]) / 2
    wts = ((b - a)[:, None] * w[None, :]) / 2
    return nodes.ravel(), wts.ravel()


def _relay_scaled_snr(mix, cfg, gh):
    """Effective FSO average SNRs γ̄_H/(1 + C/x_j) and weights for the oracle."""
    if cfg.C == 0:
        return np.array([gh]), np.array([1.0])
    x, w = relay_nodes(mix, cfg.C)
    # drop nodes holding less than 1e-18 of the mass
    keep = w > 1e-18 * w.sum()
    return gh / (1.0 + cfg.C / x[keep]), w[keep]


def avg_ber_oracle(mod: ModulationScheme, fso, mix, cfg: E2EConfig, gamma_h=None, n_phi: int = 64):
    """Quadrature of the BER integral with the conditioning representation of F.

    F(γ) = E_x[F_H(γ/γ̄'_x)] with γ̄'_x = γ̄_H/(1 + C/x), so after swapping the
    order of integration F_H is tabulated once on a log grid of u = γ/γ̄ and
    re-weighted for every x node.
    """
    _check_mod(mod, cfg)
    gh_arr = np.atleast_1d(np.asarray(cfg.gamma_h if gamma_h is None else gamma_h, float))
    out = np.empty(gh_arr.size)
    p = mod.p
    for i, gh in enumerate(gh_arr):
        gbar, wx = _relay_scaled_snr(mix, cfg, gh)
        qmin, qmax = min(mod.q), max(mod.q)
        lo = math.log(1e-20 / (qmax * gbar.max()))
        hi = math.log(80.0 / (qmin * gbar.min()))
        lu, wu = _log_u_grid(lo, hi)
        FH = fso_snr_cdf(np.exp(lu), fso, cfg.r, 1.0, n_phi)
        total = 0.0
        for q in mod.q:
            y = q * gbar[:, None] * np.exp(lu)[None, :]
            integrand = np.exp(p * np.log(y) - y - special.gammaln(p) - math.log(2))
            total += wx @ (integrand @ (wu * FH))
        out[i] = mod.delta * total
    return out.reshape(np.shape(cfg.gamma_h if gamma_h is None else gamma_h))[()]


# ---------------------------------------------------------------------------
# ergodic capacity
# ---------------------------------------------------------------------------

def ergodic_capacity(fso: FsoDerived, mix: MixtureGammaModel, cfg: E2EConfig, gamma_h=None,
                     bits: bool = False, n_phi: int = 64):
    """E[ln(1 + c0 γ)] via H^{0,1;2,0;1,4}_{1,0;0,2;4,3}[ζC, A0h_al(c0γ̄_H)^{1/r}/(αβ)]."""
    d, r = fso, cfg.r
    gh = np.asarray(cfg.gamma_h if gamma_h is None else gamma_h, float)
    lny = np.log(1.0 / d.scale) + np.log(cfg.c0 * np.atleast_1d(gh)) / r
    # Γ(α+t)Γ(β+t)Γ(t/r)Γ(1−t/r)/Γ(1+t/r)·Σ W/(k+t)
    kt = GammaKernel(_promote(_gl(_F(d.alpha, 1.0), _F(d.beta, 1.0), _F(0.0, 1.0 / r),
                                  _F(1.0, -1.0 / r), den=(_F(1.0, 1.0 / r),)), 1), vars=(1,))
    phi = _with_vars(_promote_mix(_phi(d, n_phi, 1.0), 1), (1,))
    if cfg.C > 0:
        kern = _s_kernels(mix, False) + [_coupling(r), kt, phi]
        val = plane_batch(kern, math.log(mix.zeta * cfg.C), lny, _norm(d) - math.log(r)).value
    else:
        # C = 0: the s-integral collapses to its residue at s = 0, where the
        # coupling leaves a second Γ(t/r)
        kt1 = GammaKernel(_gl(_F(d.alpha, 1.0), _F(d.beta, 1.0), _F(0.0, 1.0 / r), _F(0.0, 1.0 / r),
                              _F(1.0, -1.0 / r), den=(_F(1.0, 1.0 / r),)))
        val = line_batch([kt1, _phi(d, n_phi, 1.0)], lny, _norm(d) - math.log(r)).value
    if bits:
        val = val / math.log(2)
    return np.asarray(val).reshape(np.shape(gh))[()]


def ergodic_capacity_oracle(fso, mix, cfg: E2EConfig, gamma_h=None, n_phi: int = 64):
    """∫ c0 (1 − F(γ))/(1 + c0γ) dγ with the conditioning representation of F."""
    gh_arr = np.atleast_1d(np.asarray(cfg.gamma_h if gamma_h is None else gamma_h, float))
    out = np.empty(gh_arr.size)
    d, r = fso, cfg.r
    for i, gh in enumerate(gh_arr):
        gbar, wx = _relay_scaled_snr(mix, cfg, gh)
        lo = math.log(1e-18 / (cfg.c0 * gbar.max()))
        hi = r * math.log(3000.0 / d.scale)
        lu, wu = _log_u_grid(lo, hi)
        sf = fso_snr_sf(np.exp(lu), d, r, 1.0, n_phi)
        y = cfg.c0 * gbar[:, None] * np.exp(lu)[None, :]
        out[i] = wx @ ((y / (1 + y)) @ (wu * sf))
    return out.reshape(np.shape(cfg.gamma_h if gamma_h is None else gamma_h))[()]
