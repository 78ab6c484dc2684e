"""Run configuration: JSON-compatible schema with field-level validation,
preset resolution, and the resolved model objects used by the CLI."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np

from .e2e import E2EConfig, ModulationScheme, modulation_params
from .fso import FsoDerived, FsoGeometry, PointingParams, fso_derived
from .montecarlo import ChainParams
from .rf import (SHADOWING, CltParams, MixtureGammaModel, NakagamiParams, RfLinkBudget,
                 ShadowedRicianParams, average_snr_u, clt_params, fit_mixture_gamma)

__all__ = ["ConfigError", "RunConfig", "Resolved", "db_to_lin", "lin_to_db", "parse_sweep",
           "parse_modulation", "content_hash", "MODES"]

MODES = ("analytic", "asymptotic", "oracle", "mc")
DETECTIONS = {"heterodyne": 1, "imdd": 2}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def db_to_lin(x_db):
    return 10.0 ** (np.asarray(x_db, float) / 10.0)


def lin_to_db(x):
    x = np.asarray(x, float)
    if np.any(x < 0):
        raise ValueError("negative power ratio has no dB value")
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def parse_sweep(text: str | list) -> tuple[float, float, float]:
    """"START:STOP:STEP" (inclusive of STOP when it lands on the grid)."""
    try:
        parts = text.split(":") if isinstance(text, str) else list(text)
        start, stop, step = (float(p) for p in parts)
    except (ValueError, TypeError, AttributeError):
        raise ConfigError("sweep", f"expected START:STOP:STEP, got {text!r}") from None
    if step <= 0 or stop < start or not all(map(math.isfinite, (start, stop, step))):
        raise ConfigError("sweep", "need finite START <= STOP and STEP > 0")
    return start, stop, step


def parse_modulation(text: str) -> ModulationScheme:
    """"ook", "bpsk", "mpsk:M" or "mqam:M"."""
    name, _, m = text.lower().partition(":")
    try:
        if name in ("mpsk", "mqam"):
            if not m:
                raise ValueError(f"{name} needs an order, e.g. {name}:16")
            return modulation_params(name, int(m))
        if m:
            raise ValueError(f"{name} takes no order")
        return modulation_params(name)
    except ValueError as exc:
        raise ConfigError("modulation", str(exc)) from None


def _fields(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def _build(cls, section: str, data: dict, rename: dict | None = None):
    if not isinstance(data, dict):
        raise ConfigError(section, "expected an object")
    rename = rename or {}
    kwargs = {}
    allowed = _fields(cls) | set(rename)
    for key, val in data.items():
        if key not in allowed:
            raise ConfigError(f"{section}.{key}", "unknown field")
        kwargs[rename.get(key, key)] = val
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(section, str(exc)) from None


@dataclass
class RunConfig:
    """Defaults reproduce the system-parameter table.

    ``fso.zenith_deg`` is in degrees; every SNR is given in dB.  ``shadowing``
    is a preset name or an explicit {b_R, m_R, Omega_R} object.
    """

    fso: dict = field(default_factory=lambda: {"zenith_deg": 40.0, "q_V": 1.6})
    pointing: dict = field(default_factory=dict)
    shadowing: Any = "HS"
    nakagami: dict = field(default_factory=dict)
    rf: dict = field(default_factory=dict)
    N: int = 50
    N_x: int = 75
    C: float = 1.0
    detection: str | None = None
    gamma_th_db: float = 2.0
    modulation: str = "bpsk"
    sweep: tuple[float, float, float] = (0.0, 70.0, 5.0)
    modes: tuple[str, ...] = ("oracle",)
    seed: int = 1
    samples: int = 1_000_000
    out: str | None = None
    format: str = "csv"
    workers: int = 1

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "configuration must be an object")
        if "metadata" in data and "rows" in data:
            # a CurveFile: rerun its embedded configuration
            data = data["metadata"]["config"]
        known = _fields(cls)
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown field")
        base = cls()
        merged = dataclasses.asdict(base)
        for key, val in data.items():
            if key in ("fso",) and isinstance(val, dict):
                merged[key] = {**base.fso, **val}
            else:
                merged[key] = val
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sweep"] = list(self.sweep)
        d["modes"] = list(self.modes)
        return d

    def updated(self, **changes) -> "RunConfig":
        cfg = dataclasses.replace(self, **changes)
        cfg.validate()
        return cfg

    # -- validation -------------------------------------------------------

    def validate(self) -> None:
        self.sweep = parse_sweep(self.sweep)
        if isinstance(self.modes, str):
            self.modes = tuple(m.strip() for m in self.modes.split(",") if m.strip())
        self.modes = tuple(self.modes)
        if not self.modes:
            raise ConfigError("modes", "at least one mode is required")
        for m in self.modes:
            if m not in MODES:
                raise ConfigError("modes", f"unknown mode {m!r}; choose from {', '.join(MODES)}")
        if self.detection is not None and self.detection not in DETECTIONS:
            raise ConfigError("detection", "must be 'heterodyne' or 'imdd'")
        if self.format not in ("csv", "json"):
            raise ConfigError("format", "must be 'csv' or 'json'")
        for name, lo in (("N", 1), ("N_x", 1), ("samples", 10_000), ("workers", 1)):
            val = getattr(self, name)
            if not isinstance(val, int) or isinstance(val, bool) or val < lo:
                raise ConfigError(name, f"must be an integer >= {lo}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError("seed", "must be a non-negative integer")
        for name in ("C", "gamma_th_db"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
                raise ConfigError(name, "must be a finite number")
        if self.C < 0:
            raise ConfigError("C", "relay gain must be >= 0")
        parse_modulation(self.modulation)
        # building the objects surfaces field-level errors
        _ = (self.geometry, self.pointing_params, self.sr, self.nak, self.budget)

    # -- resolved objects -----------------------------------------------------

    @property
    def geometry(self) -> FsoGeometry:
        data = dict(self.fso)
        if "zenith" in data:
            raise ConfigError("fso.zenith", "give the zenith angle in degrees as zenith_deg")
        if "zenith_deg" in data:
            z = data.pop("zenith_deg")
            if isinstance(z, bool) or not isinstance(z, (int, float)):
                raise ConfigError("fso.zenith_deg", "must be a number")
            data["zenith"] = math.radians(z)
        return _build(FsoGeometry, "fso", data)

    @property
    def pointing_params(self) -> PointingParams:
        return _build(PointingParams, "pointing", self.pointing)

    @property
    def sr(self) -> ShadowedRicianParams:
        if isinstance(self.shadowing, str):
            key = self.shadowing.upper()
            if key not in SHADOWING:
                raise ConfigError("shadowing", f"unknown preset {self.shadowing!r}; use HS, AS or LS")
            return SHADOWING[key]
        return _build(ShadowedRicianParams, "shadowing", self.shadowing)

    @property
    def nak(self) -> NakagamiParams:
        return _build(NakagamiParams, "nakagami", self.nakagami)

    @property
    def budget(self) -> RfLinkBudget:
        return _build(RfLinkBudget, "rf", self.rf)

    def r_for(self, command: str) -> int:
        """Detection exponent; BER follows the modulation unless overridden."""
        if command == "ber":
            mod = parse_modulation(self.modulation)
            if self.detection is not None and DETECTIONS[self.detection] != mod.r:
                raise ConfigError("detection", f"{mod.name} requires {mod.detection} detection")
            return mod.r
        return DETECTIONS[self.detection or "heterodyne"]

    def gamma_h_db(self) -> np.ndarray:
        start, stop, step = self.sweep
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return start + step * np.arange(n)

    def resolve(self, command: str) -> "Resolved":
        return Resolved(self, command)


class Resolved:
    """Model objects derived from a RunConfig (built once per run)."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.r = cfg.r_for(command)
        self.geometry = cfg.geometry
        self.pointing = cfg.pointing_params
        self.sr, self.nak, self.budget = cfg.sr, cfg.nak, cfg.budget
        self.mod = parse_modulation(cfg.modulation) if command == "ber" else None
        self.e2e = E2EConfig(C=float(cfg.C), r=self.r, gamma_th=float(db_to_lin(cfg.gamma_th_db)))

    @cached_property
    def fso(self) -> FsoDerived:
        return fso_derived(self.geometry, self.pointing)

    @cached_property
    def gamma_u_bar(self) -> float:
        return average_snr_u(self.budget)

    @cached_property
    def clt(self) -> CltParams:
        return clt_params(self.cfg.N, self.sr, self.nak)

    @cached_property
    def mixture(self) -> MixtureGammaModel:
        return fit_mixture_gamma(self.clt, self.gamma_u_bar, self.cfg.N_x)

    @cached_property
    def chain(self) -> ChainParams:
        return ChainParams(self.fso, self.pointing, self.cfg.N, self.sr, self.nak,
                           self.gamma_u_bar, self.e2e)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def content_hash(payload: dict) -> str:
    """sha256 of the canonical JSON form (sorted keys, no whitespace)."""
    text = json.dumps(_jsonable(payload), sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(text.encode()).hexdigest()
