"""Command-line front end: SNR sweeps of outage, BER and capacity, a
cross-mode validation report and the mixture-Gamma fit study."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from . import e2e, montecarlo
from .config import MODES, ConfigError, Resolved, RunConfig, content_hash, db_to_lin
from .rf import cdf_sup_distance, fit_mixture_gamma
from .specfun import ContourError, DegenerateParametersError, DomainError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATE = 0, 2, 3, 4
NUMERIC_ERRORS = (ArithmeticError, ContourError, DegenerateParametersError, DomainError,
                  RuntimeError)

log = logging.getLogger("hapirs")


@dataclass
class Row:
    gamma_h_db: float
    mode: str
    value: float
    stderr: float
    ok: bool = True
    message: str = ""

    def as_dict(self) -> dict:
        return {"gamma_h_db": self.gamma_h_db, "mode": self.mode, "value": self.value,
                "stderr": self.stderr, "ok": self.ok, "message": self.message}


# ---------------------------------------------------------------------------
# metric evaluation
# ---------------------------------------------------------------------------

class Evaluator:
    """Computes one (metric, mode) value at one sweep point."""

    def __init__(self, res: Resolved, metric: str):
        self.res = res
        self.metric = metric
        if metric == "capacity" and "asymptotic" in res.cfg.modes:
            raise ConfigError("modes", "capacity has no asymptotic form")
        self._terms = None

    @property
    def terms(self):
        if self._terms is None:
            r = self.res
            self._terms = e2e.asymptotic_terms(r.fso, r.mixture, r.e2e)
        return self._terms

    def prepare(self, modes) -> None:
        # build shared state up front so worker threads only read it
        r = self.res
        _ = (r.fso, r.gamma_u_bar)
        if set(modes) & {"analytic", "oracle", "asymptotic"}:
            _ = r.mixture
        if "asymptotic" in modes:
            _ = self.terms
        if "mc" in modes:
            _ = r.chain

    def __call__(self, index: int, gh_db: float, mode: str) -> Row:
        r = self.res
        gh = float(db_to_lin(gh_db))
        try:
            value, se = self._compute(index, gh, mode)
        except NUMERIC_ERRORS as exc:
            log.warning("%s %s at %.6g dB failed: %s", self.metric, mode, gh_db, exc)
            return Row(gh_db, mode, math.nan, math.nan, False, f"{type(exc).__name__}: {exc}")
        if not math.isfinite(value):
            return Row(gh_db, mode, value, se, False, "non-finite value")
        return Row(gh_db, mode, value, se)

    def _compute(self, index: int, gh: float, mode: str) -> tuple[float, float]:
        r, m = self.res, self.metric
        if mode == "mc":
            rng = montecarlo.RngStream(r.cfg.seed, index)
            n, e = r.cfg.samples, r.e2e
            if m == "op":
                est = montecarlo.estimate_op(rng, n, e.gamma_th, r.chain, gh)
            elif m == "ber":
                est = montecarlo.estimate_ber(rng, n, r.mod, r.chain, gh)
            else:
                est = montecarlo.estimate_capacity(rng, n, r.chain, gh)
            return est.value, est.stderr
        return float(self.deterministic(mode, np.array([gh]))[0]), 0.0

    def deterministic(self, mode: str, gh: np.ndarray) -> np.ndarray:
        """Analytic, asymptotic or oracle values over an array of linear SNRs."""
        r, m = self.res, self.metric
        fso, e, mix = r.fso, r.e2e, r.mixture
        if m == "op":
            fn = {"analytic": lambda: e2e.outage_probability(fso, mix, e, gh),
                  "asymptotic": lambda: e2e.outage_asymptotic(fso, mix, e, gh, self.terms),
                  "oracle": lambda: e2e.e2e_cdf_oracle(e.gamma_th, fso, mix, e, gh)}[mode]
        elif m == "ber":
            fn = {"analytic": lambda: e2e.avg_ber(r.mod, fso, mix, e, gh),
                  "asymptotic": lambda: e2e.avg_ber_asymptotic(r.mod, fso, mix, e, gh, self.terms),
                  "oracle": lambda: e2e.avg_ber_oracle(r.mod, fso, mix, e, gh)}[mode]
        else:
            fn = {"analytic": lambda: e2e.ergodic_capacity(fso, mix, e, gh),
                  "oracle": lambda: e2e.ergodic_capacity_oracle(fso, mix, e, gh)}[mode]
        return np.broadcast_to(np.asarray(fn(), float), gh.shape)

    def batch(self, mode: str, grid_db: np.ndarray) -> list[Row] | None:
        """Whole-grid evaluation of a deterministic mode; None if any point
        fails, so the caller can retry point by point and flag the culprit."""
        try:
            vals = self.deterministic(mode, db_to_lin(grid_db))
        except NUMERIC_ERRORS as exc:
            log.info("batched %s %s failed (%s); retrying per point", self.metric, mode, exc)
            return None
        if not np.all(np.isfinite(vals)):
            return None
        return [Row(float(g), mode, float(v), 0.0) for g, v in zip(grid_db, vals)]


def run_sweep(res: Resolved, metric: str, modes=None) -> list[Row]:
    """Deterministic modes are evaluated over the whole grid at once; MC points
    (and any grid that failed as a batch) go to a thread pool.  Rows come back
    in sweep order whatever the completion order."""
    modes = tuple(modes or res.cfg.modes)
    ev = Evaluator(res, metric)
    ev.prepare(modes)
    grid = res.cfg.gamma_h_db()
    table: dict[tuple[int, str], Row] = {}
    tasks = []
    for m in modes:
        rows = None if m == "mc" else ev.batch(m, grid)
        if rows is None:
            tasks += [(i, float(g), m) for i, g in enumerate(grid)]
        else:
            table.update({(i, m): row for i, row in enumerate(rows)})
    with ThreadPoolExecutor(max_workers=res.cfg.workers) as pool:
        for (i, _, m), row in zip(tasks, pool.map(lambda t: ev(*t), tasks)):
            table[(i, m)] = row
    return [table[(i, m)] for i in range(len(grid)) for m in modes]


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

# execution settings that do not change any row
_NOT_EMBEDDED = ("out", "format", "workers")


def curve_payload(cfg: RunConfig, command: str, rows: list[Row]) -> dict:
    config = {k: v for k, v in cfg.to_dict().items() if k not in _NOT_EMBEDDED}
    body = {"tool": "hapirs", "version": __version__, "command": command, "config": config}
    body_rows = [row.as_dict() for row in rows]
    meta = dict(body, content_hash=content_hash({"metadata": body, "rows": body_rows}))
    return {"metadata": meta, "rows": body_rows}


def render(payload: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    meta = payload["metadata"]
    for key in ("tool", "version", "command", "content_hash"):
        buf.write(f"# {key}: {meta[key]}\n")
    buf.write("# config: " + json.dumps(meta["config"], sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["gamma_h_db", "mode", "value", "stderr"])
    for row in payload["rows"]:
        w.writerow([repr(row["gamma_h_db"]), row["mode"], repr(row["value"]), repr(row["stderr"])])
    return buf.getvalue()


def emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_curve(cfg: RunConfig, command: str) -> int:
    res = cfg.resolve("ber" if command == "ber" else command)
    rows = run_sweep(res, command)
    emit(render(curve_payload(cfg, command, rows), cfg.format), cfg.out)
    bad = [row for row in rows if not row.ok]
    for row in bad:
        print(f"warning: {command} {row.mode} at {row.gamma_h_db:g} dB: {row.message}",
              file=sys.stderr)
    return EXIT_NUMERIC if bad else EXIT_OK


@dataclass
class Check:
    gamma_h_db: float
    pair: str
    measure: float      # the quantity compared against its tolerance
    tol: float
    note: str

    @property
    def ratio(self) -> float:
        return self.measure / self.tol if math.isfinite(self.measure) else math.inf


def validation_checks(rows: list[Row], metric: str) -> list[Check]:
    """Pairwise comparisons: analytic vs oracle (relative 1e-3), either vs MC
    (3 standard errors), asymptotic vs exact at >= 55 dB (relative 5%)."""
    by_point: dict[float, dict[str, Row]] = {}
    for row in rows:
        by_point.setdefault(row.gamma_h_db, {})[row.mode] = row
    checks = []
    for g, modes in by_point.items():
        a, o, mc, asy = (modes.get(k) for k in ("analytic", "oracle", "mc", "asymptotic"))
        if a and o:
            rel = abs(a.value - o.value) / max(abs(o.value), 1e-12)
            checks.append(Check(g, "analytic/oracle", rel, 1e-3, f"rel diff {rel:.3g}"))
        if mc:
            for ref in (a, o):
                if ref is None:
                    continue
                if metric == "op" and ref.value <= 1e-4:
                    continue
                if not mc.stderr > 0:
                    continue
                z = abs(ref.value - mc.value) / mc.stderr
                checks.append(Check(g, f"{ref.mode}/mc", z, 3.0, f"{z:.2f} SE"))
        exact = a or o
        if asy and exact and g >= 55.0:
            rel = abs(asy.value - exact.value) / max(abs(exact.value), 1e-300)
            checks.append(Check(g, f"asymptotic/{exact.mode}", rel, 0.05, f"rel diff {rel:.3g}"))
    return checks


def cmd_validate(cfg: RunConfig, metric: str) -> int:
    if len(set(cfg.modes) & {"analytic", "oracle", "mc"}) < 2:
        raise ConfigError("modes", "validate needs at least two of analytic, oracle, mc")
    res = cfg.resolve(metric)
    rows = run_sweep(res, metric)
    checks = validation_checks(rows, metric)
    lines = [f"validate {metric}: {len(rows)} rows, {len(checks)} comparisons"]
    for c in checks:
        flag = "ok" if c.ratio <= 1 else "FAIL"
        lines.append(f"{c.gamma_h_db:8.3f} dB  {c.pair:24s} {c.note:22s} {flag}")
    failed_rows = [row for row in rows if not row.ok]
    for row in failed_rows:
        lines.append(f"{row.gamma_h_db:8.3f} dB  {row.mode:24s} numeric failure: {row.message}")
    worst = max(checks, key=lambda c: c.ratio, default=None)
    passed = worst is None or worst.ratio <= 1
    if passed and not failed_rows:
        lines.append("PASS")
        code = EXIT_OK
    elif not passed:
        lines.append(f"FAIL: worst offender {worst.pair} at {worst.gamma_h_db:g} dB ({worst.note}, "
                     f"tolerance {worst.tol:g})")
        code = EXIT_VALIDATE
    else:
        lines.append("FAIL: numeric failures")
        code = EXIT_NUMERIC
    report = "\n".join(lines) + "\n"
    if cfg.out:
        payload = curve_payload(cfg, f"validate-{metric}", rows)
        payload["report"] = report
        emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", cfg.out)
    sys.stdout.write(report)
    return code


def cmd_fit_mg(cfg: RunConfig, nx_list: list[int], threshold: float = 1e-3) -> int:
    res = cfg.resolve("op")
    clt, gbar = res.clt, res.gamma_u_bar
    lines = [f"mixture-Gamma fit: N={cfg.N}, shadowing={cfg.shadowing}, "
             f"mean SNR {10 * math.log10(gbar):.3f} dB",
             f"{'N_x':>5s} {'sup |dF|':>12s} pass(<{threshold:g})"]
    dists = []
    for nx in nx_list:
        dist = cdf_sup_distance(fit_mixture_gamma(clt, gbar, nx), clt, gbar)
        dists.append(dist)
        lines.append(f"{nx:5d} {dist:12.4e} {'yes' if dist < threshold else 'no'}")
    mono = all(b <= a * (1 + 1e-9) + 1e-15 for a, b in zip(dists, dists[1:]))
    lines.append(f"monotone non-increasing in N_x: {'yes' if mono else 'no'}")
    model = res.mixture
    dump = {"N_x": model.N_x, "zeta": model.zeta, "betas": model.betas.tolist(),
            "log_p": model.log_p.tolist(), "clt": {"N": clt.N, "mu_Z": clt.mu_Z,
                                                  "sigma_Z2": clt.sigma_Z2},
            "gamma_u_bar": gbar,
            "distances": {str(n): d for n, d in zip(nx_list, dists)}}
    sys.stdout.write("\n".join(lines) + "\n")
    if cfg.out:
        emit(json.dumps(dump, indent=2, sort_keys=True) + "\n", cfg.out)
    else:
        sys.stdout.write(json.dumps(dump, sort_keys=True) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON configuration or CurveFile")
    common.add_argument("--preset", choices=["HS", "AS", "LS"], help="shadowing preset")
    common.add_argument("--detection", choices=["heterodyne", "imdd"])
    common.add_argument("--mod", metavar="NAME", help="ook, bpsk, mpsk:M or mqam:M")
    common.add_argument("--zenith", type=float, metavar="DEG", help="zenith angle in degrees")
    common.add_argument("--qh", type=float, metavar="X", help="pointing jitter ratio q_H")
    common.add_argument("--hap-km", type=float, metavar="X", help="HAP altitude in km")
    common.add_argument("--sweep", metavar="START:STOP:STEP", help="FSO average SNR grid in dB")
    common.add_argument("--modes", metavar="LIST", help=f"comma list from {','.join(MODES)}")
    common.add_argument("--seed", type=int, metavar="N")
    common.add_argument("--samples", type=int, metavar="N")
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--workers", type=int, metavar="N", help="thread pool size")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="hapirs", description=__doc__)
    p.add_argument("--version", action="version", version=f"hapirs {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("op", parents=[common], help="outage probability sweep")
    sub.add_parser("ber", parents=[common], help="average BER sweep")
    sub.add_parser("capacity", parents=[common], help="ergodic capacity sweep (nats)")
    v = sub.add_parser("validate", parents=[common], help="cross-check evaluation modes")
    v.add_argument("--metric", choices=["op", "ber", "capacity"], default="op")
    f = sub.add_parser("fit-mg", parents=[common], help="mixture-Gamma fit study")
    f.add_argument("--nx", default="25,40,50,60,75,100", metavar="LIST",
                   help="comma list of mixture orders")
    return p


def load_config_file(path: str) -> dict:
    """JSON config, JSON CurveFile, or CSV CurveFile (its "# config:" header)."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    if text.startswith("#"):
        for line in text.splitlines():
            if line.startswith("# config: "):
                text = line[len("# config: "):]
                break
        else:
            raise ConfigError("--config", "CSV curve file has no '# config:' header")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None


def config_from_args(args) -> RunConfig:
    data = {}
    if args.config:
        data = load_config_file(args.config)
    cfg = RunConfig.from_dict(data)
    fso = dict(cfg.fso)
    rf = dict(cfg.rf)
    pointing = dict(cfg.pointing)
    changes = {}
    if args.zenith is not None:
        fso["zenith_deg"] = args.zenith
    if args.hap_km is not None:
        fso["H_H"] = args.hap_km * 1e3
        rf["H_H"] = args.hap_km * 1e3
    if args.qh is not None:
        pointing["q_H"] = args.qh
    changes.update(fso=fso, rf=rf, pointing=pointing)
    for attr, key in (("preset", "shadowing"), ("detection", "detection"), ("mod", "modulation"),
                      ("sweep", "sweep"), ("modes", "modes"), ("seed", "seed"),
                      ("samples", "samples"), ("out", "out"), ("format", "format"),
                      ("workers", "workers")):
        val = getattr(args, attr)
        if val is not None:
            changes[key] = val
    return cfg.updated(**changes)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command in ("op", "ber", "capacity"):
            return cmd_curve(cfg, args.command)
        if args.command == "validate":
            return cmd_validate(cfg, args.metric)
        try:
            nx = [int(x) for x in args.nx.split(",") if x.strip()]
        except ValueError:
            raise ConfigError("--nx", "expected a comma list of integers") from None
        if not nx or min(nx) < 1:
            raise ConfigError("--nx", "mixture orders must be positive")
        return cmd_fit_mg(cfg, nx)
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
