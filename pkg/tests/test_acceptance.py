"""Acceptance criteria 1-8.  Each test records one PASS/FAIL line, printed in
the terminal summary (and immediately with ``-s``).  Tests that cannot meet
their criterion fail honestly; the analysis lives in the project notes."""
import math
import time

import numpy as np
import pytest
from scipy import special

from conftest import ACCEPTANCE, NAK, TABLE_GEOM, mixture_for
from hapirs import cli
from hapirs.e2e import (E2EConfig, avg_ber, avg_ber_asymptotic, diversity_order,
                        e2e_cdf_oracle, ergodic_capacity, modulation_params, outage_asymptotic,
                        outage_probability)
from hapirs.fso import FsoGeometry, PointingParams, fso_derived
from hapirs.montecarlo import ChainParams, RngStream, estimate_all
from hapirs.rf import (SHADOWING, RfLinkBudget, average_snr_u, cdf_sup_distance, clt_params,
                       fit_mixture_gamma)
from hapirs.specfun import meijer_g, meijer_signature

BPSK = modulation_params("bpsk")
OOK = modulation_params("ook")
DB = lambda x: 10.0 ** (np.asarray(x, float) / 10)


def record(n: int, ok: bool, name: str, detail: str, t0: float) -> None:
    line = f"criterion {n} {'PASS' if ok else 'FAIL'}  {name}: {detail} ({time.perf_counter() - t0:.1f} s)"
    ACCEPTANCE[n] = line
    print(line)


def test_criterion_1_meijer_reductions():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(1000):
        x = 10 ** rng.uniform(-3, 2)
        a, b = rng.uniform(0, 5, 2)
        g1 = meijer_g(meijer_signature([], [], [0.0], []), x).value
        worst = max(worst, abs(g1 / math.exp(-x) - 1))
        ref = 2 * x ** ((a + b) / 2) * special.kv(a - b, 2 * math.sqrt(x))
        g2 = meijer_g(meijer_signature([], [], [a, b], []), x).value
        worst = max(worst, abs(g2 / ref - 1))
    dt = time.perf_counter() - t0
    ok = worst < 1e-8 and dt < 30
    record(1, ok, "Meijer-G reductions", f"1000 draws, worst rel err {worst:.2e}", t0)
    assert ok


def test_criterion_2_mixture_fidelity():
    t0 = time.perf_counter()
    gbar = average_snr_u(RfLinkBudget())
    need = {"HS": 40, "AS": 50, "LS": 60}
    parts, ok = [], True
    for preset, nx in need.items():
        clt = clt_params(50, SHADOWING[preset], NAK)
        for n in (nx, 75):
            d = cdf_sup_distance(fit_mixture_gamma(clt, gbar, n), clt, gbar)
            ok &= d < 1e-3
            parts.append(f"{preset}@{n}={d:.1e}")
    ok &= time.perf_counter() - t0 < 60
    record(2, ok, "mixture-Gamma sup distance < 1e-3", ", ".join(parts), t0)
    assert ok


def test_criterion_3_analytic_vs_oracle():
    t0 = time.perf_counter()
    gh = DB(np.linspace(10, 70, 50))
    worst, where = 0.0, ""
    for q in (1.0, 0.7):
        d = fso_derived(TABLE_GEOM, PointingParams(q_H=q))
        for preset in ("HS", "AS", "LS"):
            mix = mixture_for(preset)
            for r in (1, 2):
                cfg = E2EConfig(r=r)
                a = outage_probability(d, mix, cfg, gh)
                o = e2e_cdf_oracle(cfg.gamma_th, d, mix, cfg, gh)
                rel = float(np.max(np.abs(a - o) / np.maximum(o, 1e-12)))
                if rel >= worst:
                    worst, where = rel, f"{preset} r={r} q_H={q}"
    dt = time.perf_counter() - t0
    ok = worst < 1e-3 and dt < 600
    record(3, ok, "analytic vs oracle, 12 configs x 50 points",
           f"worst rel diff {worst:.2e} ({where})", t0)
    assert ok


def test_criterion_4_analytic_vs_mc(fso_q1, mix_hs, gbar_table):
    t0 = time.perf_counter()
    grid_db = np.arange(0.0, 71.0, 10.0)
    worst, where, count = 0.0, "", 0
    for r, mod in ((1, BPSK), (2, OOK)):
        cfg = E2EConfig(r=r)
        chain = ChainParams(fso_q1, PointingParams(), 50, SHADOWING["HS"], NAK, gbar_table, cfg)
        gh = DB(grid_db)
        ref = {"op": outage_probability(fso_q1, mix_hs, cfg, gh),
               "cap": ergodic_capacity(fso_q1, mix_hs, cfg, gh),
               f"ber:{mod.name}": avg_ber(mod, fso_q1, mix_hs, cfg, gh)}
        for i, g in enumerate(gh):
            if ref["op"][i] <= 1e-4:
                continue
            mc = estimate_all(RngStream(2024, 100 * r + i), 1_000_000, chain, g, (mod,))
            for key, vals in ref.items():
                se = mc[key].stderr
                if se == 0.0 and key == "op":
                    # every draw agreed, so use the binomial SE at the analytic value
                    se = math.sqrt(vals[i] * (1 - vals[i]) / mc[key].n)
                z = abs(mc[key].value - vals[i]) / se
                count += 1
                if z > worst:
                    worst, where = z, f"{key} r={r} {grid_db[i]:g} dB"
    dt = time.perf_counter() - t0
    ok = worst < 3 and dt < 900
    record(4, ok, "analytic vs MC (1e6 samples)",
           f"{count} comparisons, worst {worst:.2f} SE ({where})", t0)
    assert ok


def test_criterion_5_asymptotics(fso_q1, mix_hs):
    t0 = time.perf_counter()
    parts, ok = [], True
    fit_db = np.arange(55.0, 70.1, 2.5)
    for r, mod in ((1, BPSK), (2, OOK)):
        cfg = E2EConfig(r=r)
        op = outage_probability(fso_q1, mix_hs, cfg, DB(60))
        op_a = outage_asymptotic(fso_q1, mix_hs, cfg, DB(60))
        ber = avg_ber(mod, fso_q1, mix_hs, cfg, DB(60))
        ber_a = avg_ber_asymptotic(mod, fso_q1, mix_hs, cfg, DB(60))
        e_op, e_ber = abs(op_a / op - 1), abs(ber_a / ber - 1)
        ops = outage_probability(fso_q1, mix_hs, cfg, DB(fit_db))
        slope = -np.polyfit(fit_db / 10, np.log10(ops), 1)[0]
        gd = diversity_order(fso_q1.alpha, fso_q1.beta, fso_q1.eta_s, r)
        e_sl = abs(slope / gd - 1)
        ok &= e_op < 0.05 and e_ber < 0.05 and e_sl < 0.10
        parts.append(f"r={r}: OP {e_op:.1%}, BER {e_ber:.1%}, slope {slope:.3f} vs {gd:.3f}")
    record(5, ok, "asymptotics at 60 dB and diversity slope", "; ".join(parts), t0)
    assert ok


def test_criterion_6_reference_values():
    t0 = time.perf_counter()
    mix = mixture_for("HS")
    got = {}
    for q, target in ((1.0, 1.4e-4), (0.7, 6.1e-5)):
        d = fso_derived(TABLE_GEOM, PointingParams(q_H=q))
        got[q] = (float(avg_ber(BPSK, d, mix, E2EConfig(), DB(55))), target)
    ber_ok = all(abs(v / t - 1) <= 0.5 for v, t in got.values())
    ops = {}
    for km in (18, 20, 22):
        geom = FsoGeometry(q_V=1.6, H_H=km * 1e3)
        gbar = average_snr_u(RfLinkBudget(H_H=km * 1e3))
        m = fit_mixture_gamma(clt_params(50, SHADOWING["LS"], NAK), gbar, 75)
        ops[km] = float(outage_probability(fso_derived(geom, PointingParams()), m, E2EConfig(), DB(40)))
    op_ok = 0.1 <= ops[20] / 7.4e-3 <= 10
    order = "improves with altitude" if ops[18] > ops[20] > ops[22] else \
        "improves at lower altitude" if ops[18] < ops[20] < ops[22] else "non-monotone in altitude"
    detail = (f"BER q_H=1 {got[1.0][0]:.2e} vs 1.4e-4, q_H=0.7 {got[0.7][0]:.2e} vs 6.1e-5 "
              f"({'within' if ber_ok else 'outside'} 50%); OP LS 40 dB {ops[20]:.2e} vs 7.4e-3 "
              f"({'within' if op_ok else 'outside'} 10x); OP 18/20/22 km "
              f"{ops[18]:.2e}/{ops[20]:.2e}/{ops[22]:.2e}, {order}")
    record(6, ber_ok and op_ok, "reference values", detail, t0)
    assert ber_ok and op_ok


def test_criterion_7_qualitative(fso_q1):
    t0 = time.perf_counter()
    gh = DB(np.arange(0.0, 71.0, 5.0))
    mixes = {k: mixture_for(k) for k in ("HS", "AS", "LS")}
    het, imdd = E2EConfig(r=1), E2EConfig(r=2)
    grid_db = np.arange(0.0, 71.0, 5.0)
    op = {k: outage_probability(fso_q1, m, het, gh) for k, m in mixes.items()}
    ber = avg_ber(BPSK, fso_q1, mixes["HS"], het, gh)
    cap = {k: ergodic_capacity(fso_q1, m, het, gh) for k, m in mixes.items()}
    op_imdd = outage_probability(fso_q1, mixes["HS"], imdd, gh)
    zen = {}
    for z in (20.0, 40.0, 60.0):
        d = fso_derived(FsoGeometry(q_V=1.6, zenith=math.radians(z)), PointingParams())
        zen[z] = outage_probability(d, mixes["HS"], het, gh)
    # per-point truth masks; differences are aligned with the upper grid point
    masks = {
        "OP decreasing": np.all([np.diff(v) < 0 for v in op.values()], axis=0),
        "BER decreasing": np.diff(ber) < 0,
        "capacity increasing": np.all([np.diff(v) > 0 for v in cap.values()], axis=0),
        "heterodyne <= IM/DD": op["HS"] <= op_imdd,
        "LS <= AS <= HS (OP)": (op["LS"] <= op["AS"]) & (op["AS"] <= op["HS"]),
        "LS >= AS >= HS (capacity)": (cap["LS"] >= cap["AS"]) & (cap["AS"] >= cap["HS"]),
        "smaller zenith better": (zen[20.0] <= zen[40.0]) & (zen[40.0] <= zen[60.0]),
    }
    failed = []
    for k, m in masks.items():
        pts = grid_db[-m.size:][~m]
        if pts.size:
            failed.append(f"{k} at {', '.join(f'{p:g}' for p in pts)} dB")
    ok = not failed
    record(7, ok, "qualitative monotonicity and ordering",
           f"{len(masks)} checks over 0-70 dB" + (f", failed: {failed}" if failed else ", all hold"), t0)
    assert ok


def test_criterion_8_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    argv = ["ber", "--mod", "ook", "--sweep", "20:40:10", "--modes", "analytic,oracle,mc",
            "--samples", "50000", "--seed", "77", "--format", "json"]
    paths = [tmp_path / f"run{i}.json" for i in range(3)]
    codes = [cli.main(argv + ["--out", str(paths[0])]),
             cli.main(argv + ["--out", str(paths[1])]),
             cli.main(argv + ["--out", str(paths[2]), "--workers", "3"])]
    capsys.readouterr()
    blobs = [p.read_bytes() for p in paths]
    ok = codes == [0, 0, 0] and blobs[0] == blobs[1] == blobs[2]
    record(8, ok, "bit-identical CurveFiles",
           f"3 runs (workers 1, 1, 3), {'identical' if ok else 'differ'}", t0)
    assert ok
