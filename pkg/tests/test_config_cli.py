import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from hapirs import cli
from hapirs.config import (ConfigError, RunConfig, content_hash, db_to_lin, lin_to_db,
                           parse_modulation, parse_sweep)


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def csv_rows(text: str) -> list[dict]:
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    return list(csv.DictReader(io.StringIO(body)))


# -- units and parsing -------------------------------------------------------------

def test_db_conversions():
    assert db_to_lin(0.0) == 1.0
    assert db_to_lin(30.0) == pytest.approx(1e3)
    assert db_to_lin(-20.0) == pytest.approx(1e-2)
    assert lin_to_db(0.0) == -math.inf
    assert lin_to_db(1e7) == pytest.approx(70.0)
    x = np.linspace(-50, 90, 29)
    np.testing.assert_allclose(lin_to_db(db_to_lin(x)), x, atol=1e-12)
    with pytest.raises(ValueError):
        lin_to_db(-1.0)


def test_parse_sweep():
    assert parse_sweep("10:70:2") == (10.0, 70.0, 2.0)
    assert parse_sweep([0, 5, 5]) == (0.0, 5.0, 5.0)
    for bad in ("10:70", "a:b:c", "70:10:2", "0:10:0", "0:inf:1"):
        with pytest.raises(ConfigError) as e:
            parse_sweep(bad)
        assert e.value.field == "sweep"


def test_sweep_grid_inclusive():
    cfg = RunConfig(sweep=(10, 70, 2))
    g = cfg.gamma_h_db()
    assert g.size == 31 and g[0] == 10 and g[-1] == 70
    assert RunConfig(sweep=(0, 1, 0.1)).gamma_h_db().size == 11


def test_parse_modulation():
    assert parse_modulation("mqam:16").name == "16-QAM"
    assert parse_modulation("OOK").r == 2
    for bad in ("mpsk", "bpsk:4", "mqam:8", "fsk"):
        with pytest.raises(ConfigError):
            parse_modulation(bad)


# -- RunConfig ------------------------------------------------------------------------

def test_empty_config_is_table_default():
    cfg = RunConfig.from_dict({})
    assert cfg.N == 50 and cfg.N_x == 75 and cfg.shadowing == "HS"
    assert math.degrees(cfg.geometry.zenith) == pytest.approx(40.0)
    res = cfg.resolve("op")
    assert 10 * math.log10(res.gamma_u_bar) == pytest.approx(74.47, abs=0.01)
    assert res.r == 1 and res.e2e.gamma_th == pytest.approx(10 ** 0.2)


@pytest.mark.parametrize("data,field", [
    ({"bogus": 1}, "bogus"),
    ({"N": 0}, "N"),
    ({"N": 2.5}, "N"),
    ({"samples": 10}, "samples"),
    ({"modes": ["fast"]}, "modes"),
    ({"modes": []}, "modes"),
    ({"detection": "coherent"}, "detection"),
    ({"shadowing": "XS"}, "shadowing"),
    ({"shadowing": {"b_R": -1, "m_R": 1, "Omega_R": 0}}, "shadowing"),
    ({"fso": {"zenith_deg": "forty"}}, "fso.zenith_deg"),
    ({"fso": {"lambda_nm": 1}}, "fso.lambda_nm"),
    ({"pointing": {"q_H": 1.5}}, "pointing"),
    ({"rf": {"f_c": 5}}, "rf.f_c"),
    ({"C": -1}, "C"),
    ({"format": "xml"}, "format"),
    ({"seed": -3}, "seed"),
])
def test_field_level_errors(data, field):
    with pytest.raises(ConfigError) as e:
        RunConfig.from_dict(data)
    assert e.value.field == field


def test_ber_detection_follows_modulation():
    assert RunConfig(modulation="ook").r_for("ber") == 2
    assert RunConfig(modulation="ook").r_for("op") == 1
    with pytest.raises(ConfigError, match="requires imdd"):
        RunConfig(modulation="ook", detection="heterodyne").r_for("ber")


def test_content_hash_canonical():
    assert content_hash({"a": 1, "b": [1.5]}) == content_hash({"b": [1.5], "a": 1})
    assert content_hash({"a": 1}) != content_hash({"a": 2})


# -- commands ------------------------------------------------------------------------

def test_op_row_count(capsys):
    code, out, _ = run(capsys, "op", "--preset", "HS", "--detection", "heterodyne",
                       "--zenith", "40", "--sweep", "10:70:2", "--modes", "analytic")
    assert code == 0
    rows = csv_rows(out)
    assert len(rows) == 31
    assert [float(r["gamma_h_db"]) for r in rows] == list(np.arange(10, 71, 2.0))
    vals = [float(r["value"]) for r in rows]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert all(float(r["stderr"]) == 0.0 for r in rows)


def test_csv_header(capsys):
    _, out, _ = run(capsys, "op", "--sweep", "30:30:1")
    head = [line for line in out.splitlines() if line.startswith("#")]
    keys = [h.split(":")[0][2:] for h in head]
    assert keys == ["tool", "version", "command", "content_hash", "config"]
    assert out.splitlines()[len(head)] == "gamma_h_db,mode,value,stderr"


def test_ber_qh07_row(capsys):
    code, out, _ = run(capsys, "ber", "--mod", "bpsk", "--qh", "0.7", "--sweep", "55:55:1",
                       "--modes", "analytic")
    assert code == 0
    v = float(csv_rows(out)[0]["value"])
    # our evaluation; the quoted reference value is discussed in the notes
    assert v == pytest.approx(2.9645e-5, rel=1e-3)


def test_ber_detection_conflict_exit_2(capsys):
    code, _, err = run(capsys, "ber", "--mod", "ook", "--detection", "heterodyne")
    assert code == 2 and "detection" in err


def test_capacity_ls_monotone(capsys):
    code, out, _ = run(capsys, "capacity", "--preset", "LS", "--sweep", "0:70:10",
                       "--modes", "analytic,oracle")
    assert code == 0
    rows = csv_rows(out)
    for mode in ("analytic", "oracle"):
        vals = [float(r["value"]) for r in rows if r["mode"] == mode]
        assert len(vals) == 8 and all(b > a for a, b in zip(vals, vals[1:]))


def test_capacity_rejects_asymptotic(capsys):
    code, _, err = run(capsys, "capacity", "--modes", "asymptotic")
    assert code == 2 and "asymptotic" in err


@pytest.mark.parametrize("argv", [
    ["op", "--sweep", "70:10:2"],
    ["op", "--modes", "quick"],
    ["op", "--samples", "5"],
    ["op", "--config", "/nonexistent/cfg.json"],
    ["fit-mg", "--nx", "a,b"],
])
def test_bad_config_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err.startswith("error: invalid configuration")


def test_bad_json_exit_2(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    code, _, err = run(capsys, "op", "--config", str(p))
    assert code == 2 and "invalid JSON" in err


def test_json_output_and_round_trip(tmp_path, capsys):
    out1 = tmp_path / "a.json"
    code, _, _ = run(capsys, "op", "--preset", "AS", "--sweep", "20:60:20",
                     "--modes", "analytic,oracle,asymptotic", "--format", "json", "--out", str(out1))
    assert code == 0
    first = json.loads(out1.read_text())
    meta = first["metadata"]
    assert meta["tool"] == "hapirs" and meta["command"] == "op"
    assert meta["config"]["shadowing"] == "AS" and "out" not in meta["config"]
    assert len(first["rows"]) == 9
    out2 = tmp_path / "b.json"
    code, _, _ = run(capsys, "op", "--config", str(out1), "--format", "json", "--out", str(out2))
    assert code == 0
    assert out2.read_bytes() == out1.read_bytes()


def test_csv_round_trip_with_mc(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["op", "--sweep", "20:30:10", "--modes", "mc", "--samples", "20000", "--seed", "5"]
    assert run(capsys, *argv, "--out", str(a))[0] == 0
    assert run(capsys, "op", "--config", str(a), "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    rows = csv_rows(a.read_text())
    assert all(float(r["stderr"]) > 0 for r in rows)


def test_worker_count_does_not_change_output(capsys):
    argv = ["ber", "--mod", "bpsk", "--sweep", "10:40:10", "--modes", "analytic,mc",
            "--samples", "20000"]
    _, one, _ = run(capsys, *argv, "--workers", "1")
    _, three, _ = run(capsys, *argv, "--workers", "3")
    assert one == three


def test_validate_pass(capsys):
    code, out, _ = run(capsys, "validate", "--sweep", "20:60:20",
                       "--modes", "analytic,oracle,asymptotic")
    assert code == 0
    assert out.rstrip().endswith("PASS")
    assert "analytic/oracle" in out


def test_validate_needs_two_modes(capsys):
    code, _, err = run(capsys, "validate", "--modes", "analytic,asymptotic")
    assert code == 2 and "at least two" in err


def test_validate_failure_exit_4(capsys, monkeypatch):
    # a deliberately wrong analytic value must be caught and named
    real = cli.Evaluator.deterministic

    def skewed(self, mode, gh):
        v = real(self, mode, gh)
        return v * 1.01 if mode == "analytic" else v

    monkeypatch.setattr(cli.Evaluator, "deterministic", skewed)
    code, out, _ = run(capsys, "validate", "--sweep", "30:30:1", "--modes", "analytic,oracle")
    assert code == 4
    assert "worst offender analytic/oracle at 30 dB" in out


def test_fit_mg_report(capsys):
    code, out, _ = run(capsys, "fit-mg", "--preset", "HS", "--nx", "25,50,75")
    assert code == 0
    lines = out.splitlines()
    assert "monotone non-increasing in N_x: yes" in out
    dump = json.loads(lines[-1])
    d = [dump["distances"][k] for k in ("25", "50", "75")]
    assert d[0] > d[1] > d[2]
    assert dump["N_x"] == 75 and len(dump["betas"]) == 75


def test_hap_altitude_sets_both_links(capsys):
    args = cli.build_parser().parse_args(["op", "--hap-km", "18"])
    cfg = cli.config_from_args(args)
    assert cfg.geometry.H_H == 18e3 and cfg.budget.H_H == 18e3


def test_console_script_version():
    out = subprocess.run([sys.executable, "-m", "hapirs.cli", "--version"], capture_output=True,
                         text=True, check=True)
    assert out.stdout.startswith("hapirs ")


def test_numeric_failure_flags_row_and_exits_3(capsys, monkeypatch):
    real = cli.Evaluator.deterministic

    def broken(self, mode, gh):
        if np.any(np.isclose(gh, 1e4)):
            raise ArithmeticError("contour did not converge")
        return real(self, mode, gh)

    monkeypatch.setattr(cli.Evaluator, "deterministic", broken)
    code, out, err = run(capsys, "op", "--sweep", "30:50:10", "--modes", "oracle")
    assert code == 3
    rows = csv_rows(out)
    assert [r["value"] for r in rows][1] == "nan"
    assert all(float(r["value"]) > 0 for r in (rows[0], rows[2]))
    assert "40 dB" in err
