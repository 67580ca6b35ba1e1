from __future__ import annotations

import json
import math

import pytest

from shiftlab import cli
from shiftlab.errors import ConfigError

GOLDEN_CONFIG = {
    "shift": {"family": "sft", "alphabet": ["0", "1"], "forbidden": ["11"]},
    "potential": "zero",
    "analyses": [
        {"op": "entropy_exact"},
        {"op": "pressure_estimate", "n_max": 30},
    ],
    "output": {"dir": "out"},
}


# -- validate -------------------------------------------------------------------

def test_validate_missing_alphabet():
    cfg = {"shift": {"family": "sft"}, "analyses": [{"op": "entropy_exact"}]}
    diags = cli.validate(cfg)
    assert any(d["level"] == "error" and d["field"] == "shift.alphabet" for d in diags)


def test_validate_guard_warning():
    cfg = {
        "shift": {"family": "sft", "alphabet": ["0", "1"], "forbidden": []},
        "analyses": [{"op": "pressure_estimate", "n_max": 99}],
        "depth_guard": 40,
    }
    diags = cli.validate(cfg)
    assert any(d["level"] == "warning" and "99" in d["message"] for d in diags)


def test_validate_clean_config():
    assert cli.validate(GOLDEN_CONFIG) == []


def test_validate_unknown_op():
    cfg = dict(GOLDEN_CONFIG, analyses=[{"op": "nonsense"}])
    diags = cli.validate(cfg)
    assert any(d["field"].endswith(".op") for d in diags)


def test_run_rejects_invalid():
    with pytest.raises(ConfigError):
        cli.run({"shift": {"family": "sft"}, "analyses": []})


# -- run ------------------------------------------------------------------------

def test_run_golden_pressure(tmp_path):
    report = cli.run(GOLDEN_CONFIG, tmp_path)
    assert all(b["status"] == "ok" for b in report["analyses"])
    h = float(report["analyses"][0]["result"]["entropy"])
    point = float(report["analyses"][1]["result"]["point_estimate"])
    assert abs(point - h) < 1e-3
    assert (tmp_path / "report.json").exists()
    assert (tmp_path / "01_pressure_estimate.csv").exists()
    assert (tmp_path / "01_pressure_estimate.dat").exists()
    dat = (tmp_path / "01_pressure_estimate.dat").read_text().splitlines()
    assert len(dat) == 30 and all(len(line.split()) == 2 for line in dat)


def test_run_config_echo_roundtrip(tmp_path):
    report = cli.run(GOLDEN_CONFIG, tmp_path)
    assert report["config"] == json.loads(json.dumps(GOLDEN_CONFIG))


def test_run_records_analysis_errors(tmp_path):
    cfg = {
        "shift": {"family": "sft", "alphabet": ["0", "1"], "forbidden": ["11"]},
        "analyses": [
            {"op": "cylinder_table", "word": "11", "n": 6},  # inadmissible word
            {"op": "entropy_exact"},
        ],
    }
    report = cli.run(cfg, tmp_path)
    assert report["analyses"][0]["status"] == "error"
    assert "NotInLanguage" in report["analyses"][0]["error"]
    assert report["analyses"][1]["status"] == "ok"  # later analyses still run


def test_run_not_one_one_pipeline(tmp_path):
    cfg = {
        "shift": {"family": "sft", "alphabet": ["0", "1"], "forbidden": ["111"]},
        "analyses": [
            {"op": "entropy_exact"},
            {"op": "ud_check", "irreducibles": ["0", "01", "10"]},
            {"op": "marking", "irreducibles": ["0", "01", "10"], "window": "010010010010"},
            {"op": "tower_loops", "irreducibles": ["0", "01", "10"], "base": "0",
             "n_max": 20, "cross_check": False},
        ],
    }
    report = cli.run(cfg, tmp_path)
    blocks = {b["op"]: b["result"] for b in report["analyses"] if b["status"] == "ok"}
    assert blocks["ud_check"]["pass"] is False
    assert blocks["ud_check"]["witness"] == "010"
    assert blocks["marking"]["count"] >= 2
    z_rate = float(blocks["tower_loops"]["z_rate"])
    h = float(blocks["entropy_exact"]["entropy"])
    assert z_rate - h >= 0.05
    assert z_rate == pytest.approx(math.log(2), abs=1e-3)


def test_run_cycle_avoid_symbol(tmp_path):
    cfg = {
        "shift": {"family": "cycle", "k": 8},
        "analyses": [
            {"op": "entropy_exact"},
            {"op": "avoid_symbol_rate", "symbol": "1", "depth": 18},
        ],
    }
    report = cli.run(cfg, tmp_path)
    h = float(report["analyses"][0]["result"]["entropy"])
    assert h == pytest.approx(math.log(2), abs=1e-9)
    rate = float(report["analyses"][1]["result"]["point_estimate"])
    assert rate >= 0.5 * math.log(2) - 0.02


def test_run_deterministic_across_threads(tmp_path):
    d1 = tmp_path / "t1"
    d8 = tmp_path / "t8"
    cli.run(GOLDEN_CONFIG, d1, threads=1)
    cli.run(GOLDEN_CONFIG, d8, threads=8)
    for name in ("report.json", "01_pressure_estimate.csv", "01_pressure_estimate.dat"):
        assert (d1 / name).read_bytes() == (d8 / name).read_bytes()


# -- command line ----------------------------------------------------------------

def test_run_kitchen_sink_ops(tmp_path):
    cfg = {
        "shift": {"family": "s_gap", "values": [1, 2]},
        "analyses": [
            {"op": "pressure_estimate", "n_max": 12},
            {"op": "persistence", "obstructions": "zero_runs", "depth": 8},
            {"op": "istar", "obstructions": "zero_runs", "M_list": [1, 2], "depth": 8},
            {"op": "cgc", "obstructions": "zero_runs", "eps": 0.08, "depth": 8,
             "check_depth": 4},
            {"op": "qft", "depth": 5},
            {"op": "hyperbolicity", "n_max": 10},
            {"op": "periodic_measure", "horizon": 8, "depth": 1},
            {"op": "cylinder_table", "word": "1", "n": 8},
        ],
    }
    report = cli.run(cfg, tmp_path)
    status = {b["op"]: b["status"] for b in report["analyses"]}
    assert all(v == "ok" for v in status.values()), status
    blocks = {b["op"]: b["result"] for b in report["analyses"]}
    assert blocks["persistence"]["pass"] is True
    assert blocks["istar"]["pass"] is True
    assert blocks["cgc"]["spec_I"]["pass"] is True
    assert blocks["cgc"]["stay_good_III"]["pass"] is True
    assert (tmp_path / "06_periodic_measure.csv").exists()


def test_run_sync_gap_op(tmp_path):
    cfg = {
        "shift": {"family": "sft", "alphabet": ["0", "1"], "forbidden": ["11"]},
        "analyses": [{"op": "sync_gap", "word": "0", "n_max": 12, "cert_depth": 6}],
    }
    report = cli.run(cfg, tmp_path)
    assert report["analyses"][0]["status"] == "ok"
    assert report["analyses"][0]["result"]["pass"] is True


def test_run_beta_and_cocyclic_families(tmp_path):
    cfg = {
        "shift": {"family": "beta", "beta": 1.6180339887498949, "depth": 18},
        "analyses": [{"op": "pressure_estimate", "n_max": 12}],
    }
    rep = cli.run(cfg, tmp_path / "b")
    assert rep["analyses"][0]["status"] == "ok"
    cfg2 = {
        "shift": {"family": "cocyclic",
                  "matrices": [[[1, 0], [0, 0]], [[0, 0], [0, 1]], [[0, 1], [1, 0]]]},
        "analyses": [{"op": "pressure_estimate", "n_max": 10}],
    }
    rep2 = cli.run(cfg2, tmp_path / "c")
    assert rep2["analyses"][0]["status"] == "ok"


def test_main_run_exit_codes(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(GOLDEN_CONFIG))
    out = tmp_path / "out"
    assert cli.main(["run", str(cfg_path), "--out", str(out)]) == 0
    assert (out / "report.json").exists()

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"shift": {"family": "sft"}, "analyses": []}))
    assert cli.main(["run", str(bad), "--out", str(out)]) == 1


def test_main_validate(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(GOLDEN_CONFIG))
    assert cli.main(["validate", str(cfg_path)]) == 0
    assert "ok" in capsys.readouterr().out


def test_main_missing_file(tmp_path):
    assert cli.main(["validate", str(tmp_path / "absent.json")]) == 1


def test_floats_serialized_as_17_digit_strings(tmp_path):
    report = cli.run(GOLDEN_CONFIG, tmp_path)
    entry = report["analyses"][1]["result"]["rows"][0]["rate"]
    assert isinstance(entry, str)
    assert float(entry) == math.log(2)
