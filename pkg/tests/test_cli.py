import json
import subprocess
import sys

import numpy as np
import pytest

from dfso.apps.synth import synth_knapsack, synth_regression
from dfso.cli import main, make_parser
from dfso.instance import EfficiencyModel, FeasibleSet, GroupedPopulation, Linear, make_instance, save_instance
from dfso.micp import parse_lp

from support import ksd_toy, tiny_knapsack


@pytest.fixture
def files(tmp_path):
    binary = GroupedPopulation(np.array([[0.0], [1.0], [0.0], [0.0], [0.0], [1.0]]), ("a", "a", "a", "b", "b", "b"))
    binary.to_csv(tmp_path / "bin.csv")
    synth_regression(30, 3, 0)[0].to_csv(tmp_path / "reg.csv")
    synth_knapsack(5, 2).to_csv(tmp_path / "knap.csv")
    save_instance(ksd_toy(), tmp_path / "toy.json")
    save_instance(tiny_knapsack(5, q=1), tmp_path / "knap8.json")
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    assert code == 0, err
    return json.loads(out)


def test_measure_binary_column(files, capsys):
    data = run_json(capsys, "measure", "--pop", files / "bin.csv", "--q", 1)
    (pair,) = data["pairs"]
    # a has one 1 of three, b has one 1 of three: identical laws
    assert pair["wd"] == 0.0 and pair["ksd"] == 0.0 and pair["dp"] == 0.0
    code, out, _ = run(capsys, "measure", "--pop", files / "bin.csv")
    assert code == 0 and "a vs b" in out


def test_measure_non_binary_has_no_parity(files, capsys):
    data = run_json(capsys, "measure", "--pop", files / "reg.csv", "--column", "f2", "--q", 1)
    (pair,) = data["pairs"]
    assert pair["dp"] is None and pair["ksd_lower"] <= pair["ksd"] <= pair["ksd_upper"]
    code, _, err = run(capsys, "measure", "--pop", files / "reg.csv", "--column", "f9")
    assert code == 1 and "f9" in err


def test_bound_and_solve_agree(files, capsys):
    b = run_json(capsys, "bound", "--pop", files / "reg.csv")
    s = run_json(capsys, "solve", "--pop", files / "reg.csv")
    assert set(b) >= {"jensen", "gelbrich"}
    assert b["jensen"] <= s["objective"] + 1e-6 and b["gelbrich"] <= s["objective"] + 1e-6
    assert s["status"] == "converged" and len(s["x"]) == 3
    assert s["bounds"]["start"] in ("efficiency", "jensen", "gelbrich")


def test_solve_is_deterministic(files, capsys):
    first = run(capsys, "solve", "--pop", files / "reg.csv", "--json")
    assert first == run(capsys, "solve", "--pop", files / "reg.csv", "--json")


def test_global_and_local_json_flags(files, capsys):
    a = run(capsys, "--json", "oracle", "--instance", files / "toy.json")
    b = run(capsys, "oracle", "--instance", files / "toy.json", "--json")
    assert a == b and json.loads(a[1])["x"] == [0.0]


def test_emit_model_to_stdout_and_file(files, capsys):
    code, text, _ = run(capsys, "emit-model", "--pop", files / "knap.csv", "--quantile", "--q", 1)
    assert code == 0 and parse_lp(text).formulation == "quantile"
    data = run_json(capsys, "emit-model", "--pop", files / "knap.csv", "--formulation", "aggregate-quantile", "--cuts", "--out", files / "m.lp")
    assert json.loads((files / "m.json").read_text())["counts"] == data["counts"]
    assert parse_lp((files / "m.lp").read_text()).counts() == data["counts"]


def test_emit_model_usage_errors(files, capsys):
    code, _, err = run(capsys, "emit-model", "--pop", files / "knap.csv")
    assert code == 1 and "error" in err
    code, _, _ = run(capsys, "emit-model", "--pop", files / "knap.csv", "--vanilla", "--quantile")
    assert code == 1
    code, _, err = run(capsys, "emit-model", "--pop", files / "knap.csv", "--vanilla", "--q", 3)
    assert code == 1 and "q = 1" in err


def test_ksd_search_toy(files, capsys):
    data = run_json(capsys, "ksd-search", "--instance", files / "toy.json")
    assert data["delta"] == "1/6" and data["x"] == pytest.approx([0.0], abs=1e-7)
    code, out, _ = run(capsys, "ksd-search", "--instance", files / "toy.json")
    assert "1/6" in out


def test_oracle_on_knapsack(files, capsys):
    data = run_json(capsys, "oracle", "--instance", files / "knap8.json")
    assert data["certified"] and data["evaluated"] == 256


def test_experiment_outputs_and_determinism(files, capsys):
    args = ["experiment", "--problem", "regression-mae", "--eps", 0.1, 0.3, "--seed", 0, "--seed", 1, "--m", 16, "--kappa", 3]
    assert run(capsys, *args, "--out", files / "e1")[0] == 0
    assert run(capsys, *args, "--out", files / "e2", "--jobs", 2)[0] == 0
    t1, t2 = (files / "e1" / "tradeoff.csv").read_bytes(), (files / "e2" / "tradeoff.csv").read_bytes()
    assert t1 == t2 and t1.count(b"\n") == 1 + 2 * 2 * 3
    for name in ("trace.csv", "histogram.csv", "report.json"):
        assert (files / "e1" / name).exists()


def test_experiment_config_file(files, capsys):
    cfg = {"problem": "knapsack", "epsilons": [0.2], "seeds": [3], "m": 6, "q": 1.0, "methods": ["am", "oracle"]}
    (files / "cfg.json").write_text(json.dumps(cfg))
    data = run_json(capsys, "experiment", "--config", files / "cfg.json", "--out", files / "e3")
    assert data == {"failed": 0, "out": str(files / "e3"), "rows": 2}
    code, _, _ = run(capsys, "experiment", "--config", files / "cfg.json", "--problem", "portfolio", "--out", files / "e4")
    assert code == 1


# ---------------------------------------------------------------- exit codes


def test_exit_code_usage(capsys, files):
    assert run(capsys)[0] == 1
    assert run(capsys, "solve")[0] == 1
    assert run(capsys, "solve", "--instance", files / "missing.json")[0] == 1
    (files / "bad.json").write_text("{not json")
    assert run(capsys, "solve", "--instance", files / "bad.json")[0] == 1


def test_exit_code_infeasible(capsys, tmp_path):
    m = 2
    eff = EfficiencyModel("linear", {"C": np.zeros((m, 1)), "d": np.ones(m)}, 0.1, v_star=1.0)
    fs = FeasibleSet([0.0], [1.0], G=[[1.0]], h=[-1.0])
    inst = make_instance(np.array([[1.0], [2.0]]), ("a", "b"), Linear.identity(1), eff, fs, 2.0)
    save_instance(inst, tmp_path / "empty.json")
    code, _, err = run(capsys, "solve", "--instance", tmp_path / "empty.json")
    assert code == 2 and "error" in err


def test_exit_code_resource(capsys, files):
    code, _, err = run(capsys, "oracle", "--instance", files / "knap8.json", "--budget", 10)
    assert code == 3 and "error" in err


def test_tolerance_from_environment(monkeypatch, files, capsys):
    monkeypatch.setenv("DFSO_TOL", "1e-3")
    assert make_parser().parse_args(["solve", "--instance", "x.json"]).tol == 1e-3
    monkeypatch.setenv("DFSO_TOL", "tight")
    assert run(capsys, "solve", "--instance", files / "toy.json")[0] == 1


def test_module_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "dfso", "oracle", "--instance", str(files / "toy.json"), "--json"], capture_output=True, text=True)
    # WD_1 between {0, 1} and {x, x, 1} is x / 2 + (1 - x) / 6, least at x = 0
    assert proc.returncode == 0 and json.loads(proc.stdout)["value"] == pytest.approx(1 / 6)
