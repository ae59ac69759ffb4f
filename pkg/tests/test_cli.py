import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from sparsegev.baselines import lasso_granger
from sparsegev.cli import DEFAULTS, main
from sparsegev.evaluation import normalize_panel
from sparsegev.io import read_csv_metadata, read_panel_csv

FAST = ["--particles", "40", "--max-iters", "2"]


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def simulated(tmp_path):
    d = tmp_path / "sim"
    code, _, err = run("simulate", "-o", d, "--seed", 5, "--T", 30, "--P", 4)
    assert code == 0, err
    return d


def test_simulate_is_reproducible(tmp_path, simulated):
    other = tmp_path / "again"
    run("simulate", "-o", other, "--seed", 5, "--T", 30, "--P", 4)
    for name in ("panel.csv", "truth.json", "model.json"):
        assert (simulated / name).read_bytes() == (other / name).read_bytes()
    panel = read_panel_csv(simulated / "panel.csv")
    assert panel.values.shape == (30, 4)
    meta = read_csv_metadata((simulated / "panel.csv").read_text())
    assert meta["seed"] == 5 and meta["T"] == 30 and "output" not in meta


def test_fit_granger_matches_library(tmp_path, simulated):
    out = tmp_path / "fit"
    code, stdout, err = run("fit", "-i", simulated / "panel.csv", "-o", out, "--method", "granger",
                            "--lambda", 0.1)
    assert code == 0, err
    doc = json.loads((out / "model.json").read_text())
    panel, _ = normalize_panel(read_panel_csv(simulated / "panel.csv"))
    _, pred = lasso_granger(panel, 0.1, DEFAULTS["lag"])
    assert np.array_equal(np.array(doc["predictor"]["beta"]), pred.beta)
    assert doc["config"]["method"] == "granger" and doc["config"]["lambda"] == 0.1
    graph = json.loads((out / "graph.json").read_text())
    assert graph["config"] == doc["config"] and graph["nodes"] == panel.names
    assert "wrote" in stdout


@pytest.mark.parametrize("method", ["sparse-gev", "granger", "te", "copula"])
def test_fit_then_predict_every_method(tmp_path, simulated, method):
    out = tmp_path / method
    code, stdout, err = run("fit", "-i", simulated / "panel.csv", "-o", out, "--method", method,
                            "--lambda", 0.1, *FAST)
    assert code == 0, err
    code, _, err = run("predict", "-i", simulated / "panel.csv", "--model", out / "model.json", "-o", out)
    assert code == 0, err
    text = (out / "predictions.csv").read_text()
    pred = read_panel_csv(out / "predictions.csv")
    assert pred.values.shape == (1, 4) and np.all(np.isfinite(pred.values))
    assert read_csv_metadata(text)["model"] == str(out / "model.json")
    if method == "sparse-gev":
        assert "roughness ratio" in stdout
        em = (out / "em_trace.csv").read_text().splitlines()
        assert em[0].startswith("# config: ") and em[1].startswith("iter,q,penalized_q")
        assert (out / "ess_trace.csv").exists()
    # no temporary files left behind
    assert not [f for f in os.listdir(out) if f.endswith(".tmp")]


def test_evaluate_and_benchmark_outputs(tmp_path, simulated):
    out = tmp_path / "eval"
    code, _, err = run("evaluate", "-i", simulated / "panel.csv", "--truth", simulated / "truth.json",
                       "-o", out, "--methods", "granger,copula", "--windows", 3)
    assert code == 0, err
    rep = json.loads((out / "report.json").read_text())
    assert [r["method"] for r in rep["reports"]] == ["granger", "copula"]
    assert rep["config"]["windows"] == 3 and all(r["auc"] is not None for r in rep["reports"])
    assert (out / "table.txt").read_text().startswith("# config: ")
    b1, b2 = tmp_path / "b1", tmp_path / "b2"
    for d in (b1, b2):
        code, _, err = run("benchmark", "-o", d, "--methods", "granger", "--datasets", 2, "--windows", 2)
        assert code == 0, err
    assert (b1 / "report.json").read_bytes() == (b2 / "report.json").read_bytes()
    assert set(json.loads((b1 / "timings.json").read_text())) == {"0/granger", "1/granger"}


def test_config_file_precedence(tmp_path, simulated):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"method": "granger", "lambda": 0.3, "lag": 1}))
    out = tmp_path / "o"
    code, _, err = run("fit", "-i", simulated / "panel.csv", "-o", out, "--config", cfg, "--lambda", 0.05)
    assert code == 0, err
    meta = json.loads((out / "model.json").read_text())["config"]
    assert meta["lambda"] == 0.05 and meta["lag"] == 1 and meta["method"] == "granger"


@pytest.mark.parametrize("argv,code,tag", [
    (["fly"], 1, "usage"),
    (["fit", "--particles", "x"], 1, "usage"),
    (["fit", "--method", "granger"], 1, "usage"),
    (["fit", "-i", "missing.csv", "--method", "granger"], 2, "data"),
])
def test_exit_codes(tmp_path, argv, code, tag):
    got, _, err = run(*argv, "-o", tmp_path)
    assert got == code
    assert err.startswith(f"sparsegev: error={tag} type=") and err.count("\n") == 1


def test_data_and_config_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n3,oops\n")
    code, _, err = run("fit", "-i", bad, "--method", "granger", "-o", tmp_path)
    assert code == 2 and "line 3, column 2" in err
    const = tmp_path / "const.csv"
    const.write_text("a,b\n" + "".join(f"{i},1\n" for i in range(10)))
    code, _, err = run("fit", "-i", const, "--method", "granger", "-o", tmp_path)
    assert code == 2 and "DegenerateDataError" in err
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"lamda": 0.1}))
    code, _, err = run("fit", "--config", cfg)
    assert code == 1 and "lamda" in err


def test_numerical_failure_exit_code(tmp_path):
    # a value so large that the standardised residual overflows for every particle
    f = tmp_path / "spike.csv"
    rows = [[0.1 * (i % 3), 0.2 * (i % 2)] for i in range(20)]
    rows[10][0] = 1e308
    f.write_text("a,b\n" + "".join(f"{a},{b}\n" for a, b in rows))
    model = tmp_path / "m.json"
    doc = {"method": "sparse-gev", "nodes": ["a", "b"], "normalization": {"min": [0, 0], "max": [1, 1]},
           "predictor": {"sparse_gev": {"P": 2, "L": 1, "c": [0, 0], "sigma": [0.01, 0.01], "tau": 0.01,
                                        "beta": [[[0.0], [0.0]], [[0.0], [0.0]]]},
                         "particles": 20, "seed": 0}}
    model.write_text(json.dumps(doc))
    code, _, err = run("predict", "-i", f, "--model", model, "-o", tmp_path)
    assert code == 3 and "error=numerical" in err


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "sparsegev", "simulate", "-o", str(tmp_path), "--T", "12",
                        "--P", "3"], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "panel.csv").exists()
