import json
import subprocess
import sys

import pytest

from tsgraph.cli import main


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--out", str(out), "--p", "4", "--T", "128", "--N", "8", "--rho", "0.4", "--seed", "3"]) == 0
    return out


def data_args(sim):
    return ["--data", *sorted(str(f) for f in sim.glob("replicate_*.csv"))]


def learn(sim, out, *extra):
    return main(["learn", *data_args(sim), "--out", str(out), "--iterations", "300", "--seed", "1", *extra])


def test_simulate_outputs(sim):
    model = json.loads((sim / "model.json").read_text())
    assert len(model["A"]) == 4 and model["seed"] == 3
    assert len(list(sim.glob("replicate_*.csv"))) == 8
    assert json.loads((sim / "run_meta.json").read_text())["command"] == "simulate"


def test_learn_artifacts(sim, tmp_path):
    assert learn(sim, tmp_path) == 0
    graph = json.loads((tmp_path / "graph.json").read_text())
    assert {"graph", "log_marginal", "log_prior", "log_posterior", "labels"} <= set(graph)
    assert graph["labels"] == ["x0", "x1", "x2", "x3"]
    assert (tmp_path / "graph.dot").read_text().startswith("graph G {")
    rows = (tmp_path / "edge_probs.csv").read_text().splitlines()
    assert rows[0] == "x0,x1,x2,x3" and len(rows) == 5
    trace = (tmp_path / "trace.ndjson").read_text().splitlines()
    assert len(trace) == 301
    meta = json.loads((tmp_path / "run_meta.json").read_text())
    assert meta["args"]["g"] == pytest.approx(0.5)
    assert meta["args"]["smoothing"] == "none"
    assert meta["statistics"]["excluded_frequencies"] == [0]


def test_learn_deterministic_and_rerun(sim, tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert learn(sim, a) == 0 and learn(sim, b) == 0
    assert (a / "graph.json").read_bytes() == (b / "graph.json").read_bytes()
    assert main(["rerun", str(a / "run_meta.json"), "--out", str(c)]) == 0
    for name in ("graph.json", "trace.ndjson", "edge_probs.csv", "run_meta.json"):
        assert (a / name).read_bytes() == (c / name).read_bytes()


def test_evaluate(sim, tmp_path):
    assert learn(sim, tmp_path / "l") == 0
    assert main(["evaluate", "--graph", str(tmp_path / "l" / "graph.json"), "--model", str(sim / "model.json"), "--out", str(tmp_path / "e")]) == 0
    metrics = json.loads((tmp_path / "e" / "metrics.json").read_text())
    assert 0 <= metrics["tpr"] <= 1 and 0 <= metrics["fpr"] <= 1


def test_predict(sim, tmp_path):
    files = sorted(str(f) for f in sim.glob("replicate_*.csv"))
    assert learn(sim, tmp_path / "l") == 0
    rc = main(["predict", "--train", *files[:4], "--test", *files[4:], "--graph", str(tmp_path / "l" / "graph.json"), "--out", str(tmp_path / "p")])
    assert rc == 0
    scores = json.loads((tmp_path / "p" / "predictive.json").read_text())
    assert set(scores) == {"given", "empty", "complete"}


def test_spectra(sim, tmp_path):
    assert main(["spectra", *data_args(sim), "--smoothing", "daniell:2", "--pairs", "0-1", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "spectra.csv").read_text().splitlines()
    assert lines[0] == "freq,i,j,re,im"
    assert len(lines) == 1 + 127
    freq, i, j, re, im = lines[1].split(",")
    assert (i, j) == ("0", "1") and float(freq) == pytest.approx(1 / 128)


class TestExitCodes:
    def test_missing_file(self, tmp_path):
        assert main(["learn", "--data", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o")]) == 2

    def test_rank_guard(self, sim, tmp_path, capsys):
        one = sorted(str(f) for f in sim.glob("replicate_*.csv"))[:1]
        rc = main(["learn", "--data", *one, "--smoothing", "none", "--out", str(tmp_path)])
        assert rc == 3
        assert "smoothing" in capsys.readouterr().err

    def test_no_center_needs_opt_in(self, sim, tmp_path):
        assert learn(sim, tmp_path, "--no-center") == 4

    def test_bad_smoothing(self, sim, tmp_path):
        assert learn(sim, tmp_path, "--smoothing", "gauss") == 4

    def test_g_default_not_below_one(self, sim, tmp_path):
        four = sorted(str(f) for f in sim.glob("replicate_*.csv"))[:4]
        # four replicates, no smoothing: 4/4 is not a valid fraction
        assert main(["learn", "--data", *four, "--out", str(tmp_path)]) == 4


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "tsgraph.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "tsgraph" in res.stdout
