import json

import pytest

from dwls.cli import main
from dwls.network import SensorNetwork


@pytest.fixture
def graph(tmp_path):
    p = tmp_path / "g.json"
    assert main(["gen", "--nodes", "20", "--degree", "3", "--seed", "2", "--out", str(p)]) == 0
    return p


def test_gen_writes_valid_json(graph):
    net = SensorNetwork.load(graph)
    assert net.n_nodes == 20


def test_run(graph, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--graph", str(graph), "--rounds", "8", "--out-dir", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"convergence.csv", "depth_cov.csv", "depth_est.csv"}
    assert "DWLS reaches" in capsys.readouterr().out


def test_bounds_json(graph, capsys):
    assert main(["bounds", "--graph", str(graph), "--probe", "3"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["covariance"]["probe"] == 3
    assert {"rho", "lambda", "kappa", "omega", "chi_bar"} <= set(doc["covariance"]) | set(doc["estimate"])


@pytest.mark.parametrize("suite", ["riemann", "equiv", "acyclic", "bounds"])
def test_verify(suite, capsys):
    assert main(["verify", "--suite", suite, "--trials", "3"]) == 0
    assert capsys.readouterr().out.startswith("PASS")


def test_validation_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"nodes": [{"id": 1, "dim": 1, "C": [[0.0]], "R": [[1.0]], "z": [0.0]}],
                             "edges": []}))
    assert main(["bounds", "--graph", str(p)]) == 2
    assert "assumption1" in capsys.readouterr().err


def test_missing_file_exit_code(tmp_path):
    assert main(["bounds", "--graph", str(tmp_path / "nope.json")]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_exit_code(tmp_path, capsys):
    # passes validation, but the joint information overflows to inf
    p = tmp_path / "nan.json"
    p.write_text(json.dumps({"nodes": [{"id": 1, "dim": 1, "C": [[1.0]], "R": [[1.0]], "z": [0.0]},
                                       {"id": 2, "dim": 1, "C": [[1.0]], "R": [[1.0]], "z": [0.0]}],
                             "edges": [{"i": 1, "j": 2, "C_ij": [[1e300]], "C_ji": [[1e300]],
                                        "R": [[1e-300]], "z": [0.0]}]}))
    code = main(["run", "--graph", str(p), "--rounds", "2", "--out-dir", str(tmp_path / "o")])
    assert code == 3
