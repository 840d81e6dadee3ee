import io
import json
import subprocess
import sys

import numpy as np
import pytest

from cli_corpus import CORPUS, LAMBDA3, TRACEFREE3
from kcurvature.cli import main
from kcurvature.tensor_core import Plane, instance_from_dict, sectional_k_curvature


def run(argv, stdin=None, monkeypatch=None, capsys=None):
    if stdin is not None:
        monkeypatch.setattr(sys, "stdin", io.StringIO(stdin))
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def cli(monkeypatch, capsys):
    def _run(argv, stdin=None):
        return run(argv, stdin, monkeypatch, capsys)

    return _run


@pytest.mark.parametrize("name, argv, stdin, expected", CORPUS, ids=[c[0] for c in CORPUS])
def test_corpus(cli, name, argv, stdin, expected):
    code, out, _ = cli(argv, stdin)
    assert code == expected
    doc = json.loads(out)  # exactly one document
    assert out.endswith("\n") and out.count("\n") >= 1
    if expected:
        assert doc["error"]["exit_code"] == expected
        assert doc["error"]["type"] and doc["error"]["message"]


def test_generate_then_curvature(cli):
    _, inst, _ = cli(["generate", "--kind", "lambda_quarter", "--dim", "3", "--lambda", "2"])
    code, out, _ = cli(["curvature", "--plane", "0,1"], stdin=inst)
    assert code == 0 and json.loads(out) == {"k": 1.0}


def test_maximize_zero(cli):
    doc = json.loads(cli(["maximize", '{"dim": 2, "cubic": []}'])[1])
    assert doc["value"] == 0.0 and doc["kind"] == "degenerate_max"


def test_decompose_tracefree(cli):
    doc = json.loads(cli(["decompose", TRACEFREE3])[1])
    assert doc["lambdas"][:2] == pytest.approx([2.0, 1.41421356], abs=1e-8)
    assert set(doc) >= {"A", "basis", "lambdas", "mus", "As", "residual"}


@pytest.mark.parametrize(
    "gen",
    [
        ["--kind", "lambda_quarter", "--dim", "4", "--lambda", "-1.5"],
        ["--kind", "tracefree_canonical", "--dim", "4", "--A", "-2"],
        ["--kind", "h_umbilical", "--dim", "3", "--lambda", "2", "--mu", "1"],
    ],
)
def test_generate_decompose_rebuild(cli, gen):
    _, inst, _ = cli(["generate", *gen])
    _, dec, _ = cli(["decompose", "-"], stdin=inst)
    _, rebuilt, _ = cli(["generate", "--decomposition", "-"], stdin=dec)
    a, b = instance_from_dict(json.loads(inst)), instance_from_dict(json.loads(rebuilt))
    rng = np.random.default_rng(0)
    for _ in range(20):
        u, v = rng.standard_normal((2, a.dim))
        assert sectional_k_curvature(b, Plane(u, v)) == pytest.approx(sectional_k_curvature(a, Plane(u, v)), abs=1e-8)


def test_determinism_in_process(cli):
    for name, argv, stdin, _ in CORPUS:
        first = cli(argv, stdin)[1]
        assert cli(argv, stdin)[1] == first, name


def test_pretty_toggles_indentation(cli):
    compact = cli(["curvature", LAMBDA3, "--plane", "0,1"])[1]
    pretty = cli(["curvature", LAMBDA3, "--plane", "0,1", "--pretty"])[1]
    assert compact == '{"k": 1.0}\n'
    assert pretty == '{\n  "k": 1.0\n}\n'


def test_logs_go_to_stderr():
    bad = '{"dim": 3, "cubic": [{"idx": [0,0,0], "val": 3}, {"idx": [0,1,1], "val": 1}, {"idx": [0,2,2], "val": 1}]}'
    r = subprocess.run([sys.executable, "-m", "kcurvature", "decompose", bad, "-v"], capture_output=True, text=True)
    assert r.returncode == 2
    assert "error" in json.loads(r.stdout)
    assert "not constant" in r.stderr


@pytest.mark.parametrize(
    "argv",
    [
        ["curvature", LAMBDA3, "--tol", "-1"],
        ["curvature", LAMBDA3, "--plane", "0,7"],
        ["curvature", LAMBDA3, "--plane", "0,1", "1,0,0"],
        ["curvature", LAMBDA3, "--plane", "1,0,0", "2,0,0"],
        ["curvature", "no-such-file.json"],
        ["curvature", '{"dim": 2, "cubic": [{"idx": [0,0,0], "val": 1}, {"idx": [0,0,0], "val": 2}]}'],
        ["generate", "--kind", "lambda_quarter"],
        ["manifold-check"],
        ["maximize", LAMBDA3, "--initial", "a,b"],
        ["track", '[{"t": 0.5, "dim": 2, "cubic": []}, {"t": 1, "dim": 2, "cubic": []}]'],
        ["nonsense"],
    ],
)
def test_validation_errors(cli, argv):
    code, out, _ = cli(argv)
    assert code == 2
    assert json.loads(out)["error"]["exit_code"] == 2


def test_degenerate_plane_is_validation_error(cli):
    code, out, _ = cli(["curvature", LAMBDA3, "--plane", "1,0,0", "2,0,0"])
    assert code == 2 and json.loads(out)["error"]["type"] == "DegeneratePlaneError"


def test_seed_changes_random_paths(cli):
    a = cli(["generate", "--kind", "random", "--dim", "3", "--seed", "1"])[1]
    b = cli(["generate", "--kind", "random", "--dim", "3", "--seed", "2"])[1]
    assert a != b


def test_manifold_check_sphere_dimension(cli):
    doc = json.loads(cli(["manifold-check", "--field", "sphere", "--dim", "3", "--point", "0.1,0,0", "--check", "codazzi"])[1])
    assert doc["codazzi"] <= 1e-6


def test_manifold_check_polynomial(cli):
    poly = json.dumps({"dim": 2, "domain": [[-1, 1], [-1, 1]], "potential": [{"coef": 0.5, "powers": [2, 0]}, {"coef": 0.5, "powers": [0, 2]}, {"coef": 0.2, "powers": [3, 0]}]})
    doc = json.loads(cli(["manifold-check", "--poly", poly, "--point", "0.1,0.1"])[1])
    assert doc["residuals"]["hessian_relation"] <= 1e-5
    assert doc["residuals"]["curvature_symmetry_equivalence"]["agree"]


def test_console_entry_point():
    r = subprocess.run(
        [sys.executable, "-m", "kcurvature", "curvature", LAMBDA3, "--plane", "0", "1"],
        capture_output=True, text=True, check=False,
    )
    assert r.returncode == 0 and json.loads(r.stdout) == {"k": 1.0}
