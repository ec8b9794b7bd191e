import json

import numpy as np
import pytest

from vndilate.cli import main
from vndilate.dilation import DilationResult, verify_power_dilation
from vndilate.polynomials import MatrixPolynomial
from vndilate.tuples import CommutingTuple, build_counterexample


def run(tmp_path, *argv, out="out.json"):
    path = tmp_path / out
    code = main([*argv, "--out", str(path)])
    text = path.read_text() if path.exists() else ""
    return code, text


def test_construct_roundtrip(tmp_path):
    code, text = run(tmp_path, "construct", "--theta1", "0.3", "--theta2", "1.1")
    assert code == 0
    T = CommutingTuple.from_dict(json.loads(text))
    ref = build_counterexample()
    assert len(T) == 4
    assert T.meta["theta1"] == pytest.approx(0.3)
    assert not np.array_equal(T[2], ref[2])
    code2, text2 = run(tmp_path, "construct", "--theta1", "0.3", "--theta2", "1.1", out="again.json")
    assert text2 == text


def test_construct_rejects_bad_angle(tmp_path, capsys):
    code, _ = run(tmp_path, "construct", "--theta1", "0")
    assert code == 2
    assert "construct" in capsys.readouterr().err


def test_certify_failure_default(tmp_path):
    code, text = run(tmp_path, "certify-failure")
    rep = json.loads(text)
    assert code == 0 and rep["status"] == "pass"
    assert rep["lhs"] == pytest.approx(2, abs=1e-12)
    assert rep["sup_certified_upper"] < 2 and rep["margin"] > 0
    assert "Arveson" in rep["claim"]


def test_certify_failure_from_file(tmp_path):
    main(["construct", "--theta1", "0.6", "--theta2", "0.9", "--out", str(tmp_path / "t.json")])
    code, text = run(tmp_path, "certify-failure", "--in", str(tmp_path / "t.json"))
    rep = json.loads(text)
    assert code == 0 and rep["params"]["theta1"] == pytest.approx(0.6)


def test_certify_failure_coarse_mesh(tmp_path):
    code, text = run(tmp_path, "certify-failure", "--mesh", "8", "--refine-iters", "0")
    rep = json.loads(text)
    assert code in (0, 3)
    assert (code == 3) == (rep["status"] == "inconclusive")


def test_check_vn_random(tmp_path):
    code, text = run(tmp_path, "check-vn", "--random", "20", "--degree", "3", "--mesh", "32")
    rep = json.loads(text)
    assert code == 0 and rep["status"] == "pass"
    assert rep["aggregate"]["count"] == 20 and rep["aggregate"]["satisfied"] == 20
    assert rep["aggregate"]["min_gap"] >= 0


def test_check_vn_poly_file(tmp_path):
    poly = tmp_path / "p.json"
    poly.write_text(json.dumps(MatrixPolynomial.scalar(4, {(1, 0, 0, 0): 1.0}).to_dict()))
    code, text = run(tmp_path, "check-vn", "--poly", str(poly))
    rep = json.loads(text)
    assert code == 0
    assert rep["reports"][0]["lhs"] == pytest.approx(1)
    assert rep["reports"][0]["satisfied"] == "yes"


def test_check_vn_usage(tmp_path):
    assert run(tmp_path, "check-vn")[0] == 2
    poly = tmp_path / "p.json"
    poly.write_text(json.dumps(MatrixPolynomial.scalar(2, {(1, 0): 1.0}).to_dict()))
    assert run(tmp_path, "check-vn", "--poly", str(poly))[0] == 2


@pytest.mark.parametrize("indices", ["1,2,3", "1,2,4", "1,3,4", "2,3,4"])
def test_dilate_counterexample_triples(tmp_path, indices):
    report = tmp_path / "report.json"
    code, text = run(tmp_path, "dilate", "--indices", indices, "--report", str(report))
    rep = json.loads(report.read_text())
    assert code == 0 and rep["status"] == "pass"
    assert rep["max_error"] <= 1e-12
    R = DilationResult.from_dict(json.loads(text))
    T = build_counterexample().subset([int(i) - 1 for i in indices.split(",")])
    assert verify_power_dilation(R, T).max_error <= 1e-12


def test_dilate_four_is_usage_error(tmp_path, capsys):
    code, _ = run(tmp_path, "dilate")
    assert code == 2
    assert "commuting" in capsys.readouterr().err


def test_dilate_bad_indices(tmp_path):
    assert run(tmp_path, "dilate", "--indices", "1,1,2")[0] == 2
    assert run(tmp_path, "dilate", "--indices", "1,2,x")[0] == 2
    assert run(tmp_path, "dilate", "--indices", "1,2,3", "--window", "4", "--max-degree", "4")[0] == 2


def test_dilate_scaled_tuple_file(tmp_path):
    A = build_counterexample()
    T = CommutingTuple([0.3 * np.eye(3) + 0.5 * A[0], 0.4 * A[1], 0.1j * np.eye(3) + 0.3 * A[2]])
    src = tmp_path / "t.json"
    src.write_text(json.dumps(T.to_dict()))
    report = tmp_path / "r.json"
    code, _ = run(tmp_path, "dilate", "--in", str(src), "--window", "24", "--scale-window", "24",
                  "--max-degree", "3", "--report", str(report))
    rep = json.loads(report.read_text())
    assert code == 0
    assert rep["max_error"] <= rep["tolerance"] and rep["max_error"] <= rep["error_bound"]
    assert rep["unitarity_residual"] <= 1e-11 and rep["commutation_residual"] <= 1e-11


def test_decompose(tmp_path):
    code, text = run(tmp_path, "decompose")
    rep = json.loads(text)
    assert code == 0 and rep["orientation"] == "column"
    assert np.allclose(rep["f"]["re"], [1, 0, 0]) and np.allclose(rep["f"]["im"], [0, 0, 0])
    adj = tmp_path / "adj.json"
    adj.write_text(json.dumps(build_counterexample().adjoint().to_dict()))
    code, text = run(tmp_path, "decompose", "--in", str(adj))
    assert code == 0 and json.loads(text)["orientation"] == "row"


def test_decompose_structure_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(CommutingTuple([np.diag([0.1, 0.2, 0.3]), np.diag([0.3, 0.2, 0.1])]).to_dict()))
    assert run(tmp_path, "decompose", "--in", str(bad))[0] == 4


def test_missing_input_file(tmp_path):
    assert run(tmp_path, "decompose", "--in", str(tmp_path / "nope.json"))[0] == 2


def test_sup_norm(tmp_path):
    poly = tmp_path / "p.json"
    poly.write_text(json.dumps(MatrixPolynomial.scalar(2, {(1, 0): 1.0, (0, 1): 1.0}).to_dict()))
    code, text = run(tmp_path, "sup-norm", "--poly", str(poly), "--mesh", "16")
    rep = json.loads(text)
    assert code == 0 and rep["lower"] == pytest.approx(2, abs=1e-12)
    assert run(tmp_path, "sup-norm")[0] == 2


def test_hunt_deterministic_and_clean(tmp_path, monkeypatch):
    monkeypatch.setenv("VNDILATE_WORKERS", "1")
    argv = ["hunt", "--scheme", "structured-nilpotent", "--trials", "30", "--seed", "7", "--mesh", "32"]
    code, a = run(tmp_path, *argv, out="a.jsonl")
    _, b = run(tmp_path, *argv, out="b.jsonl")
    assert code == 0
    strip = lambda t: [{k: v for k, v in json.loads(line).items() if k != "runtime_ms"} for line in t.splitlines()]
    assert strip(a) == strip(b)
    summary = json.loads(a.splitlines()[-1])["summary"]
    assert summary["violation-candidate"] == 0 and summary["satisfied"] == 30


def test_hunt_workers_match_serial(tmp_path, monkeypatch):
    argv = ["hunt", "--scheme", "poly-of-seed-matrix", "--trials", "8", "--seed", "3", "--mesh", "16"]
    monkeypatch.setenv("VNDILATE_WORKERS", "1")
    _, serial = run(tmp_path, *argv, out="s.jsonl")
    monkeypatch.setenv("VNDILATE_WORKERS", "2")
    _, pooled = run(tmp_path, *argv, out="p.jsonl")
    assert serial.splitlines()[:-1] == pooled.splitlines()[:-1]
    for line in serial.splitlines()[:-1]:
        assert "counterexample" not in line


def test_hunt_bad_workers(tmp_path, monkeypatch):
    monkeypatch.setenv("VNDILATE_WORKERS", "zero")
    assert run(tmp_path, "hunt", "--trials", "2")[0] == 2


def test_argparse_usage_exit():
    with pytest.raises(SystemExit) as info:
        main(["no-such-command"])
    assert info.value.code == 2
