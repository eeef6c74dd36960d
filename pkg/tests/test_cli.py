import json
import math
import subprocess
import sys

import numpy as np
import pytest

from specrule import opuc, serialize
from specrule.cli import EXIT_FAIL, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from specrule.errors import NumericalError


def write(path, obj):
    path.write_text(serialize.dumps(obj))
    return str(path)


@pytest.fixture
def half(tmp_path):
    return write(tmp_path / "a.json", opuc.VerblunskySeq([0.5]))


def test_szego_report(half, tmp_path, capsys):
    rep = tmp_path / "rep.json"
    assert main(["sumrule", "szego", "--in", half, "--report", str(rep)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "0.287682" in out and "measure side" in out
    r = serialize.load(rep)
    assert abs(r.measure_side - math.log(4 / 3)) < 1e-7
    assert abs(r.coefficient_side - math.log(4 / 3)) < 1e-12
    assert abs(r.difference) < 1e-7


def test_sample_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert main(["sample", "cue-alpha", "--n", "1", "--count", "3", "--seed", "7",
                     "--out", str(p)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    samples = serialize.load(a)
    assert len(samples) == 3
    # n = 1 gives one unit-modulus coefficient per draw, all different
    coeffs = [s.payload.coeffs[0] for s in samples]
    assert all(abs(abs(c) - 1) < 1e-15 for c in coeffs)
    assert len(set(coeffs)) == 3


def test_sample_count_is_prefix_stable(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["sample", "haar", "--n", "3", "--count", "2", "--seed", "1", "--out", str(a)])
    main(["sample", "haar", "--n", "3", "--count", "4", "--seed", "1", "--out", str(b)])
    first = json.loads(a.read_text())
    assert json.loads(b.read_text())[:2] == first


@pytest.mark.parametrize("kind", ["cue-alpha", "cue-measure", "gue", "haar"])
def test_sample_kinds(kind, tmp_path):
    out = tmp_path / "s.json"
    assert main(["sample", kind, "--n", "4", "--seed", "3", "--out", str(out)]) == EXIT_OK
    s = serialize.load(out)
    assert s.n == 4 and s.seed == 3


def test_exp_tail(tmp_path, capsys):
    out = tmp_path / "tail.csv"
    code = main(["ldp", "exp-tail", "--t", "2", "--n", "50,100,200", "--samples", "100000",
                 "--seed", "1", "--out", str(out)])
    assert code == EXIT_OK
    cols, rate, _ = serialize.read_rate_estimate_csv(out.read_text())
    assert cols["N"] == [50, 100, 200]
    assert abs(rate - (1 - math.log(2))) / (1 - math.log(2)) <= 0.10


def test_transform_round_trip(tmp_path):
    a = opuc.VerblunskySeq([0.3 + 0.1j, -0.2, 1j], opuc.TERMINATED)
    src, mid, back = write(tmp_path / "a.json", a), tmp_path / "m.json", tmp_path / "b.json"
    assert main(["transform", "alpha-to-measure", "--in", src, "--out", str(mid)]) == EXIT_OK
    assert serialize.load(mid).n_atoms == 3
    assert main(["transform", "measure-to-alpha", "--in", str(mid), "--out", str(back)]) == 0
    np.testing.assert_allclose(serialize.load(back).coeffs, a.coeffs, atol=1e-12)


def test_jacobi_transforms(tmp_path):
    src = tmp_path / "j.json"
    src.write_text('{"v": 1, "type": "JacobiParams", "a": [0.8, 1.2], "b": [0.1, 0.0, -0.3]}')
    mid, back = tmp_path / "m.json", tmp_path / "b.json"
    assert main(["transform", "jacobi-to-measure", "--in", str(src), "--out", str(mid)]) == 0
    assert main(["transform", "measure-to-jacobi", "--in", str(mid), "--out", str(back)]) == 0
    j = serialize.load(back)
    np.testing.assert_allclose(j.a, [0.8, 1.2], atol=1e-12)
    np.testing.assert_allclose(j.b, [0.1, 0.0, -0.3], atol=1e-12)


def test_ks_from_perturbation(tmp_path, capsys):
    src = tmp_path / "p.json"
    src.write_text('{"v": 1, "type": "FiniteRankPerturbation", "prefix": {"a": [1.5], "b": [0.5]}}')
    assert main(["sumrule", "ks", "--in", str(src)]) == EXIT_OK
    assert "difference" in capsys.readouterr().out


def test_binned(tmp_path):
    mu = tmp_path / "m.json"
    write(mu, opuc.verblunsky_to_measure(opuc.VerblunskySeq([0.2, 1.0], opuc.TERMINATED)))
    out = tmp_path / "b.csv"
    assert main(["ldp", "binned", "--in", str(mu), "--jmax", "3", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "j,total,mass_part,entropy_part"
    assert lines[1].startswith("0,0,")
    # two atoms cannot fill 8 bins
    assert lines[-1].split(",")[1] == "inf"


def test_binned_rejects_line_measure(tmp_path):
    mu = tmp_path / "m.json"
    mu.write_text('{"v": 1, "type": "SpectralMeasure", "domain": "line", '
                  '"atoms": [{"pos": 0.0, "weight": 1.0}], "ac": null}')
    assert main(["ldp", "binned", "--in", str(mu), "--jmax", "2",
                 "--out", str(tmp_path / "b.csv")]) == EXIT_USAGE


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["sample", "gue", "--n", "0", "--seed", "1", "--out", "x"],
    ["sample", "gue", "--n", "3", "--seed", "1", "--out", "x", "--extra"],
    ["ldp", "exp-tail", "--t", "2", "--n", "100,50", "--samples", "5000", "--seed", "1",
     "--out", "x"],
    ["ldp", "exp-tail", "--t", "2", "--n", "50", "--samples", "10", "--seed", "1", "--out", "x"],
    ["ldp", "exp-tail", "--t", "-1", "--n", "50", "--samples", "5000", "--seed", "1",
     "--out", "x"],
    ["ldp", "binned", "--in", "x", "--jmax", "17", "--out", "y"],
    ["check", "all", "--tol-scale", "0"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_bad_inputs(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"v": 1,\n "type": }')
    assert main(["sumrule", "szego", "--in", str(bad)]) == EXIT_USAGE
    assert "line 2" in capsys.readouterr().err
    bad.write_text('{"v": 7, "type": "VerblunskySeq", "kind": "interior", "coeffs": []}')
    assert main(["sumrule", "szego", "--in", str(bad)]) == EXIT_USAGE
    assert main(["sumrule", "szego", "--in", str(tmp_path / "missing.json")]) == EXIT_USAGE
    wrong = write(tmp_path / "j.json", serialize.loads(
        '{"v": 1, "type": "JacobiParams", "a": [], "b": [0.0]}'))
    assert main(["sumrule", "szego", "--in", wrong]) == EXIT_USAGE
    assert "expected VerblunskySeq" in capsys.readouterr().err


def test_numerical_failure_exit(monkeypatch, half, capsys):
    from specrule import sumrules

    def boom(*args, **kw):
        raise NumericalError("did not converge", operation="entropy_ac")

    monkeypatch.setattr(sumrules, "szego_report", boom)
    assert main(["sumrule", "szego", "--in", half]) == EXIT_NUMERIC
    assert "entropy_ac" in capsys.readouterr().err


def test_check_all_exit_codes(monkeypatch, capsys):
    from specrule import checks
    assert main(["check", "all"]) == EXIT_OK
    assert "checks passed" in capsys.readouterr().out
    # a tolerance scale this small makes the exact-arithmetic checks fail
    assert main(["check", "all", "--tol-scale", "1e-300"]) == EXIT_FAIL

    def numerical(s):
        raise NumericalError("stuck", operation="measure_to_jacobi")

    monkeypatch.setattr(checks, "_CHECKS", [("oprl", "broken", numerical)])
    assert main(["check", "all"]) == EXIT_NUMERIC
    assert "measure_to_jacobi" in capsys.readouterr().out


def test_module_entry_point(half):
    proc = subprocess.run([sys.executable, "-m", "specrule", "sumrule", "szego", "--in", half],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "0.287682" in proc.stdout
