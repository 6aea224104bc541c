import json
import subprocess
import sys
from pathlib import Path

import pytest

from cat0kit.cli import run
from cat0kit.config import load_defaults
from cat0kit.errors import InputError

DATA = Path(__file__).resolve().parent.parent / "data"
FAST = ["--cap", "3000"]


def call(capsys, *argv):
    code = run([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_biquadrant(capsys):
    code, out, _ = call(capsys, "check", "--space", "biquadrant", "--trials", 10_000, "--seed", 1, "--tol", 1e-9)
    rep = json.loads(out)
    assert code == 0
    assert rep["defect_min"] >= -1e-9
    assert rep["flatness"]["flat"] is False


def test_check_product_flat(capsys):
    code, out, _ = call(capsys, "check", "--space", "product(euclidean:1,euclidean:2)", "--trials", 2000)
    assert code == 0 and json.loads(out)["flatness"]["flat"] is True


def test_degree_square(capsys):
    code, out, _ = call(capsys, "degree", "--input", DATA / "square.json", *FAST)
    rep = json.loads(out)
    assert code == 0 and rep["degree"] == 2
    assert rep["hull_check"]["ok"]


def test_mean_closed(capsys):
    code, out, _ = call(capsys, "mean", "--input", DATA / "triangle.json", "--method", "closed", *FAST)
    rep = json.loads(out)
    assert code == 0
    assert [round(c, 4) for c in rep["minimizer"]] == [0.6667, 0.6667]
    assert rep["certificate"]["passed"]


def test_mean_inductive_cycle(capsys):
    code, out, _ = call(capsys, "mean", "--input", DATA / "triangle.json", "--method", "inductive",
                        "--order", "cycle", "--iters", 2, "--no-certify")
    rep = json.loads(out)
    assert code == 0 and rep["certificate"] is None
    assert max(abs(c - 2 / 3) for c in rep["minimizer"]) <= 1e-12


def test_mean_search_biquadrant(capsys):
    code, out, _ = call(capsys, "mean", "--input", DATA / "biquadrant_mean.json", *FAST)
    rep = json.loads(out)
    assert code == 0 and rep["minimizer"]["quadrant"] == "plus"
    assert abs(rep["objective"] - 16 / 3) <= 5e-3


def test_median(capsys):
    code, out, _ = call(capsys, "median", "--input", DATA / "segment_ends.json")
    rep = json.loads(out)
    assert code == 0 and rep["method"] == "search-median" and rep["near_tie"] is True


def test_thread_writes_outputs(capsys, tmp_path):
    out_cloud, out_csv = tmp_path / "c.json", tmp_path / "r.csv"
    code, out, _ = call(capsys, "thread", "--input", DATA / "segment_ends.json", "--iters", 1, "--grid", 3,
                        "--out", out_cloud, "--csv", out_csv)
    assert code == 0
    assert sorted(p[0] for p in json.loads(out_cloud.read_text())["points"]) == [0.0, 1.0, 2.0]
    assert out_csv.read_text().splitlines()[0] == "n,size,gap,millis"
    assert json.loads(out)["iterations"][0]["size"] == 3


def test_hull(capsys, tmp_path):
    code, out, _ = call(capsys, "hull", "--input", DATA / "segment_ends.json", "--out", tmp_path / "h.json")
    assert code == 0 and json.loads(out)["stabilized"] is True


def test_algebra(capsys):
    code, out, _ = call(capsys, "algebra", "--s1", DATA / "segment_ends.json", "--s2", DATA / "midpoint.json")
    rep = json.loads(out)
    assert code == 0 and rep["ok"] and rep["strict_intersection"] == [[1.0]]


def test_converge(capsys, tmp_path):
    target = tmp_path / "seg.json"
    target.write_text(json.dumps({"space": {"kind": "euclidean", "dim": 1},
                                  "points": [[i / 20] for i in range(21)]}))
    code, out, _ = call(capsys, "converge", "--target", target, "--steps", 3, *FAST)
    assert code == 0 and json.loads(out)["reached"]


def test_failure_exit_code_with_witness(capsys):
    # a negative tolerance cannot be met, which exercises the failure path
    code, out, _ = call(capsys, "check", "--space", "biquadrant", "--trials", 100, "--tol", -1)
    rep = json.loads(out)
    assert code == 1 and rep["ok"] is False
    assert rep["flatness"]["witness"]["defect"] > -1


def test_input_errors_exit_2(capsys, tmp_path):
    assert call(capsys, "check", "--space", "sphere")[0] == 2
    assert call(capsys, "degree", "--input", tmp_path / "missing.json")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"space": {"kind": "biquadrant"}, "points": [{"quadrant": "plus", "xy": [1, -1]}]}')
    code, _, err = call(capsys, "thread", "--input", bad)
    assert code == 2 and "error" in err
    assert call(capsys, "nosuch")[0] == 2
    assert call(capsys)[0] == 2
    assert call(capsys, "degree", "--input", DATA / "square.json", "--eps", "0")[0] == 2


def test_byte_identical_output(capsys):
    argv = ["thread", "--input", DATA / "square.json", "--iters", 2, "--grid", 9, "--cap", 300, "--seed", 5]
    a = call(capsys, *argv)[1]
    b = call(capsys, *argv)[1]
    assert a == b


def test_env_defaults(monkeypatch):
    monkeypatch.setenv("CAT0_GRID_K", "17")
    monkeypatch.setenv("CAT0_EPS", "0.05")
    d = load_defaults()
    assert d.grid_k == 17 and d.eps == 0.05 and d.cap == 20_000
    monkeypatch.setenv("CAT0_CAP", "lots")
    with pytest.raises(InputError):
        load_defaults()
    assert run(["check", "--space", "biquadrant", "--trials", "10"]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cat0kit", "check", "--space", "euclidean:2", "--trials", "100"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["ok"] is True
