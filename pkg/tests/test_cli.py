from __future__ import annotations

import csv
import io
import json
import math
import shutil
import subprocess
import sys

import pytest

from entdim import cli


def run(capsys, *argv) -> tuple[int, str, str]:
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def half(tmp_path, capsys):
    path = tmp_path / "half.json"
    code, _, _ = run(capsys, "schedule", "--tau", "1/2", "--depth", "4", "--out", str(path))
    assert code == 0
    return str(path)


@pytest.fixture
def toy(tmp_path, capsys):
    path = tmp_path / "toy.json"
    code, _, _ = run(capsys, "schedule", "--toy", "e=2,2", "r=1,1", "--insertions", "1:0:3",
                     "--out", str(path))
    assert code == 0
    return str(path)


def test_schedule_json(half):
    d = json.loads(open(half).read())
    assert d["C_tau"] == "3" and d["xi"] == "5832/5833"
    assert all(v["condition3"] for v in d["validation"])


def test_schedule_usage_errors(capsys):
    assert run(capsys, "schedule", "--tau", "3/2", "--out", "-")[0] == cli.EXIT_USAGE
    assert run(capsys, "schedule", "--tau", "abc", "--out", "-")[0] == cli.EXIT_USAGE
    assert run(capsys, "schedule", "--out", "-")[0] == cli.EXIT_USAGE
    assert run(capsys, "schedule", "--toy", "e=2", "--out", "-")[0] == cli.EXIT_USAGE
    assert run(capsys, "schedule", "--tau", "1/2", "--insertions", "3", "--out", "-")[0] == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        cli.main(["schedule", "--depth", "x"])
    assert exc.value.code == cli.EXIT_USAGE


def test_schedule_degeneracy_exit(capsys):
    code, _, err = run(capsys, "schedule", "--tau", "1/2", "--C", "1", "--depth", "3", "--out", "-")
    assert code == cli.EXIT_DEGENERATE and "degeneracy" in err


def test_build_names_and_pool(toy, capsys):
    code, out, _ = run(capsys, "build", "--schedule", toy, "--dump-names")
    assert code == 0
    d = json.loads(out)
    assert sorted(d["names"]["W1"]) == ["00", "01", "10", "11"]
    assert d["names_refused_over_budget"] == []
    assert [t["label"] for t in d["towers"]][:2] == ["W0", "W~0"]


def test_build_refuses_large_names(half, capsys):
    code, out, _ = run(capsys, "build", "--schedule", half, "--upto", "W4", "--dump-names")
    assert code == 0
    d = json.loads(out)
    assert "W4" in d["names_refused_over_budget"]


def test_build_overdrawn_exit(half, capsys):
    code, _, err = run(capsys, "build", "--schedule", half, "--xi", "1")
    assert code == cli.EXIT_OVERDRAWN and "overdrawn" in err


def test_build_missing_schedule(tmp_path, capsys):
    assert run(capsys, "build", "--schedule", str(tmp_path / "nope.json"))[0] == cli.EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert run(capsys, "build", "--schedule", str(bad))[0] == cli.EXIT_USAGE


def read_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def test_entropy_exact_vs_sampled(toy, capsys):
    base = ["entropy", "--schedule", toy, "--tower", "W2", "--partition", "symbols",
            "--seq", "nat", "--nmax", "5"]
    code, out, _ = run(capsys, *base)
    assert code == 0
    exact = read_csv(out)
    assert [r["s_n"] for r in exact] == ["1", "2", "3", "4", "5"]
    code, out, _ = run(capsys, *base, "--mode", "sample", "--samples", "100000", "--seed", "3")
    assert code == 0
    sampled = read_csv(out)
    for a, b in zip(exact, sampled):
        assert abs(float(a["H_n"]) - float(b["H_n"])) <= 0.05
        assert float(b["H_n"]) <= math.log2(int(b["name_count"]))


def test_entropy_errors(toy, half, capsys):
    base = ["entropy", "--schedule", toy, "--tower", "W2", "--seq", "nat"]
    assert run(capsys, *base, "--partition", "symbols", "--nmax", "500")[0] == cli.EXIT_SHALLOW
    assert run(capsys, *base, "--partition", "bogus", "--nmax", "3")[0] == cli.EXIT_USAGE
    assert run(capsys, *base, "--partition", "symbols", "--nmax", "3", "--mode", "sample")[0] == cli.EXIT_USAGE
    assert run(capsys, "entropy", "--schedule", toy, "--tower", "W9", "--partition", "symbols",
               "--seq", "nat", "--nmax", "2")[0] == cli.EXIT_USAGE


def test_entropy_ft_on_paper_tower(half, capsys):
    code, out, _ = run(capsys, "entropy", "--schedule", half, "--tower", "W4",
                       "--partition", "cells:W2:0.0,1.1", "--seq", "ft:sched:1", "--nmax", "4",
                       "--mode", "sampled", "--samples", "20000", "--seed", "1")
    assert code == 0
    rows = read_csv(out)
    assert rows[0]["s_n"] == "0" and len(rows) == 4


def test_verify_ok_and_failure(capsys, monkeypatch):
    code, out, _ = run(capsys, "verify", "--suite", "names")
    assert code == 0 and json.loads(out)["passed"]

    def failing(suite, opts):
        return {"schema_version": 1, "passed": False,
                "suites": {"names": {"passed": False, "seconds": 0.0,
                                     "checks": [{"name": "x", "passed": False, "detail": {}}]}}}

    monkeypatch.setattr(cli, "run", failing)
    code, _, err = run(capsys, "verify", "--suite", "names")
    assert code == cli.EXIT_VERIFY and "FAIL [names] x" in err


def test_dims_sequence(capsys):
    code, out, _ = run(capsys, "dims", "--seq", "squares", "--nmax", "100000")
    assert code == 0
    d = json.loads(out)
    assert 0.48 <= d["lower"] <= d["upper"] <= 0.52
    assert run(capsys, "dims", "--seq", "nonsense")[0] == cli.EXIT_USAGE
    assert run(capsys, "dims")[0] == cli.EXIT_USAGE


def test_dims_partition(toy, capsys):
    code, out, _ = run(capsys, "dims", "--schedule", toy, "--tower", "W2", "--partition", "symbols",
                       "--seq", "nat", "--profile-n", "8")
    assert code == 0
    d = json.loads(out)
    assert d["tower"] == "W2" and d["partition"]["kind"] == "symbols"
    assert d["candidates"][0]["name"] == "nat"
    assert run(capsys, "dims", "--partition", "symbols")[0] == cli.EXIT_USAGE


@pytest.mark.skipif(shutil.which("entdim") is None, reason="console script not installed")
def test_console_script(tmp_path):
    r = subprocess.run(["entdim", "schedule", "--tau", "1/2", "--C", "1", "--out", "-"],
                       capture_output=True, text=True)
    assert r.returncode == 2
    r = subprocess.run([sys.executable, "-m", "entdim.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "entdim" in r.stdout
