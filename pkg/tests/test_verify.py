from __future__ import annotations

import json

import pytest

from entdim.verify import SUITES, SuiteOptions, fr, run


def test_all_suites_pass():
    report = run("all", SuiteOptions(samples=100_000))
    assert json.loads(json.dumps(report)) == report
    assert set(report["suites"]) == set(SUITES)
    failed = [
        (name, c["name"]) for name, s in report["suites"].items() for c in s["checks"] if not c["passed"]
    ]
    assert not failed
    assert report["passed"]


def test_single_suite_and_unknown():
    report = run("names")
    assert list(report["suites"]) == ["names"]
    assert all(c["detail"] is not None for c in report["suites"]["names"]["checks"])
    with pytest.raises(ValueError):
        run("everything")


def test_lowerbound_without_sampling():
    report = run("lowerbound", SuiteOptions(sampled=False))
    names = [c["name"] for c in report["suites"]["lowerbound"]["checks"]]
    assert names and all(n.startswith("toy") for n in names)


def test_fraction_strings():
    assert fr(3) == "3" and fr(0.5) == "1/2"
