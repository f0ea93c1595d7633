from __future__ import annotations

import json
import math

import pytest

from entdim import presets
from entdim.entropy import entropy_profile
from entdim.estimator import (
    Candidate,
    EstimatorConfig,
    candidate_ft,
    candidate_seq,
    default_candidates,
    name_growth_fit,
    oracle_from_tower,
    partition_dim_estimate,
    stage_number,
    verify_fact_a,
    verify_lower_bound,
)
from entdim.partition import symbol_partition, two_cell
from entdim.seqdim import explicit, naturals, squares
from entdim.tower import build


def test_lower_bound_toy_exact():
    ladder = build(presets.lower_bound_toy())
    alpha = two_cell(ladder.get("W1"), presets.LOWER_BOUND_CELLS)
    rep = verify_lower_bound(ladder, ladder.top, alpha, 1, 8, mode="exact")
    assert rep.hypothesis_met
    assert rep.passed and len(rep.rows) == 8
    assert all(r["H_m"] >= r["bound"] for r in rep.rows)
    d = rep.as_dict()
    assert d["mu_A"] == str(alpha.cell_measure(0)) and json.dumps(d)


def test_lower_bound_hypothesis_reported_when_unmet():
    ladder = build(presets.lower_bound_toy())
    big = two_cell(ladder.get("W1"), [(c, l) for c in range(4) for l in range(2)][:6])
    rep = verify_lower_bound(ladder, ladder.top, big, 1, 3, mode="exact")
    assert not rep.hypothesis["mu_A_at_most_half_xi_ell"]
    assert not rep.hypothesis_met


def test_candidates():
    ladder = build(presets.paper_w4())
    W = ladder.get("W4")
    c = candidate_seq("squares", squares(), W, 10)
    assert c.offsets == [0, 1, 4, 9, 16, 25, 36, 49, 64, 81]
    short = candidate_seq("sq", explicit([1, 4, 9]), W, 10, with_zero=False)
    assert short.offsets == [1, 4, 9]
    ft = candidate_ft(ladder.schedule, 1, W)
    assert ft.offsets[0] == 0 and ft.offsets[-1] < W.height
    names = [c.name for c in default_candidates(ladder.schedule, W, 12)]
    assert names == ["F^1", "nat", "squares"]
    assert stage_number("W~3") == 3


def test_dim_report_on_toy():
    ladder = build(presets.names_toys()[3])
    W = ladder.top
    alpha = symbol_partition(ladder.towers[0])
    cands = [candidate_seq("nat", naturals(), W, 12), Candidate("one", [0], None)]
    cfg = EstimatorConfig(mode="exact", n_max=12, dims_n_max=10**4)
    rep = partition_dim_estimate(W, alpha, cands, cfg)
    assert rep.candidates[1].fits is False
    nat = rep.candidates[0]
    assert nat.fits and nat.n_points == 12 and nat.dims["lower"] >= 0.99
    for p in nat.profile.points:
        assert p.H <= math.log2(p.name_count)
    d = json.loads(rep.to_json())
    assert d["schema_version"] == 1 and d["status"] in ("ok", "inconclusive")
    assert partition_dim_estimate(W, alpha, []).status == "empty"


def test_name_growth_fit():
    ladder = build(presets.names_toys()[3])
    alpha = symbol_partition(ladder.towers[0])
    prof = entropy_profile(ladder.top, alpha, list(range(12)))
    fit = name_growth_fit(prof)
    assert fit is not None and fit["tail_n"][1] == 12
    assert fit["tau_hat_min"] <= fit["tau_hat_max"]
    short = entropy_profile(ladder.top, alpha, [0])
    assert name_growth_fit(short) is None


def test_fact_a_on_independent_bits():
    # every index carries one fresh bit
    oracle = lambda idx: float(len(idx))  # noqa: E731
    rep = verify_fact_a(oracle, [4, 20], b=1.0, H_alpha=1.0)
    assert rep.passed
    assert rep.c == pytest.approx(1 / 8) and rep.d == pytest.approx(1 / 64)
    assert rep.blocks[0]["selected"] == [1, 2, 3, 4]
    assert rep.hypothesis["entropy_generating_prefixes"]


def test_fact_a_argument_checks():
    oracle = lambda idx: float(len(idx))  # noqa: E731
    with pytest.raises(ValueError):
        verify_fact_a(oracle, [], 1.0, 1.0)
    with pytest.raises(ValueError):
        verify_fact_a(oracle, [3, 2], 1.0, 1.0)
    with pytest.raises(ValueError):
        verify_fact_a(oracle, [3], 5.0, 1.0)
    with pytest.raises(ValueError):
        verify_fact_a(oracle, [25], 1.0, 1.0)


def test_fact_a_with_tower_oracle():
    ladder = build(presets.names_toys()[3])
    W = ladder.top
    alpha = symbol_partition(ladder.towers[0])
    terms = list(range(1, 13))
    oracle = oracle_from_tower(W, alpha, terms)
    assert oracle(frozenset()) == 0.0
    h1 = oracle(frozenset({1}))
    rep = verify_fact_a(oracle, [6], b=0.4, H_alpha=h1)
    assert rep.blocks[0]["hereditary_verified"]
    assert rep.passed == (not rep.failures and bool(rep.F_indices))
