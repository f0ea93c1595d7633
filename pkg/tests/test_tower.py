from __future__ import annotations

from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entdim import presets
from entdim.errors import EnumerationInfeasible, SpacerPoolOverdrawn
from entdim.schedule import paper_schedule, toy_schedule
from entdim.tower import (
    LevelTag,
    OpKind,
    SpacerPool,
    SpacerTag,
    all_names,
    build,
    column_digits,
    column_from_digits,
    ind,
    initial_tower,
    ins,
    ladder_index,
    ladder_label,
    name_count,
    name_of,
    offset_distribution,
    rep,
    resolve,
    sample_column,
    spacer_mass,
    spacer_offsets,
)


def brute_name(W, col) -> str:
    """Name by resolving each level to W_0 one at a time."""
    out = []
    for level in range(W.height):
        tag = resolve(W, col, level)
        out.append("s" if isinstance(tag, SpacerTag) else str(tag.col))
    return "".join(out)


# basic operations


def test_initial_tower():
    W0 = initial_tower(Fraction(6, 7))
    assert W0.count == 2 and W0.height == 1
    assert W0.width == Fraction(3, 7) and W0.measure == Fraction(6, 7)
    W1 = initial_tower(Fraction(1))
    assert SpacerPool(1 - W1.measure).total == 0


def test_ind_example():
    W = ind(initial_tower(Fraction(1)), 2)
    assert (W.count, W.height) == (4, 2)
    assert sorted(all_names(W)) == ["00", "01", "10", "11"]
    assert W.measure == 1


def test_ind_e1_same_shape():
    W0 = initial_tower(Fraction(1, 2))
    W = ind(W0, 1)
    assert (W.count, W.height, W.measure) == (W0.count, W0.height, W0.measure)
    assert all_names(W) == all_names(W0)


def test_rep_example():
    W = ind(initial_tower(Fraction(1)), 2)
    R = rep(W, 3)
    assert (R.count, R.height) == (4, 6)
    assert R.width == W.width / 3
    assert rep(W, 1).height == W.height
    for c in range(W.count):
        assert name_of(R, c) == name_of(W, c) * 3


def test_rep_name_0101():
    W = ind(initial_tower(Fraction(1)), 2)
    assert name_of(rep(W, 2), 1) == "0101"


def test_ins_hand_example():
    W0 = initial_tower(Fraction(1, 4))
    pool = SpacerPool(Fraction(3, 4))
    T = ins(W0, 1, 2, pool)
    assert T.count == 4 and T.height == 3
    # digits (i_1, i_2), leading spacers (i_2 + 1) mod 2 with 1-based i_2
    names = {column_digits(T, c): name_of(T, c) for c in range(T.count)}
    assert names == {(0, 0): "s0s", (0, 1): "0ss", (1, 0): "s1s", (1, 1): "1ss"}
    assert 2 <= len(set(names.values())) <= 4
    assert T.measure == Fraction(1, 4) * (1 + Fraction(2, 1))
    assert pool.consumed == Fraction(1, 2)


def test_ins_overdraw():
    pool = SpacerPool(Fraction(0))
    with pytest.raises(SpacerPoolOverdrawn, match="overdrawn"):
        ins(initial_tower(Fraction(1)), 2, 1, pool)


def test_bad_parameters():
    W0 = initial_tower(Fraction(1))
    with pytest.raises(ValueError):
        ind(W0, 0)
    with pytest.raises(ValueError):
        rep(W0, 0)
    with pytest.raises(ValueError):
        initial_tower(Fraction(0))


# resolve


def test_resolve_ind_example():
    W1 = ind(initial_tower(Fraction(1)), 2)
    col = column_from_digits(W1, (0, 1))
    tag = resolve(W1, col, 0)
    assert tag == LevelTag("W0", 0, 0)
    assert resolve(W1, col, 1) == LevelTag("W0", 1, 0)


def test_resolve_identity_at_own_stage():
    W1 = ind(initial_tower(Fraction(1)), 2)
    assert resolve(W1, 3, 1, W1) == LevelTag(W1.label, 3, 1)


def test_resolve_spacer_tag():
    W0 = initial_tower(Fraction(1, 4))
    T = ins(W0, 1, 2, SpacerPool(Fraction(3, 4)), event=7)
    col = column_from_digits(T, (0, 0))  # name s0s
    assert resolve(T, col, 0) == SpacerTag(7, 1, 0)
    assert resolve(T, col, 1) == LevelTag("W0", 0, 0)
    assert resolve(T, col, 2) == SpacerTag(7, 1, 2)


def test_resolve_rejects_bad_positions():
    W1 = ind(initial_tower(Fraction(1)), 2)
    with pytest.raises(ValueError):
        resolve(W1, 4, 0)
    with pytest.raises(ValueError):
        resolve(W1, 0, 2)
    other = ind(initial_tower(Fraction(1)), 2)
    with pytest.raises(ValueError):
        resolve(W1, 0, 0, other)


def test_names_match_level_resolution():
    for s in presets.names_toys():
        for t in build(s).towers:
            if t.cells <= 20000:
                for c in range(0, t.count, max(1, t.count // 64)):
                    assert name_of(t, c) == brute_name(t, c)


def test_ins_names_have_spacers_at_offsets():
    s = toy_schedule([2, 2], [1, 1], [(1, 0, 3)])
    T = build(s).get("W2")
    hP = T.parent.height
    for c in range(T.count):
        word = name_of(T, c)
        for k, ell in enumerate(spacer_offsets(T, c)):
            seg = word[k * (hP + 3):(k + 1) * (hP + 3)]
            assert seg[:ell] == "s" * ell
            assert "s" not in seg[ell:ell + hP]
            assert seg[ell + hP:] == "s" * (3 - ell)


# ladder


def test_ladder_labels():
    assert ladder_index("W3") == 6 and ladder_index("W~3") == 7 and ladder_index("Wt3") == 7
    assert ladder_label(7) == "W~3"
    with pytest.raises(ValueError):
        ladder_index("X3")


def test_build_toy_single_stage():
    ladder = build(toy_schedule([2], [1]))
    assert sorted(all_names(ladder.get("W1"))) == ["00", "01", "10", "11"]


def test_build_matches_schedule():
    for s in presets.measure_schedules():
        ladder = build(s)
        for idx, t in enumerate(ladder.towers):
            st_ = s.stages[idx // 2]
            assert t.height == (st_.h_tilde if idx % 2 else st_.h)
            assert t.c_log2 == st_.c_log2
            assert t.measure == st_.xi


def test_build_upto_and_depth_limits():
    s = paper_schedule("1/2", depth=4)
    ladder = build(s, "W3")
    assert ladder.top.label == "W3"
    with pytest.raises(ValueError):
        build(s, "W5")


def test_count_laws():
    for s in presets.measure_schedules():
        for t in build(s).towers[1:]:
            P = t.parent
            if t.op.kind is OpKind.IND:
                assert t.c_log2 == P.c_log2 * t.op.e
            elif t.op.kind is OpKind.REP:
                assert t.c_log2 == P.c_log2
            else:
                assert t.c_log2 == P.c_log2 * (t.op.e + 1)


def test_measure_conservation_and_pool():
    for s in presets.measure_schedules():
        ladder = build(s)
        draws = dict(ladder.pool.draws)
        for t in ladder.towers[1:]:
            added = t.measure - t.parent.measure
            if t.op.kind is OpKind.INS:
                assert added == draws[t.op.event]
            else:
                assert added == 0
        assert ladder.top.measure + ladder.pool.remaining == 1
        assert 0 <= ladder.pool.consumed <= ladder.pool.total
        assert spacer_mass(ladder.top) == ladder.pool.consumed


def test_equal_widths_materialized():
    # every column of an enumerable tower carries the same width, and the
    # widths add back to the measure
    for s in presets.names_toys():
        for t in build(s).towers:
            if t.enumerable():
                widths = Counter(t.width for _ in range(t.count))
                assert len(widths) == 1
                assert t.width * t.count * t.height == t.measure


def test_resolve_reproduces_level_measures():
    ladder = build(toy_schedule([2, 2], [1, 1], [(1, 0, 3)]))
    W = ladder.top
    for ref in ladder.towers[:3]:
        mass = Counter()
        spacer = Fraction(0)
        for c in range(W.count):
            for level in range(W.height):
                tag = resolve(W, c, level, ref)
                if isinstance(tag, SpacerTag):
                    spacer += W.width
                else:
                    mass[(tag.col, tag.level)] += W.width
        assert set(mass.values()) == {ref.width}
        assert len(mass) == ref.count * ref.height
        assert spacer == W.measure - ref.measure


# names


def test_name_count_bounds_on_ins():
    cases = []
    for s in presets.names_toys():
        cases += [t for t in build(s).towers if t.op.kind is OpKind.INS and t.enumerable()]
    assert cases
    for T in cases:
        P, e = T.parent, T.op.e
        assert name_count(P) ** e <= name_count(T) <= P.count ** (e + 1)


def test_name_dump_budget():
    W = build(paper_schedule("1/2", depth=3)).get("W3")
    with pytest.raises(EnumerationInfeasible):
        all_names(W)


@given(st.integers(min_value=1, max_value=3), st.integers(min_value=1, max_value=5), st.integers(min_value=1, max_value=3))
@settings(max_examples=30, deadline=None)
def test_offset_distribution_uniform_within_bound(e, h_star, stage):
    P = initial_tower(Fraction(1, 16))
    for _ in range(stage - 1):
        P = ind(P, 2)
    T = ins(P, e, h_star, SpacerPool(Fraction(15, 16)))
    dist = offset_distribution(T)
    assert sum(dist.values()) == 1
    c = P.count
    for ell, f in dist.items():
        assert abs(f * h_star - 1) <= Fraction(h_star, c)
    # exact counting agrees with the closed form
    counts = Counter()
    for col in range(T.count):
        counts[spacer_offsets(T, col)[0]] += 1
    assert {k: Fraction(v, T.count) for k, v in counts.items()} == {k: v for k, v in dist.items() if v}


# sampling columns


def test_sample_column_uniform_and_deterministic():
    W1 = ind(initial_tower(Fraction(1)), 2)
    n = 100_000
    counts = Counter(sample_column(W1, seed) for seed in range(n))
    assert all(abs(counts[c] / n - 0.25) <= 0.01 for c in range(4))
    expected = n / 4
    chi2 = sum((counts[c] - expected) ** 2 / expected for c in range(4))
    assert chi2 < 16.27  # chi-square, 3 degrees of freedom, p = 0.001
    assert [sample_column(W1, s) for s in range(50)] == [sample_column(W1, s) for s in range(50)]


def test_sample_column_large_tower():
    W = build(paper_schedule("1/2", depth=4)).get("W4")
    c = sample_column(W, 11)
    assert 0 <= c < W.count
    assert resolve(W, c, W.height - 1) is not None
