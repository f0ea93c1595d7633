from __future__ import annotations

from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entdim import presets
from entdim.errors import ShallowTower
from entdim.exact import exact_counts, structural_counts, table_counts, window_for
from entdim.partition import level_set_partition, random_union, symbol_partition, two_cell
from entdim.schedule import toy_schedule
from entdim.tower import build, ind, initial_tower, name_of

LADDERS = [build(s) for s in presets.names_toys()]


def brute_counts(W, p, offsets):
    """Pattern counts by reading names of the symbol partition directly."""
    n = window_for(W, offsets)
    out = Counter()
    for c in range(W.count):
        word = name_of(W, c)
        for j in range(n):
            out[tuple(p.names.index(word[j + o]) for o in offsets)] += 1
    return dict(out)


def test_window_rule():
    W1 = ind(initial_tower(Fraction(1)), 2)
    assert window_for(W1, [0, 1]) == 1
    assert window_for(W1, [0]) == 2
    with pytest.raises(ShallowTower):
        window_for(W1, [0, 2])
    with pytest.raises(ShallowTower):
        window_for(W1, [0], window=3)
    with pytest.raises(ValueError):
        window_for(W1, [])


def test_w1_example():
    W1 = ind(initial_tower(Fraction(1)), 2)
    p = symbol_partition(W1.parent)
    counts = exact_counts(W1, p, [0, 1])
    assert counts == {(0, 0): 1, (0, 1): 1, (1, 0): 1, (1, 1): 1}


def test_symbol_counts_match_names():
    for ladder in LADDERS[:3]:
        W = ladder.top
        p = symbol_partition(ladder.towers[0])
        for offs in ([0], [0, 1], [0, 2, 3], [1, W.height - 1]):
            want = brute_counts(W, p, offs)
            assert table_counts(W, p, offs) == want
            assert structural_counts(W, p, offs) == want


@given(
    st.integers(min_value=0, max_value=len(LADDERS) - 1),
    st.integers(min_value=0, max_value=2**32 - 1),
    st.integers(min_value=1, max_value=5),
)
@settings(max_examples=60, deadline=None)
def test_table_and_structural_agree(which, seed, k):
    ladder = LADDERS[which]
    rng = np.random.default_rng(seed)
    towers = [t for t in ladder.towers if t.cells <= 200_000]
    W = towers[int(rng.integers(len(towers)))]
    refs = [t for t in ladder.towers[: ladder.towers.index(W) + 1] if t.cells <= 64]
    ref = refs[int(rng.integers(len(refs)))]
    if rng.random() < 0.5:
        p = random_union(ref, rng, Fraction(1))
    else:
        p = level_set_partition(ref)
    k = min(k, W.height)
    offs = sorted(int(x) for x in rng.choice(W.height, size=k, replace=False))
    a = table_counts(W, p, offs)
    b = structural_counts(W, p, offs)
    assert a == b
    assert sum(a.values()) == W.count * window_for(W, offs)


def test_structural_on_big_tower():
    # 2^54 columns; only the structural route applies
    ladder = build(presets.lower_bound_toy())
    W = ladder.top
    p = two_cell(ladder.get("W1"), presets.LOWER_BOUND_CELLS)
    counts = exact_counts(W, p, [0, 1, 5])
    assert sum(counts.values()) == W.count * (W.height - 5)
    single = exact_counts(W, p, [0])
    # one offset over the full height recovers the cell measures
    total = sum(single.values())
    assert Fraction(single[(0,)], total) * W.measure == p.cell_measure(0, W)


def test_unknown_method():
    ladder = LADDERS[0]
    with pytest.raises(ValueError):
        exact_counts(ladder.top, symbol_partition(ladder.towers[0]), [0], method="magic")


def test_repeated_offsets():
    ladder = LADDERS[2]
    p = symbol_partition(ladder.towers[0])
    c = structural_counts(ladder.top, p, [1, 1, 0])
    assert all(k[0] == k[1] for k in c)
    assert c == table_counts(ladder.top, p, [1, 1, 0])


def test_toy_single_insertion_counts():
    s = toy_schedule([2, 2], [3, 1], [(1, 0, 1)])
    ladder = build(s)
    p = symbol_partition(ladder.towers[0])
    W = ladder.top
    got = exact_counts(W, p, [0], method="structural")
    spacer = Fraction(got[(2,)], sum(got.values()))
    assert spacer * W.measure == W.measure - ladder.towers[0].measure
