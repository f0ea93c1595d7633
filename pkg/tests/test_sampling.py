from __future__ import annotations

import numpy as np
import pytest

from entdim import presets
from entdim.entropy import join_dist, shannon
from entdim.errors import ShallowTower
from entdim.exact import exact_counts
from entdim.partition import level_set_partition, symbol_partition, two_cell
from entdim.sampling import CHUNK, label_cells, representation, sample_rows
from entdim.schedule import paper_schedule
from entdim.tower import build, resolve
from entdim.verify import paper_lower_bound_partition


def tv(counts_a: dict, total_a: int, counts_b: dict, total_b: int) -> float:
    keys = set(counts_a) | set(counts_b)
    return 0.5 * sum(abs(counts_a.get(k, 0) / total_a - counts_b.get(k, 0) / total_b) for k in keys)


def sampled_counts(rows):
    u, c = np.unique(rows, axis=0, return_counts=True)
    return {tuple(int(x) for x in r): int(n) for r, n in zip(u, c)}


@pytest.mark.parametrize("which", [0, 1, 2, 3])
def test_sampled_matches_exact_on_toys(which):
    ladder = build(presets.names_toys()[which])
    W = ladder.top
    p = symbol_partition(ladder.towers[0])
    offs = [0, 1, min(3, W.height - 1)]
    exact = exact_counts(W, p, offs)
    rows = sample_rows(W, p, offs, 100_000, seed=which)
    assert tv(exact, sum(exact.values()), sampled_counts(rows), len(rows)) < 0.01


def test_digits_representation_matches_exact():
    # W4 of the paper schedule has more than 2^62 columns but its parent does not
    ladder = build(presets.paper_w4())
    W = ladder.get("W4")
    p = paper_lower_bound_partition(ladder)
    assert representation(W, p) == "digits"
    offs = [0, 6, 13]
    # a short window keeps the structural count quick; both routes share it
    exact = exact_counts(W, p, offs, window=2000)
    rows = sample_rows(W, p, offs, 100_000, seed=5, window=2000)
    assert tv(exact, sum(exact.values()), sampled_counts(rows), len(rows)) < 0.01


def test_bigint_representation():
    s = paper_schedule("1/2", depth=5)
    ladder = build(s, "W5")
    W = ladder.get("W5")
    p = two_cell(ladder.get("W1"), [(0, 0)])
    assert representation(W, p) == "bigint"
    a = sample_rows(W, p, [0, 3], 50, seed=1)
    assert a.shape == (50, 2) and set(np.unique(a)) <= {0, 1}
    assert np.array_equal(a, sample_rows(W, p, [0, 3], 50, seed=1))


def test_label_cells_against_resolve():
    ladder = build(presets.names_toys()[3])
    W = ladder.top
    p = level_set_partition(ladder.get("W1"))
    rng = np.random.default_rng(0)
    cols = rng.integers(0, W.count, 300)
    levels = rng.integers(0, W.height, 300)
    got = label_cells(W, p, cols, levels)
    want = [p.label_of(resolve(W, int(c), int(l), p.ref)) for c, l in zip(cols, levels)]
    assert list(got) == want


def test_deterministic_across_workers():
    ladder = build(presets.names_toys()[3])
    W = ladder.top
    p = symbol_partition(ladder.towers[0])
    n = 3 * CHUNK + 17
    a = sample_rows(W, p, [0, 2, 5], n, seed=42, workers=1)
    b = sample_rows(W, p, [0, 2, 5], n, seed=42, workers=3)
    c = sample_rows(W, p, [0, 2, 5], n, seed=43, workers=1)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_single_sample_and_errors():
    ladder = build(presets.names_toys()[0])
    W = ladder.top
    p = symbol_partition(ladder.towers[0])
    assert sample_rows(W, p, [0], 1, seed=0).shape == (1, 1)
    with pytest.raises(ValueError):
        sample_rows(W, p, [0], 0, seed=0)
    with pytest.raises(ShallowTower):
        sample_rows(W, p, [W.height], 10, seed=0)


def test_sampled_entropy_within_005_bits():
    ladder = build(presets.names_toys()[3])
    W = ladder.top
    p = two_cell(ladder.get("W1"), [(0, 0), (3, 1)])
    offs = [0, 1, 4, 9]
    he = shannon(join_dist(W, p, offs, "exact"))
    hs = shannon(join_dist(W, p, offs, "sampled", samples=100_000, seed=9))
    assert abs(he - hs) <= 0.05
