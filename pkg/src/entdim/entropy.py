"""Entropy of partitions along offset sets, exact or sampled.

Distributions are taken over the points of a tower whose base level j
satisfies j + max(offsets) < h (the common window), weighted by cell
measure. Exact counts are integers, so probabilities are exact rationals;
only the final entropy sums are floating point. Entropies are in bits.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import ShallowTower
from .exact import exact_counts, structural_counts, table_rows, window_for
from .partition import Partition, level_set_partition
from .patterns import count_keys, encode, fits_int_codes, merge_counts
from .sampling import sample_rows
from .tower import Tower

TOL = 1e-9  # rounding guard for float comparisons of entropies
LN2 = math.log(2)


@dataclass
class PatternDist:
    offsets: tuple[int, ...]
    counts: dict[tuple[int, ...], int]
    total: int
    mode: str  # "exact" or "sampled"
    n_cells: int
    window: int
    seed: int | None = None

    @property
    def support(self) -> int:
        return len(self.counts)

    def prob(self, pattern: tuple[int, ...]) -> Fraction:
        return Fraction(self.counts.get(tuple(pattern), 0), self.total)

    def probabilities(self) -> dict[tuple[int, ...], Fraction]:
        return {k: Fraction(v, self.total) for k, v in self.counts.items()}

    def marginal(self, idx: Sequence[int]) -> PatternDist:
        out: dict = defaultdict(int)
        for k, v in self.counts.items():
            out[tuple(k[i] for i in idx)] += v
        offs = tuple(self.offsets[i] for i in idx)
        return PatternDist(offs, dict(out), self.total, self.mode, self.n_cells, self.window, self.seed)

    def prefix(self, n: int) -> PatternDist:
        return self.marginal(range(n))


def entropy_from_counts(counts: Iterable[int], total: int) -> float:
    """-sum p log2 p for p = count / total.

    Clamped to [0, log2(support)], which only removes float rounding: the
    exact value always lies in that range.
    """
    total = int(total)
    nz = [c for c in (int(x) for x in counts) if c]
    s = math.fsum(c * math.log2(c) for c in nz)
    return min(max(0.0, math.log2(total) - s / total), math.log2(len(nz)) if nz else 0.0)


def _se_from_counts(counts: np.ndarray, total: int) -> float:
    p = counts / total
    lp = np.log2(p)
    h = -float(np.sum(p * lp))
    var = float(np.sum(p * lp * lp)) - h * h
    return math.sqrt(max(var, 0.0) / total)


def _miller_madow(h: float, support: int, total: int) -> float:
    """Bias-corrected entropy, capped at log2 of the observed support."""
    return min(h + (support - 1) / (2 * total * LN2), math.log2(support))


def shannon(d: PatternDist, estimator: str = "plugin") -> float:
    h = entropy_from_counts(d.counts.values(), d.total)
    if estimator == "plugin":
        return h
    if estimator == "miller-madow":
        if d.mode == "exact":
            return h
        return _miller_madow(h, d.support, d.total)
    raise ValueError(f"unknown estimator {estimator!r}")


def join_dist(
    W: Tower,
    alpha: Partition,
    offsets: Sequence[int],
    mode: str = "exact",
    samples: int = 100_000,
    seed: int = 0,
    workers: int = 1,
    window: int | None = None,
    method: str = "auto",
) -> PatternDist:
    """Distribution of the labels of alpha at the offsets, over the window."""
    offsets = tuple(int(o) for o in offsets)
    n_window = window_for(W, offsets, window)
    if mode == "exact":
        counts = exact_counts(W, alpha, offsets, n_window, method)
        total = W.count * n_window
        return PatternDist(offsets, counts, total, "exact", alpha.n_cells, n_window)
    if mode == "sampled":
        rows = sample_rows(W, alpha, offsets, samples, seed, workers, n_window)
        return PatternDist(offsets, _unique_rows(rows), samples, "sampled", alpha.n_cells, n_window, seed)
    raise ValueError(f"unknown mode {mode!r}")


def _unique_rows(rows: np.ndarray) -> dict[tuple[int, ...], int]:
    u, c = np.unique(rows, axis=0, return_counts=True)
    return {tuple(int(x) for x in r): int(n) for r, n in zip(u, c)}


# Profiles


@dataclass(frozen=True)
class ProfilePoint:
    n: int
    s_n: int  # the n-th offset
    H: float
    H_per_n: float
    name_count: int
    se: float | None = None


@dataclass
class EntropyProfile:
    points: list[ProfilePoint]
    mode: str
    offsets: tuple[int, ...]
    window: int
    samples: int | None = None
    seed: int | None = None
    estimator: str = "plugin"
    meta: dict = field(default_factory=dict)

    def H(self, n: int) -> float:
        return self.points[n - 1].H

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "s_n", "H_n", "H_n/n", "name_count", "mode"])
        for p in self.points:
            w.writerow([p.n, p.s_n, repr(p.H), repr(p.H_per_n), p.name_count, self.mode])
        return buf.getvalue()


def _prefix_count_parts(chunks: Iterable[np.ndarray], k: int, n_max: int):
    """Per prefix length n, the merged (keys, counts) over all row chunks."""
    parts: list[list] = [[] for _ in range(n_max)]
    for rows in chunks:
        codes = np.zeros(rows.shape[0], dtype=np.int64)
        mult = 1
        for n in range(1, n_max + 1):
            if fits_int_codes(k, n):
                codes = codes + rows[:, n - 1].astype(np.int64) * mult
                mult *= k
                keys = codes
            else:
                keys = encode(rows[:, :n], k)
            parts[n - 1].append(count_keys(keys))
    return [merge_counts(p) for p in parts]


def entropy_profile(
    W: Tower,
    alpha: Partition,
    offsets: Sequence[int],
    n_max: int | None = None,
    mode: str = "exact",
    samples: int = 100_000,
    seed: int = 0,
    workers: int = 1,
    estimator: str = "plugin",
    method: str = "auto",
    power: int = 1,
) -> EntropyProfile:
    """H_n(alpha) along the first n offsets, n = 1..n_max, on a common window.

    `power` evaluates the profile of T^power, i.e. along offsets scaled by power.
    """
    offs = [int(o) * power for o in offsets]
    if n_max is None:
        n_max = len(offs)
    if n_max < 1 or n_max > len(offs):
        raise ValueError(f"n_max must lie in [1, {len(offs)}]")
    offs = offs[:n_max]
    if len(set(offs)) != len(offs):
        raise ValueError("offsets must be distinct")
    n_window = window_for(W, offs)
    k = alpha.n_cells
    points = []
    if mode == "sampled":
        rows = sample_rows(W, alpha, offs, samples, seed, workers, n_window)
        merged = _prefix_count_parts([rows], k, n_max)
        for n, (_, counts) in enumerate(merged, start=1):
            h = entropy_from_counts(counts, samples)
            if estimator == "miller-madow":
                h = _miller_madow(h, len(counts), samples)
            se = _se_from_counts(counts.astype(float), samples)
            points.append(ProfilePoint(n, offs[n - 1], h, h / n, len(counts), se))
        return EntropyProfile(points, "sampled", tuple(offs), n_window, samples, seed, estimator)
    if mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")
    if method == "auto":
        method = "table" if W.enumerable() else "structural"
    total = W.count * n_window
    if method == "table":
        merged = _prefix_count_parts(table_rows(W, alpha, offs, n_window), k, n_max)
        for n, (_, counts) in enumerate(merged, start=1):
            h = entropy_from_counts(counts.tolist(), total)
            points.append(ProfilePoint(n, offs[n - 1], h, h / n, len(counts)))
    else:
        full = structural_counts(W, alpha, offs, n_window)
        for n in range(1, n_max + 1):
            marg: dict = defaultdict(int)
            for key, v in full.items():
                marg[key[:n]] += v
            h = entropy_from_counts(marg.values(), total)
            points.append(ProfilePoint(n, offs[n - 1], h, h / n, len(marg)))
    return EntropyProfile(points, "exact", tuple(offs), n_window, None, None, estimator)


@dataclass(frozen=True)
class EgsResult:
    passed: bool
    min_ratio: float
    threshold: float
    tail: tuple[int, int]


def egs_test(profile: EntropyProfile, threshold: float, window: int | None = None) -> EgsResult:
    """Does H_n / n stay at or above the threshold over the tail of the profile?"""
    pts = profile.points
    if window is None:
        window = max(1, min(len(pts), max(10, len(pts) // 10)))
    tail = pts[-window:]
    m = min(p.H_per_n for p in tail)
    return EgsResult(m >= threshold - TOL, m, threshold, (tail[0].n, tail[-1].n))


def support_size(d: PatternDist) -> int:
    """Number of distinct names (patterns) carrying positive mass."""
    return d.support


# Conditional entropy and the perturbation inequality


def cond_entropy(W: Tower, alpha: Partition, beta: Partition, method: str = "auto") -> float:
    """H(alpha | beta) over all cells of W."""
    joint = join_dist(W, alpha.join(beta), (0,), "exact", method=method)
    kb = beta.n_cells
    hj = shannon(joint)
    mb: dict = defaultdict(int)
    for (lab,), v in joint.counts.items():
        mb[lab % kb] += v
    return hj - entropy_from_counts(mb.values(), joint.total)


@dataclass(frozen=True)
class PerturbationResult:
    H_alpha: float
    H_beta: float
    cond_sum: float  # sum over positions of H(alpha_i | beta_i) on the window
    holds: bool


def perturbation_check(
    W: Tower, alpha: Partition, beta: Partition, offsets: Sequence[int], method: str = "auto"
) -> PerturbationResult:
    """H_n(beta) >= H_n(alpha) - sum_i H(alpha_{s_i} | beta_{s_i}), exactly on one window."""
    joint = join_dist(W, alpha.join(beta), offsets, "exact", method=method)
    kb = beta.n_cells
    a_counts: dict = defaultdict(int)
    b_counts: dict = defaultdict(int)
    for key, v in joint.counts.items():
        a_counts[tuple(x // kb for x in key)] += v
        b_counts[tuple(x % kb for x in key)] += v
    T = joint.total
    Ha = entropy_from_counts(a_counts.values(), T)
    Hb = entropy_from_counts(b_counts.values(), T)
    cond = 0.0
    for i in range(len(offsets)):
        pj: dict = defaultdict(int)
        pb: dict = defaultdict(int)
        for key, v in joint.counts.items():
            pj[key[i]] += v
            pb[key[i] % kb] += v
        cond += entropy_from_counts(pj.values(), T) - entropy_from_counts(pb.values(), T)
    return PerturbationResult(Ha, Hb, cond, Hb >= Ha - cond - TOL)


def product_dist(d1: PatternDist, d2: PatternDist) -> PatternDist:
    """Pattern distribution of the product system (independent coordinates)."""
    if len(d1.offsets) != len(d2.offsets):
        raise ValueError("product needs the same number of offsets")
    k2 = d2.n_cells
    out = {}
    for a, x in d1.counts.items():
        for b, y in d2.counts.items():
            out[tuple(i * k2 + j for i, j in zip(a, b))] = x * y
    mode = "exact" if d1.mode == d2.mode == "exact" else "sampled"
    return PatternDist(d1.offsets, out, d1.total * d2.total, mode, d1.n_cells * k2, d1.window * d2.window)


# Independence of level sets along sumsets


@dataclass
class IndependenceReport:
    B: tuple[int, ...]
    combos_checked: int
    violations: list[tuple[tuple[int, ...], Fraction, Fraction]]
    max_ratio: Fraction  # max LHS / RHS over the checked combinations
    bound_factor: Fraction

    @property
    def passed(self) -> bool:
        return not self.violations


def independence_check(
    W: Tower,
    level_ref: Tower,
    n_t_columns_log2: int,
    B: Sequence[int],
    allowed: Sequence[int] | None = None,
    allow_outside: bool = False,
    partition: Partition | None = None,
    method: str = "auto",
) -> IndependenceReport:
    """mu(∩_b T^{-b} E_b) <= ((1 + h_l / c_{n_t}) / xi_l)^|B| ∏ mu(E_b) for all level sets E_b.

    `level_ref` is W_{l_t}; `n_t_columns_log2` is log2 c_{n_t}; `allowed` is
    the sumset B must lie in (unless allow_outside, used for negative controls).
    The left side is the measure of points of the window of W.
    """
    B = tuple(int(b) for b in B)
    if allowed is not None and not allow_outside and not set(B) <= set(allowed):
        raise ValueError("B must be a subset of the sumset")
    part = partition or level_set_partition(level_ref)
    n_levels = level_ref.count * level_ref.height
    counts = exact_counts(W, part, B, None, method)
    cell = W.width
    mu_E = level_ref.width
    c_nt = Fraction(1 << n_t_columns_log2)
    factor = (1 + Fraction(level_ref.height) / c_nt) / level_ref.measure
    rhs = (factor * mu_E) ** len(B)
    violations = []
    max_ratio = Fraction(0)
    for pattern, cnt in counts.items():
        if any(x >= n_levels for x in pattern):
            continue  # a spacer somewhere: not an intersection of level sets
        lhs = cnt * cell
        ratio = lhs / rhs
        if ratio > max_ratio:
            max_ratio = ratio
        if lhs > rhs:
            violations.append((pattern, lhs, rhs))
    return IndependenceReport(B, n_levels ** len(B), violations, max_ratio, factor)


def subsets_up_to(values: Sequence[int], size: int) -> list[tuple[int, ...]]:
    out = []
    for r in range(1, size + 1):
        out.extend(itertools.combinations(values, r))
    return out


# Entropy lower bound along sumsets


def lower_bound_constant(mu_A: Fraction | float) -> float:
    """c(A) = -1/2 mu(A) log2(mu(A) / (1 - mu(A)))."""
    mu = float(mu_A)
    if not (0 < mu < 1):
        raise ValueError("mu(A) must lie in (0, 1)")
    return -0.5 * mu * math.log2(mu / (1 - mu))


def require_fit(W: Tower, offsets: Sequence[int]) -> None:
    if max(offsets) >= W.height:
        raise ShallowTower(f"offset {max(offsets)} does not fit in {W.label} (height {W.height})")
