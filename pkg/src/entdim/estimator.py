"""Entropy-dimension estimates for a partition of a tower system.

The lower bound comes from candidate offset sequences along which entropy
grows linearly (entropy generating); the bound is the dimension of the best
such sequence. The upper bound is read from how fast the number of names
grows along the densest candidate.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .entropy import (
    TOL,
    EntropyProfile,
    egs_test,
    entropy_from_counts,
    entropy_profile,
    lower_bound_constant,
)
from .errors import EntdimError
from .exact import exact_counts
from .partition import Partition
from .schedule import Schedule, ft_max_k, ft_offsets, ft_sequence, paper_schedule
from .seqdim import IntSeq, estimate_dims, hereditary_extract, naturals, squares
from .tower import Ladder, Tower, ladder_index

SCHEMA_VERSION = 1


@dataclass
class Candidate:
    name: str
    offsets: list[int]  # offsets used for entropy (may start at 0)
    seq: IntSeq | None  # the sequence whose dimension is reported
    dims_n_max: int | None = None


@dataclass
class EstimatorConfig:
    mode: str = "sampled"
    samples: int = 100_000
    seed: int = 0
    workers: int = 1
    n_max: int = 24  # profile length per candidate
    egs_threshold: float = 0.05
    dims_n_max: int = 10**6
    method: str = "auto"


def candidate_ft(s: Schedule, t: int, W: Tower, dims_depth: int = 10) -> Candidate:
    """F^t with the largest k whose sumset fits in W; dimension from a deeper schedule."""
    k_best = None
    for k in range(ft_max_k(s, t) + 1):
        offs = ft_offsets(s, t, k) if _ft_size(s, t, k) <= 10**6 else None
        if offs is None or offs[-1] >= W.height:
            break
        k_best = k
    if k_best is None:
        return Candidate(f"F^{t}", [], None)
    offsets = ft_offsets(s, t, k_best)
    deep = s
    if s.kind == "paper" and s.insertion_rule == "default" and s.depth < dims_depth:
        deep = paper_schedule(s.tau, depth=dims_depth, C=s.C)
    seq = ft_sequence(deep, t)
    return Candidate(f"F^{t}", offsets, seq, seq.length)


def _ft_size(s: Schedule, t: int, k: int) -> int:
    n0 = s.event(t).n
    return math.prod(s.stages[n0 + j].e for j in range(k + 1))


def candidate_seq(name: str, seq: IntSeq, W: Tower, n_max: int, with_zero: bool = True) -> Candidate:
    """Offsets {0} ∪ S (or S) truncated to what fits in W and to n_max points."""
    offs = [0] if with_zero else []
    i = 1
    while len(offs) < n_max and seq.available(i):
        v = seq.term(i)
        if v >= W.height:
            break
        offs.append(v)
        i += 1
    return Candidate(name, offs, seq)


def default_candidates(s: Schedule | None, W: Tower, n_max: int) -> list[Candidate]:
    out = []
    if s is not None:
        for ins in s.insertions:
            c = candidate_ft(s, ins.t, W)
            if c.offsets:
                out.append(c)
    out.append(candidate_seq("nat", naturals(), W, n_max))
    out.append(candidate_seq("squares", squares(), W, n_max))
    return out


@dataclass
class CandidateResult:
    name: str
    fits: bool
    n_points: int
    egs: bool | None = None
    min_ratio: float | None = None
    dims: dict | None = None
    profile: EntropyProfile | None = None

    def as_dict(self) -> dict:
        d = {
            "name": self.name,
            "fits": self.fits,
            "n_points": self.n_points,
            "egs": self.egs,
            "min_H_per_n": self.min_ratio,
            "dims": self.dims,
        }
        if self.profile is not None:
            d["profile"] = [
                {"n": p.n, "s_n": str(p.s_n), "H": p.H, "name_count": p.name_count}
                for p in self.profile.points
            ]
        return d


@dataclass
class DimReport:
    candidates: list[CandidateResult]
    lower: float | None
    upper: float | None
    upper_fit: dict | None
    status: str  # "ok", "inconclusive" or "empty"
    config: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "status": self.status,
            "lower": self.lower,
            "upper": self.upper,
            "upper_fit": self.upper_fit,
            "candidates": [c.as_dict() for c in self.candidates],
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def name_growth_fit(profile: EntropyProfile, tail: int | None = None) -> dict | None:
    """tau_hat(n) = log2 log2 N(n) / log2 n over the tail, plus a log-log slope."""
    pts = [p for p in profile.points if p.n >= 2 and p.name_count >= 3]
    if len(pts) < 2:
        return None
    if tail is None:
        tail = max(2, len(pts) // 2)
    pts = pts[-tail:]
    xs = [math.log2(p.n) for p in pts]
    ys = [math.log2(math.log2(p.name_count)) for p in pts]
    taus = [y / x for x, y in zip(xs, ys)]
    mx = sum(xs) / len(xs)
    my = sum(ys) / len(ys)
    sxx = sum((x - mx) ** 2 for x in xs)
    slope = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sxx if sxx else float("nan")
    resid = [y - (my + slope * (x - mx)) for x, y in zip(xs, ys)] if sxx else []
    rms = math.sqrt(sum(r * r for r in resid) / len(resid)) if resid else 0.0
    return {
        "tau_hat_max": max(taus),
        "tau_hat_min": min(taus),
        "slope": slope,
        "residual_rms": rms,
        "tail_n": [pts[0].n, pts[-1].n],
    }


def partition_dim_estimate(
    W: Tower,
    alpha: Partition,
    candidates: Sequence[Candidate],
    config: EstimatorConfig | None = None,
) -> DimReport:
    cfg = config or EstimatorConfig()
    cfg_d = {
        "mode": cfg.mode,
        "samples": cfg.samples,
        "seed": cfg.seed,
        "n_max": cfg.n_max,
        "egs_threshold": cfg.egs_threshold,
        "dims_n_max": str(cfg.dims_n_max),
    }
    if not candidates:
        return DimReport([], None, None, None, "empty", cfg_d)
    results = []
    fitted: list[tuple[Candidate, CandidateResult]] = []
    for cand in candidates:
        offs = [o for o in cand.offsets if o < W.height][: cfg.n_max]
        if len(offs) < 2:
            results.append(CandidateResult(cand.name, False, len(offs)))
            continue
        prof = entropy_profile(
            W, alpha, offs, mode=cfg.mode, samples=cfg.samples, seed=cfg.seed,
            workers=cfg.workers, method=cfg.method,
        )
        eg = egs_test(prof, cfg.egs_threshold)
        dims = None
        if cand.seq is not None:
            n = cand.dims_n_max or cfg.dims_n_max
            if cand.seq.length is not None:
                n = min(n, cand.seq.length)
            try:
                dims = estimate_dims(cand.seq, n).as_dict()
            except EntdimError as exc:
                dims = {"error": str(exc)}
        res = CandidateResult(cand.name, True, len(offs), eg.passed, eg.min_ratio, dims, prof)
        results.append(res)
        fitted.append((cand, res))
    if not fitted:
        return DimReport(results, None, None, None, "empty", cfg_d)
    lowers = [r.dims["lower"] for _, r in fitted if r.egs and r.dims and "lower" in r.dims]
    lower = max(lowers) if lowers else 0.0
    densest = min(fitted, key=lambda cr: cr[1].profile.offsets[-1] / len(cr[1].profile.offsets))
    fit = name_growth_fit(densest[1].profile)
    if fit is not None:
        fit["candidate"] = densest[0].name
    upper = None if fit is None else fit["tau_hat_max"]
    status = "ok"
    if upper is not None and lower > upper + TOL:
        status = "inconclusive"
    return DimReport(results, lower, upper, fit, status, cfg_d)


# Entropy lower bound along F^t


@dataclass
class LowerBoundReport:
    c_A: float
    mu_A: Fraction
    hypothesis: dict
    hypothesis_met: bool
    rows: list[dict]
    passed: bool
    mode: str

    def as_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "c_A": self.c_A,
            "mu_A": str(self.mu_A),
            "hypothesis": self.hypothesis,
            "hypothesis_met": self.hypothesis_met,
            "rows": self.rows,
            "passed": self.passed,
            "mode": self.mode,
        }
        return d


def verify_lower_bound(
    ladder: Ladder,
    W: Tower,
    alpha: Partition,
    t: int,
    m_max: int,
    mode: str = "exact",
    samples: int = 10**6,
    seed: int = 0,
    workers: int = 1,
    sigmas: float = 3.0,
    method: str = "auto",
) -> LowerBoundReport:
    """H_m >= m c(A) along the first m points of F^t, for alpha = {A, A^c}.

    Sampled mode requires H_m - m c(A) >= sigmas standard errors.
    """
    s = ladder.schedule
    ins = s.event(t)
    ell = ladder.stage_of(alpha.ref) // 2
    mu_A = alpha.cell_measure(0)
    xi_ell = s.stages[ell].xi
    xi_l = s.stages[ins.l].xi
    c_nt = Fraction(1 << s.stages[ins.n].c_log2) if s.stages[ins.n].c_log2 < 4096 else None
    h_l = s.stages[ins.l].h
    cA = lower_bound_constant(mu_A)
    if c_nt is None:
        lhs = math.log2(1 / float(xi_l))
    else:
        lhs = math.log2((1 + h_l / c_nt) / xi_l)
    hyp = {
        "l_t": ins.l,
        "ell": ell,
        "l_t_at_least_ell": ins.l >= ell,
        "mu_A_at_most_half_xi_ell": mu_A <= xi_ell / 2,
        "log_factor": lhs,
        "log_factor_below_c_A": lhs < cA,
    }
    met = hyp["l_t_at_least_ell"] and hyp["mu_A_at_most_half_xi_ell"] and hyp["log_factor_below_c_A"]
    k = 0
    while _ft_size(s, t, k) < m_max:
        k += 1
    offs = ft_offsets(s, t, k)[:m_max]
    prof = entropy_profile(W, alpha, offs, mode=mode, samples=samples, seed=seed, workers=workers, method=method)
    rows = []
    ok = True
    for p in prof.points:
        bound = p.n * cA
        if mode == "exact":
            good = p.H >= bound - TOL
            margin_se = None
        else:
            margin_se = (p.H - bound) / p.se if p.se else math.inf
            good = margin_se >= sigmas
        ok &= good
        rows.append({"m": p.n, "H_m": p.H, "bound": bound, "se": p.se, "margin_se": margin_se, "passed": good})
    return LowerBoundReport(cA, mu_A, hyp, met, rows, ok, mode)


# Block-entropy lower bound for extracted subsequences


def oracle_from_tower(W: Tower, alpha: Partition, seq_terms: Sequence[int], method: str = "auto"):
    """Oracle: set of 1-based indices i -> H(join of T^{-s_i} alpha), exact, memoised."""
    memo: dict[frozenset, float] = {}

    def oracle(idx: frozenset) -> float:
        if not idx:
            return 0.0
        if idx not in memo:
            offs = sorted(seq_terms[i - 1] for i in idx)
            counts = exact_counts(W, alpha, offs, None, method)
            total = sum(counts.values())
            memo[idx] = entropy_from_counts(counts.values(), total)
        return memo[idx]

    return oracle


@dataclass
class FactAReport:
    b: float
    c: float
    d: float
    hypothesis: dict
    blocks: list[dict]
    F_indices: list[int]
    pairs_checked: int
    failures: list[dict]
    passed: bool

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "b": self.b,
            "c": self.c,
            "d": self.d,
            "hypothesis": self.hypothesis,
            "blocks": self.blocks,
            "F_indices": self.F_indices,
            "pairs_checked": self.pairs_checked,
            "failures": self.failures,
            "passed": self.passed,
        }


def verify_fact_a(
    oracle: Callable[[frozenset], float],
    anchors: Sequence[int],
    b: float,
    H_alpha: float,
    seq: IntSeq | None = None,
    tau=None,
) -> FactAReport:
    """Extract hereditary blocks and check the block-entropy bounds on the oracle.

    Blocks are {n_{k-1}+1, ..., n_k} for the anchors n_1 < n_2 < ... (at most 3
    blocks, each at most 20 indices). Pairs m_1 <= m_2 of the assembled set
    are checked with the constant of their case: same block b/4, adjacent
    blocks b/8, otherwise b c / 8.
    """
    anchors = [int(a) for a in anchors]
    if not anchors or len(anchors) > 3:
        raise ValueError("between one and three blocks are supported")
    if not 0 < b < 4:
        raise ValueError("b must lie in (0, 4)")
    c = b / (4 * (H_alpha + 1))
    d = b * c / 8
    prev = 0
    blocks = []
    growth_ok = True
    covering_ok = True
    extracted: list[list[int]] = []
    for k, nk in enumerate(anchors):
        if nk <= prev or nk - prev > 20:
            raise ValueError("blocks must be non-empty with at most 20 indices")
        full = oracle(frozenset(range(1, nk + 1)))
        covering = full >= nk * b - TOL
        covering_ok &= covering
        if k:
            need = 4 * (H_alpha + 1) / b * prev
            growth_ok &= nk >= need - TOL
        res = hereditary_extract(range(prev + 1, nk + 1), oracle, b)
        size_ok = len(res.selected) >= c * nk - TOL
        blocks.append(
            {
                "n_k": nk,
                "selected": list(res.selected),
                "l_k": len(res.selected),
                "l_k_at_least_c_n_k": size_ok,
                "hereditary_verified": res.verified,
                "H_prefix": full,
                "H_prefix_at_least_n_k_b": covering,
            }
        )
        extracted.append(list(res.selected))
        prev = nk
    hyp = {
        "entropy_generating_prefixes": covering_ok,
        "block_growth": growth_ok,
        "all_blocks_nonempty": all(extracted),
        "sizes_at_least_c_n_k": all(bl["l_k_at_least_c_n_k"] for bl in blocks),
    }
    F = [i for blk in extracted for i in blk]
    block_of = {i: k for k, blk in enumerate(extracted) for i in blk}
    failures = []
    pairs = 0
    if F:
        for a, z in itertools.combinations_with_replacement(range(len(F)), 2):
            idx = F[a : z + 1]
            gap = block_of[F[z]] - block_of[F[a]]
            const = b / 4 if gap == 0 else (b / 8 if gap == 1 else d)
            val = oracle(frozenset(idx))
            pairs += 1
            if val < const * len(idx) - TOL:
                failures.append({"m1": a + 1, "m2": z + 1, "H": val, "bound": const * len(idx), "case": min(gap, 2) + 1})
    passed = bool(F) and not failures and all(bl["hereditary_verified"] for bl in blocks)
    report = FactAReport(b, c, d, hyp, blocks, F, pairs, failures, passed)
    return report


def stage_number(label: str) -> int:
    return ladder_index(label) // 2
