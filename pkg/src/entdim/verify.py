"""Verification suites behind `entdim verify`.

Each suite returns a list of checks; a check carries the values it compared
(exact rationals as "p/q" strings) so a failure can be read off the report.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import presets
from .entropy import independence_check, perturbation_check, subsets_up_to
from .estimator import verify_lower_bound
from .oracles import threshold_scan_dim
from .partition import random_union, two_cell
from .schedule import Schedule, ft_offsets
from .seqdim import (
    densify,
    estimate_dims,
    explicit,
    floor_powers,
    naturals,
    powers_of_two,
    reverse_blocks,
    squares,
)
from .tower import (
    OpKind,
    SpacerPool,
    Tower,
    all_names,
    build,
    ind,
    initial_tower,
    ins,
    offset_distribution,
    rep,
    resolve,
    spacer_offsets,
)

SCHEMA_VERSION = 1
SUITES = ("measures", "names", "independence", "lowerbound", "perturbation", "seqcalc")


def fr(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class SuiteOptions:
    seed: int = 0
    samples: int = 10**6
    workers: int = 1
    triples: int = 50
    sampled: bool = True  # lowerbound: include the sampled tau=1/2 W4 run


# measures


def _check_ladder_measures(s: Schedule, label: str) -> list[Check]:
    ladder = build(s)
    out = []
    ok_stage = all(
        t.measure == (s.stages[i // 2].xi) for i, t in enumerate(ladder.towers)
    )
    out.append(Check(f"{label}: tower measures equal the xi ladder", ok_stage,
                     {"xi": [fr(st.xi) for st in s.stages]}))
    recursion = []
    for n in range(s.depth):
        st, nxt = s.stages[n], s.stages[n + 1]
        want = st.xi * (1 + Fraction(st.insertion.h_star, st.h_tilde)) if st.insertion else st.xi
        recursion.append((n, nxt.xi == want, fr(nxt.xi), fr(want)))
    out.append(Check(f"{label}: xi_(n+1) = xi_n (1 + h*/h~_n) at insertions, else equal",
                     all(r[1] for r in recursion),
                     {"rows": [{"n": n, "xi_next": a, "expected": b} for n, _, a, b in recursion]}))
    draws = dict(ladder.pool.draws)
    cons = []
    for t in ladder.towers[1:]:
        added = t.measure - t.parent.measure
        drawn = draws.get(t.op.event, Fraction(0)) if t.op.kind is OpKind.INS else Fraction(0)
        cons.append((t.label, added == drawn, fr(added), fr(drawn)))
    out.append(Check(f"{label}: measure added by each op equals spacer mass drawn",
                     all(c[1] for c in cons),
                     {"ops": [{"tower": a, "added": b, "drawn": c} for a, _, b, c in cons]}))
    top = ladder.top
    total = top.measure + ladder.pool.remaining
    out.append(Check(f"{label}: measure + pool remainder = 1",
                     total == 1,
                     {"measure": fr(top.measure), "pool_remaining": fr(ladder.pool.remaining),
                      "sum": fr(total)}))
    return out


def _check_embed(W: Tower, ref: Tower, label: str) -> Check:
    """Resolving every cell of W to ref reproduces each ref level's measure."""
    mass: dict = {}
    spacer = Fraction(0)
    for col in range(W.count):
        for level in range(W.height):
            tag = resolve(W, col, level, ref)
            if hasattr(tag, "event"):
                spacer += W.width
            else:
                key = (tag.col, tag.level)
                mass[key] = mass.get(key, Fraction(0)) + W.width
    want = ref.width
    bad = {f"{k[0]}.{k[1]}": fr(v) for k, v in mass.items() if v != want}
    complete = len(mass) == ref.count * ref.height
    spacer_ok = spacer == W.measure - ref.measure
    return Check(f"{label}: resolve reproduces level measures of {ref.label}",
                 not bad and complete and spacer_ok,
                 {"level_width": fr(want), "mismatches": bad, "spacer_mass": fr(spacer),
                  "expected_spacer_mass": fr(W.measure - ref.measure)})


def suite_measures(opts: SuiteOptions) -> list[Check]:
    checks = []
    for i, s in enumerate(presets.measure_schedules()):
        label = f"{s.kind}#{i}" + (f" tau={fr(s.tau)}" if s.tau is not None else "")
        checks.extend(_check_ladder_measures(s, label))
    small = build(presets.names_toys()[2])
    for ref_idx in (0, 1, 2):
        checks.append(_check_embed(small.top, small.towers[ref_idx], "toy ins"))
    return checks


# names


def _standalone_ins_cases() -> list[tuple[str, Tower, int, int]]:
    W0 = initial_tower(Fraction(1, 8))
    W1 = ind(W0, 2)
    return [
        ("Ins(W0,1,2)", W0, 1, 2),
        ("Ins(W0,2,3)", W0, 2, 3),
        ("Ins(Ind(W0,2),2,3)", W1, 2, 3),
        ("Ins(Rep(Ind(W0,2),2),1,4)", rep(W1, 2), 1, 4),
        ("Ins(Ind(W0,2),1,5)", W1, 1, 5),
    ]


def _ins_towers() -> list[tuple[str, Tower]]:
    out = []
    for name, W, e, hs in _standalone_ins_cases():
        pool = SpacerPool(1 - W.measure)
        out.append((name, ins(W, e, hs, pool)))
    for i, s in enumerate(presets.names_toys()):
        for t in build(s).towers:
            if t.op.kind is OpKind.INS and t.enumerable():
                out.append((f"toy#{i} {t.label}", t))
    return out


def _name_bounds(label: str, T: Tower) -> list[Check]:
    P = T.parent
    e, hs = T.op.e, T.op.h_star
    n_parent = len(set(all_names(P)))
    n_out = len(set(all_names(T)))
    lo, hi = n_parent ** e, P.count ** (e + 1)
    checks = [Check(f"{label}: N(W)^e <= N(Ins) <= (#W)^(e+1)", lo <= n_out <= hi,
                    {"N_W": n_parent, "e": e, "N_out": n_out, "lower": lo, "upper": hi})]
    c = P.count
    counts = [[0] * hs for _ in range(e)]
    for col in range(T.count):
        for k, ell in enumerate(spacer_offsets(T, col)):
            counts[k][ell] += 1
    freq = [[Fraction(x, T.count) for x in row] for row in counts]
    closed = offset_distribution(T)
    match = all(freq[k][ell] == closed[ell] for k in range(e) for ell in range(hs))
    bound = Fraction(hs, c)
    dev = max(abs(f * hs - 1) for row in freq for f in row)
    checks.append(Check(f"{label}: spacer offsets uniform within relative error h*/c",
                        match and dev <= bound,
                        {"frequencies": [fr(f) for f in freq[0]], "max_relative_deviation": fr(dev),
                         "allowed": fr(bound), "matches_closed_form": match}))
    return checks


def suite_names(opts: SuiteOptions) -> list[Check]:
    checks = []
    for label, T in _ins_towers():
        checks.extend(_name_bounds(label, T))
    W1 = ind(initial_tower(Fraction(1)), 2)
    names = sorted(all_names(W1))
    checks.append(Check("Ind(W0,2) names are all binary words of length 2",
                        names == ["00", "01", "10", "11"], {"names": names}))
    return checks


# independence


def suite_independence(opts: SuiteOptions) -> list[Check]:
    s = presets.independence_toy()
    ladder = build(s)
    ev = s.event(1)
    W = ladder.get(f"W{s.depth}")
    ref = ladder.get(f"W{ev.l}")
    F = ft_offsets(s, 1, 0)
    c_log2 = s.stages[ev.n].c_log2
    checks = []
    worst = Fraction(0)
    total_viol = 0
    combos = 0
    t0 = time.perf_counter()
    for B in subsets_up_to(F, 3):
        rep_ = independence_check(W, ref, c_log2, B, allowed=F)
        combos += rep_.combos_checked
        total_viol += len(rep_.violations)
        worst = max(worst, rep_.max_ratio)
        if rep_.violations:
            pat, lhs, rhs = rep_.violations[0]
            checks.append(Check(f"B={list(B)}", False,
                                {"pattern": list(pat), "lhs": fr(lhs), "rhs": fr(rhs)}))
    checks.append(Check("level-set intersections along F_0^1 obey the product bound",
                        total_viol == 0,
                        {"F": F, "tower": W.label, "reference": ref.label, "combinations": combos,
                         "violations": total_viol, "max_ratio": fr(worst),
                         "max_ratio_float": float(worst), "seconds": round(time.perf_counter() - t0, 3)}))
    ctrl = independence_check(W, ref, c_log2, (0, 1), allowed=F, allow_outside=True)
    checks.append(Check("negative control: consecutive offsets break the bound",
                        not ctrl.passed,
                        {"B": [0, 1], "max_ratio": fr(ctrl.max_ratio), "violations": len(ctrl.violations)}))
    return checks


# lower bound


def paper_lower_bound_partition(ladder):
    """A = five level sets of W_2 in the tau = 1/2 ladder."""
    return two_cell(ladder.get("W2"), [(0, 0), (1, 1), (2, 2), (3, 3), (0, 4)])


def suite_lowerbound(opts: SuiteOptions) -> list[Check]:
    checks = []
    s = presets.lower_bound_toy()
    ladder = build(s)
    W = ladder.get(f"W{s.depth}")
    alpha = two_cell(ladder.get("W1"), presets.LOWER_BOUND_CELLS)
    rep_ = verify_lower_bound(ladder, W, alpha, 1, 8, mode="exact")
    checks.append(Check("toy: hypothesis of the lower bound holds", rep_.hypothesis_met,
                        {**rep_.hypothesis, "mu_A": fr(rep_.mu_A), "c_A": rep_.c_A}))
    checks.append(Check("toy: H_m >= m c(A) exactly for m <= 8", rep_.passed, {"rows": rep_.rows}))
    if opts.sampled:
        s = presets.paper_w4()
        ladder = build(s)
        W = ladder.get("W4")
        alpha = paper_lower_bound_partition(ladder)
        m = len(ft_offsets(s, 1, 0))
        rep_ = verify_lower_bound(ladder, W, alpha, 1, m, mode="sampled", samples=opts.samples,
                                  seed=opts.seed, workers=opts.workers)
        checks.append(Check("tau=1/2 W4: hypothesis holds", rep_.hypothesis_met,
                            {**rep_.hypothesis, "mu_A": fr(rep_.mu_A), "c_A": rep_.c_A}))
        checks.append(Check(f"tau=1/2 W4: H_m - m c(A) >= 3 SE ({opts.samples} samples)",
                            rep_.passed, {"rows": rep_.rows}))
    return checks


# perturbation


def perturbation_triples(n: int, seed: int):
    """Random (W, alpha, beta, offsets) on small toy towers."""
    rng = np.random.default_rng(seed)
    cases = [build(s) for s in presets.names_toys()]
    for _ in range(n):
        ladder = cases[int(rng.integers(len(cases)))]
        W = ladder.top
        refs = [t for t in ladder.towers if t.count * t.height <= 64]
        ref = refs[int(rng.integers(len(refs)))]
        a = random_union(ref, rng, Fraction(1))
        b = random_union(ref, rng, Fraction(1))
        k = int(rng.integers(1, min(6, W.height) + 1))
        offs = sorted(int(x) for x in rng.choice(W.height, size=k, replace=False))
        yield W, a, b, offs


def suite_perturbation(opts: SuiteOptions) -> list[Check]:
    fails = []
    for i, (W, a, b, offs) in enumerate(perturbation_triples(opts.triples, opts.seed)):
        r = perturbation_check(W, a, b, offs)
        if not r.holds:
            fails.append({"triple": i, "offsets": offs, "H_beta": r.H_beta, "H_alpha": r.H_alpha,
                          "cond_sum": r.cond_sum})
    return [Check(f"H_n(beta) >= H_n(alpha) - sum_i H(alpha_i | beta_i) on {opts.triples} triples",
                  not fails, {"failures": fails, "seed": opts.seed})]


# sequence calculus


def suite_seqcalc(opts: SuiteOptions) -> list[Check]:
    checks = []
    cases: list[tuple[str, object, int]] = [
        ("squares", squares(), 10**5),
        ("nat", naturals(), 10**4),
        ("floorpow:1.5", floor_powers(Fraction(3, 2)), 10**5),
        ("floorpow:3", floor_powers(3), 10**4),
    ]
    for name, seq, n in cases:
        est = estimate_dims(seq, n)
        scan = threshold_scan_dim(seq, n)
        ok = abs(est.upper - scan) <= 0.05
        checks.append(Check(f"{name}: window estimate agrees with threshold scan", ok,
                            {"upper": est.upper, "lower": est.lower, "scan": scan}))
    r = reverse_blocks(naturals(), [2, 6])
    got = [r.term(i) for i in range(1, 7)]
    checks.append(Check("reverse_blocks(nat, [2, 6])", got == [1, 2, 3, 4, 5, 6], {"terms": got}))
    r = reverse_blocks(explicit([3, 7]), [2])
    got = [r.term(1), r.term(2)]
    checks.append(Check("reverse_blocks({3, 7}, [2])", got == [4, 7], {"terms": got}))
    d = densify(powers_of_two(), [14, 32768])
    est = estimate_dims(d, 10**4)
    checks.append(Check("densify(pow2) raises the upper dimension", est.upper > 0.8,
                        {"upper": est.upper, "lower": est.lower}))
    return checks


RUNNERS: dict[str, Callable[[SuiteOptions], list[Check]]] = {
    "measures": suite_measures,
    "names": suite_names,
    "independence": suite_independence,
    "lowerbound": suite_lowerbound,
    "perturbation": suite_perturbation,
    "seqcalc": suite_seqcalc,
}


def run(suite: str, opts: SuiteOptions | None = None) -> dict:
    opts = opts or SuiteOptions()
    names = SUITES if suite == "all" else (suite,)
    if any(n not in RUNNERS for n in names):
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)} or all")
    report = {"schema_version": SCHEMA_VERSION, "suites": {}}
    ok = True
    for n in names:
        t0 = time.perf_counter()
        checks = RUNNERS[n](opts)
        passed = all(c.passed for c in checks)
        ok &= passed
        report["suites"][n] = {
            "passed": passed,
            "seconds": round(time.perf_counter() - t0, 3),
            "checks": [c.as_dict() for c in checks],
        }
    report["passed"] = ok
    return report
