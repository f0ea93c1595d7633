"""Stage parameters for the cutting-and-stacking construction.

Stage n describes the tower W_n (height h_n, c_n columns), the repeated
tower W~_n (height h~_n = r_n h_n) and the data used to build W_{n+1}:
the stride w_n (h~_n, or h~_n + h* when spacers are inserted at stage n)
and the independent-cut count e_n. All quantities are exact integers or
rationals. Column counts are powers of two and are kept as log2 exponents.
"""

from __future__ import annotations

import json
import math
import warnings as _warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Sequence

from .config import enumeration_budget, parse_fraction
from .errors import EnumerationInfeasible, ScheduleDegeneracy, SumsetCollision
from .seqdim import FormulaSeq, IntSeq, iroot

SCHEMA_VERSION = 1
C_DECIMAL_BITS = 4096  # JSON keeps the decimal c_n only up to this size
FEASIBLE_DEPTH = 40


@dataclass(frozen=True)
class Insertion:
    """Spacer insertion at stage n (building W_{n+1}), with runs of height h_star."""

    t: int
    n: int
    l: int
    h_star: int

    def as_dict(self) -> dict:
        return {"t": str(self.t), "n": str(self.n), "l": str(self.l), "h_star": str(self.h_star)}


@dataclass(frozen=True)
class StageParams:
    n: int
    h: int  # height of W_n
    r: int
    h_tilde: int  # height of W~_n
    w: int  # stride used to build W_{n+1}
    e: int | None  # None when the schedule stops before choosing e_n
    c_log2: int  # W_n has 2**c_log2 columns
    xi: Fraction  # measure of W_n and of W~_n
    insertion: Insertion | None = None

    @property
    def c(self) -> int:
        return 1 << self.c_log2

    def as_dict(self) -> dict:
        d = {
            "n": str(self.n),
            "h": str(self.h),
            "r": str(self.r),
            "h_tilde": str(self.h_tilde),
            "w": str(self.w),
            "e": None if self.e is None else str(self.e),
            "c_log2": str(self.c_log2),
            "xi": _frac_str(self.xi),
            "insertion": None if self.insertion is None else str(self.insertion.t),
        }
        if self.c_log2 <= C_DECIMAL_BITS:
            d["c"] = str(self.c)
        return d


@dataclass(frozen=True)
class ConditionCheck:
    n: int
    condition3: bool  # w_n^p >= P_{n-1}^q
    product_ratio_log2: float  # log2( P_n / (w_n e_n)^tau )
    e_at_least_two: bool


@dataclass(frozen=True)
class Schedule:
    kind: str  # "paper" or "toy"
    tau: Fraction | None
    C: int | None
    stages: tuple[StageParams, ...]
    insertions: tuple[Insertion, ...]
    xi: Fraction
    xi_tail_bound: Fraction
    insertion_rule: str = "explicit"
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def depth(self) -> int:
        return len(self.stages) - 1

    def stage(self, n: int) -> StageParams:
        return self.stages[n]

    def insertion_at(self, n: int) -> Insertion | None:
        for ins in self.insertions:
            if ins.n == n:
                return ins
        return None

    def event(self, t: int) -> Insertion:
        for ins in self.insertions:
            if ins.t == t:
                return ins
        raise KeyError(f"no insertion event t={t}")

    def schedule_id(self) -> str:
        if self.kind == "paper":
            base = f"paper-tau{self.tau.numerator}-{self.tau.denominator}-d{self.depth}"
            return base if self.C == c_tau(self.tau) else f"{base}-C{self.C}"
        es = "-".join(str(s.e) for s in self.stages[:-1])
        return f"toy-e{es}-d{self.depth}"

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "id": self.schedule_id(),
            "tau": None if self.tau is None else _frac_str(self.tau),
            "C_tau": None if self.C is None else str(self.C),
            "depth": str(self.depth),
            "insertion_rule": self.insertion_rule,
            "insertions": [i.as_dict() for i in self.insertions],
            "xi": _frac_str(self.xi),
            "xi_tail_bound": _frac_str(self.xi_tail_bound),
            "stages": [s.as_dict() for s in self.stages],
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def _frac_str(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def c_tau(tau) -> int:
    """Smallest integer C with C^p > 2^(q-p), for tau = p/q."""
    t = parse_fraction(tau)
    if not (0 < t < 1):
        raise ValueError("tau must lie strictly between 0 and 1")
    p, q = t.numerator, t.denominator
    bound = 2 ** (q - p)
    C = iroot(bound, p)
    while C**p <= bound:
        C += 1
    return C


def default_insertions(depth: int) -> list[tuple[int, int]]:
    """Insertion rule n_t = 3t, l_t = 3t - 1 for every n_t <= depth."""
    return [(3 * t, 3 * t - 1) for t in range(1, depth // 3 + 1)]


def _normalize_insertions(raw: Iterable) -> list[tuple]:
    out = []
    for item in raw:
        if isinstance(item, Insertion):
            out.append((item.n, item.l, item.h_star))
        else:
            item = tuple(int(x) for x in item)
            if len(item) not in (2, 3):
                raise ValueError(f"insertion must be (n, l) or (n, l, h_star), got {item}")
            out.append(item if len(item) == 3 else (item[0], item[1], None))
    out.sort()
    ns = [x[0] for x in out]
    if len(set(ns)) != len(ns):
        raise ValueError("at most one insertion per stage")
    for n, l, _ in out:
        if n < 1 or l < 0 or l > n:
            raise ValueError(f"insertion (n={n}, l={l}) needs 1 <= n and 0 <= l <= n")
    return out


def _xi_ladder(xi: Fraction, stages: list[dict], horizon: int) -> list[Fraction]:
    ladder = [xi]
    for n in range(len(stages) - 1):
        ins = stages[n]["insertion"]
        x = ladder[-1]
        if ins is not None and n < horizon:
            x = x * (1 + Fraction(ins.h_star, stages[n]["h_tilde"]))
        ladder.append(x)
    return ladder


def _finish(
    kind: str,
    tau: Fraction | None,
    C: int | None,
    rows: list[dict],
    events: list[Insertion],
    depth: int,
    horizon: int,
    tail: Fraction,
    rule: str,
    notes: list[str],
) -> Schedule:
    xi = Fraction(1)
    for ins in events:
        if ins.n < horizon:
            xi /= 1 + Fraction(ins.h_star, rows[ins.n]["h_tilde"])
    rows = rows[: depth + 1]
    ladder = _xi_ladder(xi, rows, horizon)
    stages = tuple(
        StageParams(
            n=row["n"],
            h=row["h"],
            r=row["r"],
            h_tilde=row["h_tilde"],
            w=row["w"],
            e=row["e"],
            c_log2=row["c_log2"],
            xi=ladder[i],
            insertion=row["insertion"],
        )
        for i, row in enumerate(rows)
    )
    kept = tuple(ins for ins in events if ins.n <= depth)
    return Schedule(kind, tau, C, stages, kept, xi, tail, rule, tuple(notes))


def paper_schedule(
    tau,
    insertions: Sequence | None = None,
    depth: int = 6,
    xi_horizon: int | None = None,
    C: int | None = None,
) -> Schedule:
    """Schedule for a rational target dimension tau in (0, 1).

    e_n = floor((w_n^p / P_{n-1}^q)^(1/(q-p))) with P_{n-1} = e_0 ... e_{n-1},
    r_n = C n^2, e_0 = 2. Insertions default to n_t = 3t, l_t = 3t - 1 with
    runs of height h_{l_t}. xi is truncated at stage `xi_horizon` (default:
    depth); the remaining factor is bounded by `xi_tail_bound`. Passing `C`
    overrides C_tau (for experiments; values below C_tau are noted).
    """
    t_frac = parse_fraction(tau)
    p, q = t_frac.numerator, t_frac.denominator
    if depth < 1:
        raise ValueError("depth must be >= 1")
    notes: list[str] = []
    if C is None:
        C = c_tau(t_frac)
    elif C < 1:
        raise ValueError("C must be a positive integer")
    elif C ** p <= 2 ** (q - p):
        notes.append(f"C = {C} is below the growth condition C^(tau/(1-tau)) > 2")
    if depth > FEASIBLE_DEPTH:
        msg = f"depth {depth} exceeds the feasibility budget of {FEASIBLE_DEPTH}"
        notes.append(msg)
        _warnings.warn(msg)
    horizon = depth if xi_horizon is None else xi_horizon
    if horizon < depth:
        raise ValueError("xi_horizon must be at least the depth")
    if insertions is None:
        rule = "default"
        # insertions beyond the depth only matter for the xi truncation
        raw = default_insertions(max(depth, horizon))
    else:
        rule = "explicit"
        raw = list(insertions)
    norm = _normalize_insertions(raw)
    last = max(depth, horizon)
    rows: list[dict] = []
    events: list[Insertion] = []
    by_stage = {n: (l, hs) for n, l, hs in norm}
    P = 1  # P_{n-1}
    c_log2 = 1
    h = 1
    for n in range(0, last + 1):
        r = 1 if n == 0 else C * n * n
        h_tilde = h * r
        ins = None
        if n in by_stage:
            l, hs = by_stage[n]
            if l >= n:
                raise ValueError("insertions need l_t < n_t")
            if hs is None:
                hs = rows[l]["h"]
            ins = Insertion(len(events) + 1, n, l, hs)
            events.append(ins)
        w = h_tilde + (ins.h_star if ins else 0)
        if n == 0:
            e = 2
        else:
            e = iroot(w**p // P**q, q - p)
            if e < 2:
                if n == 1 and e == 1:
                    notes.append(f"e_1 = {e} from the stage recursion (e_0 is fixed)")
                else:
                    raise ScheduleDegeneracy(f"e_{n} = {e} < 2 for tau={t_frac}")
        rows.append(
            dict(n=n, h=h, r=r, h_tilde=h_tilde, w=w, e=e, c_log2=c_log2, insertion=ins)
        )
        c_log2 = c_log2 * (e + (1 if ins else 0))
        h = w * e
        P *= e
    tail = Fraction(0)
    if rule == "default":
        # sum over t >= T of h_{l_t}/h~_{n_t} <= sum 1/(9 C t^2) < 1/(9 C (T - 1))
        T = (horizon + 2) // 3  # first t with n_t >= horizon
        tail = Fraction(1, 9 * C * (T - 1)) if T >= 2 else Fraction(2, 9 * C)
    return _finish("paper", t_frac, C, rows, events, depth, horizon, tail, rule, notes)


def toy_schedule(
    e: Sequence[int],
    r: Sequence[int],
    insertions: Sequence = (),
    budget: int | None | str = "default",
) -> Schedule:
    """Small explicit schedule.

    `e` lists e_0..e_{D-1}, `r` lists r_1..r_D; insertions are (n, l) or
    (n, l, h_star) with h_star defaulting to h_l. The top tower W_D must
    fit the enumeration budget unless `budget=None`.
    """
    e = [int(x) for x in e]
    r = [int(x) for x in r]
    D = len(e)
    if D < 1:
        raise ValueError("toy schedules need at least one stage")
    if len(r) != D:
        raise ValueError(f"need r_1..r_{D} ({D} values), got {len(r)}")
    if any(x < 1 for x in e) or any(x < 1 for x in r):
        raise ValueError("e and r values must be positive")
    norm = _normalize_insertions(insertions)
    by_stage = {n: (l, hs) for n, l, hs in norm}
    for n in by_stage:
        if n > D - 1:
            raise ValueError(f"insertion at n={n} needs e_{n}, schedule stops at e_{D - 1}")
    rows: list[dict] = []
    events: list[Insertion] = []
    c_log2 = 1
    h = 1
    for n in range(0, D + 1):
        rn = 1 if n == 0 else r[n - 1]
        h_tilde = h * rn
        ins = None
        if n in by_stage:
            l, hs = by_stage[n]
            if hs is None:
                hs = rows[l]["h"] if l < n else h
            if hs < 1:
                raise ValueError("spacer run height must be positive")
            ins = Insertion(len(events) + 1, n, l, hs)
            events.append(ins)
        w = h_tilde + (ins.h_star if ins else 0)
        en = e[n] if n < D else None
        rows.append(dict(n=n, h=h, r=rn, h_tilde=h_tilde, w=w, e=en, c_log2=c_log2, insertion=ins))
        if en is not None:
            c_log2 = c_log2 * (en + (1 if ins else 0))
            h = w * en
    if budget == "default":
        budget = enumeration_budget()
    if budget is not None:
        top = rows[-1]
        if top["c_log2"] > 64 or (1 << top["c_log2"]) * top["h"] > budget:
            raise EnumerationInfeasible(
                f"W_{D} has 2^{top['c_log2']} columns of height {top['h']}, over the "
                f"budget of {budget} cells; use sampling mode"
            )
    return _finish("toy", None, None, rows, events, D, D, Fraction(0), "explicit", [])


def validate_conditions(s: Schedule) -> list[ConditionCheck]:
    """Per-stage report of the growth conditions (n >= 1 with e_n known)."""
    out = []
    if s.tau is None:
        p = q = None
    else:
        p, q = s.tau.numerator, s.tau.denominator
    P_prev = s.stages[0].e
    for st in s.stages[1:]:
        if st.e is None:
            break
        P = P_prev * st.e
        if p is not None:
            cond3 = st.w**p >= P_prev**q
            ratio = math.log2(P) - float(s.tau) * math.log2(st.w * st.e)
        else:
            cond3 = True
            ratio = float("nan")
        out.append(ConditionCheck(st.n, cond3, ratio, st.e >= 2))
        P_prev = P
    return out


def xi_of(s: Schedule) -> tuple[Fraction, Fraction]:
    """(truncated xi, bound on the log of the omitted tail factor)."""
    return s.xi, s.xi_tail_bound


def measure_ladder(s: Schedule) -> list[Fraction]:
    return [st.xi for st in s.stages]


# Sumsets F^t


def _ft_radix(s: Schedule, t: int, k: int) -> tuple[list[int], list[int]]:
    ins = s.event(t)
    n0 = ins.n
    if n0 + k > s.depth or s.stages[n0 + k].e is None:
        raise ValueError(f"F_{k}^{t} needs e_{n0 + k}, schedule stops earlier")
    radix = [s.stages[n0 + j].e for j in range(k + 1)]
    strides = [s.stages[n0 + j].w for j in range(k + 1)]
    low = 0
    for j in range(k + 1):
        if low >= strides[j]:
            raise SumsetCollision(
                f"F^{t}: digits below stage {n0 + j} reach {low} >= w={strides[j]}"
            )
        low += (radix[j] - 1) * strides[j]
    return radix, strides


def ft_max_k(s: Schedule, t: int) -> int:
    n0 = s.event(t).n
    k = -1
    while n0 + k + 1 <= s.depth and s.stages[n0 + k + 1].e is not None:
        k += 1
    return k


def ft_offsets(s: Schedule, t: int, k: int) -> list[int]:
    """Sorted F_k^t = {sum_j a_j w_{n_t + j} : 0 <= a_j < e_{n_t + j}}, including 0."""
    radix, strides = _ft_radix(s, t, k)
    values = [0]
    for e, w in zip(radix, strides):
        values = [a * w + v for a in range(e) for v in values]
    if len(values) != math.prod(radix):
        raise SumsetCollision("sumset size differs from the product of digit ranges")
    return values


def ft_sequence(s: Schedule, t: int, k: int | None = None) -> IntSeq:
    """Positive elements of F_k^t as a random-access sequence (0 dropped).

    The n-th term is read off the mixed-radix digits of n, so lengths far
    beyond enumeration are supported.
    """
    if k is None:
        k = ft_max_k(s, t)
    if k < 0:
        raise ValueError(f"schedule too shallow for F^{t}")
    radix, strides = _ft_radix(s, t, k)
    length = math.prod(radix) - 1

    def term(n: int) -> int:
        v = 0
        for e, w in zip(radix, strides):
            n, a = divmod(n, e)
            v += a * w
        return v

    return FormulaSeq(term, f"ft:{s.schedule_id()}:{t}:{k}", length)


# JSON


def schedule_from_dict(d: dict) -> Schedule:
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schedule schema_version {d.get('schema_version')!r}")
    insertions = tuple(
        Insertion(int(i["t"]), int(i["n"]), int(i["l"]), int(i["h_star"])) for i in d["insertions"]
    )
    ins_by_t = {i.t: i for i in insertions}
    stages = []
    for row in d["stages"]:
        stages.append(
            StageParams(
                n=int(row["n"]),
                h=int(row["h"]),
                r=int(row["r"]),
                h_tilde=int(row["h_tilde"]),
                w=int(row["w"]),
                e=None if row["e"] is None else int(row["e"]),
                c_log2=int(row["c_log2"]),
                xi=Fraction(row["xi"]),
                insertion=None if row["insertion"] is None else ins_by_t[int(row["insertion"])],
            )
        )
    return Schedule(
        kind=d["kind"],
        tau=None if d["tau"] is None else Fraction(d["tau"]),
        C=None if d["C_tau"] is None else int(d["C_tau"]),
        stages=tuple(stages),
        insertions=insertions,
        xi=Fraction(d["xi"]),
        xi_tail_bound=Fraction(d["xi_tail_bound"]),
        insertion_rule=d.get("insertion_rule", "explicit"),
        notes=tuple(d.get("notes", ())),
    )


def schedule_from_json(text: str) -> Schedule:
    return schedule_from_dict(json.loads(text))


def with_xi(s: Schedule, xi: Fraction) -> Schedule:
    """Same schedule with a different starting measure (e.g. a deeper truncation)."""
    xi = Fraction(xi)
    if not (0 < xi <= s.xi):
        raise ValueError("xi must lie in (0, schedule xi]")
    factor = xi / s.xi
    stages = tuple(replace(st, xi=st.xi * factor) for st in s.stages)
    return replace(s, xi=xi, stages=stages)
