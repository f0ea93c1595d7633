"""Symbolic cutting-and-stacking towers.

A tower is never stored cell by cell. Each tower records the operation
that produced it from its parent, so any (column, level) can be traced back
to an earlier stage in O(number of operations).

Column indexing: a column of Ind(W, e) is the tuple (i_1, ..., i_e) of parent
columns, read as a base-c integer with i_1 most significant. Ins(W, e, h*)
adds a last digit i_{e+1}; its k-th segment is preceded by
l_k = (i_{k+1} + 1) mod h* spacers (the +1 turns 0-based digits into the
1-based indices of the construction) and followed by h* - l_k spacers.
Levels are 0-based from the bottom.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache

from .config import enumeration_budget
from .errors import EnumerationInfeasible, SpacerPoolOverdrawn
from .schedule import Schedule

MAX_WIDTH_BITS = 1 << 22  # exact widths need 2**c_log2 as an integer


class OpKind(str, Enum):
    INITIAL = "initial"
    IND = "ind"
    REP = "rep"
    INS = "ins"


@dataclass(frozen=True)
class Op:
    kind: OpKind
    e: int | None = None
    r: int | None = None
    h_star: int | None = None
    event: int | None = None

    def describe(self) -> str:
        if self.kind is OpKind.IND:
            return f"Ind(e={self.e})"
        if self.kind is OpKind.REP:
            return f"Rep(r={self.r})"
        if self.kind is OpKind.INS:
            return f"Ins(e={self.e},h*={self.h_star},t={self.event})"
        return "Initial"


@dataclass(frozen=True, eq=False)
class Tower:
    label: str
    height: int
    c_log2: int
    measure: Fraction
    op: Op
    parent: Tower | None = None
    depth: int = 0  # number of operations applied since the initial tower

    @property
    def count(self) -> int:
        return 1 << self.c_log2

    @property
    def cells(self) -> int:
        return self.count * self.height

    @property
    def width(self) -> Fraction:
        """Common width of every column (all cuts are into equal pieces)."""
        if self.c_log2 > MAX_WIDTH_BITS:
            raise EnumerationInfeasible(f"{self.label}: 2^{self.c_log2} columns, width too large")
        return self.measure / (self.count * self.height)

    @property
    def level_measure(self) -> Fraction:
        """Measure of one cell (one level of one column)."""
        return self.width

    def chain(self) -> list[Tower]:
        """This tower followed by its ancestors down to the initial tower."""
        out = []
        t: Tower | None = self
        while t is not None:
            out.append(t)
            t = t.parent
        return out

    def has_ancestor(self, other: Tower) -> bool:
        return any(t is other for t in self.chain())

    def enumerable(self, budget: int | None = None) -> bool:
        budget = enumeration_budget() if budget is None else budget
        return self.c_log2 <= 62 and self.cells <= budget

    def describe(self) -> dict:
        d = {
            "label": self.label,
            "height": str(self.height),
            "c_log2": str(self.c_log2),
            "measure": _frac(self.measure),
            "op": self.op.describe(),
            "parent": None if self.parent is None else self.parent.label,
        }
        if self.c_log2 <= 4096:
            d["column_count"] = str(self.count)
        return d

    def __repr__(self) -> str:
        return f"Tower({self.label}, h={self.height}, c=2^{self.c_log2})"


def _frac(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass
class SpacerPool:
    """Mass available for spacers; every insertion draws from it."""

    total: Fraction
    consumed: Fraction = Fraction(0)
    draws: list[tuple[int, Fraction]] = field(default_factory=list)

    @property
    def remaining(self) -> Fraction:
        return self.total - self.consumed

    def draw(self, amount: Fraction, event: int) -> None:
        amount = Fraction(amount)
        if amount > self.remaining:
            raise SpacerPoolOverdrawn(
                f"spacer pool overdrawn: need {_frac(amount)}, have {_frac(self.remaining)}"
            )
        self.consumed += amount
        self.draws.append((event, amount))


@dataclass(frozen=True)
class LevelTag:
    """A level of a column of the reference tower."""

    stage: str
    col: int
    level: int


@dataclass(frozen=True)
class SpacerTag:
    """A spacer cell: insertion event, 1-based segment, offset inside the segment."""

    event: int
    segment: int
    offset: int


def initial_tower(xi: Fraction) -> Tower:
    """W_0: two columns of height one, P_0 and P_1, total measure xi."""
    xi = Fraction(xi)
    if not (0 < xi <= 1):
        raise ValueError("xi must lie in (0, 1]")
    return Tower("W0", 1, 1, xi, Op(OpKind.INITIAL))


def ind(W: Tower, e: int, label: str | None = None) -> Tower:
    if e < 1:
        raise ValueError("e must be >= 1")
    return Tower(
        label or f"Ind({W.label},{e})",
        W.height * e,
        W.c_log2 * e,
        W.measure,
        Op(OpKind.IND, e=e),
        W,
        W.depth + 1,
    )


def rep(W: Tower, r: int, label: str | None = None) -> Tower:
    if r < 1:
        raise ValueError("r must be >= 1")
    return Tower(
        label or f"Rep({W.label},{r})",
        W.height * r,
        W.c_log2,
        W.measure,
        Op(OpKind.REP, r=r),
        W,
        W.depth + 1,
    )


def ins(
    W: Tower,
    e: int,
    h_star: int,
    pool: SpacerPool,
    event: int = 1,
    label: str | None = None,
) -> Tower:
    if e < 1 or h_star < 1:
        raise ValueError("e and h_star must be >= 1")
    spacer_mass = W.measure * Fraction(h_star, W.height)
    pool.draw(spacer_mass, event)
    return Tower(
        label or f"Ins({W.label},{e},{h_star})",
        e * (W.height + h_star),
        W.c_log2 * (e + 1),
        W.measure + spacer_mass,
        Op(OpKind.INS, e=e, h_star=h_star, event=event),
        W,
        W.depth + 1,
    )


_LABEL_RE = re.compile(r"^W(~|t)?(\d+)$")


def ladder_index(label: str) -> int:
    """Position of W_n (2n) or W~_n (2n+1) in the build ladder."""
    m = _LABEL_RE.match(label.strip())
    if not m:
        raise ValueError(f"bad tower label {label!r}; use Wn or W~n")
    n = int(m.group(2))
    return 2 * n + (1 if m.group(1) else 0)


def ladder_label(index: int) -> str:
    n, tilde = divmod(index, 2)
    return f"W~{n}" if tilde else f"W{n}"


@dataclass
class Ladder:
    schedule: Schedule
    towers: list[Tower]
    pool: SpacerPool

    def get(self, label: str | int) -> Tower:
        idx = label if isinstance(label, int) else ladder_index(label)
        if idx >= len(self.towers):
            raise IndexError(f"{ladder_label(idx)} is beyond the built ladder")
        return self.towers[idx]

    @property
    def top(self) -> Tower:
        return self.towers[-1]

    def stage_of(self, tower: Tower) -> int:
        for i, t in enumerate(self.towers):
            if t is tower:
                return i
        raise ValueError(f"{tower.label} is not on this ladder")


def build(s: Schedule, upto: str | int | None = None) -> Ladder:
    """Build the ladder W_0, W~_0, W_1, W~_1, ... up to `upto` (default W~_depth)."""
    last = 2 * s.depth + 1 if upto is None else (upto if isinstance(upto, int) else ladder_index(upto))
    if last > 2 * s.depth + 1:
        raise ValueError(f"schedule depth {s.depth} does not reach {ladder_label(last)}")
    pool = SpacerPool(1 - s.xi)
    towers = [initial_tower(s.xi)]
    for idx in range(1, last + 1):
        n, tilde = divmod(idx, 2)
        prev = towers[-1]
        label = ladder_label(idx)
        if tilde:
            towers.append(rep(prev, s.stages[n].r, label))
        else:
            st = s.stages[n - 1]
            if st.e is None:
                raise ValueError(f"e_{n - 1} is undefined; cannot build {label}")
            if st.insertion is not None:
                towers.append(ins(prev, st.e, st.insertion.h_star, pool, st.insertion.t, label))
            else:
                towers.append(ind(prev, st.e, label))
    ladder = Ladder(s, towers, pool)
    _check_against_schedule(ladder)
    return ladder


def _check_against_schedule(ladder: Ladder) -> None:
    s = ladder.schedule
    for idx, t in enumerate(ladder.towers):
        n, tilde = divmod(idx, 2)
        st = s.stages[n]
        h = st.h_tilde if tilde else st.h
        if t.height != h or t.c_log2 != st.c_log2 or t.measure != st.xi:
            raise AssertionError(f"{t.label} disagrees with its schedule stage")


# Resolution


def _check_position(W: Tower, col: int, level: int) -> None:
    if not (0 <= level < W.height):
        raise ValueError(f"level {level} outside [0, {W.height})")
    if not (0 <= col < W.count):
        raise ValueError(f"column id outside [0, 2^{W.c_log2})")


def resolve(W: Tower, col: int, level: int, ref: Tower | None = None) -> LevelTag | SpacerTag:
    """Trace (col, level) of W back to the reference tower (default: W_0)."""
    _check_position(W, col, level)
    t = W
    while True:
        if ref is not None and t is ref:
            return LevelTag(t.label, col, level)
        op = t.op
        if op.kind is OpKind.INITIAL:
            if ref is not None:
                raise ValueError(f"{ref.label} is not an ancestor of {W.label}")
            return LevelTag(t.label, col, level)
        P = t.parent
        hP = P.height
        if op.kind is OpKind.REP:
            level %= hP
        elif op.kind is OpKind.IND:
            seg, level = divmod(level, hP)
            col = (col >> (P.c_log2 * (op.e - 1 - seg))) & (P.count - 1)
        else:
            g = hP + op.h_star
            seg, q = divmod(level, g)
            mask = P.count - 1
            nxt = (col >> (P.c_log2 * (op.e - seg - 1))) & mask
            ell = (nxt + 1) % op.h_star
            inner = q - ell
            if inner < 0 or inner >= hP:
                return SpacerTag(op.event, seg + 1, q)
            col = (col >> (P.c_log2 * (op.e - seg))) & mask
            level = inner
        t = P


def column_digits(W: Tower, col: int) -> tuple[int, ...]:
    """Parent-column digits (i_1, ..., i_e[, i_{e+1}]) as 0-based integers."""
    op = W.op
    if op.kind not in (OpKind.IND, OpKind.INS):
        raise ValueError("only Ind/Ins columns have digits")
    n = op.e + (1 if op.kind is OpKind.INS else 0)
    bits = W.parent.c_log2
    mask = W.parent.count - 1
    return tuple((col >> (bits * (n - 1 - k))) & mask for k in range(n))


def column_from_digits(W: Tower, digits) -> int:
    bits = W.parent.c_log2
    col = 0
    for d in digits:
        col = (col << bits) | int(d)
    return col


def spacer_offsets(W: Tower, col: int) -> tuple[int, ...]:
    """Leading spacer counts l_k of the segments of an Ins column."""
    if W.op.kind is not OpKind.INS:
        raise ValueError("not an Ins tower")
    d = column_digits(W, col)
    return tuple((d[k + 1] + 1) % W.op.h_star for k in range(W.op.e))


def name_of(W: Tower, col: int) -> str:
    """Column name over {0, 1, s}: the initial level set of each cell, s for spacers."""
    _check_position(W, col, 0)
    return _name_cached(W, col)


@lru_cache(maxsize=1 << 16)
def _name_cached(W: Tower, col: int) -> str:
    op = W.op
    if op.kind is OpKind.INITIAL:
        return str(col)
    P = W.parent
    if op.kind is OpKind.REP:
        return _name_cached(P, col) * op.r
    digits = column_digits(W, col)
    if op.kind is OpKind.IND:
        return "".join(_name_cached(P, d) for d in digits)
    parts = []
    for k in range(op.e):
        ell = (digits[k + 1] + 1) % op.h_star
        parts.append("s" * ell + _name_cached(P, digits[k]) + "s" * (op.h_star - ell))
    return "".join(parts)


def all_names(W: Tower, budget: int | None = None) -> list[str]:
    if not W.enumerable(budget):
        raise EnumerationInfeasible(f"{W.label} has {W.cells} cells, over budget")
    return [_name_cached(W, c) for c in range(W.count)]


def name_count(W: Tower, budget: int | None = None) -> int:
    """N(W): number of distinct column names."""
    return len(set(all_names(W, budget)))


def sample_column(W: Tower, seed: int) -> int:
    """Uniform column id (all columns have equal width), reproducible from the seed."""
    import random

    if W.c_log2 <= 4096 and W.width * W.count * W.height != W.measure:
        raise AssertionError(f"{W.label}: columns do not have equal width")
    return random.Random(seed).getrandbits(W.c_log2)


def offset_distribution(W: Tower) -> dict[int, Fraction]:
    """Fraction of columns whose k-th segment starts with l spacers (same for all k)."""
    if W.op.kind is not OpKind.INS:
        raise ValueError("not an Ins tower")
    c = W.parent.count
    h = W.op.h_star
    counts = {}
    for ell in range(h):
        # digits d in [0, c) with (d + 1) mod h == ell
        first = (ell - 1) % h
        counts[ell] = Fraction(0 if first >= c else (c - 1 - first) // h + 1, c)
    return counts


def spacer_mass(W: Tower) -> Fraction:
    """Measure of all spacer cells created by the Ins operations below W."""
    total = Fraction(0)
    for t in W.chain():
        if t.op.kind is OpKind.INS:
            total += t.measure - t.parent.measure
    return total
