"""Integer sequences and their upper/lower dimensions.

A sequence here is strictly increasing and positive. Sequences are
extended lazily: closed-form families answer `term(n)` directly, the rest
cache a prefix produced by an iterator. Extending a sequence never changes
terms that were already produced.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import mpmath

from .config import parse_fraction
from .errors import AnchorSpacingError, InsufficientSequence, NonMonotoneReversal

DEFAULT_MAX_POINTS = 200_001


def iroot(n: int, k: int) -> int:
    """Largest integer x with x**k <= n, for n >= 0 and k >= 1."""
    if n < 0:
        raise ValueError("iroot of a negative number")
    if k < 1:
        raise ValueError("root degree must be >= 1")
    if n < 2 or k == 1:
        return n
    x = 1 << -(-n.bit_length() // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            break
        x = y
    while x**k > n:
        x -= 1
    while (x + 1) ** k <= n:
        x += 1
    if not (x**k <= n < (x + 1) ** k):
        raise ArithmeticError(f"iroot bracket check failed for n={n}, k={k}")
    return x


def floor_rational_power(n: int, exponent: Fraction) -> int:
    """Exact floor(n ** exponent) for a non-negative rational exponent."""
    exponent = Fraction(exponent)
    if exponent < 0:
        raise ValueError("exponent must be non-negative")
    return iroot(n**exponent.numerator, exponent.denominator)


class IntSeq:
    """Lazily extended, strictly increasing sequence of positive integers.

    Terms are 1-based: `seq.term(1)` is s_1.
    """

    name: str = "seq"
    length: int | None = None  # None means unbounded
    random_access: bool = False

    def term(self, n: int) -> int:
        raise NotImplementedError

    def prefix(self, n: int) -> list[int]:
        return [self.term(i) for i in range(1, n + 1)]

    def iterate(self) -> Iterator[int]:
        for i in itertools.count(1):
            if self.length is not None and i > self.length:
                return
            yield self.term(i)

    def available(self, n: int) -> bool:
        """True when at least n terms exist."""
        if self.length is not None:
            return n <= self.length
        return True

    def rank(self, x: int) -> int:
        """Number of terms <= x."""
        if x < 1:
            return 0
        if self.random_access:
            lo, hi = 0, x if self.length is None else min(x, self.length)
            while lo < hi:
                mid = (lo + hi + 1) // 2
                if self.term(mid) <= x:
                    lo = mid
                else:
                    hi = mid - 1
            return lo
        count = 0
        for v in self.iterate():
            if v > x:
                break
            count += 1
        return count

    def _check_n(self, n: int) -> None:
        if n < 1:
            raise IndexError(f"sequence index must be >= 1, got {n}")
        if self.length is not None and n > self.length:
            raise InsufficientSequence(
                f"{self.name} has {self.length} terms, term {n} requested"
            )

    def __repr__(self) -> str:
        return f"IntSeq({self.name})"


class FormulaSeq(IntSeq):
    """Sequence given by a closed form n -> s_n."""

    random_access = True

    def __init__(self, fn: Callable[[int], int], name: str, length: int | None = None):
        self._fn = fn
        self.name = name
        self.length = length

    def term(self, n: int) -> int:
        self._check_n(n)
        return self._fn(n)


class ExplicitSeq(IntSeq):
    """Finite sequence stored in full."""

    random_access = True

    def __init__(self, terms: Iterable[int], name: str = "explicit"):
        values = [int(v) for v in terms]
        _validate_increasing(values, name)
        self._terms = values
        self.name = name
        self.length = len(values)

    def term(self, n: int) -> int:
        self._check_n(n)
        return self._terms[n - 1]

    def prefix(self, n: int) -> list[int]:
        if n > self.length:
            self._check_n(n)
        return self._terms[:n]

    @property
    def terms(self) -> list[int]:
        return list(self._terms)


class IterSeq(IntSeq):
    """Sequence produced by an iterator, with a cached, validated prefix."""

    def __init__(self, factory: Callable[[], Iterator[int]], name: str):
        self._factory = factory
        self._it: Iterator[int] | None = None
        self._cache: list[int] = []
        self._exhausted = False
        self.name = name

    def _extend(self, n: int) -> None:
        if self._it is None:
            self._it = iter(self._factory())
        while len(self._cache) < n and not self._exhausted:
            try:
                v = next(self._it)
            except StopIteration:
                self._exhausted = True
                self.length = len(self._cache)
                break
            v = int(v)
            if v < 1 or (self._cache and v <= self._cache[-1]):
                raise ValueError(f"{self.name}: term {v} breaks strict increase")
            self._cache.append(v)

    def term(self, n: int) -> int:
        if n < 1:
            raise IndexError(f"sequence index must be >= 1, got {n}")
        self._extend(n)
        if n > len(self._cache):
            raise InsufficientSequence(
                f"{self.name} has {len(self._cache)} terms, term {n} requested"
            )
        return self._cache[n - 1]

    def prefix(self, n: int) -> list[int]:
        if n:
            self.term(n)
        return self._cache[:n]

    def available(self, n: int) -> bool:
        self._extend(n)
        return len(self._cache) >= n

    def iterate(self) -> Iterator[int]:
        for i in itertools.count(1):
            self._extend(i)
            if i > len(self._cache):
                return
            yield self._cache[i - 1]


def _validate_increasing(values: Sequence[int], name: str) -> None:
    for i, v in enumerate(values):
        if v < 1:
            raise ValueError(f"{name}: terms must be positive, got {v}")
        if i and v <= values[i - 1]:
            raise ValueError(f"{name}: terms must be strictly increasing at index {i + 1}")


# Generators


def naturals() -> IntSeq:
    return FormulaSeq(lambda n: n, "nat")


def squares() -> IntSeq:
    return FormulaSeq(lambda n: n * n, "squares")


def powers_of_two() -> IntSeq:
    """{2^k : k >= 1}."""
    return FormulaSeq(lambda n: 1 << n, "pow2")


def floor_powers(exponent) -> IntSeq:
    """{floor(n^x) : n >= 1} for a rational x >= 1."""
    x = parse_fraction(exponent)
    if x < 1:
        raise ValueError("floor_powers needs exponent >= 1 for strict increase")
    return FormulaSeq(lambda n: floor_rational_power(n, x), f"floorpow:{x}")


def arithmetic(a: int, d: int) -> IntSeq:
    if a < 1 or d < 1:
        raise ValueError("arithmetic progression needs a >= 1 and d >= 1")
    return FormulaSeq(lambda n: a + (n - 1) * d, f"arith:{a},{d}")


def explicit(terms: Iterable[int], name: str = "explicit") -> IntSeq:
    return ExplicitSeq(terms, name)


def from_file(path: str | Path) -> IntSeq:
    """One integer per line (blank lines and '#' comments ignored)."""
    values = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            values.append(int(line))
    return ExplicitSeq(values, f"file:{path}")


def parse_seq(spec: str, ft_resolver: Callable[[str, int], IntSeq] | None = None) -> IntSeq:
    """Parse the sequence mini-language used by the CLI.

    squares | nat | pow2 | floorpow:<x> | arith:<a>,<d> | file:<path> | ft:<schedule>:<t>
    """
    spec = spec.strip()
    head, _, rest = spec.partition(":")
    if head == "squares" and not rest:
        return squares()
    if head == "nat" and not rest:
        return naturals()
    if head == "pow2" and not rest:
        return powers_of_two()
    if head == "floorpow" and rest:
        return floor_powers(parse_fraction(rest))
    if head == "arith" and rest:
        a, d = (int(x) for x in rest.split(","))
        return arithmetic(a, d)
    if head == "file" and rest:
        return from_file(rest)
    if head == "ft" and rest:
        ident, _, t = rest.rpartition(":")
        if not ident or not t:
            raise ValueError(f"bad ft sequence spec {spec!r}")
        if ft_resolver is None:
            raise ValueError("ft sequences need a schedule")
        return ft_resolver(ident, int(t))
    raise ValueError(f"unknown sequence spec {spec!r}")


# Dimensions


@dataclass(frozen=True)
class DimProfile:
    tau: Fraction
    ns: tuple[int, ...]
    values: tuple  # mpmath.mpf values n / s_n^tau


def dim_profile(seq: IntSeq, tau, n_max: int, start: int = 1, dps: int = 30) -> DimProfile:
    """Values n / s_n^tau for start <= n <= n_max, in extended precision."""
    t = parse_fraction(tau)
    if not seq.available(n_max):
        raise InsufficientSequence(f"{seq.name} is shorter than n_max={n_max}")
    with mpmath.workdps(dps):
        mt = mpmath.mpf(t.numerator) / t.denominator
        ns = tuple(range(start, n_max + 1))
        values = tuple(mpmath.mpf(n) / mpmath.power(mpmath.mpf(seq.term(n)), mt) for n in ns)
    return DimProfile(t, ns, values)


@dataclass(frozen=True)
class DimsEstimate:
    lower: float
    upper: float
    n_max: int
    window: int
    exhaustive: bool
    points: int

    def as_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "n_max": str(self.n_max),
            "window": str(self.window),
            "exhaustive": self.exhaustive,
            "points": self.points,
        }


def _log(x: int) -> float:
    return math.log(x)


def estimate_dims(
    seq: IntSeq,
    n_max: int,
    window: int | None = None,
    max_points: int = DEFAULT_MAX_POINTS,
) -> DimsEstimate:
    """Lower/upper dimension estimates from log(n)/log(s_n) over a tail window.

    The window is the last `window` indices up to n_max (default: 10% of
    n_max, at least 10). Windows longer than `max_points` on random-access
    sequences are evaluated on an evenly spaced grid including both ends.
    """
    if window is None:
        window = max(10, n_max // 10)
    if window < 1:
        raise ValueError("window must be positive")
    if n_max < 2 * window:
        raise InsufficientSequence(
            f"n_max={n_max} must be at least twice the window ({window})"
        )
    if not seq.available(n_max):
        raise InsufficientSequence(f"{seq.name} is shorter than n_max={n_max}")
    start = n_max - window + 1
    if window > max_points and seq.random_access:
        span = window - 1
        m = max_points - 1
        idx = sorted({start + (span * i) // m for i in range(max_points)})
        exhaustive = False
    else:
        idx = range(start, n_max + 1)
        exhaustive = True
    lo = math.inf
    hi = -math.inf
    count = 0
    for n in idx:
        s = seq.term(n)
        if s < 2:
            raise InsufficientSequence("s_n must exceed 1 inside the window")
        v = _log(n) / _log(s)
        if v < lo:
            lo = v
        if v > hi:
            hi = v
        count += 1
    return DimsEstimate(lo, hi, n_max, window, exhaustive, count)


# Transforms


def _merge_unique(*iterables: Iterable[int]) -> Iterator[int]:
    last = None
    for v in heapq.merge(*iterables):
        if v != last:
            yield v
            last = v


def _ranges_iter(ranges: Sequence[tuple[int, int]]) -> Iterator[int]:
    for lo, hi in ranges:
        yield from range(lo, hi + 1)


def densify_ranges(seq: IntSeq, anchors: Sequence[int]) -> list[tuple[int, int]]:
    """The filler ranges {1..n_1} and {s_{n_i}+1..n_{i+1}}; checks spacing."""
    anchors = [int(a) for a in anchors]
    if not anchors:
        raise AnchorSpacingError("at least one anchor is required")
    if anchors[0] < 1:
        raise AnchorSpacingError("anchors must be positive")
    ranges = [(1, anchors[0])]
    for a, b in zip(anchors, anchors[1:]):
        s_a = seq.term(a)
        if b < 2 * s_a:
            raise AnchorSpacingError(
                f"anchor spacing violated: n={b} < 2*s_{a}={2 * s_a}"
            )
        ranges.append((s_a + 1, b))
    return ranges


def densify(seq: IntSeq, anchors: Sequence[int]) -> IntSeq:
    """Union of the sequence with filler ranges; upper dimension becomes 1."""
    ranges = densify_ranges(seq, anchors)
    name = f"densify({seq.name},{list(anchors)})"
    return IterSeq(lambda: _merge_unique(seq.iterate(), _ranges_iter(ranges)), name)


def densify_counts(seq: IntSeq, anchors: Sequence[int]) -> list[tuple[int, int, int]]:
    """(n_j, s_{n_j}, |F ∩ [1, s_{n_j}]|) for every anchor, computed by ranks."""
    ranges = densify_ranges(seq, anchors)
    out = []
    for a in anchors:
        x = seq.term(a)
        count = seq.rank(x)
        for lo, hi in ranges:
            if lo > x:
                break
            top = min(hi, x)
            overlap = seq.rank(top) - seq.rank(lo - 1)
            count += (top - lo + 1) - overlap
        out.append((a, x, count))
    return out


def power_merge(seq: IntSeq, tau) -> IntSeq:
    """Union of the sequence with {floor(n^(1/tau))}; lower dimension >= tau."""
    t = parse_fraction(tau)
    if not (0 < t <= 1):
        raise ValueError("tau must lie in (0, 1]")
    powers = floor_powers(1 / t)
    name = f"power_merge({seq.name},{t})"
    return IterSeq(lambda: _merge_unique(seq.iterate(), powers.iterate()), name)


def seq_scale(seq: IntSeq, k: int) -> IntSeq:
    """The sequence k*S."""
    if k < 1:
        raise ValueError("scale factor must be >= 1")
    name = f"{k}*{seq.name}"
    if seq.random_access:
        return FormulaSeq(lambda n: k * seq.term(n), name, seq.length)
    return IterSeq(lambda: (k * v for v in seq.iterate()), name)


def seq_floor_div(seq: IntSeq, k: int) -> IntSeq:
    """Distinct values floor(s_i / k), in increasing order."""
    if k < 1:
        raise ValueError("divisor must be >= 1")
    if seq.term(1) < k:
        raise ValueError(f"floor division needs s_1 >= k (s_1={seq.term(1)}, k={k})")

    def gen() -> Iterator[int]:
        last = None
        for v in seq.iterate():
            q = v // k
            if q != last:
                yield q
                last = q

    return IterSeq(gen, f"{seq.name}//{k}")


def reverse_blocks(seq: IntSeq, anchors: Sequence[int]) -> IntSeq:
    """f_m = s_{n_j} - s_{n_j - m} for n_{j-1} < m <= n_j, with s_0 = 0.

    Needs n_1 >= 2 and n_{i+1} >= 1 + 2(n_1 + ... + n_i). A result that is
    not strictly increasing is reported, never repaired.
    """
    anchors = [int(a) for a in anchors]
    if not anchors or anchors[0] < 2:
        raise AnchorSpacingError("reverse_blocks needs n_1 >= 2")
    total = 0
    for i in range(len(anchors) - 1):
        total += anchors[i]
        if anchors[i + 1] < 1 + 2 * total:
            raise AnchorSpacingError(
                f"anchor spacing violated: n_{i + 2}={anchors[i + 1]} < {1 + 2 * total}"
            )

    def s(i: int) -> int:
        return 0 if i == 0 else seq.term(i)

    values: list[int] = []
    prev = 0
    for nj in anchors:
        top = s(nj)
        for m in range(prev + 1, nj + 1):
            values.append(top - s(nj - m))
        prev = nj
    bad = [i for i in range(1, len(values)) if values[i] <= values[i - 1]]
    if bad:
        i = bad[0]
        raise NonMonotoneReversal(
            f"reversed sequence not increasing at m={i + 1}: f={values[i - 1]}, {values[i]}"
        )
    return ExplicitSeq(values, f"reverse({seq.name},{anchors})")


@dataclass
class HereditaryResult:
    selected: tuple[int, ...]
    singleton_values: dict[int, float]
    oracle_calls: int
    verified: bool
    failures: list[tuple[int, ...]] = field(default_factory=list)


def hereditary_extract(
    window: Sequence[int],
    oracle: Callable[[frozenset], float],
    b: float,
    max_window: int = 20,
) -> HereditaryResult:
    """Greedy subset of `window` on which oracle(F') >= |F'| b / 4 for all F'.

    Candidates are tried by descending singleton value (first index wins
    ties); a candidate is kept when every subset containing it passes.
    The final set is re-verified over all of its subsets.
    """
    items = list(window)
    if len(items) > max_window:
        raise ValueError(f"window of {len(items)} exceeds the limit of {max_window}")
    if len(set(items)) != len(items):
        raise ValueError("window indices must be distinct")
    memo: dict[frozenset, float] = {}

    def value(sub: frozenset) -> float:
        if sub not in memo:
            memo[sub] = float(oracle(sub))
        return memo[sub]

    def ok(sub: frozenset) -> bool:
        return value(sub) >= len(sub) * b / 4

    singles = {i: value(frozenset([i])) for i in items}
    order = sorted(range(len(items)), key=lambda p: (-singles[items[p]], p))
    chosen: list[int] = []
    for p in order:
        x = items[p]
        good = True
        for r in range(len(chosen) + 1):
            for combo in itertools.combinations(chosen, r):
                if not ok(frozenset(combo + (x,))):
                    good = False
                    break
            if not good:
                break
        if good:
            chosen.append(x)
    failures = []
    for r in range(1, len(chosen) + 1):
        for combo in itertools.combinations(chosen, r):
            if not ok(frozenset(combo)):
                failures.append(tuple(sorted(combo)))
    return HereditaryResult(
        selected=tuple(sorted(chosen)),
        singleton_values=singles,
        oracle_calls=len(memo),
        verified=not failures,
        failures=failures,
    )


def first_rank(seq: IntSeq, value: int) -> int:
    """1-based position of `value` in the sequence; ValueError if absent."""
    r = seq.rank(value)
    if r == 0 or seq.term(r) != value:
        raise ValueError(f"{value} is not a term of {seq.name}")
    return r
