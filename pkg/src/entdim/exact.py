"""Exact joint distributions of partition labels along offsets.

Two independent routes:

* `table` enumerates the label table of the tower (numpy), which needs the
  tower to fit the enumeration budget;
* `structural` never enumerates the tower. It counts columns by
  (labels at a set of levels, column index mod M), recursing through the
  operations. Ind segments are independent digits; an Ins segment's phase
  depends on the next digit mod h*, which is why residues are carried.

Both return integer counts over (column, base level) pairs, so probabilities
are exact rationals.
"""

from __future__ import annotations

import math
from collections import defaultdict
from typing import Iterable, Sequence

import numpy as np

from .errors import EnumerationInfeasible, PartitionError, ShallowTower
from .partition import Partition, lift_table
from .patterns import count_keys, decode, encode, merge_counts
from .tower import OpKind, Tower

MAX_EXACT_BITS = 1 << 20  # column counts beyond this are not materialized


def window_for(W: Tower, offsets: Sequence[int], window: int | None = None) -> int:
    """Number of base levels j with j + max(offsets) < h."""
    if not offsets:
        raise ValueError("at least one offset is required")
    if min(offsets) < 0:
        raise ValueError("offsets must be non-negative")
    full = W.height - max(offsets)
    if full <= 0:
        raise ShallowTower(
            f"offset {max(offsets)} does not fit in {W.label} (height {W.height})"
        )
    if window is None:
        return full
    if not (1 <= window <= full):
        raise ShallowTower(f"window {window} must lie in [1, {full}] for {W.label}")
    return window


def _residues(c_log2: int, M: int) -> dict[int, int]:
    """How many d in [0, 2^c_log2) fall in each residue class mod M."""
    if c_log2 > MAX_EXACT_BITS:
        raise EnumerationInfeasible("column count too large for exact counting")
    c = 1 << c_log2
    if M == 1:
        return {0: c}
    q, rem = divmod(c, M)
    out = {r: q + (1 if r < rem else 0) for r in range(M)}
    return {r: v for r, v in out.items() if v}


class StructuralCounter:
    """Counts columns of towers above `partition.ref` by labels and residue."""

    def __init__(self, partition: Partition):
        self.p = partition
        self.cache: dict[tuple, dict] = {}

    def joint(self, W: Tower, levels: tuple[int, ...], M: int) -> dict[tuple, int]:
        key = (id(W), levels, M)
        hit = self.cache.get(key)
        if hit is None:
            hit = self._joint(W, levels, M)
            self.cache[key] = hit
        return hit

    def _joint(self, W: Tower, levels: tuple[int, ...], M: int) -> dict[tuple, int]:
        if W is self.p.ref:
            return self._base(W, levels, M)
        op = W.op
        if op.kind is OpKind.INITIAL:
            raise PartitionError(f"{self.p.ref.label} is not an ancestor of {W.label}")
        if not levels:
            return {((), r): v for r, v in _residues(W.c_log2, M).items()}
        P = W.parent
        if op.kind is OpKind.REP:
            inner = tuple(sorted({l % P.height for l in levels}))
            pos = {l: i for i, l in enumerate(inner)}
            idx = [pos[l % P.height] for l in levels]
            out: dict = defaultdict(int)
            for (labs, res), cnt in self.joint(P, inner, M).items():
                out[(tuple(labs[i] for i in idx), res)] += cnt
            return dict(out)
        if op.kind is OpKind.IND:
            return self._ind(W, P, op.e, levels, M)
        return self._ins(W, P, op.e, op.h_star, op.event, levels, M)

    def _base(self, W: Tower, levels: tuple[int, ...], M: int) -> dict[tuple, int]:
        table = self.p.table
        c = W.count
        if levels:
            sub = table[:, list(levels)].astype(np.int64)
        else:
            sub = np.zeros((c, 0), dtype=np.int64)
        res = (np.arange(c, dtype=np.int64) % M)[:, None]
        rows, counts = np.unique(np.hstack([sub, res]), axis=0, return_counts=True)
        return {
            (tuple(int(x) for x in row[:-1]), int(row[-1])): int(n)
            for row, n in zip(rows, counts)
        }

    def _ind(self, W: Tower, P: Tower, e: int, levels, M: int) -> dict[tuple, int]:
        hP = P.height
        segs: dict[int, list[int]] = defaultdict(list)
        for l in levels:
            segs[l // hP].append(l % hP)
        state: dict = {((), 0): 1}
        scalar = 1
        for k in range(e):
            w = pow(2, P.c_log2 * (e - 1 - k), M) if M > 1 else 0
            if k in segs:
                J = self.joint(P, tuple(segs[k]), M)
            elif M == 1:
                scalar *= P.count
                continue
            else:
                J = {((), r): v for r, v in _residues(P.c_log2, M).items()}
            new: dict = defaultdict(int)
            for (labs, res), cnt in state.items():
                for (l2, r2), c2 in J.items():
                    new[(labs + l2, (res + r2 * w) % M)] += cnt * c2
            state = new
        if scalar != 1:
            state = {k: v * scalar for k, v in state.items()}
        return dict(state)

    def _ins(self, W: Tower, P: Tower, e: int, hs: int, event: int, levels, M: int):
        hP = P.height
        g = hP + hs
        spacer = self.p.spacer_label(event)
        segs: dict[int, list[int]] = defaultdict(list)
        for l in levels:
            segs[l // g].append(l % g)

        def need_rho(j: int) -> bool:
            return j >= 1 and (j - 1) in segs

        # digits j = e, e-1, ..., 0; state key (labels of segments > j, d_j mod hs, residue)
        state: dict = {((), 0, 0): 1}
        scalar = 1
        for j in range(e, -1, -1):
            w = pow(2, P.c_log2 * (e - j), M) if M > 1 else 0
            rho_mod = hs if need_rho(j) else 1
            L = math.lcm(rho_mod, M)
            new: dict = defaultdict(int)
            if j < e and j in segs:
                qs = segs[j]
                cand = tuple(sorted({q - l for q in qs for l in range(hs) if 0 <= q - l < hP}))
                pos = {x: i for i, x in enumerate(cand)}
                J = self.joint(P, cand, L)
                for (labs, rho, res), cnt in state.items():
                    ell = (rho + 1) % hs
                    where = [pos.get(q - ell) if 0 <= q - ell < hP else None for q in qs]
                    for (cl, rL), c2 in J.items():
                        seg_labels = tuple(spacer if i is None else cl[i] for i in where)
                        new[(seg_labels + labs, rL % rho_mod, (res + rL * w) % M)] += cnt * c2
            else:
                if L == 1:
                    scalar *= P.count
                    state = {(labs, 0, res): cnt for (labs, rho, res), cnt in state.items()}
                    continue
                R = _residues(P.c_log2, L)
                for (labs, rho, res), cnt in state.items():
                    for r, c2 in R.items():
                        new[(labs, r % rho_mod, (res + r * w) % M)] += cnt * c2
            state = new
        out: dict = defaultdict(int)
        for (labs, rho, res), cnt in state.items():
            out[(labs, res)] += cnt * scalar
        return dict(out)


def structural_counts(
    W: Tower, p: Partition, offsets: Sequence[int], window: int | None = None,
    counter: StructuralCounter | None = None,
) -> dict[tuple[int, ...], int]:
    """Pattern -> number of (column, base level) pairs, by structural recursion."""
    p.check_tower(W)
    if W.c_log2 > MAX_EXACT_BITS:
        raise EnumerationInfeasible(f"{W.label} is too large for exact counting")
    n = window_for(W, offsets, window)
    counter = counter or StructuralCounter(p)
    uniq = tuple(sorted(set(offsets)))
    pos = [uniq.index(o) for o in offsets]
    out: dict = defaultdict(int)
    for j in range(n):
        levels = tuple(j + o for o in uniq)
        for (labs, _), cnt in counter.joint(W, levels, 1).items():
            out[tuple(labs[i] for i in pos)] += cnt
    return dict(out)


def table_rows(W: Tower, p: Partition, offsets: Sequence[int], window: int | None = None) -> Iterable[np.ndarray]:
    """Label rows (one per column) for each base level j of the window."""
    n = window_for(W, offsets, window)
    T = lift_table(W, p)
    offs = np.asarray(offsets, dtype=np.int64)
    for j in range(n):
        yield T[:, j + offs]


def table_counts(W: Tower, p: Partition, offsets: Sequence[int], window: int | None = None) -> dict[tuple[int, ...], int]:
    """Pattern -> number of (column, base level) pairs, from the label table."""
    k = p.n_cells
    n = len(offsets)
    parts = [count_keys(encode(rows, k)) for rows in table_rows(W, p, offsets, window)]
    keys, counts = merge_counts(parts)
    return {decode(key, k, n): int(c) for key, c in zip(keys, counts)}


def exact_counts(
    W: Tower, p: Partition, offsets: Sequence[int], window: int | None = None, method: str = "auto"
) -> dict[tuple[int, ...], int]:
    if method == "auto":
        method = "table" if W.enumerable() else "structural"
    if method == "table":
        return table_counts(W, p, offsets, window)
    if method == "structural":
        return structural_counts(W, p, offsets, window)
    raise ValueError(f"unknown exact method {method!r}")
