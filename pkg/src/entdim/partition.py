"""Finite partitions of a tower system.

A partition is fixed at a reference tower: every (column, level) cell of
that tower carries a label, and spacers created by later insertions carry a
label per insertion event (or a shared residual label). Later stages never
split a cell across labels, so the same partition applies to every tower
built on top of the reference tower.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .config import enumeration_budget
from .errors import EnumerationInfeasible, PartitionError
from .tower import OpKind, SpacerTag, Tower


@dataclass(frozen=True, eq=False)
class Partition:
    ref: Tower
    table: np.ndarray  # shape (count, height) of the reference tower
    names: tuple[str, ...]
    spacer_default: int
    spacer_labels: Mapping[int, int] = field(default_factory=dict)
    kind: str = "custom"

    def __post_init__(self):
        if self.table.shape != (self.ref.count, self.ref.height):
            raise PartitionError("label table shape does not match the reference tower")
        labels = set(np.unique(self.table).tolist()) | {self.spacer_default}
        labels |= set(self.spacer_labels.values())
        if min(labels) < 0 or max(labels) >= len(self.names):
            raise PartitionError("labels must index into names")
        self.table.setflags(write=False)

    @property
    def n_cells(self) -> int:
        return len(self.names)

    def spacer_label(self, event: int) -> int:
        return self.spacer_labels.get(event, self.spacer_default)

    def label_of(self, tag) -> int:
        if isinstance(tag, SpacerTag):
            return self.spacer_label(tag.event)
        return int(self.table[tag.col, tag.level])

    def check_tower(self, W: Tower) -> None:
        if not W.has_ancestor(self.ref):
            raise PartitionError(f"{self.ref.label} is not an ancestor of {W.label}")

    def cell_measure(self, label: int, W: Tower | None = None) -> Fraction:
        """Measure of a cell inside W (default: the reference tower)."""
        m = int(np.count_nonzero(self.table == label)) * self.ref.width
        if W is not None:
            self.check_tower(W)
            for t in W.chain():
                if t is self.ref:
                    break
                if t.op.kind is OpKind.INS and self.spacer_label(t.op.event) == label:
                    m += t.measure - t.parent.measure
        return m

    def describe(self) -> dict:
        return {"kind": self.kind, "ref": self.ref.label, "cells": list(self.names)}

    def join(self, other: Partition) -> Partition:
        """The common refinement; both partitions must share the reference tower."""
        if other.ref is not self.ref:
            raise PartitionError("joined partitions need the same reference tower")
        k = other.n_cells
        table = self.table.astype(np.int64) * k + other.table
        events = set(self.spacer_labels) | set(other.spacer_labels)
        spacer = {e: self.spacer_label(e) * k + other.spacer_label(e) for e in events}
        default = self.spacer_default * k + other.spacer_default
        names = tuple(f"{a}&{b}" for a in self.names for b in other.names)
        return Partition(self.ref, _compact(table, len(names)), names, default, spacer, "join")


def _compact(table: np.ndarray, n: int) -> np.ndarray:
    dtype = np.uint8 if n <= 255 else np.int32
    return np.ascontiguousarray(table, dtype=dtype)


def _require_enumerable(ref: Tower) -> None:
    if not ref.enumerable(enumeration_budget()):
        raise EnumerationInfeasible(
            f"reference tower {ref.label} has 2^{ref.c_log2} x {ref.height} cells, over budget"
        )


def symbol_partition(W0: Tower) -> Partition:
    """Cells {0, 1, s}: the two initial columns and all spacers."""
    if W0.op.kind is not OpKind.INITIAL:
        raise PartitionError("the symbol partition lives on the initial tower")
    table = np.array([[0], [1]], dtype=np.uint8)
    return Partition(W0, table, ("0", "1", "s"), 2, {}, "symbols")


def two_cell(ref: Tower, cells: Iterable[tuple[int, int]]) -> Partition:
    """{A, A^c} with A a union of (column, level) cells; spacers fall in A^c."""
    _require_enumerable(ref)
    table = np.ones((ref.count, ref.height), dtype=np.uint8)
    for col, level in cells:
        if not (0 <= col < ref.count and 0 <= level < ref.height):
            raise PartitionError(f"cell ({col}, {level}) outside {ref.label}")
        table[col, level] = 0
    return Partition(ref, table, ("A", "Ac"), 1, {}, "two-cell")


def level_set_partition(ref: Tower) -> Partition:
    """Every cell of the reference tower is its own label; spacers share one more."""
    _require_enumerable(ref)
    c, h = ref.count, ref.height
    table = np.arange(c * h, dtype=np.int64).reshape(c, h)
    names = tuple(f"{i}.{j}" for i in range(c) for j in range(h)) + ("s",)
    return Partition(ref, _compact(table, c * h + 1), names, c * h, {}, "level-sets")


def random_union(ref: Tower, rng: np.random.Generator, max_fraction: Fraction = Fraction(1, 2)) -> Partition:
    """Random union A of cells with 0 < mu(A) <= max_fraction * mu(ref)."""
    _require_enumerable(ref)
    total = ref.count * ref.height
    limit = int(Fraction(max_fraction) * total)
    if limit < 1:
        raise PartitionError("max_fraction too small for a single cell")
    size = int(rng.integers(1, limit + 1))
    flat = rng.choice(total, size=size, replace=False)
    cells = [(int(i) // ref.height, int(i) % ref.height) for i in flat]
    p = two_cell(ref, cells)
    return Partition(p.ref, p.table, p.names, p.spacer_default, {}, "random-union")


def lift_table(W: Tower, p: Partition) -> np.ndarray:
    """Label table of an enumerable tower W above the reference tower."""
    p.check_tower(W)
    if not W.enumerable(enumeration_budget()):
        raise EnumerationInfeasible(f"{W.label} has {W.cells} cells, over budget")
    return _lift(W, p)


def _lift(W: Tower, p: Partition) -> np.ndarray:
    if W is p.ref:
        return np.asarray(p.table)
    op = W.op
    P = W.parent
    T = _lift(P, p)
    cP = P.count
    if op.kind is OpKind.REP:
        return np.tile(T, (1, op.r))
    cols = np.arange(W.count, dtype=np.int64)
    if op.kind is OpKind.IND:
        digits = np.stack([(cols // cP ** (op.e - 1 - k)) % cP for k in range(op.e)], axis=1)
        return T[digits].reshape(W.count, W.height)
    digits = np.stack([(cols // cP ** (op.e - k)) % cP for k in range(op.e + 1)], axis=1)
    hP, hs = P.height, op.h_star
    g = hP + hs
    out = np.full((W.count, W.height), p.spacer_label(op.event), dtype=T.dtype)
    for k in range(op.e):
        ell = (digits[:, k + 1] + 1) % hs
        for l in range(hs):
            rows = np.nonzero(ell == l)[0]
            if rows.size:
                out[rows, k * g + l : k * g + l + hP] = T[digits[rows, k]]
    return out
