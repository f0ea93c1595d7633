"""Monte Carlo estimation of label patterns along offsets.

A sample is a uniform column and a uniform base level of the window; the
labels at the offsets are read by tracing each cell back to the reference
tower. Columns are held as int64 when the tower has at most 2^62 columns,
or as a row of parent digits when only the parent is that small; otherwise
a per-sample big-integer path is used.

Samples are drawn in fixed-size chunks, each with its own child seed of
one SeedSequence, so results do not depend on the number of workers.
"""

from __future__ import annotations

import random
from concurrent.futures import ProcessPoolExecutor
from typing import Sequence

import numpy as np

from .errors import EnumerationInfeasible
from .exact import window_for
from .partition import Partition
from .tower import OpKind, Tower, resolve

CHUNK = 1 << 15
INT_BITS = 62


def _dtype_for(p: Partition):
    return np.uint8 if p.n_cells <= 255 else np.int32


def _walk(t: Tower, p: Partition, cols: np.ndarray, levels: np.ndarray, out: np.ndarray) -> None:
    """Labels of (cols, levels) in tower t, written into out (int64 columns)."""
    active = np.ones(cols.shape[0], dtype=bool)
    cols = cols.copy()
    levels = levels.copy()
    while t is not p.ref:
        op = t.op
        if op.kind is OpKind.INITIAL:
            raise ValueError(f"{p.ref.label} is not an ancestor of the sampled tower")
        P = t.parent
        hP = P.height
        bits = P.c_log2
        mask = np.int64((1 << bits) - 1)
        if op.kind is OpKind.REP:
            levels %= hP
        elif op.kind is OpKind.IND:
            seg = levels // hP
            levels -= seg * hP
            shift = (bits * (op.e - 1 - seg)).astype(np.int64)
            cols = np.right_shift(cols, shift) & mask
        else:
            g = hP + op.h_star
            seg = levels // g
            q = levels - seg * g
            nxt = np.right_shift(cols, (bits * (op.e - 1 - seg)).astype(np.int64)) & mask
            inner = q - (nxt + 1) % op.h_star
            sp = active & ((inner < 0) | (inner >= hP))
            out[sp] = p.spacer_label(op.event)
            active &= ~sp
            cols = np.right_shift(cols, (bits * (op.e - seg)).astype(np.int64)) & mask
            levels = np.where(active, inner, 0)
        t = P
    out[active] = p.table[cols[active], levels[active]]


def _core(W: Tower, p: Partition) -> tuple[Tower, list[int]]:
    """First non-Rep tower at or below W (stopping at the reference) and the
    Rep heights passed on the way."""
    mods = []
    t = W
    while t is not p.ref and t.op.kind is OpKind.REP:
        mods.append(t.parent.height)
        t = t.parent
    return t, mods


def representation(W: Tower, p: Partition) -> str:
    """'int', 'digits' or 'bigint': how sampled columns of W are held."""
    core, _ = _core(W, p)
    if core.c_log2 <= INT_BITS:
        return "int"
    if core.op.kind in (OpKind.IND, OpKind.INS) and core.parent.c_log2 <= INT_BITS:
        return "digits"
    return "bigint"


def _sample_chunk(args) -> np.ndarray:
    W, p, offsets, n_window, size, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    offs = np.asarray(offsets, dtype=np.int64)
    out = np.empty((size, len(offs)), dtype=_dtype_for(p))
    j = rng.integers(0, n_window, size=size, dtype=np.int64)
    core, mods = _core(W, p)
    kind = representation(W, p)
    if kind == "int":
        if core.c_log2 == 0:
            cols = np.zeros(size, dtype=np.int64)
        else:
            cols = rng.integers(0, 1 << core.c_log2, size=size, dtype=np.int64)
        for i, o in enumerate(offs):
            lev = j + o
            for m in mods:
                lev %= m
            col_out = np.empty(size, dtype=np.int64)
            _walk(core, p, cols, lev, col_out)
            out[:, i] = col_out
        return out
    if kind == "digits":
        op = core.op
        P = core.parent
        nd = op.e + (1 if op.kind is OpKind.INS else 0)
        digits = rng.integers(0, 1 << P.c_log2, size=(size, nd), dtype=np.int64)
        rows = np.arange(size)
        hP = P.height
        for i, o in enumerate(offs):
            lev = j + o
            for m in mods:
                lev %= m
            col_out = np.empty(size, dtype=np.int64)
            if op.kind is OpKind.IND:
                seg = lev // hP
                _walk(P, p, digits[rows, seg], lev - seg * hP, col_out)
            else:
                g = hP + op.h_star
                seg = lev // g
                q = lev - seg * g
                inner = q - (digits[rows, seg + 1] + 1) % op.h_star
                sp = (inner < 0) | (inner >= hP)
                col_out[sp] = p.spacer_label(op.event)
                keep = ~sp
                if keep.any():
                    sub = np.empty(int(keep.sum()), dtype=np.int64)
                    _walk(P, p, digits[rows[keep], seg[keep]], inner[keep], sub)
                    col_out[keep] = sub
            out[:, i] = col_out
        return out
    # big-integer fallback, one sample at a time
    pyrng = random.Random(int(rng.integers(0, 1 << 62)))
    for s in range(size):
        col = pyrng.getrandbits(W.c_log2)
        for i, o in enumerate(offsets):
            out[s, i] = p.label_of(resolve(W, col, int(j[s]) + o, p.ref))
    return out


def sample_rows(
    W: Tower,
    p: Partition,
    offsets: Sequence[int],
    samples: int,
    seed: int,
    workers: int = 1,
    window: int | None = None,
) -> np.ndarray:
    """Label rows (samples x len(offsets)) for uniformly drawn points of the window."""
    p.check_tower(W)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n_window = window_for(W, offsets, window)
    if representation(W, p) == "bigint" and W.c_log2 > (1 << 24):
        raise EnumerationInfeasible(f"{W.label} is too large to sample")
    sizes = [CHUNK] * (samples // CHUNK)
    if samples % CHUNK:
        sizes.append(samples % CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    tasks = [(W, p, list(offsets), n_window, n, s) for n, s in zip(sizes, seeds)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_sample_chunk, tasks))
    else:
        parts = [_sample_chunk(t) for t in tasks]
    return np.concatenate(parts, axis=0)


def label_cells(W: Tower, p: Partition, cols: Sequence[int], levels: Sequence[int]) -> np.ndarray:
    """Vectorized labels for given (column, level) pairs of an int-representable tower."""
    core, mods = _core(W, p)
    if core.c_log2 > INT_BITS:
        raise EnumerationInfeasible("columns do not fit in int64")
    lev = np.asarray(levels, dtype=np.int64)
    for m in mods:
        lev = lev % m
    out = np.empty(len(lev), dtype=np.int64)
    _walk(core, p, np.asarray(cols, dtype=np.int64), lev, out)
    return out
