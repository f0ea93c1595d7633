"""Packing label rows into sortable keys for counting."""

from __future__ import annotations

import numpy as np

INT_CODE_LIMIT = 1 << 62


def fits_int_codes(k: int, n: int) -> bool:
    return k**n <= INT_CODE_LIMIT


def encode(rows: np.ndarray, k: int) -> np.ndarray:
    """One key per row: base-k integer (position 0 least significant) or raw bytes."""
    rows = np.asarray(rows)
    n = rows.shape[1]
    if fits_int_codes(k, n):
        codes = np.zeros(rows.shape[0], dtype=np.int64)
        mult = 1
        for i in range(n):
            codes += rows[:, i].astype(np.int64) * mult
            mult *= k
        return codes
    dtype = np.uint8 if k <= 256 else np.int32
    packed = np.ascontiguousarray(rows, dtype=dtype)
    return packed.view(np.dtype((np.void, packed.dtype.itemsize * n))).ravel()


def decode(key, k: int, n: int, dtype=None) -> tuple[int, ...]:
    if isinstance(key, (np.integer, int)):
        key = int(key)
        out = []
        for _ in range(n):
            key, d = divmod(key, k)
            out.append(d)
        return tuple(out)
    dtype = dtype or (np.uint8 if k <= 256 else np.int32)
    return tuple(int(x) for x in np.frombuffer(bytes(key), dtype=dtype))


def count_keys(keys: np.ndarray, weights: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Distinct keys and their (weighted) counts."""
    if weights is None:
        return np.unique(keys, return_counts=True)
    u, inv = np.unique(keys, return_inverse=True)
    return u, np.bincount(inv.ravel(), weights=weights, minlength=len(u)).astype(np.int64)


def merge_counts(parts: list[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, np.ndarray]:
    if not parts:
        raise ValueError("nothing to merge")
    if len(parts) == 1:
        return parts[0]
    keys = np.concatenate([p[0] for p in parts])
    weights = np.concatenate([p[1] for p in parts])
    return count_keys(keys, weights)
