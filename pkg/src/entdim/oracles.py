"""Independent reference computations used to cross-check the estimators."""

from __future__ import annotations

import math

from .seqdim import IntSeq


def threshold_scan_dim(seq: IntSeq, n_max: int, window: int | None = None, step: float = 0.0025) -> float:
    """Dimension by scanning tau: the first tau at which log(n / s_n^tau)
    stops trending upward over the tail window (least-squares slope <= 0)."""
    if window is None:
        window = max(10, n_max // 10)
    ns = range(n_max - window + 1, n_max + 1)
    xs = [math.log(n) for n in ns]
    ls = [math.log(seq.term(n)) for n in ns]
    mx = sum(xs) / len(xs)
    ml = sum(ls) / len(ls)
    sxx = sum((x - mx) ** 2 for x in xs)
    sxl = sum((x - mx) * (l - ml) for x, l in zip(xs, ls))
    steps = 0
    while steps * step <= 1.5:
        tau = steps * step
        # slope of x - tau * l against x
        if (sxx - tau * sxl) / sxx <= 0:
            return tau
        steps += 1
    return steps * step
