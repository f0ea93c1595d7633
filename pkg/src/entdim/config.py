from __future__ import annotations

import os

DEFAULT_BUDGET = 10**7


def enumeration_budget() -> int:
    """Cell budget for enumerating towers; ENTDIM_BUDGET overrides the default."""
    raw = os.environ.get("ENTDIM_BUDGET")
    if raw is None:
        return DEFAULT_BUDGET
    try:
        value = int(raw)
    except ValueError:
        value = int(float(raw))
    if value <= 0:
        raise ValueError(f"ENTDIM_BUDGET must be positive, got {raw!r}")
    return value


def parse_fraction(text) -> "Fraction":
    """Parse '1/2', '0.5' or an int into an exact Fraction."""
    from fractions import Fraction

    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        return Fraction(str(text))
    s = str(text).strip()
    if not s:
        raise ValueError("empty fraction")
    return Fraction(s)
