"""Entropy dimension of measure preserving systems: sequence dimensions,
cutting-and-stacking towers and entropy-along-sequence profiles."""

from __future__ import annotations

__version__ = "0.1.0"
