"""Exception types shared across modules."""

from __future__ import annotations


class EntdimError(Exception):
    """Base class for all package errors."""


class InsufficientSequence(EntdimError):
    """A sequence is too short for the requested evaluation."""


class AnchorSpacingError(EntdimError):
    """Anchor indices violate the spacing required by a transform."""


class NonMonotoneReversal(EntdimError):
    """A reversed-block sequence is not strictly increasing."""


class ScheduleDegeneracy(EntdimError):
    """A schedule recursion produced a value that breaks the construction."""


class EnumerationInfeasible(EntdimError):
    """Enumerating a tower would exceed the configured budget."""


class SumsetCollision(EntdimError):
    """Sumset digits collide, so the sumset is not a mixed-radix set."""


class SpacerPoolOverdrawn(EntdimError):
    """An insertion would consume more spacer mass than the pool holds."""


class ShallowTower(EntdimError):
    """The requested offsets do not fit inside the tower height."""


class PartitionError(EntdimError):
    """A partition is inconsistent with the tower it is applied to."""
