"""Small reference configurations shared by the verify suites and tests."""

from __future__ import annotations

from .schedule import Schedule, paper_schedule, toy_schedule


def independence_toy() -> Schedule:
    """Insertion at stage 2 with runs of height h_1; W_3 has 2^16 columns of height 54."""
    return toy_schedule([2, 2, 3], [2, 2, 1], [(2, 1)])


def lower_bound_toy() -> Schedule:
    """Meets the smallness hypothesis for A = two level sets of W_1.

    W_3 has 2^54 columns, so it is only evaluated structurally.
    """
    return toy_schedule([2, 3, 8], [1, 4, 1], [(2, 1)], budget=None)


LOWER_BOUND_CELLS = [(0, 0), (1, 1)]  # A inside W_1


def names_toys() -> list[Schedule]:
    return [
        toy_schedule([1, 2], [1, 1], [(1, 0)]),
        toy_schedule([2, 1], [1, 2], [(1, 1)]),
        toy_schedule([2, 2], [1, 1], [(1, 0, 3)]),
        independence_toy(),
    ]


def measure_schedules() -> list[Schedule]:
    return [
        toy_schedule([2], [1]),
        toy_schedule([2, 2], [1, 2]),
        toy_schedule([2, 2], [1, 1], [(1, 0, 3)]),
        independence_toy(),
        paper_schedule("1/2", depth=3),
        paper_schedule("1/3", depth=3),
        paper_schedule("2/3", depth=3),
        paper_schedule("1/2", insertions=[(2, 1)], depth=3),
        paper_schedule("1/2", depth=4),
    ]


def paper_w4() -> Schedule:
    """tau = 1/2 with the default insertion rule; W_4 is the first tower with spacers."""
    return paper_schedule("1/2", depth=4)
