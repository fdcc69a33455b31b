"""Monotone step functions and their generalized inverses.

Two shapes are used throughout the package:

* :class:`MonotoneStepFn` -- non-increasing, left-continuous.  This is the
  shape of the least-squares fit: constant on ``(Y_{k-1}, Y_k]``, with
  constant extension ``v_1`` on ``(-inf, Y_1]`` and ``v_m`` on ``[Y_m, inf)``.
* :class:`IncreasingStepFn` -- non-decreasing, right-continuous and equal to
  zero left of the first knot.  This is the shape of an empirical CDF.

The inverses satisfy the switch relations

    f(y) >= a  <=>  gen_inverse_dec(f, a).value >= y,   y in (floor, Y_m]
    F(y) >= a  <=>  gen_inverse_inc(F, a) <= y,         y in [floor, Y_m]
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

__all__ = [
    "InverseResult",
    "InverseStatus",
    "IncreasingStepFn",
    "MonotoneStepFn",
    "eval_step",
    "eval_step_many",
    "gen_inverse_dec",
    "gen_inverse_inc",
    "make_step_fn",
]


class InverseStatus(str, Enum):
    INTERIOR = "interior"
    CLIPPED_LOW = "clipped-low"
    CLIPPED_HIGH = "clipped-high"


@dataclass(frozen=True)
class InverseResult:
    value: float
    status: InverseStatus


def _as_finite_array(seq: Sequence[float], name: str) -> np.ndarray:
    arr = np.array(seq, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite entries")
    return arr


def _check_knots(knots: np.ndarray, values: np.ndarray) -> None:
    if knots.size == 0:
        raise ValueError("step function needs at least one knot")
    if knots.size != values.size:
        raise ValueError(
            f"length mismatch: {knots.size} knots vs {values.size} values")
    if np.any(np.diff(knots) <= 0):
        raise ValueError("knots must be strictly increasing")


@dataclass(frozen=True, eq=False)
class MonotoneStepFn:
    """Left-continuous non-increasing step function.

    ``values[k]`` is the value on the interval ending at ``knots[k]``.
    Use :func:`make_step_fn` to build one from arbitrary sequences.
    """

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        knots = _as_finite_array(self.knots, "knots")
        values = _as_finite_array(self.values, "values")
        _check_knots(knots, values)
        if np.any(np.diff(values) > 0):
            raise ValueError("values are not non-increasing")
        knots.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)

    def __call__(self, y):
        return eval_step_many(self, y) if np.ndim(y) else eval_step(self, y)

    def __eq__(self, other):
        if not isinstance(other, MonotoneStepFn):
            return NotImplemented
        return (np.array_equal(self.knots, other.knots)
                and np.array_equal(self.values, other.values))

    def __len__(self):
        return self.knots.size


@dataclass(frozen=True, eq=False)
class IncreasingStepFn:
    """Right-continuous non-decreasing step function, zero left of ``knots[0]``.

    ``heights[k]`` is the value on ``[knots[k], knots[k+1])``.
    """

    knots: np.ndarray
    heights: np.ndarray

    def __post_init__(self):
        knots = _as_finite_array(self.knots, "knots")
        heights = _as_finite_array(self.heights, "heights")
        _check_knots(knots, heights)
        if np.any(np.diff(heights) < 0):
            raise ValueError("heights are not non-decreasing")
        knots.setflags(write=False)
        heights.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "heights", heights)

    def __call__(self, y):
        idx = np.searchsorted(self.knots, y, side="right")
        padded = np.concatenate(([0.0], self.heights))
        out = padded[idx]
        return float(out) if np.ndim(out) == 0 else out

    def __eq__(self, other):
        if not isinstance(other, IncreasingStepFn):
            return NotImplemented
        return (np.array_equal(self.knots, other.knots)
                and np.array_equal(self.heights, other.heights))


def make_step_fn(knots: Sequence[float], values: Sequence[float]) -> MonotoneStepFn:
    """Validate ``knots``/``values`` and return a :class:`MonotoneStepFn`.

    Raises
    ------
    ValueError
        On unsorted knots, increasing values, non-finite entries or a
        length mismatch.
    """
    return MonotoneStepFn(np.array(knots, dtype=float),
                          np.array(values, dtype=float))


def eval_step(f: MonotoneStepFn, y: float) -> float:
    # searchsorted(side="left") returns the first k with knots[k] >= y, i.e.
    # the interval (Y_{k-1}, Y_k] that contains y.
    k = int(np.searchsorted(f.knots, y, side="left"))
    if k >= f.knots.size:
        k = f.knots.size - 1
    return float(f.values[k])


def eval_step_many(f: MonotoneStepFn, ys) -> np.ndarray:
    k = np.searchsorted(f.knots, np.asarray(ys, dtype=float), side="left")
    return f.values[np.minimum(k, f.knots.size - 1)]


def default_floor(knots: np.ndarray) -> float:
    """Sentinel strictly below the smallest knot (``Y_1 - 1``)."""
    return float(knots[0]) - 1.0


def gen_inverse_dec(f: MonotoneStepFn, a: float,
                    floor: float | None = None) -> InverseResult:
    """Greatest ``y`` in ``[floor, Y_m]`` with ``f(y) >= a``.

    An empty level set returns ``floor`` with status ``clipped-low``; when
    ``a <= v_m`` every point qualifies and ``Y_m`` is returned with status
    ``clipped-high``.
    """
    if floor is None:
        floor = default_floor(f.knots)
    elif not floor < f.knots[0]:
        raise ValueError("floor must lie strictly below the first knot")
    values = f.values
    if values[-1] >= a:
        return InverseResult(float(f.knots[-1]), InverseStatus.CLIPPED_HIGH)
    # values are non-increasing, so -values is sorted ascending; count the
    # leading entries with values >= a.
    count = int(np.searchsorted(-values, -a, side="right"))
    if count == 0:
        return InverseResult(float(floor), InverseStatus.CLIPPED_LOW)
    return InverseResult(float(f.knots[count - 1]), InverseStatus.INTERIOR)


def gen_inverse_inc(F: IncreasingStepFn, a: float,
                    floor: float | None = None) -> float:
    """Smallest ``y`` in ``[floor, Y_m]`` with ``F(y) >= a``.

    ``F`` is zero on ``[floor, Y_1)``, so any ``a <= 0`` returns ``floor``.

    Raises
    ------
    ValueError
        If ``a`` exceeds the largest height ("above range").
    """
    if floor is None:
        floor = default_floor(F.knots)
    if a > F.heights[-1]:
        raise ValueError(f"level {a!r} is above range (max {F.heights[-1]!r})")
    if a <= 0.0:
        return float(floor)
    k = int(np.searchsorted(F.heights, a, side="left"))
    return float(F.knots[k])
