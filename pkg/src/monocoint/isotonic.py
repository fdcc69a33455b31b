"""Cumulative sum diagrams, least concave majorants and monotone least squares.

The non-increasing least-squares fit of ``z`` on ``x`` is the vector of
left-hand slopes of the least concave majorant (LCM) of the cumulative sum
diagram

    (0, 0), (l_k, s_k),  k = 1..m,

where ``Y_1 < ... < Y_m`` are the distinct x-values, ``l_k`` counts the
observations with ``x <= Y_k`` and ``s_k`` sums their responses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .stepfn import MonotoneStepFn

__all__ = [
    "CSDiagram",
    "PiecewiseLinearFn",
    "argmax_greatest",
    "argmax_greatest_index",
    "build_csd",
    "fit_monotone_lse",
    "lambda_process",
    "lcm_left_slopes",
    "pava_dec",
]


@dataclass(frozen=True, eq=False)
class CSDiagram:
    """Cumulative sum diagram.

    Attributes
    ----------
    counts : ndarray of int, shape (m + 1,)
        ``l_0 = 0 < l_1 < ... < l_m``.
    sums : ndarray of float, shape (m + 1,)
        ``s_0 = 0`` and ``s_k`` the total response over ``x <= Y_k``.
    unique_y : ndarray of float, shape (m,)
        Sorted distinct x-values.
    totals : ndarray of float, shape (m,)
        Response total at each ``Y_k``.  Kept alongside ``sums`` so that slopes
        are formed from block-local sums instead of differences of long
        cumulative sums.  Derived from ``sums`` when not given.
    levels : ndarray of float, shape (m,)
        Common response at ``Y_k`` when all responses there are identical,
        NaN otherwise.  A block made of one such level has that exact value as
        its slope, avoiding the rounding of ``(v + ... + v) / r``.
    """

    counts: np.ndarray
    sums: np.ndarray
    unique_y: np.ndarray
    totals: np.ndarray = field(default=None)
    levels: np.ndarray = field(default=None)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        sums = np.asarray(self.sums, dtype=float)
        if counts.ndim != 1 or counts.size < 2:
            raise ValueError("diagram needs the origin and at least one point")
        if not np.issubdtype(counts.dtype, np.integer):
            if np.any(counts != np.round(counts)):
                raise ValueError("counts must be integers")
            counts = counts.astype(np.int64)
        if counts[0] != 0 or np.any(np.diff(counts) <= 0):
            raise ValueError("counts must start at 0 and strictly increase")
        if sums.shape != counts.shape or sums[0] != 0.0:
            raise ValueError("sums must match counts and start at 0")
        unique_y = np.asarray(self.unique_y, dtype=float)
        if unique_y.size != counts.size - 1:
            raise ValueError("unique_y must have one entry per diagram point")
        totals = self.totals
        if totals is None:
            totals = np.diff(sums)
        totals = np.asarray(totals, dtype=float)
        if totals.size != unique_y.size:
            raise ValueError("totals must have one entry per diagram point")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "sums", sums)
        object.__setattr__(self, "unique_y", unique_y)
        levels = self.levels
        if levels is None:
            levels = np.where(np.diff(counts) == 1, totals, np.nan)
        levels = np.asarray(levels, dtype=float)
        if levels.size != unique_y.size:
            raise ValueError("levels must have one entry per diagram point")
        object.__setattr__(self, "totals", totals)
        object.__setattr__(self, "levels", levels)

    @classmethod
    def from_points(cls, counts, sums, unique_y=None) -> "CSDiagram":
        """Diagram from raw cumulative points (origin included)."""
        counts = np.asarray(counts)
        if unique_y is None:
            unique_y = np.arange(1, counts.size, dtype=float)
        return cls(counts, sums, unique_y)

    @property
    def multiplicities(self) -> np.ndarray:
        return np.diff(self.counts)

    @property
    def total_count(self) -> int:
        return int(self.counts[-1])

    def __len__(self):
        return self.unique_y.size


@dataclass(frozen=True)
class PiecewiseLinearFn:
    """Continuous piecewise-linear function on ``[knots[0], knots[-1]]``."""

    knots: np.ndarray
    values: np.ndarray

    def __call__(self, p):
        out = np.interp(p, self.knots, self.values)
        return float(out) if np.ndim(out) == 0 else out


def build_csd(xs_local: Sequence[float], zs_local: Sequence[float]) -> CSDiagram:
    """Cumulative sum diagram of paired observations, aggregating x-ties."""
    x = np.asarray(xs_local, dtype=float)
    z = np.asarray(zs_local, dtype=float)
    if x.shape != z.shape or x.ndim != 1:
        raise ValueError("xs and zs must be 1-d sequences of equal length")
    if x.size == 0:
        raise ValueError("no localized observations")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
        raise ValueError("observations must be finite")
    order = np.argsort(x, kind="stable")
    xs, zs = x[order], z[order]
    starts = np.flatnonzero(np.concatenate(([True], xs[1:] != xs[:-1])))
    unique_y = xs[starts]
    totals = np.add.reduceat(zs, starts)
    lo = np.minimum.reduceat(zs, starts)
    levels = np.where(lo == np.maximum.reduceat(zs, starts), lo, np.nan)
    counts = np.concatenate(([0], np.append(starts[1:], xs.size))).astype(np.int64)
    sums = np.concatenate(([0.0], np.cumsum(totals)))
    return CSDiagram(counts, sums, unique_y, totals, levels)


def lcm_left_slopes(diagram: CSDiagram) -> np.ndarray:
    """Left-hand slopes of the least concave majorant at every ``l_k``.

    Single pass with a stack of hull segments: a new segment is merged into
    its predecessor while the predecessor's slope does not exceed it, so the
    surviving slopes are strictly decreasing.  Equal slopes are merged.
    """
    mult = diagram.multiplicities.tolist()
    totals = diagram.totals.tolist()
    levels = diagram.levels.tolist()
    # Parallel stacks: segment width (count), response total, knots spanned,
    # and the common response level (NaN unless the block is constant).
    widths: list[int] = []
    sums: list[float] = []
    spans: list[int] = []
    levs: list[float] = []
    for w, s, lev in zip(mult, totals, levels):
        span = 1
        while widths and _not_steeper(sums[-1], widths[-1], levs[-1], s, w, lev):
            w += widths.pop()
            s += sums.pop()
            span += spans.pop()
            prev = levs.pop()
            lev = lev if prev == lev else math.nan
        widths.append(w)
        sums.append(s)
        spans.append(span)
        levs.append(lev)
    slopes = [lev if lev == lev else s / w for s, w, lev in zip(sums, widths, levs)]
    return np.repeat(slopes, spans)


def _not_steeper(s0, w0, lev0, s1, w1, lev1) -> bool:
    """Whether segment 0 has slope <= segment 1 (so the two must merge)."""
    if lev0 == lev0 and lev1 == lev1:
        return lev0 <= lev1
    return s0 * w1 <= s1 * w0


def pava_dec(values: Sequence[float], weights: Sequence[float] | None = None) -> np.ndarray:
    """Weighted non-increasing isotonic regression (pool adjacent violators).

    Minimises ``sum(w * (values - g)**2)`` over non-increasing ``g``.
    """
    y = np.asarray(values, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    if y.shape != w.shape or y.ndim != 1:
        raise ValueError("values and weights must be 1-d of equal length")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    means: list[float] = []
    wsum: list[float] = []
    lengths: list[int] = []
    for yi, wi in zip(y.tolist(), w.tolist()):
        m, ww, ln = yi, wi, 1
        while means and means[-1] <= m:
            pw = wsum.pop()
            m = (pw * means.pop() + ww * m) / (pw + ww)
            ww += pw
            ln += lengths.pop()
        means.append(m)
        wsum.append(ww)
        lengths.append(ln)
    return np.repeat(means, lengths)


def fit_monotone_lse(xs_local: Sequence[float], zs_local: Sequence[float]) -> MonotoneStepFn:
    """Non-increasing least-squares fit as a left-continuous step function."""
    diagram = build_csd(xs_local, zs_local)
    return _fit_from_diagram(diagram)


def _fit_from_diagram(diagram: CSDiagram) -> MonotoneStepFn:
    slopes = lcm_left_slopes(diagram)
    return MonotoneStepFn(diagram.unique_y, slopes)


def lambda_process(diagram: CSDiagram, Tn: int) -> PiecewiseLinearFn:
    """Normalised diagram ``p_k = l_k / Tn``, ``Lambda(p_k) = s_k / Tn``."""
    if Tn != diagram.total_count:
        raise ValueError(
            f"Tn={Tn} does not match the diagram's total count "
            f"{diagram.total_count}")
    return PiecewiseLinearFn(diagram.counts / Tn, diagram.sums / Tn)


def argmax_greatest_index(diagram: CSDiagram, a: float) -> int:
    """Index ``k`` of the greatest maximiser of ``s_k - a * l_k`` over the diagram.

    The maximisers of a diagram minus a line sit at vertices of its least
    concave majorant; the greatest one is the right end of the last majorant
    segment with slope ``>= a``.  Works on the block-local slopes, so no
    cumulative rounding enters the comparison.
    """
    slopes = lcm_left_slopes(diagram)
    return int(np.count_nonzero(slopes >= a))


def argmax_greatest(lin: PiecewiseLinearFn, a: float) -> float:
    """Greatest knot maximising ``lin(p) - a * p``.

    Objective values within rounding distance of the maximum count as tied,
    so exact ties of the underlying real arithmetic resolve to the greatest
    knot regardless of how the floating-point sums happened to round.
    """
    obj = lin.values - a * lin.knots
    scale = max(float(np.max(np.abs(lin.values))),
                abs(a) * float(np.max(np.abs(lin.knots))), np.finfo(float).tiny)
    tol = 16 * np.finfo(float).eps * scale
    best = np.flatnonzero(obj >= obj.max() - tol)[-1]
    return float(lin.knots[best])
