"""Localized monotone least-squares estimation of ``f0`` in ``Z_t = f0(X_t) + W_t``.

Only the observations with ``X_t`` in the window ``C = [x0 - delta, x0 + delta]``
enter the fit.  The fit is non-increasing, piecewise constant and
left-continuous, with knots at the distinct visited x-values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .chains import Window
from .isotonic import (CSDiagram, PiecewiseLinearFn, _fit_from_diagram,
                       argmax_greatest_index, build_csd, lambda_process)
from .stepfn import (IncreasingStepFn, InverseResult, InverseStatus,
                     MonotoneStepFn, eval_step, gen_inverse_inc)

__all__ = [
    "EmptyWindowError",
    "LocalizedEcdf",
    "LocalizedFit",
    "QueryOutsideWindowError",
    "TimeSeriesSample",
    "estimate_at",
    "estimate_inverse",
    "fit_localized",
    "localized_ecdf",
    "read_sample_csv",
    "visits",
    "write_ecdf_csv",
    "write_fit_csv",
]


class EmptyWindowError(ValueError):
    """The chain never visited the window."""


class QueryOutsideWindowError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TimeSeriesSample:
    xs: np.ndarray
    zs: np.ndarray

    def __post_init__(self):
        xs = np.array(self.xs, dtype=float)
        zs = np.array(self.zs, dtype=float)
        if xs.ndim != 1 or xs.shape != zs.shape or xs.size == 0:
            raise ValueError("xs and zs must be non-empty 1-d sequences of equal length")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(zs))):
            raise ValueError("sample contains NaN or infinite entries")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "zs", zs)

    def __len__(self):
        return self.xs.size


@dataclass(frozen=True)
class LocalizedEcdf:
    """Right-continuous ECDF of the visited x-values; heights are ``l_k / Tn``."""

    window: Window
    Tn: int
    knots: np.ndarray
    heights: np.ndarray

    @property
    def fn(self) -> IncreasingStepFn:
        return IncreasingStepFn(self.knots, self.heights)

    def __call__(self, y):
        return self.fn(y)


@dataclass(frozen=True)
class LocalizedFit:
    """Fitted step function plus the processes it is built from."""

    window: Window
    Tn: int
    diagram: CSDiagram
    fit: MonotoneStepFn
    ecdf: LocalizedEcdf
    lam: PiecewiseLinearFn

    @property
    def floor(self) -> float:
        """Sentinel below the first knot returned for empty level sets."""
        return float(self.fit.knots[0]) - 1.0

    def estimate(self, x_query: float) -> float:
        if not self.window.contains(x_query):
            raise QueryOutsideWindowError(
                f"query {x_query!r} outside window [{self.window.lo!r}, {self.window.hi!r}]")
        return eval_step(self.fit, x_query)

    def inverse(self, a: float) -> InverseResult:
        # Greatest argmax of Lambda_n(p) - a p, then the ECDF inverse at it.
        k = argmax_greatest_index(self.diagram, a)
        p = float(self.lam.knots[k])
        if k == 0:
            return InverseResult(self.floor, InverseStatus.CLIPPED_LOW)
        value = gen_inverse_inc(self.ecdf.fn, p, self.floor)
        status = (InverseStatus.CLIPPED_HIGH if k == len(self.fit)
                  else InverseStatus.INTERIOR)
        return InverseResult(value, status)


def visits(sample: TimeSeriesSample, w: Window) -> tuple[np.ndarray, int]:
    """Time indices with ``X_t`` in the closed window, in time order."""
    idx = np.flatnonzero(w.contains(sample.xs))
    return idx, int(idx.size)


def _localized(sample: TimeSeriesSample, w: Window):
    idx, tn = visits(sample, w)
    if tn == 0:
        raise EmptyWindowError("no observations in window")
    return sample.xs[idx], sample.zs[idx], tn


def _ecdf_from_diagram(diagram: CSDiagram, w: Window, tn: int) -> LocalizedEcdf:
    return LocalizedEcdf(w, tn, diagram.unique_y, diagram.counts[1:] / tn)


def localized_ecdf(sample: TimeSeriesSample, w: Window) -> LocalizedEcdf:
    xs, _, tn = _localized(sample, w)
    ys, counts = np.unique(xs, return_counts=True)
    return LocalizedEcdf(w, tn, ys, np.cumsum(counts) / tn)


def fit_localized(sample: TimeSeriesSample, w: Window) -> LocalizedFit:
    xs, zs, tn = _localized(sample, w)
    diagram = build_csd(xs, zs)
    return LocalizedFit(
        window=w,
        Tn=tn,
        diagram=diagram,
        fit=_fit_from_diagram(diagram),
        ecdf=_ecdf_from_diagram(diagram, w, tn),
        lam=lambda_process(diagram, tn),
    )


def estimate_at(sample: TimeSeriesSample, w: Window, x_query: float) -> float:
    return fit_localized(sample, w).estimate(x_query)


def estimate_inverse(sample: TimeSeriesSample, w: Window, a: float) -> InverseResult:
    """Generalized inverse of the fit at level ``a``, computed as ``F_n^{-1}(U_n(a))``."""
    return fit_localized(sample, w).inverse(a)


# --------------------------------------------------------------------------
# CSV I/O
# --------------------------------------------------------------------------

def read_sample_csv(src) -> TimeSeriesSample:
    """Read a ``x,z`` CSV with header.  Raises ``ValueError`` when malformed."""
    with Path(src).open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["x", "z"]:
            raise ValueError(f"{src}: expected header 'x,z', got {header!r}")
        xs, zs = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{src}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                xs.append(float(row[0]))
                zs.append(float(row[1]))
            except ValueError as exc:
                raise ValueError(f"{src}:{lineno}: {exc}") from None
    return TimeSeriesSample(xs, zs)


def _write_two_columns(dest, header: Sequence[str], a, b) -> None:
    with Path(dest).open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        fh.writelines(f"{float(u)!r},{float(v)!r}\n" for u, v in zip(a, b))


def write_fit_csv(fit: LocalizedFit, dest) -> None:
    _write_two_columns(dest, ("knot", "value"), fit.fit.knots, fit.fit.values)


def write_ecdf_csv(ecdf: LocalizedEcdf, dest) -> None:
    _write_two_columns(dest, ("knot", "height"), ecdf.knots, ecdf.heights)
