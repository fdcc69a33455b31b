"""Simulable Harris recurrent chains, regeneration and occupation statistics.

Three built-in models cover both recurrence regimes:

=====================  ==================  =========================
model                  recurrence          invariant measure
=====================  ==================  =========================
GaussianRandomWalk     beta-null, 1/2      Lebesgue
AR1 (|rho| < 1)        positive            N(0, sd^2 / (1 - rho^2))
LazySRW                beta-null, 1/2      counting measure on Z
=====================  ==================  =========================
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy import signal, special, stats

from .rng import SeedLike, derive, make_rng

__all__ = [
    "AR1",
    "BetaNull",
    "ChainSpec",
    "GaussianRandomWalk",
    "LazySRW",
    "MinorizationError",
    "MinorizationSpec",
    "PositiveRecurrent",
    "RegenerationDecomposition",
    "SplitPath",
    "Window",
    "block_occupation",
    "decompose_blocks",
    "gaussian_minorization",
    "invariant_cdf",
    "mittag_leffler_moment",
    "occupation_ratio_samples",
    "read_path_csv",
    "simulate",
    "split_simulate",
    "u_of_n",
    "write_path_csv",
]


# --------------------------------------------------------------------------
# Model and recurrence descriptors
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianRandomWalk:
    increment_sd: float = 1.0

    def __post_init__(self):
        if not self.increment_sd > 0:
            raise ValueError("increment_sd must be positive")


@dataclass(frozen=True)
class AR1:
    rho: float = 0.5
    increment_sd: float = 1.0

    def __post_init__(self):
        if not abs(self.rho) < 1:
            raise ValueError("AR1 requires |rho| < 1")
        if not self.increment_sd > 0:
            raise ValueError("increment_sd must be positive")

    @property
    def stationary_sd(self) -> float:
        return self.increment_sd / math.sqrt(1.0 - self.rho ** 2)


@dataclass(frozen=True)
class LazySRW:
    """Simple random walk on Z that holds with probability ``hold_prob``."""

    hold_prob: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.hold_prob < 1.0:
            raise ValueError("hold_prob must lie in [0, 1)")


@dataclass(frozen=True)
class PositiveRecurrent:
    pass


@dataclass(frozen=True)
class BetaNull:
    beta: float

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")


Model = Union[GaussianRandomWalk, AR1, LazySRW]
Recurrence = Union[PositiveRecurrent, BetaNull]


def _natural_recurrence(model: Model) -> Recurrence:
    if isinstance(model, AR1):
        return PositiveRecurrent()
    return BetaNull(0.5)


@dataclass(frozen=True)
class ChainSpec:
    """A simulable chain together with its recurrence class.

    ``recurrence`` defaults to the class implied by ``model``; passing an
    inconsistent one is an error.  ``L`` is the (constant) slowly varying
    factor in ``u(n) = n**beta * L``.
    """

    model: Model
    recurrence: Recurrence | None = None
    L: float = 1.0

    def __post_init__(self):
        if not isinstance(self.model, (GaussianRandomWalk, AR1, LazySRW)):
            raise TypeError(f"unknown model {self.model!r}")
        natural = _natural_recurrence(self.model)
        if self.recurrence is None:
            object.__setattr__(self, "recurrence", natural)
        elif self.recurrence != natural:
            raise ValueError(
                f"{type(self.model).__name__} is {natural}, not {self.recurrence}")
        if not self.L > 0:
            raise ValueError("L must be positive")

    @property
    def beta(self) -> float:
        rec = self.recurrence
        return rec.beta if isinstance(rec, BetaNull) else 1.0

    @property
    def is_positive(self) -> bool:
        return isinstance(self.recurrence, PositiveRecurrent)


@dataclass(frozen=True)
class Window:
    """Closed window ``C = [x0 - delta, x0 + delta]``."""

    x0: float
    delta: float

    def __post_init__(self):
        if not (math.isfinite(self.x0) and self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError("window needs finite x0 and positive finite delta")

    @property
    def lo(self) -> float:
        return self.x0 - self.delta

    @property
    def hi(self) -> float:
        return self.x0 + self.delta

    def contains(self, x):
        return (x >= self.lo) & (x <= self.hi)


# --------------------------------------------------------------------------
# Simulation
# --------------------------------------------------------------------------

def _lazy_steps(rng: np.random.Generator, hold_prob: float, n: int) -> np.ndarray:
    q = 0.5 * (1.0 - hold_prob)
    u = rng.random(n)
    return (u < q).astype(np.int8) - (u >= 1.0 - q).astype(np.int8)


def _simulate_rng(spec: ChainSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    model = spec.model
    x = np.empty(n + 1)
    if isinstance(model, GaussianRandomWalk):
        x[0] = 0.0
        np.cumsum(rng.normal(0.0, model.increment_sd, n), out=x[1:])
    elif isinstance(model, AR1):
        x[0] = rng.normal(0.0, model.stationary_sd)
        if n:
            eps = rng.normal(0.0, model.increment_sd, n)
            x[1:] = signal.lfilter([1.0], [1.0, -model.rho], eps,
                                   zi=[model.rho * x[0]])[0]
    else:
        x[0] = 0.0
        np.cumsum(_lazy_steps(rng, model.hold_prob, n), out=x[1:])
    return x


def simulate(spec: ChainSpec, n: int, seed: SeedLike) -> np.ndarray:
    """Path ``X_0, ..., X_n``.

    Random-walk models start at 0; AR1 starts from its invariant law.  The
    path is a deterministic function of ``(spec, n, seed)``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    return _simulate_rng(spec, int(n), make_rng(seed))


def invariant_cdf(spec: ChainSpec, w: Window, y):
    """Invariant measure of the chain restricted to ``w`` and normalised.

    ``F(y) = pi(C & (-inf, y]) / pi(C)``.
    """
    y = np.asarray(y, dtype=float)
    model = spec.model
    if isinstance(model, GaussianRandomWalk):
        out = np.clip((y - w.lo) / (2.0 * w.delta), 0.0, 1.0)
    elif isinstance(model, AR1):
        dist = stats.norm(0.0, model.stationary_sd)
        lo_mass = dist.cdf(w.lo)
        total = dist.cdf(w.hi) - lo_mass
        out = np.clip(dist.cdf(np.minimum(y, w.hi)) - lo_mass, 0.0, None) / total
    else:
        k_lo, k_hi = math.ceil(w.lo), math.floor(w.hi)
        if k_hi < k_lo:
            raise ValueError("window contains no lattice point")
        below = np.clip(np.floor(y), k_lo - 1, k_hi) - (k_lo - 1)
        out = below / (k_hi - k_lo + 1)
    return float(out) if out.ndim == 0 else out


def u_of_n(spec: ChainSpec, n: int) -> float:
    """Deterministic growth rate of the regeneration count: ``n`` or ``n**beta * L``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if spec.is_positive:
        return float(n)
    return float(n) ** spec.beta * spec.L


# --------------------------------------------------------------------------
# Minorization and the split chain
# --------------------------------------------------------------------------

class MinorizationError(ValueError):
    pass


def _mean_map(model: Model) -> tuple[float, float]:
    """``(intercept, slope)`` of the conditional mean ``E[X_{t+1} | X_t = x]``."""
    if isinstance(model, GaussianRandomWalk):
        return 0.0, 1.0
    if isinstance(model, AR1):
        return 0.0, model.rho
    raise MinorizationError("minorization is only built for Gaussian models")


@dataclass(frozen=True)
class MinorizationSpec:
    """``P(x, dy) >= s(x) nu(dy)`` with ``s = s_height * 1{|x - center| <= d}``.

    ``nu`` has density ``phi_sd(|y - nu_center| + nu_spread) / nu_mass``, the
    pointwise minimum of the transition densities started in the support of
    ``s``, normalised to a probability.  Construct with
    :func:`gaussian_minorization`; the inequality is verified on a grid.
    """

    spec: ChainSpec
    s_height: float
    center: float
    d: float
    nu_center: float = field(init=False)
    nu_spread: float = field(init=False)
    nu_mass: float = field(init=False)

    def __post_init__(self):
        model = self.spec.model
        a, b = _mean_map(model)
        if not self.d > 0:
            raise MinorizationError("support half-width must be positive")
        sd = model.increment_sd
        spread = abs(b) * self.d
        object.__setattr__(self, "nu_center", a + b * self.center)
        object.__setattr__(self, "nu_spread", spread)
        object.__setattr__(self, "nu_mass", 2.0 * stats.norm.sf(spread / sd))
        if not 0.0 <= self.s_height <= 1.0:
            raise MinorizationError("s_height must lie in [0, 1]")
        self.validate()

    @property
    def s_support(self) -> tuple[float, float]:
        return (self.center - self.d, self.center + self.d)

    @property
    def epsilon(self) -> float:
        """Largest admissible ``s_height`` for this ``nu``."""
        return self.nu_mass

    def s(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x - self.center) <= self.d, self.s_height, 0.0)

    def nu_density(self, y):
        sd = self.spec.model.increment_sd
        y = np.asarray(y, dtype=float)
        return stats.norm.pdf(np.abs(y - self.nu_center) + self.nu_spread,
                              scale=sd) / self.nu_mass

    def transition_density(self, x, y):
        a, b = _mean_map(self.spec.model)
        sd = self.spec.model.increment_sd
        return stats.norm.pdf(np.asarray(y) - (a + b * np.asarray(x)), scale=sd)

    def regeneration_prob(self, x, y):
        """``s(x) nu(y) / p(x, y)``, evaluated in log space."""
        a, b = _mean_map(self.spec.model)
        sd = self.spec.model.increment_sd
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        dist_nu = np.abs(y - self.nu_center) + self.nu_spread
        dist_p = y - (a + b * x)
        log_ratio = -(dist_nu ** 2 - dist_p ** 2) / (2.0 * sd ** 2)
        prob = self.s(x) / self.nu_mass * np.exp(np.minimum(log_ratio, 0.0))
        return prob

    def validate(self, grid_size: int = 201) -> None:
        sd = self.spec.model.increment_sd
        xs = np.linspace(self.center - self.d, self.center + self.d, grid_size)
        ys = np.linspace(self.nu_center - self.nu_spread - 8 * sd,
                         self.nu_center + self.nu_spread + 8 * sd, grid_size)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        lhs = self.transition_density(X, Y)
        rhs = self.s(X) * self.nu_density(Y)
        if np.any(lhs < rhs * (1.0 - 1e-12)):
            raise MinorizationError("P(x, .) >= s(x) nu(.) fails on the validation grid")


def gaussian_minorization(spec: ChainSpec, center: float, d: float,
                          s_height: float | None = None) -> MinorizationSpec:
    """Minorization on ``[center - d, center + d]`` for a Gaussian model.

    ``s_height`` defaults to the largest admissible value, the total mass of
    the minimum transition density.
    """
    m = MinorizationSpec(spec, 0.0, center, d)
    if s_height is None:
        s_height = m.epsilon
    if s_height > m.epsilon * (1.0 + 1e-12):
        raise MinorizationError(
            f"s_height {s_height} exceeds the admissible maximum {m.epsilon}")
    return MinorizationSpec(spec, float(s_height), center, d)


@dataclass(frozen=True)
class SplitPath:
    path: np.ndarray
    regen_times: np.ndarray


def split_simulate(spec: ChainSpec, minor: MinorizationSpec | None, n: int,
                   seed: SeedLike) -> SplitPath:
    """Simulate the split chain and return the path and its regeneration times.

    The path is drawn exactly as :func:`simulate` draws it for the same seed;
    the Bernoulli coordinate ``Y_t`` is then drawn from its conditional law
    given ``(X_t, X_{t+1})``, with success probability
    ``s(X_t) nu(X_{t+1}) / p(X_t, X_{t+1})``, from an independent sub-stream.
    Regeneration times are the ``t >= 1`` with ``Y_t = 1``: after such a
    ``t`` the next state is a fresh draw from ``nu``.

    For :class:`LazySRW` pass ``minor=None``: the state 0 is an atom and the
    regeneration times are the returns ``t >= 1`` with ``X_t = 0``.
    """
    path = simulate(spec, n, seed)
    if isinstance(spec.model, LazySRW):
        if minor is not None:
            raise MinorizationError("LazySRW uses its exact atom; pass minor=None")
        times = np.flatnonzero(path[1:] == 0.0) + 1
        return SplitPath(path, times)
    if minor is None:
        raise MinorizationError("a minorization is required for this model")
    if minor.spec != spec:
        raise MinorizationError("minorization was built for a different chain")
    minor.validate()
    coins = make_rng(derive(seed, 0x5B1))
    if n < 1:
        return SplitPath(path, np.empty(0, dtype=np.int64))
    prob = minor.regeneration_prob(path[:-1], path[1:])
    y = coins.random(n) < prob
    times = np.flatnonzero(y[1:]) + 1
    return SplitPath(path, times)


@dataclass(frozen=True)
class RegenerationDecomposition:
    """Partition of ``0..n`` into an initial block, complete blocks and a tail.

    Index sets are half-open ``range`` objects over time indices.
    """

    n: int
    regen_times: np.ndarray
    initial: range
    complete_blocks: tuple
    tail: range

    @property
    def block_count(self) -> int:
        return len(self.complete_blocks)


def decompose_blocks(n: int, regen_times: Sequence[int]) -> RegenerationDecomposition:
    """Split ``0..n`` at the regeneration times.

    With ``tau(1) < ... < tau(k)``: initial ``[0, tau(1)]``, complete blocks
    ``(tau(j), tau(j+1)]`` and tail ``(tau(k), n]``.  Without regeneration the
    whole path is the initial block.
    """
    times = np.asarray(regen_times, dtype=np.int64)
    if times.ndim != 1:
        raise ValueError("regen_times must be one-dimensional")
    if times.size and (times[0] < 1 or times[-1] > n):
        raise ValueError(f"regeneration times must lie in [1, {n}]")
    if np.any(np.diff(times) <= 0):
        raise ValueError("regeneration times must be strictly increasing")
    if times.size == 0:
        return RegenerationDecomposition(n, times, range(0, n + 1), (), range(n + 1, n + 1))
    t = times.tolist()
    blocks = tuple(range(a + 1, b + 1) for a, b in zip(t[:-1], t[1:]))
    return RegenerationDecomposition(n, times, range(0, t[0] + 1), blocks,
                                     range(t[-1] + 1, n + 1))


def block_occupation(decomp: RegenerationDecomposition, path: np.ndarray,
                     w: Window) -> np.ndarray:
    """Visits to ``C`` inside each complete block."""
    path = np.asarray(path)
    if path.size != decomp.n + 1:
        raise ValueError("path length does not match the decomposition")
    if not decomp.complete_blocks:
        return np.zeros(0, dtype=np.int64)
    cum = np.concatenate(([0], np.cumsum(w.contains(path), dtype=np.int64)))
    starts = np.array([b.start for b in decomp.complete_blocks])
    stops = np.array([b.stop for b in decomp.complete_blocks])
    return cum[stops] - cum[starts]


# --------------------------------------------------------------------------
# Occupation times
# --------------------------------------------------------------------------

def mittag_leffler_moment(beta: float, m: int) -> float:
    """``E M_beta^m = m! / Gamma(1 + m beta)``."""
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must lie in (0, 1]")
    if m < 0 or int(m) != m:
        raise ValueError("m must be a non-negative integer")
    m = int(m)
    try:
        return math.factorial(m) / math.gamma(1.0 + m * beta)
    except OverflowError:
        log_value = math.lgamma(m + 1) - math.lgamma(1.0 + m * beta)
        return math.exp(log_value) if log_value < 709.0 else math.inf


def occupation_ratio_samples(spec: ChainSpec, w: Window, n: int, reps: int,
                             seed: SeedLike) -> np.ndarray:
    """``T_n(C) / u(n)`` over ``reps`` independent paths (stream ``(seed, rep)``)."""
    if reps < 1:
        raise ValueError("reps must be positive")
    un = u_of_n(spec, n)
    out = np.empty(reps)
    for rep in range(reps):
        path = simulate(spec, n, derive(seed, rep))
        out[rep] = np.count_nonzero(w.contains(path)) / un
    return out


# --------------------------------------------------------------------------
# Path I/O
# --------------------------------------------------------------------------

def write_path_csv(path_values: Sequence[float], dest) -> None:
    """Single-column CSV with header ``x`` and shortest round-trip floats."""
    dest = Path(dest)
    with dest.open("w", newline="") as fh:
        fh.write("x\n")
        fh.writelines(f"{float(v)!r}\n" for v in path_values)


def read_path_csv(src) -> np.ndarray:
    with Path(src).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["x"]:
            raise ValueError(f"{src}: expected header 'x', got {header!r}")
        return np.array([float(row[0]) for row in reader if row], dtype=float)
