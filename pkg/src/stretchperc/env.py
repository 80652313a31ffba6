"""Random stretched-lattice environments.

An environment is a pair of gap sequences ``xi_x`` (deleted columns between
kept ones) and ``xi_y`` (deleted rows), each stored over a finite inclusive
window.  The horizontal edge {(i, j), (i+1, j)} is open with probability
``p ** (xi_x[i] + 1)`` and the vertical edge {(i, j), (i, j+1)} with
probability ``p ** (xi_y[j] + 1)``.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy import special

from . import rng
from .errors import GeometryError, InsufficientDataError, ParameterError, WindowError

DEFAULT_CUTOFF = 10**6


@dataclass(frozen=True)
class Geometric:
    """P(xi >= n) = rho**n, so P(xi = h) = rho**h * (1 - rho)."""

    rho: float

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ParameterError(f"Geometric requires rho in [0, 1), got {self.rho}")

    def sf(self, n):
        n = np.asarray(n)
        return np.where(n <= 0, 1.0, float(self.rho) ** np.maximum(n, 0))

    def pmf(self, t):
        t = np.asarray(t)
        return np.where(t < 0, 0.0, float(self.rho) ** np.maximum(t, 0) * (1 - self.rho))

    def ppf(self, u):
        u = np.asarray(u, dtype=np.float64)
        if self.rho == 0.0:
            return np.zeros(u.shape, dtype=np.int64)
        # P(floor(log u / log rho) >= n) = P(u <= rho**n) = rho**n
        return np.floor(np.log(u) / np.log(self.rho)).astype(np.int64)


@functools.lru_cache(maxsize=8)
def _polynomial_cdf(s: float, cutoff: int) -> np.ndarray:
    t = np.arange(cutoff, dtype=np.float64)
    mass = (t + 1.0) ** (-s) / special.zeta(s)
    cdf = np.cumsum(mass)
    cdf[-1] = 1.0  # remaining tail mass lives in the last bucket
    cdf.setflags(write=False)
    return cdf


@dataclass(frozen=True)
class PolynomialTail:
    """P(xi = t) proportional to (t + 1)**(-s), truncated at ``cutoff``.

    The probability of ``t >= cutoff - 1`` is assigned to ``cutoff - 1``.
    """

    s: float
    cutoff: int = DEFAULT_CUTOFF

    def __post_init__(self):
        if not self.s > 1.0:
            raise ParameterError(f"PolynomialTail requires s > 1, got {self.s}")
        if self.cutoff < 1:
            raise ParameterError("PolynomialTail cutoff must be positive")

    def sf(self, n):
        n = np.asarray(n, dtype=np.float64)
        inside = np.clip(n, 0, self.cutoff - 1)
        tail = special.zeta(self.s, inside + 1.0) / special.zeta(self.s)
        return np.where(n <= 0, 1.0, np.where(n > self.cutoff - 1, 0.0, tail))

    def pmf(self, t):
        t = np.asarray(t)
        return self.sf(t) - self.sf(t + 1)

    def ppf(self, u):
        cdf = _polynomial_cdf(float(self.s), int(self.cutoff))
        idx = np.searchsorted(cdf, np.asarray(u, dtype=np.float64), side="right")
        return np.minimum(idx, self.cutoff - 1).astype(np.int64)


@dataclass(frozen=True)
class BoundedUniform:
    """Uniform on {0, ..., max}."""

    max: int

    def __post_init__(self):
        if self.max < 0:
            raise ParameterError("BoundedUniform requires max >= 0")

    def sf(self, n):
        n = np.asarray(n, dtype=np.float64)
        return np.clip((self.max + 1 - n) / (self.max + 1), 0.0, 1.0)

    def pmf(self, t):
        t = np.asarray(t)
        return np.where((t >= 0) & (t <= self.max), 1.0 / (self.max + 1), 0.0)

    def ppf(self, u):
        u = np.asarray(u, dtype=np.float64)
        return np.minimum(np.floor(u * (self.max + 1)), self.max).astype(np.int64)


@dataclass(frozen=True)
class PointMass:
    value: int

    def __post_init__(self):
        if self.value < 0:
            raise ParameterError("PointMass requires value >= 0")

    def sf(self, n):
        return np.where(np.asarray(n) <= self.value, 1.0, 0.0)

    def pmf(self, t):
        return np.where(np.asarray(t) == self.value, 1.0, 0.0)

    def ppf(self, u):
        return np.full(np.shape(u), self.value, dtype=np.int64)


GapDistribution = Union[Geometric, PolynomialTail, BoundedUniform, PointMass]


def parse_distribution(text: str) -> GapDistribution:
    """Parse ``geometric:0.01``, ``poly:3``, ``uniform:2`` or ``point:0``."""
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    try:
        if name in ("geometric", "geom"):
            return Geometric(float(arg))
        if name in ("poly", "polynomial", "polynomialtail"):
            s, _, cut = arg.partition(",")
            return PolynomialTail(float(s), int(cut) if cut else DEFAULT_CUTOFF)
        if name in ("uniform", "bounded", "boundeduniform"):
            return BoundedUniform(int(arg))
        if name in ("point", "pointmass"):
            return PointMass(int(arg))
    except ValueError as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f"cannot parse distribution {text!r}") from exc
    raise ParameterError(f"unknown distribution {text!r}")


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.int64)
    if arr.ndim != 1 or arr.size == 0:
        raise ParameterError("gap sequences must be non-empty and one-dimensional")
    if (arr < 0).any():
        raise ParameterError("gap values must be non-negative")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Environment:
    """Gap sequences over the windows ``[x_lo, x_lo + len(xi_x) - 1]`` and likewise for y."""

    xi_x: np.ndarray
    xi_y: np.ndarray
    x_lo: int = 0
    y_lo: int = 0
    dist_x: GapDistribution | None = None
    dist_y: GapDistribution | None = None
    seed: int = 0
    note: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "xi_x", _frozen(self.xi_x))
        object.__setattr__(self, "xi_y", _frozen(self.xi_y))

    @property
    def window_x(self) -> tuple[int, int]:
        return self.x_lo, self.x_lo + len(self.xi_x) - 1

    @property
    def window_y(self) -> tuple[int, int]:
        return self.y_lo, self.y_lo + len(self.xi_y) - 1

    def gaps_x(self, lo: int, hi: int) -> np.ndarray:
        """xi_x over the half-open range [lo, hi)."""
        return _window_slice(self.xi_x, self.x_lo, lo, hi, "x")

    def gaps_y(self, lo: int, hi: int) -> np.ndarray:
        return _window_slice(self.xi_y, self.y_lo, lo, hi, "y")

    def transposed(self) -> "Environment":
        """Swap the roles of the two axes."""
        return Environment(self.xi_y, self.xi_x, self.y_lo, self.x_lo,
                           self.dist_y, self.dist_x, self.seed, self.note)

    def __eq__(self, other):
        if not isinstance(other, Environment):
            return NotImplemented
        return self.to_text() == other.to_text()

    def __hash__(self):
        return hash(self.to_text())

    def to_text(self) -> str:
        (xl, xh), (yl, yh) = self.window_x, self.window_y
        return (
            f"window_x={xl}..{xh} window_y={yl}..{yh} seed={self.seed & rng.MASK64}\n"
            f"xi_x: {' '.join(map(str, self.xi_x.tolist()))}\n"
            f"xi_y: {' '.join(map(str, self.xi_y.tolist()))}\n"
        )

    @classmethod
    def from_text(cls, text: str) -> "Environment":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if len(lines) != 3:
            raise ParameterError("environment text needs a header and two gap lines")
        header = dict(tok.split("=", 1) for tok in lines[0].split())
        x_lo, x_hi = (int(v) for v in header["window_x"].split(".."))
        y_lo, y_hi = (int(v) for v in header["window_y"].split(".."))
        xs = [int(v) for v in lines[1].split(":", 1)[1].split()]
        ys = [int(v) for v in lines[2].split(":", 1)[1].split()]
        if len(xs) != x_hi - x_lo + 1 or len(ys) != y_hi - y_lo + 1:
            raise ParameterError("gap line length does not match header window")
        return cls(xs, ys, x_lo, y_lo, seed=int(header["seed"]))


def _window_slice(arr: np.ndarray, lo0: int, lo: int, hi: int, axis: str) -> np.ndarray:
    if lo > hi or lo < lo0 or hi > lo0 + len(arr):
        raise WindowError(
            f"{axis}-range [{lo}, {hi}) outside window [{lo0}, {lo0 + len(arr) - 1}]")
    return arr[lo - lo0:hi - lo0]


def sample_gaps(dist: GapDistribution, lo: int, hi: int, seed: int, tag: str) -> np.ndarray:
    """Draw gaps for indices lo..hi inclusive; each index has its own hashed uniform."""
    if hi < lo:
        raise ParameterError("empty window")
    u = rng.uniforms(np.uint64(rng.derive_seed(seed, tag)), np.arange(lo, hi + 1))
    return dist.ppf(u)


def sample_environment(dist_x: GapDistribution, dist_y: GapDistribution,
                       window_x: tuple[int, int], window_y: tuple[int, int],
                       seed: int) -> Environment:
    """Sample an environment with i.i.d. gaps over two inclusive windows.

    Draws are keyed by absolute index, so a sub-window of a larger sample with
    the same seed agrees with it entry by entry.
    """
    xi_x = sample_gaps(dist_x, window_x[0], window_x[1], seed, "xi_x")
    xi_y = sample_gaps(dist_y, window_y[0], window_y[1], seed, "xi_y")
    return Environment(xi_x, xi_y, window_x[0], window_y[0], dist_x, dist_y, seed)


def eta_to_xi(eta: Sequence[int]) -> np.ndarray:
    """Run lengths of zeros between consecutive ones of a column indicator."""
    eta = np.asarray(eta, dtype=np.int64)
    if eta.size and not np.isin(eta, (0, 1)).all():
        raise ParameterError("column indicator must be 0/1 valued")
    ones = np.flatnonzero(eta == 1)
    if len(ones) < 2:
        raise InsufficientDataError("need at least two kept columns (ones)")
    return np.diff(ones) - 1


def xi_to_eta(xi: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`eta_to_xi`: indicator starting and ending with a one."""
    xi = np.asarray(xi, dtype=np.int64)
    if (xi < 0).any():
        raise ParameterError("gap values must be non-negative")
    eta = np.zeros(int(xi.sum()) + len(xi) + 1, dtype=np.int64)
    eta[np.concatenate(([0], np.cumsum(xi + 1)))] = 1
    return eta


def edge_open_probability(env: Environment, edge, p: float) -> float:
    """Open probability of a nearest-neighbour edge ``((x1, y1), (x2, y2))``."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError("p must lie in [0, 1]")
    (x1, y1), (x2, y2) = edge
    if abs(x1 - x2) + abs(y1 - y2) != 1:
        raise GeometryError(f"{edge} is not a nearest-neighbour edge")
    if y1 == y2:
        gap = env.gaps_x(min(x1, x2), min(x1, x2) + 1)[0]
    else:
        gap = env.gaps_y(min(y1, y2), min(y1, y2) + 1)[0]
    return float(p) ** (int(gap) + 1)
