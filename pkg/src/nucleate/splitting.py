"""Markovian interval splitting: pick a gap with probability proportional to
``length^alpha`` and cut it at a fraction drawn from the splitting law."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .laws import SplittingLaw


@dataclass(frozen=True, eq=False)
class GapConfiguration:
    """Ordered boundaries ``0 = z_0 < z_1 < ... < z_{n+1} = 1``.

    Gap lengths are always derived from the boundaries, so they sum to 1 up to
    a single rounding of the telescoping sum.
    """

    boundaries: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.boundaries, dtype=float)
        if z.ndim != 1 or z.size < 2:
            raise ValueError("need at least the two endpoints")
        if z[0] != 0.0 or z[-1] != 1.0:
            raise ValueError("boundaries must start at 0 and end at 1")
        if np.any(np.diff(z) <= 0):
            raise ValueError("boundaries must be strictly increasing")
        z.setflags(write=False)
        object.__setattr__(self, "boundaries", z)

    @classmethod
    def unit(cls) -> "GapConfiguration":
        return cls(np.array([0.0, 1.0]))

    @classmethod
    def from_points(cls, points) -> "GapConfiguration":
        pts = np.asarray(sorted(points), dtype=float)
        return cls(np.concatenate(([0.0], pts, [1.0])))

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.boundaries)

    @property
    def n_interior(self) -> int:
        return self.boundaries.size - 2

    @property
    def n_gaps(self) -> int:
        return self.boundaries.size - 1

    @property
    def max_gap(self) -> float:
        return float(self.gaps.max())

    def split(self, j: int, v: float) -> "GapConfiguration":
        """Insert ``z_{j-1} + v L_j`` (``j`` is 1-based)."""
        if not 1 <= j <= self.n_gaps:
            raise ValueError("gap index out of range")
        if not 0 < v < 1:
            raise ValueError("split fraction must lie in (0, 1)")
        z = self.boundaries
        new = z[j - 1] + v * (z[j] - z[j - 1])
        return GapConfiguration(np.insert(z, j, new))


def selection_weights(gaps, alpha: float) -> np.ndarray:
    """Probabilities proportional to ``gaps^alpha``, computed from ``gaps / max(gaps)``."""
    g = np.asarray(gaps, dtype=float)
    if g.ndim != 1 or g.size == 0 or np.any(g <= 0):
        raise ValueError("gaps must be a non-empty vector of positive lengths")
    w = (g / g.max()) ** alpha
    return w / w.sum()


def selection_probabilities(config: GapConfiguration, law: SplittingLaw) -> np.ndarray:
    return selection_weights(config.gaps, law.alpha)


def _draw_index(weights: np.ndarray, u: float) -> int:
    c = np.cumsum(weights)
    return int(min(np.searchsorted(c, u * c[-1], side="right"), weights.size - 1))


def _draw_fraction(law: SplittingLaw, rng: np.random.Generator) -> float:
    while True:
        v = float(law.sample(rng, None))
        if 0.0 < v < 1.0:
            return v


def split_step(
    config: GapConfiguration, law: SplittingLaw, rng: np.random.Generator
) -> tuple[GapConfiguration, int, float]:
    """One splitting move; returns the new configuration, the 1-based gap index and the fraction."""
    g = config.gaps
    w = (g / g.max()) ** law.alpha
    j = _draw_index(w, rng.random()) + 1
    while True:
        v = _draw_fraction(law, rng)
        z = config.boundaries
        new = z[j - 1] + v * (z[j] - z[j - 1])
        if z[j - 1] < new < z[j]:
            break
    return GapConfiguration(np.insert(z, j, new)), j, v


@dataclass
class GapStatistics:
    """Snapshot of a configuration after ``n`` splits.

    ``normalized_gaps`` are ``(n_gaps) * L_i`` sorted ascending, so their ECDF
    is ``(i+1)/n_gaps`` at the i-th entry. ``counting`` holds ``C_n`` on ``grid``:
    the number of interior boundaries at or left of each grid point.
    """

    n: int
    normalized_gaps: np.ndarray
    grid: np.ndarray
    counting: np.ndarray
    max_gap: float

    @classmethod
    def from_config(cls, n: int, config: GapConfiguration, grid_points: int = 101) -> "GapStatistics":
        gaps = config.gaps
        grid = np.linspace(0.0, 1.0, grid_points)
        interior = config.boundaries[1:-1]
        counting = np.searchsorted(interior, grid, side="right")
        return cls(n, np.sort(gaps * gaps.size), grid, counting, float(gaps.max()))

    def ecdf(self, x) -> np.ndarray:
        return np.searchsorted(self.normalized_gaps, np.asarray(x, dtype=float), side="right") / self.normalized_gaps.size

    @property
    def uniformity_error(self) -> float:
        """``sup_x |C_n(x)/n - x|`` over the grid."""
        return float(np.max(np.abs(self.counting / max(self.n, 1) - self.grid)))

    def ks_against(self, cdf) -> float:
        from .stats import ks_one_sample

        return ks_one_sample(self.normalized_gaps, cdf)


def geometric_checkpoints(steps: int, first: int = 16, ratio: float = 2.0) -> list[int]:
    out = []
    n = first
    while n < steps:
        out.append(int(n))
        n = int(np.ceil(n * ratio))
    out.append(steps)
    return sorted(set(out))


@dataclass
class SplittingRun:
    final: GapConfiguration
    trace: list[GapStatistics] = field(default_factory=list)


def run_splitting(
    law: SplittingLaw,
    steps: int,
    init: GapConfiguration | None = None,
    seed: int = 0,
    checkpoints: list[int] | None = None,
    grid_points: int = 101,
) -> SplittingRun:
    """Iterate ``steps`` splits from ``init`` (default ``(0, 1)``) with a seeded generator.

    Statistics are taken after each step count listed in ``checkpoints``
    (default: geometric up to ``steps``).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    config = init or GapConfiguration.unit()
    cps = set(geometric_checkpoints(steps) if checkpoints is None else [c for c in checkpoints if 1 <= c <= steps])
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    z = config.boundaries.copy()
    n0 = config.n_interior
    gaps = np.diff(z)
    trace = []
    for k in range(1, steps + 1):
        w = (gaps / gaps.max()) ** law.alpha
        j = _draw_index(w, rng.random())
        while True:
            v = _draw_fraction(law, rng)
            new = z[j] + v * (z[j + 1] - z[j])
            if z[j] < new < z[j + 1]:
                break
        z = np.insert(z, j + 1, new)
        gaps = np.insert(gaps, j + 1, z[j + 2] - new)
        gaps[j] = new - z[j]
        if k in cps:
            trace.append(GapStatistics.from_config(n0 + k, GapConfiguration(z.copy()), grid_points))
    return SplittingRun(GapConfiguration(z), trace)
