"""Splitting laws: the symmetric fraction distribution plus the size-bias exponent."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import special

from . import series


@dataclass(frozen=True)
class SplittingLaw:
    """Symmetric law on ``[0, 1]`` used to split a gap, with selection exponent ``alpha``.

    ``kind`` is one of ``"uniform"``, ``"beta"`` (needs ``shape``), ``"phi0"`` or
    ``"tabulated"`` (needs ``grid`` and ``values``, linearly interpolated).
    """

    kind: str = "phi0"
    alpha: float = 4.0
    shape: float | None = None
    grid: tuple[float, ...] | None = field(default=None, repr=False)
    values: tuple[float, ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError("alpha must be positive and finite")
        if self.kind not in ("uniform", "beta", "phi0", "tabulated"):
            raise ValueError(f"unknown law kind {self.kind!r}")
        if self.kind == "beta" and not (self.shape is not None and self.shape >= 1):
            # shapes below 1 give an unbounded density
            raise ValueError("beta law needs shape >= 1")
        if self.kind == "tabulated":
            if self.grid is None or self.values is None or len(self.grid) != len(self.values):
                raise ValueError("tabulated law needs grid and values of equal length")
            g = np.asarray(self.grid, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if g[0] != 0.0 or g[-1] != 1.0 or np.any(np.diff(g) <= 0):
                raise ValueError("grid must increase from 0 to 1")
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValueError("tabulated density must be finite and non-negative")
            if not np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(g)) > 0:
                raise ValueError("tabulated density is not normalizable")
            if np.max(np.abs(np.interp(1 - g, g, v) - v)) > 1e-8 * max(1.0, v.max()):
                raise ValueError("tabulated density must be symmetric about 1/2")

    @classmethod
    def uniform(cls, alpha: float = 4.0) -> "SplittingLaw":
        return cls("uniform", alpha)

    @classmethod
    def beta_law(cls, shape: float, alpha: float = 4.0) -> "SplittingLaw":
        return cls("beta", alpha, shape=shape)

    @classmethod
    def phi0(cls, alpha: float = 4.0) -> "SplittingLaw":
        return cls("phi0", alpha)

    @classmethod
    def from_table(cls, grid, values, alpha: float = 4.0) -> "SplittingLaw":
        return cls("tabulated", alpha, grid=tuple(map(float, grid)), values=tuple(map(float, values)))

    @property
    def beta(self) -> float:
        """Exponent of ``phi(s) ~ b s^beta`` as ``s -> 0``."""
        if self.kind == "uniform":
            return 0.0
        if self.kind == "beta":
            return self.shape - 1.0
        if self.kind == "phi0":
            return 2.0
        v = np.asarray(self.values)
        g = np.asarray(self.grid)
        if v[0] > 0:
            return 0.0
        # crude log-log slope over the first few cells
        i = np.nonzero(v > 0)[0][:4]
        if i.size < 2:
            return 0.0
        return float(np.polyfit(np.log(g[i]), np.log(v[i]), 1)[0])

    @property
    def b(self) -> float:
        """Leading coefficient at 0."""
        if self.kind == "uniform":
            return 1.0
        if self.kind == "beta":
            return 1.0 / special.beta(self.shape, self.shape)
        if self.kind == "phi0":
            return 3.0 / series.MU
        return float(self.pdf(1e-6) / 1e-6**self.beta)

    @property
    def a(self) -> float:
        """Limit of the density at 0: equals ``b`` when ``beta == 0`` and 0 otherwise."""
        return self.b if self.beta == 0 else 0.0

    def pdf(self, s):
        s = np.asarray(s, dtype=float)
        inside = (s >= 0) & (s <= 1)
        sc = np.clip(s, 0.0, 1.0)
        if self.kind == "uniform":
            out = np.ones_like(sc)
        elif self.kind == "beta":
            k = self.shape - 1
            out = np.exp(special.xlogy(k, sc) + special.xlog1py(k, -sc) - special.betaln(self.shape, self.shape))
        elif self.kind == "phi0":
            out = np.asarray(series.phi0(sc), dtype=float)
        else:
            g = np.asarray(self.grid)
            v = np.asarray(self.values)
            out = np.interp(sc, g, v) / self._tab_mass
        out = np.where(inside, out, 0.0)
        return out if out.ndim else float(out)

    @cached_property
    def _tab_mass(self) -> float:
        g = np.asarray(self.grid)
        v = np.asarray(self.values)
        return float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(g)))

    @cached_property
    def table(self) -> series.DensityTable:
        return series.build_density_table(self)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "uniform":
            return rng.random(size)
        if self.kind == "beta":
            return rng.beta(self.shape, self.shape, size)
        return self.table.quantile(rng.random(size))

    def describe(self) -> dict:
        d = {"kind": self.kind, "alpha": self.alpha}
        if self.shape is not None:
            d["shape"] = self.shape
        return d
