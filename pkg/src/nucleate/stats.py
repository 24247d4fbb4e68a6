"""Kolmogorov-Smirnov distances and critical values."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats as sps


def ks_one_sample(sample, cdf) -> float:
    """``sup_x |F_n(x) - F(x)|`` for a continuous reference ``cdf``."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_two_sample(a, b) -> float:
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    both = np.concatenate((a, b))
    fa = np.searchsorted(a, both, side="right") / a.size
    fb = np.searchsorted(b, both, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_critical(level: float, n: int, m: int | None = None) -> float:
    """Asymptotic critical value of the KS statistic at significance ``level``.

    One-sample when ``m`` is ``None``, otherwise two-sample with sizes ``n`` and ``m``.
    """
    c = sps.kstwobign.isf(level)
    eff = n if m is None else n * m / (n + m)
    return float(c / math.sqrt(eff))
