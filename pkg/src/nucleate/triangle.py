"""Brownian exit from the unit square through the diagonal, and the interval heat kernel.

A point ``(u, v)`` of the square with ``u >= v`` maps to ``(x, y) = ((u+v)/2, (u-v)/2)``;
the exit density ``h(x, y, z)`` is the Poisson-type kernel for leaving through
diagonal point ``(z, z)``. For ``u < v`` we use ``H(u, v) = H(v, u)``.

Each series term carries ``sinh(n pi q)/sinh(n pi)`` which decays like
``e^{-n pi (1-q)}``; near the diagonal this is arbitrarily slow. The production
path splits that ratio into ``e^{-n pi (1-q)} - e^{-n pi (1+q)}``, sums the two
geometric-type series in closed form, and adds the remainder, which decays like
``e^{-2 n pi}``, term by term. ``method="series"`` keeps the plain adaptive sum
for cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from . import series

PI = math.pi
CORNER_RADIUS = 1e-4
_REMAINDER_TERMS = 12  # e^{-2 pi n} is below 1e-32 by n = 12
_MAX_SERIES_TERMS = 200_000


class SlowConvergenceError(ValueError):
    """Raised for starts so close to a diagonal endpoint that the series is unreliable."""


Intervals = Sequence[tuple[float, float]]


def normalize_target(target) -> tuple[tuple[float, float], ...]:
    """Validate a union of closed intervals in ``[0, 1]``; returns it sorted."""
    if isinstance(target, tuple) and len(target) == 2 and np.isscalar(target[0]):
        target = [target]
    out = sorted((float(a), float(b)) for a, b in target)
    for a, b in out:
        if not (0.0 <= a <= b <= 1.0):
            raise ValueError(f"target interval ({a}, {b}) is not inside [0, 1]")
    for (_, b0), (a1, _) in zip(out, out[1:]):
        if a1 < b0:
            raise ValueError("target intervals overlap")
    return tuple(out)


@dataclass(frozen=True)
class TriangleExitQuery:
    start: tuple[float, float]
    target: tuple[tuple[float, float], ...] = ((0.0, 1.0),)
    tolerance: float = 1e-12

    def __post_init__(self):
        u, v = self.start
        if not (0 <= u <= 1 and 0 <= v <= 1):
            raise ValueError("start must lie in the unit square")
        object.__setattr__(self, "target", normalize_target(self.target))
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


def _images(x, y):
    """The four (position, height, sign) triples of the symmetrised sine-sinh sum."""
    return ((x, y, 1.0), (1 - x, 1 - y, 1.0), (y, x, -1.0), (1 - y, 1 - x, -1.0))


def _remainder_ratio(n, q):
    """``sinh(n pi q)/sinh(n pi) - e^{-n pi (1-q)} + e^{-n pi (1+q)}``."""
    e2 = np.exp(-2 * n * PI)
    return (np.exp(-n * PI * (1 - q)) - np.exp(-n * PI * (1 + q))) * e2 / (1 - e2)


def _sin_sum(r, theta):
    """``sum_{n>=1} r^n sin(n theta)/n`` for ``0 <= r <= 1``."""
    return np.arctan2(r * np.sin(theta), 1 - r * np.cos(theta))


def _cos_sum(r, theta):
    """``sum_{n>=1} r^n cos(n theta)`` for ``0 <= r < 1``."""
    c = np.cos(theta)
    return (r * c - r * r) / (1 - 2 * r * c + r * r)


def _term_index(ndim: int) -> np.ndarray:
    return np.arange(1, _REMAINDER_TERMS + 1, dtype=float).reshape((-1,) + (1,) * ndim)


def _check_corner(u, v):
    d0 = np.hypot(u, v)
    d1 = np.hypot(1 - u, 1 - v)
    if np.any(np.minimum(d0, d1) < CORNER_RADIUS):
        raise SlowConvergenceError(
            f"start within {CORNER_RADIUS:g} of a diagonal endpoint; the exit series does not converge usefully there"
        )


# --------------------------------------------------------------------------
# Exit density
# --------------------------------------------------------------------------


def _density_closed(x, y, z):
    c = 1 - z
    out = np.zeros(np.broadcast(x, y, z).shape)
    n = _term_index(out.ndim)
    for p, q, s in _images(x, y):
        r1 = np.exp(-PI * (1 - q))
        r2 = np.exp(-PI * (1 + q))
        main = (_cos_sum(r1, PI * (p - c)) - _cos_sum(r1, PI * (p + c))) - (
            _cos_sum(r2, PI * (p - c)) - _cos_sum(r2, PI * (p + c))
        )
        rem = np.sum(
            2 * np.sin(n * PI * c) * np.sin(n * PI * np.asarray(p)) * _remainder_ratio(n, np.asarray(q)), axis=0
        )
        out = out + s * (main + rem)
    return out


def _density_series(x: float, y: float, z: float, tol: float) -> tuple[float, int]:
    """Plain truncated sum; stops once the geometric envelope of the tail is below ``tol``."""
    margin = min(x, y, 1 - x, 1 - y)
    if margin <= 0:
        return 0.0, 0
    # |term n| <= 8 e^{-n pi margin} / (1 - e^{-2 pi})
    ratio = math.exp(-PI * margin)
    c0 = 8 / (1 - math.exp(-2 * PI)) / (1 - ratio)
    n_max = int(math.ceil(math.log(c0 / tol) / (PI * margin))) + 1
    if n_max > _MAX_SERIES_TERMS:
        raise SlowConvergenceError(f"plain series needs {n_max} terms at margin {margin:.2e}")
    n = np.arange(1, max(n_max, 1) + 1, dtype=float)
    total = np.zeros_like(n)
    for p, q, s in _images(x, y):
        # ratio sinh(n pi q)/sinh(n pi) computed as exponentials to avoid overflow
        rat = np.exp(-n * PI * (1 - q)) * (-np.expm1(-2 * n * PI * q)) / (-np.expm1(-2 * n * PI))
        total += s * np.sin(n * PI * p) * rat
    terms = 2 * np.sin(n * PI * (1 - z)) * total
    return float(math.fsum(terms)), int(n.size)


def exit_density(x, y, z, tol: float = 1e-12, method: str = "closed"):
    """Density ``h(x, y, z)`` of the exit location on the diagonal.

    ``(x, y)`` are the rotated coordinates of a start inside the square; ``z`` is the
    diagonal coordinate of the exit point. Raises :class:`SlowConvergenceError`
    within ``1e-4`` of the diagonal endpoints.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any((x <= 0) | (x >= 1) | (y <= 0) | (y >= 1)):
        raise ValueError("x and y must lie in (0, 1)")
    if np.any((z < 0) | (z > 1)):
        raise ValueError("z must lie in [0, 1]")
    # diagonal endpoints in rotated coordinates: (0, 0), (1, 0) and their mirrors (0, 1)
    d = np.minimum.reduce([np.hypot(x, y), np.hypot(1 - x, y), np.hypot(x, 1 - y), np.hypot(1 - x, 1 - y)])
    if np.any(d < CORNER_RADIUS):
        raise SlowConvergenceError("evaluation point within 1e-4 of a corner singularity")
    if method == "closed":
        out = _density_closed(x, y, z)
    elif method == "series":
        b = np.broadcast_arrays(x, y, z)
        out = np.array([_density_series(a, c, w, tol)[0] for a, c, w in zip(*(v.ravel() for v in b))])
        out = out.reshape(b[0].shape)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# Exit measure
# --------------------------------------------------------------------------


def _measure_closed(x, y, target) -> np.ndarray:
    """``int_B h(x, y, w) dw`` for arrays ``x, y`` with ``0 < y``, no validation."""
    out = np.zeros(np.broadcast(x, y).shape)
    n = _term_index(out.ndim)
    for a, b in target:
        if b <= a:
            continue
        # int_a^b sin(n pi (1-w)) dw = (cos(n pi (1-b)) - cos(n pi (1-a))) / (n pi)
        for c, sc in ((1 - b, 1.0), (1 - a, -1.0)):
            for p, q, s in _images(x, y):
                r1 = np.exp(-PI * (1 - q))
                r2 = np.exp(-PI * (1 + q))
                main = 0.0
                for r, sr in ((r1, 1.0), (r2, -1.0)):
                    main = main + sr * 0.5 * (_sin_sum(r, PI * (p + c)) + _sin_sum(r, PI * (p - c)))
                rem = np.sum(
                    np.cos(n * PI * c) * np.sin(n * PI * np.asarray(p)) * _remainder_ratio(n, np.asarray(q)) / n,
                    axis=0,
                )
                out = out + sc * s * (2 / PI) * (main + rem)
    return out


def _measure_series(x: float, y: float, target, tol: float) -> float:
    margin = min(x, y, 1 - x, 1 - y)
    ratio = math.exp(-PI * margin)
    c0 = 8 / PI / (1 - math.exp(-2 * PI)) / (1 - ratio)
    n_max = int(math.ceil(math.log(c0 / tol) / (PI * margin))) + 1
    if n_max > _MAX_SERIES_TERMS:
        raise SlowConvergenceError(f"plain series needs {n_max} terms at margin {margin:.2e}")
    n = np.arange(1, n_max + 1, dtype=float)
    total = np.zeros_like(n)
    for p, q, s in _images(x, y):
        rat = np.exp(-n * PI * (1 - q)) * (-np.expm1(-2 * n * PI * q)) / (-np.expm1(-2 * n * PI))
        total += s * np.sin(n * PI * p) * rat
    weight = np.zeros_like(n)
    for a, b in target:
        weight += (np.cos(n * PI * (1 - b)) - np.cos(n * PI * (1 - a))) / (n * PI)
    return float(math.fsum(2 * weight * total))


def exit_measure_array(u, v, target=((0.0, 1.0),), method: str = "closed", check_corners: bool = True):
    """Vectorised ``H(u, v; B)``; see :func:`exit_measure`."""
    target = normalize_target(target)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any((u < 0) | (u > 1) | (v < 0) | (v > 1)):
        raise ValueError("start must lie in the unit square")
    hi = np.maximum(u, v)
    lo = np.minimum(u, v)
    on_diag = hi == lo
    on_side = (hi == 1.0) | (lo == 0.0)
    if check_corners:
        off = np.atleast_1d(~on_diag)
        _check_corner(np.atleast_1d(u)[off], np.atleast_1d(v)[off])
    x = 0.5 * (hi + lo)
    y = 0.5 * (hi - lo)
    interior = ~on_diag & ~on_side
    xs = np.where(interior, x, 0.5)
    ys = np.where(interior, y, 0.25)
    if method == "closed":
        val = _measure_closed(xs, ys, target)
    elif method == "series":
        flat = [_measure_series(a, b, target, 1e-13) for a, b in zip(np.ravel(xs), np.ravel(ys))]
        val = np.asarray(flat).reshape(np.shape(xs))
    else:
        raise ValueError(f"unknown method {method!r}")
    inside = np.zeros(np.shape(u), dtype=bool)
    for a, b in target:
        inside |= (hi >= a) & (hi <= b)
    out = np.where(interior, np.clip(val, 0.0, 1.0), np.where(on_diag, inside.astype(float), 0.0))
    return out


def exit_measure(query: TriangleExitQuery, method: str = "closed") -> float:
    """Probability that Brownian motion from ``query.start`` leaves the triangle
    through the diagonal at a point whose first coordinate lies in ``query.target``.

    Exactly the indicator ``1{u in B}`` on the diagonal and 0 on the square sides.
    """
    u, v = query.start
    return float(exit_measure_array(u, v, query.target, method))


# --------------------------------------------------------------------------
# Smith-Watson constant
# --------------------------------------------------------------------------


def smith_watson(variant: str = "fast", terms: int = 10_000) -> float:
    """Probability that Brownian motion from a uniform point of the square exits via the diagonal.

    ``slow`` is the coth series over ``terms`` odd indices plus an Euler-Maclaurin
    tail; ``fast`` is the alternating sech series up to ``n = 15``.
    """
    if variant == "fast":
        n = series.odd(15)
        signs = np.where(((n - 1) // 2) % 2 == 0, 1.0, -1.0)
        return 32 / PI**3 * math.fsum(signs / np.cosh(n * PI / 2) / n**3)
    if variant == "slow":
        n = series.odd(2 * terms - 1)
        head = math.fsum((1.0 / np.tanh(n * PI / 2) / n**3)[::-1])
        m = 2 * terms + 1  # first omitted odd index; coth is 1 to double precision there
        tail = 1 / (4 * m**2) + 1 / (2 * m**3) + 1 / (2 * m**4)
        return 1 - 16 / PI**3 * (head + tail)
    if variant == "quadrature":
        return smith_watson_quadrature()
    raise ValueError(f"unknown variant {variant!r}")


def smith_watson_quadrature(order: int = 64) -> float:
    """Tensor Gauss quadrature of ``H(u, v; [0, 1])`` over the square.

    The symmetries ``H(u, v) = H(v, u) = H(1-v, 1-u)`` reduce the square to the
    quarter ``{0 <= y <= x <= 1/2}`` in rotated coordinates; a Duffy map from the
    origin absorbs the corner discontinuity.
    """
    g, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (g + 1)
    wt = 0.5 * w
    r, s = np.meshgrid(t, t, indexing="ij")
    x = 0.5 * r
    y = 0.5 * r * s
    vals = _measure_closed(x, y, ((0.0, 1.0),))
    # du dv = 2 dx dy, dx dy = r/4 dr ds, four symmetric copies
    return float(2.0 * np.einsum("i,j,ij->", wt, wt, vals * r))


# --------------------------------------------------------------------------
# Heat kernel on [0, 1] with absorption
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HeatKernelQuery:
    t: float
    x: float
    y: float
    method: str = "auto"

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("t must be positive")
        if not (0 <= self.x <= 1 and 0 <= self.y <= 1):
            raise ValueError("x and y must lie in [0, 1]")
        if self.method not in ("images", "spectral", "auto"):
            raise ValueError(f"unknown method {self.method!r}")


def _kernel_images(t, x, y):
    # reflections out to |k| <= K with (2K - 1)^2 / 2t > 28 * ln(10), i.e. tail < 1e-12
    kmax = int(math.ceil(0.5 * (math.sqrt(2 * t * 28 * math.log(10)) + 1))) + 1
    k = np.arange(-kmax, kmax + 1, dtype=float)
    x = np.asarray(x, dtype=float)[..., None]
    y = np.asarray(y, dtype=float)[..., None]
    s = np.exp(-((y - x + 2 * k) ** 2) / (2 * t)) - np.exp(-((y + x + 2 * k) ** 2) / (2 * t))
    return s.sum(axis=-1) / math.sqrt(2 * PI * t)


def _kernel_spectral(t, x, y):
    # e^{-m^2 pi^2 t / 2} < 1e-13 beyond M
    mmax = int(math.ceil(math.sqrt(2 * 30 * math.log(10) / (PI**2 * t)))) + 1
    m = np.arange(1, mmax + 1, dtype=float)
    x = np.asarray(x, dtype=float)[..., None]
    y = np.asarray(y, dtype=float)[..., None]
    return 2 * np.sum(np.exp(-(m**2) * PI**2 * t / 2) * np.sin(m * PI * x) * np.sin(m * PI * y), axis=-1)


def heat_kernel_array(t: float, x, y, method: str = "auto"):
    if not t > 0:
        raise ValueError("t must be positive")
    if method == "auto":
        method = "images" if t < 0.5 else "spectral"
    if method == "images":
        out = _kernel_images(t, x, y)
    elif method == "spectral":
        out = _kernel_spectral(t, x, y)
    else:
        raise ValueError(f"unknown method {method!r}")
    return np.maximum(out, 0.0)


def heat_kernel(query: HeatKernelQuery) -> float:
    """Transition density of Brownian motion killed on leaving ``[0, 1]``."""
    return float(heat_kernel_array(query.t, query.x, query.y, query.method))


def _green_quadrature(x: float, y: float, split: float = 0.5) -> float:
    """``int_0^inf q_t(x, y) dt``: images in ``s = sqrt(t)`` below ``split``, exact spectral tail above."""
    f = lambda s: 2 * s * float(_kernel_images(s * s, x, y)) if s > 0 else 0.0
    head = integrate.quad(f, 0.0, math.sqrt(split), epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    m = np.arange(1, 60, dtype=float)
    tail = 2 * np.sum(2 / (m**2 * PI**2) * np.exp(-(m**2) * PI**2 * split / 2) * np.sin(m * PI * x) * np.sin(m * PI * y))
    return head + float(tail)


def expected_occupation(y: float, verify: bool = False):
    """Expected time spent near ``y`` before absorption, from a uniform start: ``y (1 - y)``.

    With ``verify=True`` returns ``(closed_form, double_quadrature)``.
    """
    if not 0 <= y <= 1:
        raise ValueError("y must lie in [0, 1]")
    exact = y * (1 - y)
    if not verify:
        return exact
    opts = dict(epsabs=1e-11, epsrel=1e-10, limit=100)
    g = lambda x: _green_quadrature(x, y)
    quad = integrate.quad(g, 0.0, y, **opts)[0] + integrate.quad(g, y, 1.0, **opts)[0]
    return exact, quad


# --------------------------------------------------------------------------
# Walk-on-spheres oracle
# --------------------------------------------------------------------------

_WOS_BLOCK = 1 << 16


def mc_exit_oracle(
    u: float,
    v: float,
    target=((0.0, 1.0),),
    paths: int = 100_000,
    eps: float = 1e-5,
    seed: int = 0,
) -> tuple[float, float]:
    """Walk-on-spheres estimate of the diagonal exit probability, with its standard error.

    Paths run in fixed blocks with their own seed streams, so the result does
    not depend on how blocks are scheduled.
    """
    target = normalize_target(target)
    if not (0 < u < 1 and 0 < v < 1):
        raise ValueError("start must lie in the open square")
    if paths < 1 or eps <= 0:
        raise ValueError("paths must be >= 1 and eps > 0")
    hi, lo = max(u, v), min(u, v)
    hits = 0
    for block, start in enumerate(range(0, paths, _WOS_BLOCK)):
        size = min(_WOS_BLOCK, paths - start)
        rng = np.random.default_rng(np.random.SeedSequence([seed, block]))
        hits += _wos_block(hi, lo, target, size, eps, rng)
    p = hits / paths
    return p, math.sqrt(max(p * (1 - p), 0.0) / paths)


def _wos_block(u0, v0, target, size, eps, rng) -> int:
    # triangle {v <= u}: sides u = 1, v = 0 and the diagonal
    u = np.full(size, u0)
    v = np.full(size, v0)
    alive = np.arange(size)
    hits = 0
    rs2 = math.sqrt(2.0)
    while alive.size:
        cu, cv = u[alive], v[alive]
        d_diag = (cu - cv) / rs2
        d_right = 1 - cu
        d_bottom = cv
        d = np.minimum(np.minimum(d_diag, d_right), d_bottom)
        done = d < eps
        if np.any(done):
            diag = done & (d_diag <= d_right) & (d_diag <= d_bottom)
            w = 0.5 * (cu[diag] + cv[diag])
            ok = np.zeros(w.shape, dtype=bool)
            for a, b in target:
                ok |= (w >= a) & (w <= b)
            hits += int(ok.sum())
            alive = alive[~done]
            d = d[~done]
        if not alive.size:
            break
        ang = rng.random(alive.size) * (2 * PI)
        u[alive] += d * np.cos(ang)
        v[alive] += d * np.sin(ang)
    return hits


# --------------------------------------------------------------------------
# Nucleation location measure
# --------------------------------------------------------------------------


def phi0_mass(target) -> float:
    target = normalize_target(target)
    return sum(integrate.quad(series.phi0, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)[0] for a, b in target)


def phi1(target=((0.0, 1.0),), method: str = "via_mu_phi0", samples: int = 1_000_000, seed: int = 0):
    """Location measure of the first nucleation at small deposition rate.

    ``via_mu_phi0`` returns ``mu * Phi0(B)``. ``direct_mc`` samples a uniform
    deposition point ``x``, a occupation point ``y`` from the Green's function of
    the interval, a uniform second-particle point ``z``, and averages
    ``x (1 - x) H(y, z; B)``; it returns ``(estimate, std_error)``.
    """
    target = normalize_target(target)
    if method == "via_mu_phi0":
        return series.MU * phi0_mass(target)
    if method != "direct_mc":
        raise ValueError(f"unknown method {method!r}")
    total = 0.0
    total2 = 0.0
    for block, start in enumerate(range(0, samples, _WOS_BLOCK)):
        size = min(_WOS_BLOCK, samples - start)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 1, block]))
        x = rng.random(size)
        left = rng.random(size) < x
        root = np.sqrt(rng.random(size))
        # density 2 min(x,y)(1-max(x,y)) / (x(1-x)): linear ramps either side of x
        y = np.where(left, x * root, 1 - (1 - x) * root)
        z = rng.random(size)
        # the resummed series stays accurate up to the corners, so no exclusion here
        vals = x * (1 - x) * exit_measure_array(y, z, target, check_corners=False)
        total += math.fsum(vals)
        total2 += math.fsum(vals * vals)
    mean = total / samples
    var = max(total2 / samples - mean * mean, 0.0)
    return mean, math.sqrt(var / samples)
