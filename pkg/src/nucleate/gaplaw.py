"""Limiting normalized gap density of the interval-splitting process.

With ``S`` drawn from density ``2 s phi(s)`` (so ``X = -log S``), ``T`` with density
``f_T(t) = c_T J(e^{-t})`` where ``J(v) = int_0^v s phi(s) ds``, and ``xi ~ Exp(1)``,
the pair ``(Q, Z)`` solves

    Z = Z e^{-alpha X} + xi,     Q = Z e^{-alpha T}     (in distribution).

The solver finds the density of ``Z`` as the fixed point of

    f_Y(y) = (2/alpha) int_y^inf (u/y)^{(alpha-2)/alpha} phi((y/u)^{1/alpha}) f_Z(u) du/u,
    f_Z(r) = int_0^r e^{-(r-y)} f_Y(y) dy,

then ``q`` (density of ``Q^{1/alpha}``), ``rho = E Q^{-1/alpha}`` and the
unit-mean gap density ``g(x) = q(x/rho) / (rho x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import integrate, special
from scipy.interpolate import PchipInterpolator

from . import series
from .laws import SplittingLaw


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class GridSpec:
    """Solver grid: node 0, log-spaced ``[r_min, r_split]``, linear up to ``r_max``,
    then a coarser linear stretch to ``r_tail`` so the upper integral is complete."""

    r_min: float = 1e-6
    r_split: float = 1.0
    r_max: float = 12.0
    n_log: int = 512
    n_lin: int = 1536
    r_tail: float = 40.0
    n_tail: int = 512

    def nodes(self) -> np.ndarray:
        if not (0 < self.r_min < self.r_split < self.r_max <= self.r_tail):
            raise ValueError("grid bounds must satisfy 0 < r_min < r_split < r_max <= r_tail")
        parts = [
            np.zeros(1),
            np.geomspace(self.r_min, self.r_split, self.n_log),
            np.linspace(self.r_split, self.r_max, self.n_lin + 1)[1:],
        ]
        if self.r_tail > self.r_max:
            parts.append(np.linspace(self.r_max, self.r_tail, self.n_tail + 1)[1:])
        return np.concatenate(parts)


def _power_cdf_table(law: SplittingLaw, nodes: int = 4096):
    """Running integral ``J(v) = int_0^v s phi(s) ds`` on cosine nodes."""
    v = series.cosine_nodes(nodes)
    inc = series.panel_integrals(law.pdf, v, powers=(1,))[0]
    j = np.concatenate(([0.0], np.cumsum(np.maximum(inc, 0.0))))
    return v, j


@dataclass
class GapLawInputs:
    law: SplittingLaw
    grid: GridSpec
    c_T: float
    _logv: np.ndarray = field(repr=False)
    _logj: np.ndarray = field(repr=False)
    _j_interp: PchipInterpolator = field(repr=False)

    @property
    def alpha(self) -> float:
        return self.law.alpha

    def J(self, v) -> np.ndarray:
        """``int_0^v s phi(s) ds``; power-law continuation below the first table node."""
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        lv = np.log(np.where(v > 0, v, 1.0))
        lo = self._logv[0]
        inside = (v > 0) & (lv >= lo)
        out[inside] = np.exp(self._j_interp(np.minimum(lv[inside], 0.0)))
        below = (v > 0) & (lv < lo)
        slope = self.law.beta + 2.0
        out[below] = np.exp(self._logj[0] + slope * (lv[below] - lo))
        return out

    def f_T(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, self.c_T * self.J(np.exp(-np.maximum(t, 0.0))), 0.0)

    def f_X(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, 2 * np.exp(-2 * np.maximum(x, 0.0)) * self.law.pdf(np.exp(-np.maximum(x, 0.0))), 0.0)


def build_inputs(law: SplittingLaw, grid: GridSpec | None = None) -> GapLawInputs:
    """Tabulate ``f_X`` and ``f_T`` ingredients for ``law``; ``c_T`` by adaptive quadrature."""
    grid = grid or GridSpec()
    f = lambda u: u * math.exp(-2 * u) * float(law.pdf(math.exp(-u)))
    inv, err = integrate.quad(f, 0.0, np.inf, epsabs=1e-13, epsrel=1e-11, limit=400)
    if not (inv > 0 and math.isfinite(inv)):
        raise ValueError("splitting density gives a non-normalizable f_T")
    v, j = _power_cdf_table(law)
    if not abs(j[-1] - 0.5) < 1e-6:
        raise ValueError(f"splitting density is not normalized: int s phi(s) ds = {j[-1]:.8g}, expected 1/2")
    keep = (v > 0) & (j > 0)
    keep &= np.concatenate(([True], np.diff(j) > 0))
    logv, logj = np.log(v[keep]), np.log(j[keep])
    return GapLawInputs(law, grid, 1.0 / inv, logv, logj, PchipInterpolator(logv, logj))


# --------------------------------------------------------------------------
# Fixed-point solve for f_Z
# --------------------------------------------------------------------------


@dataclass
class FZSolution:
    r: np.ndarray
    f: np.ndarray
    iterations: int
    residual: float
    history: list[float]
    gamma: float
    weights: np.ndarray = field(repr=False)

    def moment(self, k: int) -> float:
        """``int r^k f_Z(r) dr`` with the solver's own quadrature weights."""
        return float(np.sum(self.weights * self.r**k * self.f))

    def ratio(self) -> np.ndarray:
        """``f_Z(r) / (r^gamma e^{-r})``, smooth over the whole grid."""
        with np.errstate(divide="ignore", invalid="ignore"):
            m = self.f / (self.r**self.gamma * np.exp(-self.r))
        m[0] = m[1]
        return m

    def __call__(self, u) -> np.ndarray:
        """Interpolate through the smooth ratio; power law below the grid, e^{-u} tail above."""
        u = np.asarray(u, dtype=float)
        lr = np.log(self.r[1:])
        m = self.ratio()[1:]
        lu = np.log(np.clip(u, self.r[1], self.r[-1]))
        mm = np.interp(lu, lr, m)
        with np.errstate(divide="ignore"):
            out = mm * np.where(u > 0, u, 0.0) ** self.gamma * np.exp(-u)
        return np.where(u > self.r[-1], 0.0, out)


def _span_weights(t: np.ndarray, a: int, b: int) -> np.ndarray:
    """Weights for ``int_{t_a}^{t_b} f dt`` on nodes ``t``: trapezoid plus
    Euler-Maclaurin corrections at both ends and wherever the spacing changes."""
    w = np.zeros_like(t)
    if b <= a:
        return w
    d = np.diff(t[a : b + 1])
    w[a:b] += 0.5 * d
    w[a + 1 : b + 1] += 0.5 * d
    if b - a < 2:
        return w
    # start: + h^2/12 f'(t_a), one-sided three-point derivative
    d1, d2 = t[a + 1] - t[a], t[a + 2] - t[a]
    w[a : a + 3] += d1**2 / 12 * np.array([-(d1 + d2) / (d1 * d2), d2 / (d1 * (d2 - d1)), -d1 / (d2 * (d2 - d1))])
    # end: - h^2/12 f'(t_b)
    e1, e2 = t[b] - t[b - 1], t[b] - t[b - 2]
    w[b - 2 : b + 1] -= e1**2 / 12 * np.array([e1 / (e2 * (e2 - e1)), -e2 / (e1 * (e2 - e1)), (e1 + e2) / (e1 * e2)])
    # interior: - (h_{j-1}^2 - h_j^2)/12 f'(t_j), central three-point derivative
    hl, hr = d[:-1], d[1:]
    c = (hl**2 - hr**2) / 12
    j = np.arange(a + 1, b)
    w[j - 1] -= c * (-hr / (hl * (hl + hr)))
    w[j] -= c * ((hr - hl) / (hl * hr))
    w[j + 1] -= c * (hl / (hr * (hl + hr)))
    return w


def _kernel(law: SplittingLaw, x: np.ndarray) -> np.ndarray:
    """``e^{(alpha-2) x} phi(e^{-x})``."""
    return np.exp((law.alpha - 2) * x) * law.pdf(np.exp(-x))


def _operators(law: SplittingLaw, r: np.ndarray, gamma: float):
    """Matrices on nodes ``r_1..r_M`` (all in ``t = log r``):

    ``A``: ``f_Z -> f_Y``, suffix integrals of ``K((t'-t)/alpha) f_Z(e^{t'})``;
    ``C``: ``f_Y -> e^{r} f_Z``, prefix integrals of ``e^y y f_Y(y)`` plus the
    power-law first panel ``[0, r_1]``;
    ``w``: weights for ``int f_Z dr``.
    """
    alpha = law.alpha
    t = np.log(r[1:])
    m = t.size
    diff = (t[None, :] - t[:, None]) / alpha
    upper = diff >= 0
    A = np.zeros((m, m))
    A[upper] = _kernel(law, diff[upper])
    C = np.zeros((m, m))
    for i in range(m):
        A[i] *= (2.0 / alpha) * _span_weights(t, i, m - 1)
        C[i] = _span_weights(t, 0, i)
    y = r[1:]
    C *= (np.exp(y) * y)[None, :]
    C[:, 0] += y[0] / gamma * math.exp(y[0])
    w = _span_weights(t, 0, m - 1) * y
    w[0] += y[0] / (gamma + 1.0)
    return A, C, np.concatenate(([0.0], w))


def solve_fZ(inputs: GapLawInputs, tol: float = 1e-10, max_iter: int = 200) -> FZSolution:
    """Power iteration with unit-mass renormalization each sweep."""
    law = inputs.law
    gamma = (2.0 + law.beta) / law.alpha
    r = inputs.grid.nodes()
    A, C, w = _operators(law, r, gamma)
    damp = np.exp(-r[1:])

    def sweep(f):
        out = np.concatenate(([0.0], damp * (C @ (A @ f[1:]))))
        return out / np.dot(w, out)

    f = r**gamma * np.exp(-r)
    f /= np.dot(w, f)
    history = []
    for it in range(1, max_iter + 1):
        new = sweep(f)
        change = float(np.max(np.abs(new - f)))
        history.append(change)
        f = new
        if change < tol:
            break
    else:
        raise ConvergenceError(f"no convergence after {max_iter} sweeps (last change {history[-1]:.3e})", history[-1])
    residual = float(np.max(np.abs(sweep(f) - f)))
    return FZSolution(r, f, it, residual, history, gamma, w)


# --------------------------------------------------------------------------
# q, rho, g
# --------------------------------------------------------------------------


@dataclass
class GapLawSolution:
    law: SplittingLaw
    fz: FZSolution
    r: np.ndarray  # grid for q
    q: np.ndarray
    rho: float
    x: np.ndarray  # grid for g, x = rho * r
    g: np.ndarray
    gap_cdf_values: np.ndarray  # int_0^x g
    G_values: np.ndarray  # (1/rho) int_0^r q(y)/y dy, on r
    c_T: float

    @property
    def theta(self) -> float:
        return self.rho ** (-self.law.alpha)

    def gap_cdf(self, x) -> np.ndarray:
        """CDF of the unit-mean normalized gap."""
        x = np.asarray(x, dtype=float)
        return np.interp(x, self.x, self.gap_cdf_values, left=0.0, right=1.0)

    def q_cdf(self, r) -> np.ndarray:
        c = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(self.r) * (self.q[1:] + self.q[:-1]))))
        c /= c[-1]
        return np.interp(np.asarray(r, dtype=float), self.r, c, left=0.0, right=1.0)

    def g_at(self, x) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self.x, self.g, right=0.0)

    def mean_gap(self) -> float:
        return _log_quad(self.x, self.x * self.g, self.law.beta + 1.0)

    def q_mass(self) -> float:
        return _log_quad(self.r, self.q, self.law.beta + 1.0)

    def g_mass(self) -> float:
        return _log_quad(self.x, self.g, self.law.beta)

    def to_rows(self):
        fz = self.fz(self.r)
        return zip(self.x, self.r, fz, self.q, self.g, self.gap_cdf_values)


def q_grid(alpha: float, r_tail: float, n_log: int = 400, n_lin: int = 1600, h_max: float = 0.005) -> np.ndarray:
    top = 0.98 * r_tail ** (1.0 / alpha)
    # small alpha stretches the range; keep the linear spacing below h_max
    n_lin = max(n_lin, math.ceil((top - 0.1) / h_max))
    return np.concatenate(([0.0], np.geomspace(1e-5, 0.1, n_log), np.linspace(0.1, top, n_lin + 1)[1:]))


def _log_quad(x: np.ndarray, f: np.ndarray, power: float) -> float:
    """``int_0^{x_max} f dx`` for nodes ``x_0 = 0 < x_1 < ...`` with ``f ~ x^power`` near 0."""
    y = x[1:]
    w = _span_weights(np.log(y), 0, y.size - 1) * y
    return float(y[0] * f[1] / (power + 1.0) + np.dot(w, f[1:]))


def _q_values(fz: FZSolution, inputs: GapLawInputs, rq: np.ndarray) -> np.ndarray:
    """``q(r) = r^{-1} int_{r^alpha}^inf f_T(log(u)/alpha - log r) f_Z(u) du``, in ``log u``."""
    alpha = inputs.alpha
    w_nodes = np.log(fz.r[1:])
    f_nodes = fz.f[1:]
    out = np.zeros_like(rq)
    below = 48
    for i, x in enumerate(rq):
        if x <= 0:
            continue
        lo = alpha * math.log(x)
        lx = math.log(x)
        sel = w_nodes > lo + 1e-9
        if lo < w_nodes[0]:
            extra = np.linspace(lo, w_nodes[0], below, endpoint=False)
        else:
            extra = np.array([lo])
        ww = np.concatenate((extra, w_nodes[sel]))
        ff = np.concatenate((fz(np.exp(extra)), f_nodes[sel]))
        if ww.size < 3:
            continue
        integrand = inputs.f_T(ww / alpha - lx) * ff * np.exp(ww)
        out[i] = np.dot(_span_weights(ww, 0, ww.size - 1), integrand) / x
    return np.maximum(out, 0.0)


def derive_q_rho_g(fz: FZSolution, inputs: GapLawInputs, rq: np.ndarray | None = None) -> GapLawSolution:
    """Compute ``q`` by quadrature, ``rho = int q(y)/y dy``, and the unit-mean gap law."""
    alpha = inputs.alpha
    if rq is None:
        rq = q_grid(alpha, inputs.grid.r_tail)
    q = _q_values(fz, inputs, rq)
    beta = inputs.law.beta
    with np.errstate(divide="ignore", invalid="ignore"):
        qy = np.where(rq > 0, q / rq, 0.0)
    rho = _log_quad(rq, qy, beta)
    if not (rho > 0 and math.isfinite(rho)):
        raise ValueError("rho quadrature diverged: q(y)/y is not integrable near 0")
    # running integral of q(y)/y, trapezoid in log y, first panel by power law
    y = rq[1:]
    incr = 0.5 * np.diff(np.log(y)) * (qy[2:] * y[1:] + qy[1:-1] * y[:-1])
    cum = np.concatenate(([0.0, y[0] * qy[1] / (beta + 1.0)], y[0] * qy[1] / (beta + 1.0) + np.cumsum(incr)))
    G = cum / cum[-1]
    x = rho * rq
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(x > 0, q / (rho * x), 0.0)
    if beta == 0:
        g[0] = qy[1] / rho**2  # continuous limit at 0
    return GapLawSolution(inputs.law, fz, rq, q, rho, x, g, G.copy(), G, inputs.c_T)


def solve_gap_law(law: SplittingLaw, grid: GridSpec | None = None, tol: float = 1e-10, max_iter: int = 200):
    inputs = build_inputs(law, grid)
    fz = solve_fZ(inputs, tol, max_iter)
    return derive_q_rho_g(fz, inputs), inputs


# --------------------------------------------------------------------------
# Moment series and closed forms
# --------------------------------------------------------------------------


def laplace_h(law: SplittingLaw, t: float) -> float:
    """``E e^{-t X} = 2 int_0^1 s^{1+t} phi(s) ds``."""
    return 2 * integrate.quad(lambda s: s ** (1 + t) * float(law.pdf(s)), 0.0, 1.0, epsabs=1e-14, epsrel=1e-12,
                              limit=200)[0]


def mz_coefficients(law: SplittingLaw, K: int) -> np.ndarray:
    """``c_k = prod_{j<=k} 1/(1 - h(j alpha))``, so that ``E Z^k = k! c_k``."""
    c = np.ones(K + 1)
    for k in range(1, K + 1):
        h = laplace_h(law, k * law.alpha)
        if not h < 1:
            raise ValueError("degenerate splitting law")
        c[k] = c[k - 1] / (1 - h)
    return c


def mgf_mZ(t: float, law: SplittingLaw, K: int | None = None) -> float:
    """``E e^{t Z}`` by its power series, for ``|t| < 1``."""
    if not abs(t) < 1:
        raise ValueError("the series needs |t| < 1")
    if K is None:
        # c_k grows at most polynomially, so t^k k^p < 1e-14 decides the cut
        K = 10
        while abs(t) ** K * (K + 1) ** 4 > 1e-14 and K < 5000:
            K += 10
    c = mz_coefficients(law, K)
    return float(np.polynomial.polynomial.polyval(t, c))


def uniform_closed_form(alpha: float) -> dict:
    """Explicit solution for the uniform splitting law."""
    k = special.gamma(1 + 2 / alpha)
    rho = special.gamma(1 / alpha) / special.gamma(2 / alpha)
    theta = rho ** (-alpha)
    cg = alpha * special.gamma(2 / alpha) / special.gamma(1 / alpha) ** 2
    return {
        "f_Z": lambda r: np.asarray(r, dtype=float) ** (2 / alpha) * np.exp(-np.asarray(r, dtype=float)) / k,
        "q": lambda r: 2 * np.asarray(r, dtype=float) * np.exp(-np.asarray(r, dtype=float) ** alpha) / k,
        "g": lambda x: cg * np.exp(-theta * np.asarray(x, dtype=float) ** alpha),
        "gap_cdf": lambda x: special.gammainc(1 / alpha, theta * np.asarray(x, dtype=float) ** alpha),
        "rho": rho,
        "theta": theta,
        "mgf": lambda t: (1 - t) ** (-(alpha + 2) / alpha),
    }


# --------------------------------------------------------------------------
# Monte Carlo perpetuity chain
# --------------------------------------------------------------------------


@nb.njit(cache=True)
def _perpetuity(z0, s_alpha, xi, burn_in, out_z):
    z = z0
    n = s_alpha.size
    for k in range(n):
        z = z * s_alpha[k] + xi[k]
        if k >= burn_in:
            out_z[k - burn_in] = z


@dataclass
class ChainSample:
    q_root: np.ndarray  # samples of Q^{1/alpha}
    z: np.ndarray


def mc_fixed_point_oracle(inputs: GapLawInputs, chain_length: int, burn_in: int = 1000, seed: int = 0) -> ChainSample:
    """Iterate ``Z <- Z S^alpha + xi`` and record ``Z^{1/alpha} e^{-T}`` after burn-in."""
    if chain_length <= burn_in:
        raise ValueError("chain_length must exceed burn_in")
    law = inputs.law
    rng = np.random.default_rng(np.random.SeedSequence([seed, 11]))
    s_table = series.tabulate_density(lambda s: 2 * s * law.pdf(s), symmetric=False)
    v_table = series.tabulate_density(
        lambda v: inputs.c_T * inputs.J(v) / np.where(v > 0, v, 1.0), symmetric=False
    )
    s = s_table.quantile(rng.random(chain_length))
    xi = rng.exponential(1.0, chain_length)
    z = np.empty(chain_length - burn_in)
    _perpetuity(0.0, s**law.alpha, xi, burn_in, z)
    v = v_table.quantile(rng.random(z.size))  # v = e^{-T}
    return ChainSample(z ** (1.0 / law.alpha) * v, z)


# --------------------------------------------------------------------------
# Tail fits
# --------------------------------------------------------------------------


@dataclass
class TailFit:
    beta_hat: float
    theta_hat: float
    c_g0_hat: float
    beta: float
    theta: float
    lower_window: tuple[float, float]
    upper_window: tuple[float, float]


def tail_fit(sol: GapLawSolution, lower=(1e-3, 1e-2), upper: tuple[float, float] | None = None) -> TailFit:
    """Least-squares slopes: ``log g`` against ``log x`` near 0, and
    ``-log(g x^{2-2a})`` against ``x^alpha`` in the upper window."""
    law = sol.law
    alpha = law.alpha
    if upper is None:
        # window in units of the exponent theta x^alpha
        upper = ((8.0 / sol.theta) ** (1 / alpha), (20.0 / sol.theta) ** (1 / alpha))
    x, g = sol.x, sol.g
    lo = (x >= lower[0]) & (x <= lower[1]) & (g > 0)
    hi = (x >= upper[0]) & (x <= upper[1]) & (g > 0)
    if lo.sum() < 5:
        raise ValueError("grid does not resolve the lower fit window")
    if hi.sum() < 5:
        raise ValueError("grid does not reach the upper fit window")
    beta_hat, icpt = np.polyfit(np.log(x[lo]), np.log(g[lo]), 1)
    a = law.a
    yv = -np.log(g[hi] * x[hi] ** (2 - 2 * a))
    theta_hat = np.polyfit(x[hi] ** alpha, yv, 1)[0]
    c_g0 = float(np.exp(icpt)) if abs(beta_hat - law.beta) < 0.5 else math.nan
    return TailFit(float(beta_hat), float(theta_hat), c_g0, law.beta, sol.theta, tuple(lower), tuple(upper))
