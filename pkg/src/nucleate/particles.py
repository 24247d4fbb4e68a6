"""Deposition, diffusion and nucleation of particles on an interval.

Particles land at rate ``lam`` per unit length, perform Brownian motion and
are absorbed by islands (the two endpoints plus every nucleation site). Two
active particles meeting form a new island.

Lattice mode is an exact continuous-time Markov chain on ``sites_per_unit``
sites per unit length. While exactly one particle is active, its killed random
walk is advanced in a single jump to the next deposition using the sine
eigenbasis of its gap, which is exact and skips the long idle stretches of a
lone walker. With two or more active particles events are drawn one at a
time (Gillespie). Continuum mode is an approximate Euler scheme with
Brownian-bridge crossing corrections.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from . import rng
from .splitting import GapConfiguration

# status codes returned by the kernels
OK = 0
HIT_T_MAX = 1
CYCLE_LIMIT = 2

# counters layout
C_NUC, C_CYCLE, C_DEP, C_LANDED, C_ABSORBED, C_OVERFLOW, C_ACTIVE, C_STATUS = range(8)
N_COUNTERS = 8

_TRUNC = 45.0  # modes with gamma t beyond this contribute < e^-45


# --------------------------------------------------------------------------
# Lone-particle transition in the sine basis
# --------------------------------------------------------------------------


@nb.njit(cache=True)
def lone_survival(k, j, t, gscale):
    """Probability that a walker started at ``j`` in ``{1..k-1}`` is not yet absorbed after ``t``."""
    s = 0.0
    for m in range(1, k, 2):
        g = gscale * (1.0 - np.cos(m * np.pi / k)) * t
        if g > _TRUNC:
            break
        h = 0.5 * m * np.pi / k
        s += np.sin(m * np.pi * j / k) * (np.cos(h) / np.sin(h)) * np.exp(-g)
    return min(max(2.0 * s / k, 0.0), 1.0)


@nb.njit(cache=True)
def lone_position(k, j, t, gscale, u, work):
    """Sample the position at ``t`` of the walker conditioned on survival, by inversion of ``u``."""
    for y in range(1, k):
        work[y] = 0.0
    for m in range(1, k):
        g = gscale * (1.0 - np.cos(m * np.pi / k)) * t
        if g > _TRUNC:
            break
        c = np.sin(m * np.pi * j / k) * np.exp(-g)
        for y in range(1, k):
            work[y] += c * np.sin(m * np.pi * y / k)
    total = 0.0
    for y in range(1, k):
        if work[y] < 0.0:
            work[y] = 0.0
        total += work[y]
    target = u * total
    acc = 0.0
    for y in range(1, k):
        acc += work[y]
        if acc > target:
            return y
    # rounding: return the last site with positive weight
    for y in range(k - 1, 0, -1):
        if work[y] > 0.0:
            return y
    return j


@nb.njit(cache=True)
def lone_absorption_time(k, j, horizon, level, gscale):
    """Solve ``survival(t) = level`` on ``[0, horizon]`` by bisection."""
    lo, hi = 0.0, horizon
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if lone_survival(k, j, mid, gscale) > level:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# Lattice kernel
# --------------------------------------------------------------------------


@nb.njit(cache=True)
def _remove_at(site, occ, pos, a):
    idx = occ[site] - 1
    last = a - 1
    moved = pos[last]
    pos[idx] = moved
    occ[moved] = idx + 1
    occ[site] = 0
    return a - 1


@nb.njit(cache=True)
def _neighbours(site, isl, L):
    gl = site - 1
    while not isl[gl]:
        gl -= 1
    gr = site + 1
    while not isl[gr]:
        gr += 1
    return gl, gr


@nb.njit(cache=True)
def _record_nucleation(site, clock, cycle, isl, L, counters, nuc_time, nuc_site, nuc_gl, nuc_gr, nuc_gap, nuc_cycle):
    n = counters[C_NUC]
    if n < nuc_site.shape[0]:
        gl, gr = _neighbours(site, isl, L)
        gap = 0
        for s in range(site):
            if isl[s]:
                gap += 1
        nuc_time[n] = clock
        nuc_site[n] = site
        nuc_gl[n] = gl
        nuc_gr[n] = gr
        nuc_gap[n] = gap
        nuc_cycle[n] = cycle
    else:
        counters[C_OVERFLOW] |= 1
    counters[C_NUC] = n + 1
    isl[site] = True


@nb.njit(cache=True)
def _simulate_lattice(
    L, N, lam, jump_scale, isl, occ, pos, counters, clock_arr, stop_nuc, t_max, max_cycles, track_time, st,
    nuc_time, nuc_site, nuc_gl, nuc_gr, nuc_gap, nuc_cycle, cyc_sigma, cyc_eta, cyc_dep, cyc_nuc,
):
    per_dir = jump_scale * N * N / 2.0
    gscale = 2.0 * per_dir
    dep_rate = lam * (L - 1) / N
    a = counters[C_ACTIVE]
    clock = clock_arr[0]
    cycle = counters[C_CYCLE]
    in_cycle = a > 0
    work = np.zeros(L + 1)
    status = OK
    cyc_cap = cyc_sigma.shape[0]
    while True:
        if stop_nuc >= 0 and counters[C_NUC] >= stop_nuc:
            break
        if a == 0:
            if in_cycle:
                in_cycle = False
                if cycle - 1 < cyc_cap:
                    cyc_eta[cycle - 1] = clock
                if max_cycles >= 0 and cycle >= max_cycles:
                    status = CYCLE_LIMIT
                    break
            if dep_rate <= 0.0:
                clock = t_max
                status = HIT_T_MAX
                break
            dt = rng.exponential(st, dep_rate)
            if clock + dt >= t_max:
                clock = t_max
                status = HIT_T_MAX
                break
            clock += dt
            deposit = True
        elif a == 1:
            p = pos[0]
            gl, gr = _neighbours(p, isl, L)
            k = gr - gl
            j = p - gl
            horizon = rng.exponential(st, dep_rate) if dep_rate > 0.0 else np.inf
            capped = False
            if clock + horizon > t_max:
                horizon = t_max - clock
                capped = True
            surv = lone_survival(k, j, horizon, gscale)
            u = rng.uniform(st)
            if u < 1.0 - surv:
                if track_time:
                    clock += lone_absorption_time(k, j, horizon, 1.0 - u, gscale)
                a = _remove_at(p, occ, pos, a)
                counters[C_ABSORBED] += 1
                continue
            y = lone_position(k, j, horizon, gscale, rng.uniform(st), work)
            occ[p] = 0
            pos[0] = gl + y
            occ[gl + y] = 1
            clock += horizon
            if capped:
                status = HIT_T_MAX
                break
            deposit = True
        else:
            total = a * 2.0 * per_dir + dep_rate
            dt = rng.exponential(st, total)
            if track_time and clock + dt > t_max:
                clock = t_max
                status = HIT_T_MAX
                break
            clock += dt
            u = rng.uniform(st) * total
            if u < dep_rate:
                deposit = True
            else:
                deposit = False
                w = (u - dep_rate) / (2.0 * per_dir)
                idx = min(int(w), a - 1)
                step = 1 if w - idx < 0.5 else -1
                p = pos[idx]
                q = p + step
                if isl[q]:
                    a = _remove_at(p, occ, pos, a)
                    counters[C_ABSORBED] += 1
                elif occ[q] > 0:
                    _record_nucleation(q, clock, cycle, isl, L, counters, nuc_time, nuc_site, nuc_gl, nuc_gr,
                                       nuc_gap, nuc_cycle)
                    if cycle - 1 < cyc_cap:
                        cyc_nuc[cycle - 1] += 1
                    a = _remove_at(q, occ, pos, a)
                    a = _remove_at(p, occ, pos, a)
                else:
                    occ[p] = 0
                    pos[idx] = q
                    occ[q] = idx + 1
        if deposit:
            site = 1 + rng.randint(st, L - 1)
            counters[C_DEP] += 1
            if isl[site]:
                counters[C_LANDED] += 1
                if in_cycle and cycle - 1 < cyc_cap:
                    cyc_dep[cycle - 1] += 1
            elif occ[site] > 0:
                if cycle - 1 < cyc_cap:
                    cyc_dep[cycle - 1] += 1
                    cyc_nuc[cycle - 1] += 1
                _record_nucleation(site, clock, cycle, isl, L, counters, nuc_time, nuc_site, nuc_gl, nuc_gr,
                                   nuc_gap, nuc_cycle)
                a = _remove_at(site, occ, pos, a)
            else:
                if a == 0:
                    cycle += 1
                    in_cycle = True
                    if cycle - 1 < cyc_cap:
                        cyc_sigma[cycle - 1] = clock
                        cyc_eta[cycle - 1] = np.nan
                        cyc_dep[cycle - 1] = 0
                        cyc_nuc[cycle - 1] = 0
                    else:
                        counters[C_OVERFLOW] |= 2
                pos[a] = site
                occ[site] = a + 1
                a += 1
                if cycle - 1 < cyc_cap:
                    cyc_dep[cycle - 1] += 1
    counters[C_ACTIVE] = a
    counters[C_CYCLE] = cycle
    counters[C_STATUS] = status
    clock_arr[0] = clock


@nb.njit(parallel=True, cache=True)
def _lattice_replicas(L, N, lam, jump_scale, seed, offset, count, max_cycles, out_flag, out_site, out_gl, out_gr,
                      out_cycle):
    for r in nb.prange(count):
        st = rng.new_state(seed, offset + r)
        isl = np.zeros(L + 1, dtype=np.bool_)
        isl[0] = True
        isl[L] = True
        occ = np.zeros(L + 1, dtype=np.int64)
        pos = np.zeros(L + 1, dtype=np.int64)
        counters = np.zeros(N_COUNTERS, dtype=np.int64)
        clock = np.zeros(1)
        f1 = np.zeros(1)
        i1 = np.zeros(1, dtype=np.int64)
        i2 = np.zeros(1, dtype=np.int64)
        i3 = np.zeros(1, dtype=np.int64)
        i4 = np.zeros(1, dtype=np.int64)
        i5 = np.zeros(1, dtype=np.int64)
        c1 = np.zeros(0)
        c2 = np.zeros(0)
        c3 = np.zeros(0, dtype=np.int64)
        c4 = np.zeros(0, dtype=np.int64)
        _simulate_lattice(L, N, lam, jump_scale, isl, occ, pos, counters, clock, 1, np.inf, max_cycles, False, st,
                          f1, i1, i2, i3, i4, i5, c1, c2, c3, c4)
        out_flag[r] = counters[C_NUC] > 0
        out_site[r] = i1[0]
        out_gl[r] = i2[0]
        out_gr[r] = i3[0]
        out_cycle[r] = counters[C_CYCLE]


# --------------------------------------------------------------------------
# Continuum kernel (approximate)
# --------------------------------------------------------------------------


@nb.njit(cache=True)
def _gap_of(x, isl, n_isl):
    lo, hi = 0, n_isl - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if isl[mid] <= x:
            lo = mid
        else:
            hi = mid
    return lo


@nb.njit(cache=True)
def _insert_island(x, isl, n_isl):
    i = n_isl
    while i > 0 and isl[i - 1] > x:
        isl[i] = isl[i - 1]
        i -= 1
    isl[i] = x
    return n_isl + 1


@nb.njit(cache=True)
def _simulate_continuum(
    length, lam, dt, isl, n_isl_arr, xs, counters, clock_arr, stop_nuc, t_max, max_cycles, st,
    nuc_time, nuc_pos, nuc_gl, nuc_gr, nuc_gap, nuc_cycle, cyc_sigma, cyc_eta, cyc_dep, cyc_nuc,
):
    a = counters[C_ACTIVE]
    n_isl = n_isl_arr[0]
    clock = clock_arr[0]
    cycle = counters[C_CYCLE]
    in_cycle = a > 0
    dep_rate = lam * length
    next_dep = clock + (rng.exponential(st, dep_rate) if dep_rate > 0 else np.inf)
    cyc_cap = cyc_sigma.shape[0]
    old = np.empty(xs.shape[0])
    status = OK
    while True:
        if stop_nuc >= 0 and counters[C_NUC] >= stop_nuc:
            break
        if a == 0:
            if in_cycle:
                in_cycle = False
                if cycle - 1 < cyc_cap:
                    cyc_eta[cycle - 1] = clock
                if max_cycles >= 0 and cycle >= max_cycles:
                    status = CYCLE_LIMIT
                    break
            if next_dep >= t_max:
                clock = t_max
                status = HIT_T_MAX
                break
            clock = next_dep
        else:
            h = min(dt, next_dep - clock, t_max - clock)
            sq = np.sqrt(h)
            for i in range(a):
                old[i] = xs[i]
                xs[i] += sq * rng.normal(st)
            clock += h
            # island absorption, with the bridge correction for excursions inside a step
            i = 0
            while i < a:
                g = _gap_of(old[i], isl, n_isl)
                left, right = isl[g], isl[g + 1]
                hit = xs[i] <= left or xs[i] >= right
                if not hit:
                    pl = np.exp(-2.0 * (old[i] - left) * (xs[i] - left) / h)
                    pr = np.exp(-2.0 * (right - old[i]) * (right - xs[i]) / h)
                    hit = rng.uniform(st) < pl + pr - pl * pr
                if hit:
                    a -= 1
                    xs[i] = xs[a]
                    old[i] = old[a]
                    counters[C_ABSORBED] += 1
                else:
                    i += 1
            # pairwise meetings; the difference of two walkers has twice the variance
            met = True
            while met:
                met = False
                for i in range(a):
                    for j in range(i + 1, a):
                        if _gap_of(old[i], isl, n_isl) != _gap_of(old[j], isl, n_isl):
                            continue
                        d0 = old[i] - old[j]
                        d1 = xs[i] - xs[j]
                        hit = d0 * d1 <= 0.0
                        if not hit:
                            hit = rng.uniform(st) < np.exp(-d0 * d1 / h)
                        if hit:
                            site = 0.5 * (xs[i] + xs[j])
                            n = counters[C_NUC]
                            g = _gap_of(site, isl, n_isl)
                            if n < nuc_pos.shape[0]:
                                nuc_time[n] = clock
                                nuc_pos[n] = site
                                nuc_gl[n] = isl[g]
                                nuc_gr[n] = isl[g + 1]
                                nuc_gap[n] = g + 1
                                nuc_cycle[n] = cycle
                            else:
                                counters[C_OVERFLOW] |= 1
                            counters[C_NUC] = n + 1
                            if cycle - 1 < cyc_cap:
                                cyc_nuc[cycle - 1] += 1
                            n_isl = _insert_island(site, isl, n_isl)
                            # drop j first (higher index), then i
                            a -= 1
                            xs[j] = xs[a]
                            old[j] = old[a]
                            a -= 1
                            xs[i] = xs[a]
                            old[i] = old[a]
                            met = True
                            break
                    if met:
                        break
            if clock >= t_max:
                status = HIT_T_MAX
                break
            if clock < next_dep:
                continue
        # deposition at next_dep
        x = rng.uniform(st) * length
        next_dep = clock + (rng.exponential(st, dep_rate) if dep_rate > 0 else np.inf)
        counters[C_DEP] += 1
        if x <= 0.0:
            counters[C_LANDED] += 1
            continue
        if a == 0:
            cycle += 1
            in_cycle = True
            if cycle - 1 < cyc_cap:
                cyc_sigma[cycle - 1] = clock
                cyc_eta[cycle - 1] = np.nan
                cyc_dep[cycle - 1] = 0
                cyc_nuc[cycle - 1] = 0
            else:
                counters[C_OVERFLOW] |= 2
        if cycle - 1 < cyc_cap:
            cyc_dep[cycle - 1] += 1
        xs[a] = x
        a += 1
    counters[C_ACTIVE] = a
    counters[C_CYCLE] = cycle
    counters[C_STATUS] = status
    clock_arr[0] = clock
    n_isl_arr[0] = n_isl


# --------------------------------------------------------------------------
# Python interface
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeMode:
    """``jump_convention="half"``: rate ``N^2/2`` per direction (generator ``f''/2``);
    ``"double"``: rate ``N^2`` per direction, for sensitivity checks."""

    sites_per_unit: int = 100
    jump_convention: str = "half"

    def __post_init__(self):
        if self.sites_per_unit < 16:
            raise ValueError("lattice mode needs at least 16 sites per unit length")
        if self.jump_convention not in ("half", "double"):
            raise ValueError("jump_convention must be 'half' or 'double'")

    @property
    def jump_scale(self) -> float:
        return 1.0 if self.jump_convention == "half" else 2.0


@dataclass(frozen=True)
class ContinuumMode:
    dt: float = 1e-5


@dataclass(frozen=True)
class ParticleSystemState:
    """Initial condition and parameters. ``islands`` always include ``0`` and ``length``."""

    length: float = 1.0
    rate: float = 0.1
    mode: LatticeMode | ContinuumMode = field(default_factory=LatticeMode)
    clock: float = 0.0
    islands: tuple[float, ...] = ()
    active: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("substrate length must be positive")
        if not self.rate >= 0:
            raise ValueError("deposition rate must be non-negative")
        isl = sorted(set(self.islands) | {0.0, float(self.length)})
        object.__setattr__(self, "islands", tuple(isl))
        if isinstance(self.mode, ContinuumMode):
            if not 0 < self.mode.dt <= 1e-4 * self.length**2:
                raise ValueError("continuum dt must be positive and at most 1e-4 * length^2")
        elif isinstance(self.mode, LatticeMode):
            n = self.mode.sites_per_unit
            for p in tuple(isl) + tuple(self.active):
                if abs(p * n - round(p * n)) > 1e-9:
                    raise ValueError("lattice positions must be multiples of 1/sites_per_unit")
        else:
            raise ValueError("mode must be LatticeMode or ContinuumMode")
        for p in self.active:
            if not 0 < p < self.length or p in isl:
                raise ValueError("active particles must sit strictly inside (0, length) off the islands")
        if len(set(self.active)) != len(self.active):
            raise ValueError("active particles must occupy distinct positions")

    @property
    def lattice_sites(self) -> int:
        return int(round(self.length * self.mode.sites_per_unit))

    @property
    def scale(self) -> float:
        """Distance between lattice sites (1 in continuum mode)."""
        return 1.0 / self.mode.sites_per_unit if isinstance(self.mode, LatticeMode) else 1.0


@dataclass(frozen=True)
class NucleationRecord:
    index: int
    time: float
    location: float
    gap_index: int
    relative_location: float
    cycle: int


@dataclass
class CycleLedger:
    """Per-cycle start, end, deposition and nucleation counts; ``summary`` keeps totals only."""

    sigma: np.ndarray
    eta: np.ndarray
    depositions: np.ndarray
    nucleations: np.ndarray
    cycles: int
    truncated: bool = False

    def rows(self):
        return zip(self.sigma, self.eta, self.depositions, self.nucleations)


@dataclass
class SimulationResult:
    configurations: list[GapConfiguration]
    records: list[NucleationRecord]
    ledger: CycleLedger
    final_state: ParticleSystemState
    depositions: int
    landed_on_islands: int
    absorbed: int
    status: int
    wall_time: float

    @property
    def conserved(self) -> bool:
        n_isl = len(self.records)
        return self.depositions == self.landed_on_islands + self.absorbed + len(self.final_state.active) + 2 * n_isl


def simulate_until(
    params: ParticleSystemState,
    n_nucleations: int | None = None,
    t_max: float | None = None,
    seed: int = 0,
    ledger: str = "full",
    track_time: bool = True,
    max_cycles: int | None = None,
    capacity: int = 100_000,
) -> SimulationResult:
    """Run one realisation until ``n_nucleations`` nucleations or time ``t_max``.

    The output depends only on ``(params, seed)``.
    """
    if n_nucleations is None and t_max is None:
        raise ValueError("give n_nucleations or t_max")
    if params.rate == 0 and t_max is None:
        raise ValueError("t_max is required when the deposition rate is zero")
    if t_max is not None and not track_time:
        raise ValueError("t_max needs track_time")
    if ledger not in ("full", "summary"):
        raise ValueError("ledger must be 'full' or 'summary'")
    stop_nuc = -1 if n_nucleations is None else int(n_nucleations)
    tmax = math.inf if t_max is None else float(t_max)
    mcyc = -1 if max_cycles is None else int(max_cycles)
    ncap = capacity if n_nucleations is None else min(capacity, int(n_nucleations))
    ccap = capacity if ledger == "full" else 0
    st = rng.new_state(np.uint64(seed), np.uint64(0))
    counters = np.zeros(N_COUNTERS, dtype=np.int64)
    clock = np.array([params.clock])
    nuc = dict(
        time=np.full(ncap, np.nan), loc=np.zeros(ncap), gl=np.zeros(ncap), gr=np.zeros(ncap),
        gap=np.zeros(ncap, dtype=np.int64), cycle=np.zeros(ncap, dtype=np.int64),
    )
    cyc = (np.zeros(ccap), np.zeros(ccap), np.zeros(ccap, dtype=np.int64), np.zeros(ccap, dtype=np.int64))
    t0 = time.perf_counter()
    if isinstance(params.mode, LatticeMode):
        n = params.mode.sites_per_unit
        L = params.lattice_sites
        isl = np.zeros(L + 1, dtype=np.bool_)
        for p in params.islands:
            isl[int(round(p * n))] = True
        occ = np.zeros(L + 1, dtype=np.int64)
        pos = np.zeros(L + 1, dtype=np.int64)
        for i, p in enumerate(params.active):
            s = int(round(p * n))
            pos[i] = s
            occ[s] = i + 1
        counters[C_ACTIVE] = len(params.active)
        site = np.zeros(ncap, dtype=np.int64)
        gl = np.zeros(ncap, dtype=np.int64)
        gr = np.zeros(ncap, dtype=np.int64)
        _simulate_lattice(
            L, float(n), float(params.rate), params.mode.jump_scale, isl, occ, pos, counters, clock, stop_nuc, tmax,
            mcyc, track_time, st, nuc["time"], site, gl, gr, nuc["gap"], nuc["cycle"], *cyc,
        )
        nuc["loc"], nuc["gl"], nuc["gr"] = site / n, gl / n, gr / n
        islands = tuple(np.nonzero(isl)[0] / n)
        active = tuple(sorted(pos[: counters[C_ACTIVE]] / n))
    else:
        cap = len(params.islands) + ncap + 2
        isl = np.zeros(cap + capacity)
        isl[: len(params.islands)] = params.islands
        n_isl = np.array([len(params.islands)], dtype=np.int64)
        xs = np.zeros(max(64, 4 * len(params.active) + 64))
        xs[: len(params.active)] = params.active
        counters[C_ACTIVE] = len(params.active)
        _simulate_continuum(
            float(params.length), float(params.rate), float(params.mode.dt), isl, n_isl, xs, counters, clock,
            stop_nuc, tmax, mcyc, st, nuc["time"], nuc["loc"], nuc["gl"], nuc["gr"], nuc["gap"], nuc["cycle"], *cyc,
        )
        islands = tuple(isl[: n_isl[0]])
        active = tuple(sorted(xs[: counters[C_ACTIVE]]))
    wall = time.perf_counter() - t0

    count = min(int(counters[C_NUC]), ncap)
    records = []
    configs = []
    bounds = list(params.islands)
    for i in range(count):
        loc, left, right = nuc["loc"][i], nuc["gl"][i], nuc["gr"][i]
        records.append(
            NucleationRecord(
                index=i + 1,
                time=float(nuc["time"][i]) if track_time else math.nan,
                location=float(loc),
                gap_index=int(nuc["gap"][i]),
                relative_location=float((loc - left) / (right - left)),
                cycle=int(nuc["cycle"][i]),
            )
        )
        bounds.append(float(loc))
        bounds.sort()
        configs.append(GapConfiguration(np.asarray(bounds) / params.length))
    n_cyc = int(counters[C_CYCLE])
    kept = min(n_cyc, ccap)
    led = CycleLedger(
        cyc[0][:kept].copy(), cyc[1][:kept].copy(), cyc[2][:kept].copy(), cyc[3][:kept].copy(), n_cyc,
        truncated=bool(counters[C_OVERFLOW] & 2) or ledger == "summary",
    )
    final = ParticleSystemState(params.length, params.rate, params.mode, float(clock[0]), islands, active)
    return SimulationResult(
        configs, records, led, final, int(counters[C_DEP]), int(counters[C_LANDED]), int(counters[C_ABSORBED]),
        int(counters[C_STATUS]), wall,
    )


@dataclass
class ReplicaResult:
    """Outcome of independent replicas: whether each nucleated and where (relative to its gap)."""

    nucleated: np.ndarray
    relative_location: np.ndarray
    cycles: np.ndarray
    wall_time: float

    @property
    def replicas(self) -> int:
        return int(self.nucleated.size)

    @property
    def probability(self) -> float:
        return float(self.nucleated.mean()) if self.replicas else 0.0

    @property
    def std_error(self) -> float:
        p = self.probability
        return math.sqrt(p * (1 - p) / self.replicas) if self.replicas else 0.0

    @property
    def locations(self) -> np.ndarray:
        return self.relative_location[self.nucleated]

    def histogram(self, bins: int = 50) -> tuple[np.ndarray, np.ndarray]:
        return np.histogram(self.locations, bins=bins, range=(0.0, 1.0))


def _require_lattice(params: ParticleSystemState):
    if not isinstance(params.mode, LatticeMode):
        raise ValueError("replica runs use lattice mode")
    if params.islands != (0.0, float(params.length)) or params.active:
        raise ValueError("replica runs start from an empty substrate")


def run_replicas(
    params: ParticleSystemState, replicas: int, seed: int, max_cycles: int | None = 1, offset: int = 0
) -> ReplicaResult:
    """Independent runs from an empty substrate, each stopped at its first nucleation
    or after ``max_cycles`` cycles (``None`` means no cycle limit)."""
    _require_lattice(params)
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    rng.configure_threads()
    L = params.lattice_sites
    n = float(params.mode.sites_per_unit)
    flag = np.zeros(replicas, dtype=np.bool_)
    site = np.zeros(replicas, dtype=np.int64)
    gl = np.zeros(replicas, dtype=np.int64)
    gr = np.ones(replicas, dtype=np.int64)
    cyc = np.zeros(replicas, dtype=np.int64)
    t0 = time.perf_counter()
    _lattice_replicas(
        L, n, float(params.rate), params.mode.jump_scale, np.uint64(seed), np.uint64(offset), replicas,
        -1 if max_cycles is None else int(max_cycles), flag, site, gl, gr, cyc,
    )
    rel = np.where(flag, (site - gl) / np.maximum(gr - gl, 1), np.nan)
    return ReplicaResult(flag, rel, cyc, time.perf_counter() - t0)


def first_cycle_nucleation(params: ParticleSystemState, replicas: int, seed: int) -> ReplicaResult:
    """Estimate the probability that a nucleation happens in the first cycle, and
    collect its relative location."""
    return run_replicas(params, replicas, seed, max_cycles=1)


def conditional_first_cycle(
    params: ParticleSystemState, samples: int, seed: int, batch: int = 200_000, max_replicas: int = 10**9
) -> tuple[np.ndarray, ReplicaResult]:
    """Relative locations of the first ``samples`` nucleating first cycles, in replica order."""
    parts = []
    results = []
    got = 0
    offset = 0
    while got < samples:
        if offset >= max_replicas:
            raise RuntimeError(f"only {got} nucleating cycles in {offset} replicas")
        res = run_replicas(params, batch, seed, max_cycles=1, offset=offset)
        results.append(res)
        loc = res.locations
        parts.append(loc)
        got += loc.size
        offset += batch
    locs = np.concatenate(parts)[:samples]
    merged = ReplicaResult(
        np.concatenate([r.nucleated for r in results]),
        np.concatenate([r.relative_location for r in results]),
        np.concatenate([r.cycles for r in results]),
        sum(r.wall_time for r in results),
    )
    return locs, merged


@dataclass
class ScalingReport:
    length: float
    rate: float
    scaled_rate: float
    probability: float
    scaled_probability: float
    difference: float
    pooled_std_error: float
    ks_statistic: float
    ks_critical_1pct: float
    samples: int

    @property
    def probability_consistent(self) -> bool:
        return abs(self.difference) <= 3 * self.pooled_std_error

    @property
    def locations_consistent(self) -> bool:
        return self.ks_statistic < self.ks_critical_1pct


def scaling_check(
    length: float,
    rate: float,
    replicas: int,
    seed: int,
    sites_per_unit: int = 100,
    ks_samples: int = 10_000,
) -> ScalingReport:
    """Compare first-cycle nucleation on ``[0, length]`` at ``rate`` with ``[0, 1]`` at
    ``length^3 * rate``, using the same total number of lattice sites."""
    from .stats import ks_critical, ks_two_sample

    if not (length > 0 and rate > 0):
        raise ValueError("length and rate must be positive")
    a = ParticleSystemState(length, rate, LatticeMode(sites_per_unit))
    n_b = int(round(length * sites_per_unit))
    b = ParticleSystemState(1.0, length**3 * rate, LatticeMode(n_b))
    ra = first_cycle_nucleation(a, replicas, seed * 2 + 0)
    rb = first_cycle_nucleation(b, replicas, seed * 2 + 1)
    pooled = (ra.nucleated.sum() + rb.nucleated.sum()) / (2 * replicas)
    se = math.sqrt(max(pooled * (1 - pooled), 0.0) * 2 / replicas)
    if ks_samples > 0:
        la, _ = conditional_first_cycle(a, ks_samples, seed * 2 + 0)
        lb, _ = conditional_first_cycle(b, ks_samples, seed * 2 + 1)
        ks = ks_two_sample(la, lb)
        crit = ks_critical(0.01, ks_samples, ks_samples)
    else:
        ks, crit = math.nan, math.nan
    return ScalingReport(
        length, rate, length**3 * rate, ra.probability, rb.probability, ra.probability - rb.probability, se, ks,
        crit, ks_samples,
    )
