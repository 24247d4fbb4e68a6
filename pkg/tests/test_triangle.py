import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import integrate

from nucleate import series, triangle as T

interior = st.floats(0.02, 0.98)


def test_density_antisymmetry_on_grid():
    rng = np.random.default_rng(1)
    x, y, z = rng.uniform(0.01, 0.99, (3, 1000))
    a = T.exit_density(x, y, z)
    b = T.exit_density(y, x, z)
    assert np.max(np.abs(a + b)) < 2e-12


def test_density_closed_matches_plain_series():
    rng = np.random.default_rng(2)
    for x, y, z in rng.uniform(0.05, 0.95, (40, 3)):
        assert T.exit_density(x, y, z) == pytest.approx(T.exit_density(x, y, z, method="series"), abs=1e-11)


def test_density_integrates_to_measure():
    # density route (cosine sums) against the separately integrated measure route (arctan sums)
    for u, v in [(0.6, 0.2), (0.9, 0.85), (0.3, 0.05)]:
        x, y = (u + v) / 2, (u - v) / 2
        for a, b in [(0.0, 1.0), (0.2, 0.45)]:
            num = integrate.quad(lambda z: T.exit_density(x, y, z), a, b, epsabs=1e-12, limit=200)[0]
            assert num == pytest.approx(T.exit_measure_array(u, v, ((a, b),)), abs=1e-9)


def test_measure_closed_matches_series():
    rng = np.random.default_rng(3)
    for u, v in rng.uniform(0.05, 0.95, (30, 2)):
        tgt = ((0.1, 0.35), (0.5, 0.8))
        assert T.exit_measure_array(u, v, tgt) == pytest.approx(T.exit_measure_array(u, v, tgt, "series"), abs=1e-11)


@settings(max_examples=80, deadline=None)
@given(interior, interior, st.floats(0.0, 1.0))
def test_measure_additive_over_targets(u, v, c):
    # off the diagonal the shared endpoint carries no mass
    assume(u != v)
    whole = T.exit_measure_array(u, v, ((0.0, 1.0),))
    parts = T.exit_measure_array(u, v, ((0.0, c),)) + T.exit_measure_array(u, v, ((c, 1.0),))
    assert parts == pytest.approx(whole, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(interior, interior)
def test_measure_symmetric_and_bounded(u, v):
    h = T.exit_measure_array(u, v)
    assert h == T.exit_measure_array(v, u)
    assert 0.0 <= h <= 1.0
    # reflection through the other diagonal maps the target [0, 1] to itself
    assert h == pytest.approx(T.exit_measure_array(1 - v, 1 - u), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.15, 0.85), st.floats(0.15, 0.85))
def test_mean_value_property(u, v):
    hi, lo = max(u, v), min(u, v)
    # disc inside the triangle {lo <= hi}
    r = 0.5 * min((hi - lo) / math.sqrt(2), 1 - hi, lo)
    assume(r > 1e-3)
    th = 2 * math.pi * np.arange(64) / 64
    ring = T.exit_measure_array(hi + r * np.cos(th), lo + r * np.sin(th), ((0.2, 0.7),))
    assert ring.mean() == pytest.approx(T.exit_measure_array(hi, lo, ((0.2, 0.7),)), abs=1e-10)


def test_boundary_values():
    assert T.exit_measure_array(0.4, 0.4, ((0.3, 0.5),)) == 1.0
    assert T.exit_measure_array(0.6, 0.6, ((0.3, 0.5),)) == 0.0
    assert T.exit_measure_array(1.0, 0.3) == 0.0
    assert T.exit_measure_array(0.7, 0.0) == 0.0
    # continuity towards the diagonal
    assert T.exit_measure_array(0.5 + 1e-7, 0.5 - 1e-7) == pytest.approx(1.0, abs=1e-5)


def test_query_validation():
    with pytest.raises(ValueError):
        T.TriangleExitQuery((1.2, 0.3))
    with pytest.raises(ValueError):
        T.TriangleExitQuery((0.5, 0.3), ((0.2, 0.6), (0.5, 0.9)))
    with pytest.raises(ValueError):
        T.TriangleExitQuery((0.5, 0.3), ((0.6, 0.2),))
    with pytest.raises(ValueError):
        T.TriangleExitQuery((0.5, 0.3), tolerance=0)


def test_corner_starts_raise():
    with pytest.raises(T.SlowConvergenceError):
        T.exit_measure(T.TriangleExitQuery((1e-5, 2e-5)))
    with pytest.raises(T.SlowConvergenceError):
        T.exit_density(1e-5, 1e-5, 0.5)


def test_smith_watson_routes():
    fast = T.smith_watson("fast")
    assert abs(fast - 0.41063) < 5e-6
    assert abs(fast - T.smith_watson("slow")) < 1e-8
    assert abs(fast - T.smith_watson_quadrature()) < 1e-4
    with pytest.raises(ValueError):
        T.smith_watson("other")


def test_heat_kernel_routes_agree():
    rng = np.random.default_rng(4)
    t = rng.uniform(0.005, 2.0, 1000)
    x, y = rng.uniform(0, 1, (2, 1000))
    diff = [abs(float(T.heat_kernel_array(a, b, c, "images")) - float(T.heat_kernel_array(a, b, c, "spectral")))
            for a, b, c in zip(t, x, y)]
    assert max(diff) < 1e-10


def test_heat_kernel_properties():
    assert T.heat_kernel(T.HeatKernelQuery(0.1, 0.0, 0.4)) == 0.0
    assert T.heat_kernel(T.HeatKernelQuery(0.1, 0.3, 0.6)) == pytest.approx(T.heat_kernel(T.HeatKernelQuery(0.1, 0.6, 0.3)))
    # survival from 1/2 after time t by integrating the kernel; long-time decay rate pi^2/2
    t = 3.0
    surv = integrate.quad(lambda y: T.heat_kernel(T.HeatKernelQuery(t, 0.5, y)), 0, 1)[0]
    assert surv == pytest.approx(4 / math.pi * math.exp(-math.pi**2 * t / 2), rel=1e-6)
    with pytest.raises(ValueError):
        T.HeatKernelQuery(0.0, 0.5, 0.5)
    with pytest.raises(ValueError):
        T.HeatKernelQuery(1.0, 0.5, 0.5, "fourier")


@pytest.mark.parametrize("y", [0.0, 0.1, 0.3, 0.5, 0.9])
def test_occupation_quadrature(y):
    exact, quad = T.expected_occupation(y, verify=True)
    assert exact == y * (1 - y)
    assert abs(quad - exact) < 1e-6


def test_walk_on_spheres_consistent():
    u, v = 0.7, 0.25
    h = T.exit_measure_array(u, v, ((0.2, 0.6),))
    m, se = T.mc_exit_oracle(u, v, ((0.2, 0.6),), paths=100_000, seed=11)
    assert abs(m - h) < 4 * se
    assert T.mc_exit_oracle(u, v, paths=1000, seed=3) == T.mc_exit_oracle(u, v, paths=1000, seed=3)


def test_phi1_routes():
    tgt = ((0.2, 0.5),)
    assert T.phi1() == pytest.approx(series.MU, abs=1e-12)
    exact = T.phi1(tgt)
    m, se = T.phi1(tgt, "direct_mc", samples=200_000, seed=5)
    assert abs(m - exact) < 4 * se
