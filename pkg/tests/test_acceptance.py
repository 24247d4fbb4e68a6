"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import os
import subprocess
import sys
import time

import numpy as np

from nucleate import gaplaw, particles, series, splitting, triangle
from nucleate.laws import SplittingLaw
from nucleate.stats import ks_critical, ks_one_sample


def test_c01_normaliser(criterion):
    t0 = time.perf_counter()
    m3 = series.mu(3)[0]
    slow = series.mu_slow(100_000)
    dt = time.perf_counter() - t0
    ok = abs(m3 - 0.078268954659) < 5e-10 and abs(slow - series.MU) < 1e-8 and dt < 1.0
    criterion(1, "mu", ok, f"mu(3)={m3:.13f} |slow-mu|={abs(slow - series.MU):.1e} t={dt:.2f}s")


def test_c02_moments(criterion):
    t0 = time.perf_counter()
    m2, m4 = series.phi0_moment(2), series.phi0_moment(4)
    quad = max(abs(series.phi0_moment(k) - series.phi0_moment(k, "quadrature")) for k in (1, 2, 3, 4))
    fit = series.beta_fit_mismatch()
    dt = time.perf_counter() - t0
    ok = (abs(m2 - 0.2870590372) < 1e-9 and abs(m4 - 0.1212564646) < 1e-9 and quad < 1e-8
          and fit["mismatch"] > 5e-6 and dt < 1.0)
    criterion(2, "moments", ok,
              f"m2={m2:.11f} m4={m4:.11f} closed-vs-quad={quad:.1e} beta mismatch={fit['mismatch']:.2e} t={dt:.2f}s")


def test_c03_smith_watson(criterion):
    t0 = time.perf_counter()
    fast, slow = triangle.smith_watson("fast"), triangle.smith_watson("slow")
    quad = triangle.smith_watson_quadrature()
    dt = time.perf_counter() - t0
    ok = abs(fast - 0.41063) < 5e-6 and abs(fast - slow) < 1e-8 and abs(fast - quad) < 1e-4 and dt < 60
    criterion(3, "Smith-Watson", ok,
              f"fast={fast:.10f} |fast-slow|={abs(fast - slow):.1e} |fast-quad|={abs(fast - quad):.1e} t={dt:.2f}s")


def test_c04_density_accuracy(criterion):
    t0 = time.perf_counter()
    x = np.linspace(0, 1, 10_000)
    diff = float(np.max(np.abs(series.phi0(x, series.SeriesTruncation(9, 5))
                               - series.phi0(x, series.SeriesTruncation(15, 9)))))
    half = float(series.phi0(0.5))
    ratio = float(series.phi0(1e-3)) / (3e-6 / series.MU)
    dt = time.perf_counter() - t0
    ok = diff < 1e-10 and abs(half - 1.8269) < 5e-4 and 0.99 <= ratio <= 1.01 and dt < 5
    criterion(4, "density accuracy", ok, f"sup diff={diff:.1e} phi0(1/2)={half:.6f} ratio={ratio:.4f} t={dt:.2f}s")


def test_c05_heat_kernel(criterion):
    t0 = time.perf_counter()
    xs = np.linspace(0, 1, 41)
    X, Y = np.meshgrid(xs, xs)
    worst = 0.0
    for t in np.geomspace(1e-3, 2.0, 25):
        a = triangle.heat_kernel_array(t, X, Y, "images")
        b = triangle.heat_kernel_array(t, X, Y, "spectral")
        worst = max(worst, float(np.max(np.abs(a - b))))
    occ = max(abs(q - e) for e, q in (triangle.expected_occupation(y, verify=True) for y in np.linspace(0, 1, 11)))
    dt = time.perf_counter() - t0
    ok = worst < 1e-10 and occ < 1e-6 and dt < 60
    criterion(5, "heat kernel", ok, f"images-vs-spectral={worst:.1e} occupation={occ:.1e} t={dt:.1f}s")


def test_c06_triangle_oracle(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    target = ((0.15, 0.45), (0.6, 0.9))
    worst = 0.0
    for i in range(10):
        while True:
            u, v = rng.uniform(0.05, 0.95, 2)
            if u - v > 0.05:
                break
        h = float(triangle.exit_measure_array(u, v, target))
        m, se = triangle.mc_exit_oracle(u, v, target, paths=100_000, seed=100 + i)
        worst = max(worst, abs(m - h) / se)
    dt = time.perf_counter() - t0
    criterion(6, "triangle oracle", worst < 3 and dt < 300, f"max |MC-series|/SE over 10 points={worst:.2f} t={dt:.1f}s")


def test_c07_first_nucleation_histogram(criterion):
    t0 = time.perf_counter()
    params = particles.ParticleSystemState(1.0, 0.1, particles.LatticeMode(100))
    res = particles.run_replicas(params, 100_000, seed=7, max_cycles=None)
    ks = ks_one_sample(res.locations, SplittingLaw.phi0().table.cdf)
    dt = time.perf_counter() - t0
    criterion(7, "first-nucleation location law", ks < 0.02 and dt < 600,
              f"KS={ks:.4f} over {res.locations.size} nucleations t={dt:.1f}s")


def test_c08_small_rate(criterion):
    t0 = time.perf_counter()
    lam = 0.01
    res = particles.first_cycle_nucleation(particles.ParticleSystemState(1.0, lam, particles.LatticeMode(100)),
                                           1_000_000, seed=8)
    ratio = res.probability / (lam * series.MU)
    dt = time.perf_counter() - t0
    criterion(8, "small-rate nucleation", abs(ratio - 1) <= 0.2 and dt < 600,
              f"p/(lambda mu)={ratio:.4f} +- {res.std_error / (lam * series.MU):.4f} t={dt:.1f}s")


def test_c09_scaling(criterion):
    t0 = time.perf_counter()
    rep = particles.scaling_check(2.0, 0.1, 200_000, seed=9)
    dt = time.perf_counter() - t0
    ok = rep.probability_consistent and rep.locations_consistent and dt < 300
    criterion(9, "scaling", ok,
              f"diff={rep.difference:.2e} (3 SE={3 * rep.pooled_std_error:.2e}) KS={rep.ks_statistic:.4f} "
              f"(1% crit={rep.ks_critical_1pct:.4f}) t={dt:.1f}s")


def test_c10_uniform_gap_law(criterion):
    t0 = time.perf_counter()
    x = np.linspace(0, 6, 6001)
    parts, ok = [], True
    for alpha in (1.0, 2.0, 4.0):
        sol, _ = gaplaw.solve_gap_law(SplittingLaw.uniform(alpha))
        cf = gaplaw.uniform_closed_form(alpha)
        e_f = float(np.max(np.abs(sol.fz(x) - cf["f_Z"](x))))
        e_q = float(np.max(np.abs(np.interp(x, sol.r, sol.q, right=0.0) - cf["q"](x))))
        e_g = float(np.max(np.abs(sol.g_at(x) - cf["g"](x))))
        e_rho = abs(sol.rho - cf["rho"])
        ok &= max(e_f, e_q, e_g) < 1e-3 and e_rho < 1e-4
        parts.append(f"a={alpha:g}: fZ {e_f:.1e} q {e_q:.1e} g {e_g:.1e} rho {e_rho:.1e}")
    dt = time.perf_counter() - t0
    criterion(10, "uniform gap law", ok and dt < 60, "; ".join(parts) + f" t={dt:.1f}s")


def test_c11_phi0_gap_law(criterion):
    t0 = time.perf_counter()
    sol, inputs = gaplaw.solve_gap_law(SplittingLaw.phi0(4.0))
    chain = gaplaw.mc_fixed_point_oracle(inputs, 1_000_000 + 1000, burn_in=1000, seed=11)
    ks = ks_one_sample(chain.q_root, sol.q_cdf)
    fit = gaplaw.tail_fit(sol)
    theta_rel = abs(fit.theta_hat / sol.rho**-4 - 1)
    dt = time.perf_counter() - t0
    ok = ks < 0.02 and abs(fit.beta_hat - 2) <= 0.1 and theta_rel <= 0.05 and dt < 300
    criterion(11, "phi0 gap law", ok,
              f"chain KS={ks:.2e} ({chain.q_root.size} records) beta_hat={fit.beta_hat:.4f} "
              f"theta_hat={fit.theta_hat:.6f} rho^-4={sol.rho**-4:.6f} t={dt:.1f}s")


def test_c12_splitting_end_to_end(criterion):
    t0 = time.perf_counter()
    law = SplittingLaw.phi0(4.0)
    sol, _ = gaplaw.solve_gap_law(law)
    ks_all, unif_all = [], []
    for seed in range(20):
        snap = splitting.run_splitting(law, 5000, seed=seed, checkpoints=[5000]).trace[-1]
        ks_all.append(snap.ks_against(sol.gap_cdf))
        unif_all.append(snap.uniformity_error)
    dt = time.perf_counter() - t0
    ok = max(ks_all) < 0.05 and max(unif_all) < 0.05 and dt < 300
    criterion(12, "splitting vs solver", ok,
              f"max KS={max(ks_all):.4f} max sup|C_n/n-x|={max(unif_all):.4f} over 20 seeds t={dt:.1f}s")


_SUITES = [
    ["simulate", "--lambda", "0.1", "--first-nucleation", "--replicas", "5000", "--seed", "13"],
    ["simulate", "--lambda", "10", "--lattice", "100", "--nucleations", "20", "--replicas", "8", "--seed", "13"],
    ["split", "--steps", "2000", "--seed", "13", "--compare-gaplaw"],
]


def _csv_bytes(root, threads):
    env = dict(os.environ, NUMBA_NUM_THREADS="4", NUCLEATE_THREADS=threads)
    out = {}
    for i, argv in enumerate(_SUITES):
        d = root / f"{threads}" / str(i)
        subprocess.run([sys.executable, "-m", "nucleate.cli", *argv, "--out", str(d)], env=env, check=True,
                       capture_output=True)
        for f in sorted(d.glob("*.csv")):
            out[f"{i}/{f.name}"] = f.read_bytes()
    return out


def test_c13_determinism(criterion, tmp_path):
    t0 = time.perf_counter()
    runs = [_csv_bytes(tmp_path / "a", "1"), _csv_bytes(tmp_path / "b", "4"), _csv_bytes(tmp_path / "c", "4")]
    same = all(r == runs[0] for r in runs[1:]) and len(runs[0]) >= 7
    # the in-process Monte Carlo oracles are seeded the same way
    inputs = gaplaw.build_inputs(SplittingLaw.phi0())
    a = gaplaw.mc_fixed_point_oracle(inputs, 20_000, seed=3).q_root
    b = gaplaw.mc_fixed_point_oracle(inputs, 20_000, seed=3).q_root
    same &= a.tobytes() == b.tobytes()
    dt = time.perf_counter() - t0
    criterion(13, "determinism", same, f"{len(runs[0])} CSVs identical across NUCLEATE_THREADS=1,4,4 t={dt:.1f}s")
