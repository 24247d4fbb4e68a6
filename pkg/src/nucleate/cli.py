"""Command-line front end.

Exit codes: 0 success, 1 domain error, 2 validation failure, 64 usage error.
Every subcommand accepts ``--config file.json``; values given as flags win over
the file, and the file wins over built-in defaults. Runs that write to ``--out``
also write ``manifest.json`` with the resolved parameters and output digests.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_FAILED = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        kwargs.setdefault("add_help", False)
        super().__init__(*args, **kwargs)
        self.add_argument("--help", action="help", help="show this message and exit")

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


DEFAULTS = {
    "density": {"x": None, "k": 9, "m": 5, "out": None},
    "moments": {"out": None},
    "triangle": {"u": None, "v": None, "target": "0,1", "method": "closed", "mc_paths": 0, "seed": 0},
    "simulate": {
        "lambda": None, "length": 1.0, "lattice": 100, "continuum_dt": None, "nucleations": None, "t_max": None,
        "replicas": 1, "seed": 0, "out": None, "first_nucleation": False, "bins": 50, "jump_convention": "half",
    },
    "split": {
        "alpha": 4.0, "density": "phi0", "steps": None, "seed": 0, "out": None, "grid_points": 101,
        "compare_gaplaw": False,
    },
    "gaplaw": {"alpha": 4.0, "density": "phi0", "rmax": 12.0, "grid": 2048, "tol": 1e-10, "max_iter": 200, "out": None},
    "validate": {"suite": "all", "tol": 1e-10},
}

REQUIRED = {
    "density": ("x",),
    "triangle": ("u", "v"),
    "simulate": ("lambda",),
    "split": ("steps",),
}


def _build_parser() -> _Parser:
    p = _Parser(prog="nucleate", description="Nucleation gap statistics toolkit.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    S = argparse.SUPPRESS

    def cmd(name, help_):
        c = sub.add_parser(name, help=help_, description=help_)
        c.add_argument("--config", default=S, help="JSON file of parameters (flags take precedence)")
        return c

    c = cmd("density", "evaluate the limiting splitting density")
    c.add_argument("--x", type=float, default=S)
    c.add_argument("--k", type=int, default=S, help="exponential-sum truncation")
    c.add_argument("--m", type=int, default=S, help="Bernoulli truncation (odd)")
    c.add_argument("--out", default=S, help="write the quantile table here")

    c = cmd("moments", "moments of the limiting density and the Beta comparison")
    c.add_argument("--out", default=S)

    c = cmd("triangle", "exit probability of planar Brownian motion from the triangle")
    c.add_argument("--u", type=float, default=S)
    c.add_argument("--v", type=float, default=S)
    c.add_argument("--target", default=S, help="intervals a,b[;c,d]... on the hypotenuse")
    c.add_argument("--method", choices=("closed", "series"), default=S)
    c.add_argument("--mc-paths", dest="mc_paths", type=int, default=S, help="also run walk-on-spheres")
    c.add_argument("--seed", type=int, default=S)

    c = cmd("simulate", "particle deposition and nucleation on an interval")
    c.add_argument("--lambda", dest="lambda", type=float, default=S)
    c.add_argument("--length", type=float, default=S)
    c.add_argument("--lattice", type=int, default=S, help="sites per unit length")
    c.add_argument("--continuum-dt", dest="continuum_dt", type=float, default=S)
    c.add_argument("--nucleations", type=int, default=S)
    c.add_argument("--t-max", dest="t_max", type=float, default=S)
    c.add_argument("--replicas", type=int, default=S)
    c.add_argument("--seed", type=int, default=S)
    c.add_argument("--out", default=S)
    c.add_argument("--first-nucleation", dest="first_nucleation", action="store_true", default=S,
                   help="replica mode: record only the first nucleation of each replica")
    c.add_argument("--bins", type=int, default=S)
    c.add_argument("--jump-convention", dest="jump_convention", choices=("half", "double"), default=S)

    c = cmd("split", "interval splitting process")
    c.add_argument("--alpha", type=float, default=S)
    c.add_argument("--density", default=S, help="uniform | beta:<shape> | phi0")
    c.add_argument("--steps", type=int, default=S)
    c.add_argument("--seed", type=int, default=S)
    c.add_argument("--out", default=S)
    c.add_argument("--grid-points", dest="grid_points", type=int, default=S)
    c.add_argument("--compare-gaplaw", dest="compare_gaplaw", action="store_true", default=S)

    c = cmd("gaplaw", "solve for the limiting normalized gap density")
    c.add_argument("--alpha", type=float, default=S)
    c.add_argument("--density", default=S, help="uniform | beta:<shape> | phi0")
    c.add_argument("--rmax", type=float, default=S)
    c.add_argument("--grid", type=int, default=S, help="nodes on [0, rmax]")
    c.add_argument("--tol", type=float, default=S)
    c.add_argument("--max-iter", dest="max_iter", type=int, default=S)
    c.add_argument("--out", default=S)

    c = cmd("validate", "run built-in numerical checks")
    c.add_argument("--suite", choices=("identities", "constants", "oracles", "all"), default=S)
    c.add_argument("--tol", type=float, default=S)
    return p


def resolve(command: str, given: dict) -> dict:
    """Merge defaults < config file < flags."""
    params = dict(DEFAULTS[command])
    cfg_path = given.pop("config", None)
    if cfg_path:
        try:
            cfg = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {cfg_path}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        for k, v in cfg.items():
            key = k.replace("-", "_")
            if key not in params:
                raise UsageError(f"unknown config key {k!r} for {command}")
            params[key] = v
    params.update(given)
    for k in REQUIRED.get(command, ()):
        if params.get(k) is None:
            raise UsageError(f"{command}: --{k.replace('_', '-')} is required")
    return params


def parse_density(text: str, alpha: float):
    from .laws import SplittingLaw

    text = str(text).strip()
    if text == "uniform":
        return SplittingLaw.uniform(alpha)
    if text == "phi0":
        return SplittingLaw.phi0(alpha)
    if text.startswith("beta:"):
        return SplittingLaw.beta_law(float(text[5:]), alpha)
    raise ValueError(f"unknown density {text!r}; use uniform, beta:<shape> or phi0")


def replica_seed(seed: int, replica: int) -> int:
    """Per-replica seed: SplitMix64 hash of ``(seed, replica)``, so replica ``r`` can be rerun alone."""
    from .rng import stream_key

    return int(stream_key(np.uint64(seed), np.uint64(replica)))


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def _density(p, out):
    from . import series
    from .laws import SplittingLaw

    x = float(p["x"])
    if not 0 <= x <= 1:
        raise ValueError("--x must lie in [0, 1]")
    trunc = series.SeriesTruncation(int(p["k"]), int(p["m"]))
    value = float(series.phi0(x, trunc))
    out.write(f"phi0({x:.12g}) = {value:.12f}\n")
    out.write(f"truncation bound = {series.phi0_error_bound(trunc):.3e}\n")
    if p["out"]:
        d = Path(p["out"])
        table = SplittingLaw.phi0().table
        from .io import RunManifest, write_csv

        man = RunManifest("density", p, None)
        man.add_output(write_csv(d / "phi0_table.csv", ("x", "density", "cdf"), table.to_csv_rows()))
        man.write(d)
    return EXIT_OK


def _moments(p, out):
    from . import series

    rows = []
    for k in range(1, 5):
        closed = series.phi0_moment(k, "closed")
        quad = series.phi0_moment(k, "quadrature")
        rows.append((k, closed, quad))
        out.write(f"m{k}: closed {closed:.14f}  quadrature {quad:.14f}  diff {abs(closed - quad):.1e}\n")
    fit = series.beta_fit_mismatch()
    out.write(
        f"beta fit: shape {fit['beta']:.10f}  m4 {fit['m4']:.10f}  beta m4 {fit['m4_beta']:.10f}  "
        f"mismatch {fit['mismatch']:.3e}\n"
    )
    if p["out"]:
        from .io import RunManifest, write_csv, write_json

        d = Path(p["out"])
        man = RunManifest("moments", p, None)
        man.add_output(write_csv(d / "moments.csv", ("order", "closed", "quadrature"), rows))
        man.add_output(write_json(d / "beta_fit.json", fit))
        man.write(d)
    return EXIT_OK


def _triangle(p, out):
    from . import triangle

    target = triangle.normalize_target(_parse_target(p["target"]))
    q = triangle.TriangleExitQuery((float(p["u"]), float(p["v"])), target)
    h = triangle.exit_measure(q, method=p["method"])
    out.write(f"H = {h:.15f}\n")
    if int(p["mc_paths"]) > 0:
        m, se = triangle.mc_exit_oracle(float(p["u"]), float(p["v"]), target, int(p["mc_paths"]), seed=int(p["seed"]))
        out.write(f"walk-on-spheres = {m:.6f} +- {se:.6f}  (z = {(m - h) / se if se > 0 else 0.0:+.2f})\n")
    return EXIT_OK


def _parse_target(text):
    try:
        parts = [tuple(float(v) for v in seg.split(",")) for seg in str(text).split(";") if seg.strip()]
    except ValueError as exc:
        raise ValueError(f"bad --target {text!r}") from exc
    if not parts or any(len(s) != 2 for s in parts):
        raise ValueError(f"bad --target {text!r}; expected a,b[;c,d]...")
    return parts


def _simulate(p, out):
    from . import particles, rng, series
    from .io import RunManifest, write_csv
    from .laws import SplittingLaw
    from .stats import ks_one_sample

    if p["out"] is None:
        raise UsageError("simulate: --out is required")
    d = Path(p["out"])
    lam = float(p["lambda"])
    if p["continuum_dt"] is not None:
        mode = particles.ContinuumMode(float(p["continuum_dt"]))
    else:
        mode = particles.LatticeMode(int(p["lattice"]), p["jump_convention"])
    params = particles.ParticleSystemState(float(p["length"]), lam, mode)
    replicas = int(p["replicas"])
    if replicas < 1:
        raise ValueError("--replicas must be >= 1")
    seed = int(p["seed"])
    p = dict(p, threads=rng.configure_threads())
    man = RunManifest("simulate", p, seed)

    if p["first_nucleation"]:
        if lam <= 0:
            raise ValueError("first-nucleation mode needs a positive deposition rate")
        res = particles.run_replicas(params, replicas, seed, max_cycles=None)
        man.add_output(
            write_csv(
                d / "first_nucleation.csv",
                ("replica", "nucleated", "relative_location", "cycles"),
                zip(range(replicas), res.nucleated, res.relative_location, res.cycles),
            )
        )
        bins = int(p["bins"])
        counts, edges = res.histogram(bins)
        width = np.diff(edges)
        total = max(int(counts.sum()), 1)
        centers = 0.5 * (edges[1:] + edges[:-1])
        rows = zip(edges[:-1], edges[1:], centers, counts / (total * width), series.phi0(centers))
        hist = write_csv(d / "histogram.csv", ("bin_left", "bin_right", "bin_center", "density", "phi0"), rows)
        man.add_output(hist)
        from .plotting import emit_plot_script

        gp = d / "histogram.gp"
        gp.write_text(emit_plot_script(hist, "histogram"))
        man.add_output(gp)
        locs = res.locations
        if locs.size:
            table = SplittingLaw.phi0().table
            out.write(f"nucleated {locs.size}/{replicas}; KS to limit law = {ks_one_sample(locs, table.cdf):.4f}\n")
        else:
            out.write(f"nucleated 0/{replicas}\n")
        man.write(d)
        return EXIT_OK

    if p["nucleations"] is None and p["t_max"] is None:
        raise UsageError("simulate: give --nucleations or --t-max")
    events, summary = [], []
    for r in range(replicas):
        res = particles.simulate_until(
            params, n_nucleations=p["nucleations"], t_max=p["t_max"], seed=replica_seed(seed, r), ledger="summary"
        )
        for rec in res.records:
            events.append((r, rec.index, rec.time, rec.location, rec.gap_index, rec.relative_location, rec.cycle))
        summary.append(
            (r, len(res.records), res.depositions, res.landed_on_islands, res.absorbed, res.ledger.cycles,
             res.final_state.clock, res.status, res.conserved)
        )
    man.add_output(
        write_csv(d / "events.csv", ("replica", "index", "time", "location", "gap_index", "relative_location", "cycle"),
                  events)
    )
    man.add_output(
        write_csv(d / "summary.csv", ("replica", "nucleations", "depositions", "landed_on_islands", "absorbed", "cycles",
                                      "clock", "status", "conserved"), summary)
    )
    man.write(d)
    out.write(f"{len(events)} nucleation events over {replicas} replica(s)\n")
    return EXIT_OK


def _split(p, out):
    from . import splitting
    from .io import RunManifest, write_csv

    if p["out"] is None:
        raise UsageError("split: --out is required")
    d = Path(p["out"])
    law = parse_density(p["density"], float(p["alpha"]))
    steps = int(p["steps"])
    run = splitting.run_splitting(law, steps, seed=int(p["seed"]), grid_points=int(p["grid_points"]))
    final = run.trace[-1]
    man = RunManifest("split", p, int(p["seed"]))
    cdf = None
    if p["compare_gaplaw"]:
        from . import gaplaw

        sol, _ = gaplaw.solve_gap_law(law)
        cdf = sol.gap_cdf
    xs = final.normalized_gaps
    ecdf = np.arange(1, xs.size + 1) / xs.size
    if cdf is None:
        gaps = write_csv(d / "gaps.csv", ("x", "ecdf"), zip(xs, ecdf))
    else:
        gaps = write_csv(d / "gaps.csv", ("x", "ecdf", "G"), zip(xs, ecdf, cdf(xs)))
        from .plotting import emit_plot_script

        gp = d / "gaps.gp"
        gp.write_text(emit_plot_script(gaps, "ecdf"))
        man.add_output(gp)
    man.add_output(gaps)
    man.add_output(
        write_csv(d / "counting.csv", ("x", "count", "count_over_n"),
                  zip(final.grid, final.counting, final.counting / final.n))
    )
    trace_rows = []
    for st in run.trace:
        row = [st.n, st.max_gap, st.uniformity_error]
        if cdf is not None:
            row.append(st.ks_against(cdf))
        trace_rows.append(row)
    header = ("n", "max_gap", "uniformity_error") + (("ks",) if cdf is not None else ())
    man.add_output(write_csv(d / "trace.csv", header, trace_rows))
    man.write(d)
    msg = f"n = {final.n}: max gap {final.max_gap:.4g}, sup|C_n/n - x| = {final.uniformity_error:.4f}"
    if cdf is not None:
        msg += f", KS to solver = {trace_rows[-1][-1]:.4f}"
    out.write(msg + "\n")
    return EXIT_OK


def _gaplaw(p, out):
    from . import gaplaw
    from .io import RunManifest, write_csv, write_json

    law = parse_density(p["density"], float(p["alpha"]))
    nodes = int(p["grid"])
    if nodes < 64:
        raise ValueError("--grid must be at least 64")
    rmax = float(p["rmax"])
    if not rmax > 1:
        raise ValueError("--rmax must exceed 1")
    n_log = nodes // 4
    grid = gaplaw.GridSpec(r_max=rmax, n_log=n_log, n_lin=nodes - n_log - 1, r_tail=max(40.0, rmax),
                           n_tail=512 if rmax < 40 else 0)
    sol, inputs = gaplaw.solve_gap_law(law, grid, float(p["tol"]), int(p["max_iter"]))
    try:
        fit = gaplaw.tail_fit(sol)
        theta_hat, beta_hat, c_g0 = fit.theta_hat, fit.beta_hat, fit.c_g0_hat
    except ValueError:
        theta_hat = beta_hat = c_g0 = math.nan
    scalars = {
        "rho": sol.rho, "c_T": sol.c_T, "theta": sol.theta, "theta_hat": theta_hat, "beta_hat": beta_hat,
        "c_g0_hat": c_g0, "residual": sol.fz.residual, "iterations": sol.fz.iterations,
    }
    out.write(f"rho = {sol.rho:.10f}  theta = {sol.theta:.8f}  theta_hat = {theta_hat:.8f}  beta_hat = {beta_hat:.4f}\n")
    if p["out"]:
        d = Path(p["out"])
        man = RunManifest("gaplaw", p, None)
        csvp = write_csv(d / "solution.csv", ("x", "r", "f_Z", "q", "g", "G"), sol.to_rows())
        man.add_output(csvp)
        man.add_output(write_json(d / "scalars.json", scalars))
        from .plotting import emit_plot_script

        gp = d / "solution.gp"
        gp.write_text(emit_plot_script(csvp, "gaplaw"))
        man.add_output(gp)
        man.write(d)
    return EXIT_OK


def validation_checks(suite: str, tol: float):
    """Yield ``(name, passed, detail)`` for the requested suite."""
    from . import series, triangle

    if suite in ("identities", "all"):
        rep = series.verify_series_identities(tol)
        for c in rep.checks:
            yield c.name, c.passed, f"residual {c.residual:.2e}"
        fast, slow = triangle.smith_watson("fast"), triangle.smith_watson("slow")
        quad = triangle.smith_watson_quadrature()
        yield "smith-watson fast", abs(fast - 0.41063) < 5e-6, f"{fast:.12f}"
        yield "smith-watson fast vs slow", abs(fast - slow) < 1e-8, f"{abs(fast - slow):.1e}"
        yield "smith-watson fast vs quadrature", abs(fast - quad) < 1e-4, f"{abs(fast - quad):.1e}"
    if suite in ("constants", "all"):
        m3 = series.mu(3)[0]
        yield "mu(3)", abs(m3 - 0.078268954659) < 5e-10, f"{m3:.13f}"
        ms = series.mu_slow()
        yield "mu slow series", abs(ms - series.MU) < 1e-8, f"{abs(ms - series.MU):.1e}"
        m2, m4 = series.phi0_moment(2), series.phi0_moment(4)
        yield "m2", abs(m2 - 0.2870590372) < 1e-9, f"{m2:.12f}"
        yield "m4", abs(m4 - 0.1212564646) < 1e-9, f"{m4:.12f}"
        fit = series.beta_fit_mismatch()
        yield "not a Beta law", fit["mismatch"] > 5e-6, f"mismatch {fit['mismatch']:.3e}"
        half = float(series.phi0(0.5))
        yield "phi0(1/2)", abs(half - 1.8269) < 5e-4, f"{half:.10f}"
    if suite in ("oracles", "all"):
        from . import gaplaw
        from .laws import SplittingLaw

        rng = np.random.default_rng(0)
        t = rng.uniform(0.01, 1.0, 50)
        x, y = rng.uniform(0, 1, 50), rng.uniform(0, 1, 50)
        diff = max(abs(float(triangle.heat_kernel_array(ti, xi, yi, "images"))
                       - float(triangle.heat_kernel_array(ti, xi, yi, "spectral"))) for ti, xi, yi in zip(t, x, y))
        yield "heat kernel images vs spectral", diff < 1e-10, f"{diff:.1e}"
        law = SplittingLaw.uniform(4.0)
        sol, _ = gaplaw.solve_gap_law(law)
        cf = gaplaw.uniform_closed_form(4.0)
        yield "gap law rho (uniform)", abs(sol.rho - cf["rho"]) < 1e-4, f"{abs(sol.rho - cf['rho']):.1e}"
        m = sol.x <= 6
        err = float(np.max(np.abs(sol.g[m] - cf["g"](sol.x[m]))))
        yield "gap law g (uniform)", err < 1e-3, f"{err:.1e}"


def _validate(p, out):
    ok = True
    for name, passed, detail in validation_checks(p["suite"], float(p["tol"])):
        out.write(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}\n")
        ok &= bool(passed)
    return EXIT_OK if ok else EXIT_FAILED


HANDLERS = {
    "density": _density,
    "moments": _moments,
    "triangle": _triangle,
    "simulate": _simulate,
    "split": _split,
    "gaplaw": _gaplaw,
    "validate": _validate,
}


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            raise UsageError(parser.format_usage())
        given = {k: v for k, v in vars(ns).items() if k != "command"}
        params = resolve(ns.command, given)
        return HANDLERS[ns.command](params, out)
    except UsageError as exc:
        err.write(str(exc).rstrip() + "\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_DOMAIN


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
