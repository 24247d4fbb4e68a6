#!/usr/bin/env python3
"""Relative position of the first nucleation in an empty gap, against the limit density.

Writes a histogram CSV and a gnuplot script next to it.
"""

import argparse
from pathlib import Path

import numpy as np

from nucleate import particles, series
from nucleate.io import write_csv
from nucleate.laws import SplittingLaw
from nucleate.plotting import emit_plot_script
from nucleate.stats import ks_critical, ks_one_sample


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lambda", dest="lam", type=float, default=0.1)
    ap.add_argument("--lattice", type=int, default=100)
    ap.add_argument("--replicas", type=int, default=100_000)
    ap.add_argument("--bins", type=int, default=50)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", type=Path, default=Path("out/first_nucleation"))
    a = ap.parse_args()

    params = particles.ParticleSystemState(1.0, a.lam, particles.LatticeMode(a.lattice))
    res = particles.run_replicas(params, a.replicas, a.seed, max_cycles=None)
    loc = res.locations
    counts, edges = np.histogram(loc, bins=a.bins, range=(0, 1))
    centers = 0.5 * (edges[1:] + edges[:-1])
    dens = counts / (loc.size * np.diff(edges))
    csv = write_csv(a.out / "histogram.csv", ("bin_left", "bin_right", "bin_center", "density", "phi0"),
                    zip(edges[:-1], edges[1:], centers, dens, series.phi0(centers)))
    (a.out / "histogram.gp").write_text(emit_plot_script(csv, "histogram"))

    ks = ks_one_sample(loc, SplittingLaw.phi0().table.cdf)
    print(f"{loc.size} nucleations from {a.replicas} replicas in {res.wall_time:.1f}s")
    print(f"KS to the limit density: {ks:.4f} (1% critical value {ks_critical(0.01, loc.size):.4f})")
    print(f"wrote {csv}")


if __name__ == "__main__":
    main()
