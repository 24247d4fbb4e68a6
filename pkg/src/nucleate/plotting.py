"""Standalone gnuplot scripts for the CSV outputs. Nothing is rendered here."""

from __future__ import annotations

from pathlib import Path

from .io import read_csv

KINDS = {
    # histogram of relative nucleation sites against the limiting density
    "histogram": ("bin_center", "density", "phi0"),
    # empirical gap CDF against the solver's CDF
    "ecdf": ("x", "ecdf", "G"),
    # gap density
    "gaplaw": ("x", "g"),
}


def emit_plot_script(data_csv, kind: str, output: str | None = None) -> str:
    """Return a gnuplot script that plots ``data_csv``; raises ``ValueError`` naming the first missing column."""
    if kind not in KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {sorted(KINDS)}")
    header, rows = read_csv(data_csv)
    for col in KINDS[kind]:
        if col not in header:
            raise ValueError(f"column {col!r} missing from {data_csv}")
    if not rows:
        raise ValueError(f"{data_csv} has a header but no data rows")
    idx = {c: header.index(c) + 1 for c in KINDS[kind]}
    name = Path(data_csv).name
    out = output or Path(data_csv).with_suffix(".png").name
    lines = [
        "set datafile separator ','",
        "set terminal pngcairo size 800,560",
        f"set output '{out}'",
        "set key top right",
    ]
    if kind == "histogram":
        lines += [
            "set xrange [0:1]",
            "set xlabel 'relative position in gap'",
            "set ylabel 'density'",
            "set style fill solid 0.35",
            "set boxwidth 0.9 relative",
            f"plot '{name}' using {idx['bin_center']}:{idx['density']} every ::1 with boxes title 'simulation', \\",
            f"     '{name}' using {idx['bin_center']}:{idx['phi0']} every ::1 with lines lw 2 title 'limit density'",
        ]
    elif kind == "ecdf":
        lines += [
            "set xlabel 'normalized gap'",
            "set ylabel 'cumulative probability'",
            f"plot '{name}' using {idx['x']}:{idx['ecdf']} every ::1 with steps title 'empirical', \\",
            f"     '{name}' using {idx['x']}:{idx['G']} every ::1 with lines lw 2 title 'solver'",
        ]
    else:
        lines += [
            "set xlabel 'normalized gap'",
            "set ylabel 'g(x)'",
            f"plot '{name}' using {idx['x']}:{idx['g']} every ::1 with lines lw 2 title 'gap density'",
        ]
    return "\n".join(lines) + "\n"
