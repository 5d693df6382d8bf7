"""Artifact emission: CSV files, run manifest, gnuplot scripts.

Every CSV is UTF-8 with a header row, comma delimiter, and floats printed
with 17 significant digits, so identical runs produce bitwise-identical
files.
"""

from __future__ import annotations

import csv
import json
import platform
import time
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return FLOAT_FMT % value
    return str(value)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_energy_csv(path, traj, energies, dissipation):
    rows = []
    for k, e in enumerate(energies):
        step_diss = dissipation[k - 1] if 1 <= k <= len(dissipation) else 0.0
        rows.append((k, k * traj.tau, e, step_diss))
    return write_csv(path, ["k", "t", "E", "step_dissipation"], rows)


def write_objective_csv(path, history):
    rows = [(i, v) for i, v in enumerate(history)]
    return write_csv(path, ["sweep", "objective"], rows)


def write_value_function_csv(path, records):
    rows = [(r["eps"], r["V"], r["E0"], r["E0"] - r["V"]) for r in records]
    return write_csv(path, ["eps", "V", "E0", "gap"], rows)


def write_evi_csv(path, residuals):
    rows = [(k, r) for k, r in enumerate(residuals)]
    return write_csv(path, ["k", "residual"], rows)


def write_frequency_csv(path, report):
    rows = [
        (r, e, h, n, lvl)
        for r, e, h, n, lvl in zip(
            report.radii, report.e_vals, report.h_vals, report.n_vals,
            report.level_index,
        )
    ]
    return write_csv(path, ["R", "E", "H", "N", "level_index"], rows)


def write_struwe_csv(path, rows):
    return write_csv(path, ["R", "Phi"], rows)


def write_validation_csv(path, reports):
    rows = []
    for rep in reports:
        i, k = rep.location if rep.location else ("", "")
        rows.append((rep.name, rep.worst_residual, rep.tolerance, rep.verdict, i, k))
    return write_csv(path, ["check", "residual", "tolerance", "verdict", "i", "k"], rows)


def write_plot_script(path, outdir_name, have_frequency=False):
    """Gnuplot-compatible text driving the energy (and frequency) figures."""
    lines = [
        "# gnuplot script; run from the output directory",
        'set datafile separator ","',
        "set key autotitle columnhead",
        "set terminal pngcairo size 900,600",
        'set output "energy.png"',
        'set xlabel "t"',
        'set ylabel "E"',
        'plot "energy.csv" using 2:3 with lines title "E(t)"',
    ]
    if have_frequency:
        lines += [
            'set output "frequency.png"',
            'set xlabel "R"',
            'set ylabel "N"',
            "set logscale x",
            'plot "frequency.csv" using 1:4 with linespoints title "N(R)"',
        ]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class ManifestWriter:
    """Collects run metadata and writes manifest.json, even on failure."""

    def __init__(self, outdir, config_echo):
        from . import __version__
        from ._kernels import BACKEND

        self.outdir = Path(outdir)
        self.start = time.perf_counter()
        self.data = {
            "config": config_echo,
            "versions": {
                "hmflow": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
                "kernel_backend": BACKEND,
            },
            "emitted": [],
            "summary": {},
            "status": "incomplete",
        }

    def add_file(self, path):
        self.data["emitted"].append(str(Path(path).name))
        return path

    def add_summary(self, **scalars):
        for key, val in scalars.items():
            if isinstance(val, (bool, np.bool_)):
                val = bool(val)
            elif isinstance(val, (int, float, np.integer, np.floating)):
                val = float(val)
            self.data["summary"][key] = val

    def finish(self, status):
        self.data["status"] = status
        self.data["wall_time_s"] = time.perf_counter() - self.start
        self.outdir.mkdir(parents=True, exist_ok=True)
        path = self.outdir / "manifest.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
        return path
