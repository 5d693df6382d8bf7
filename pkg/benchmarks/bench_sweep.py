"""Benchmark: compiled sweep kernel vs pure-numpy fallback.

Runs a fixed number of Gauss-Seidel sweeps of the space-time solver on
representative problems per target kind and prints a timing table.

    python3 benchmarks/bench_sweep.py [--sweeps N]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hmflow import _kernels  # noqa: E402
from hmflow._kernels import Sweeper  # noqa: E402
from hmflow.config import build_initial_map, build_target, parse_config_text  # noqa: E402
from hmflow.grids import GridDomain  # noqa: E402


def build_problem(kind, n=128, levels=51):
    h = 2 * np.pi / n
    cfg = parse_config_text(
        f"""
domain.n = {n}
domain.h = {h!r}
target.kind = {kind}
target.rays = 3
init.kind = sine_mode
init.k = 1
init.amplitude = 0.8
"""
    )
    domain = GridDomain((n,), h)
    space = build_target(cfg)
    u0 = build_initial_map(cfg, domain, space, np.random.default_rng(0))
    values = np.repeat(u0.values[None], levels, axis=0)
    return domain, space, values


def time_backend(space, domain, values, n_sweeps, force_python):
    eps, tau = 0.05, 0.005
    wb = eps / tau**2 * np.exp(tau / eps)
    wf = eps / tau**2
    ws = 1.0 / domain.h**2
    work = values.copy()
    sweeper = Sweeper(space, domain, values.shape[0], force_python=force_python)
    start = time.perf_counter()
    for _ in range(n_sweeps):
        sweeper.sweep(work, wb, wf, ws, ws_last=0.0)
    return time.perf_counter() - start, sweeper.name


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sweeps", type=int, default=100)
    args = parser.parse_args()

    kinds = ["euclidean", "circle", "spider", "hyperbolic", "sphere"]
    print(f"kernel backend available: {_kernels.BACKEND}")
    print(f"{args.sweeps} sweeps of a 128x51 space-time lattice, 1-D domain\n")
    header = f"{'target':<12} {'python (s)':>12} {'compiled (s)':>13} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for kind in kinds:
        domain, space, values = build_problem(kind)
        t_py, _ = time_backend(space, domain, values, args.sweeps, True)
        if _kernels.HAVE_COMPILED:
            t_c, name = time_backend(space, domain, values, args.sweeps, False)
            print(f"{kind:<12} {t_py:>12.3f} {t_c:>13.3f} {t_py / t_c:>8.1f}x")
        else:
            print(f"{kind:<12} {t_py:>12.3f} {'n/a':>13} {'n/a':>9}")


if __name__ == "__main__":
    main()
