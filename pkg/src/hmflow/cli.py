"""Command-line harness: run, validate, frequency, sweep-eps, harmonic-limit.

Exit codes: 0 success, 1 numeric/solver failure, 2 usage or config error.
A manifest.json is written to the output directory even when a run fails
partway.  HMFLOW_THREADS caps worker counts; the shipped kernels are
single-threaded, so any value >= 1 is accepted and recorded.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import artifacts, config, diagnostics, flows, frequency, grids, wed
from .errors import (
    ConfigInvalid,
    ConfigNotFound,
    HmflowError,
    MaxSweepsExceeded,
)

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_USAGE = 2


def _threads():
    raw = os.environ.get("HMFLOW_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigInvalid(f"HMFLOW_THREADS: not an integer: {raw!r}") from exc
    if n < 1:
        raise ConfigInvalid("HMFLOW_THREADS must be >= 1")
    return n


def _setup(path):
    cfg = config.load_config(path)
    domain = config.build_domain(cfg)
    space = config.build_target(cfg)
    rng = np.random.default_rng(cfg["seed"])
    u0 = config.build_initial_map(cfg, domain, space, rng)
    return cfg, domain, space, u0


def _wed_config(cfg):
    eps = cfg["wed.eps"]
    tau = cfg.get("wed.tau", eps / 20.0)
    t_max = cfg.get("wed.t_max", 5.0 * eps)
    return wed.WedConfig(
        eps=eps,
        tau=tau,
        t_max=t_max,
        tol=cfg["wed.tol"],
        max_sweeps=cfg["wed.max_sweeps"],
    )


def _mm_config(cfg):
    return flows.MmConfig(
        tau=cfg["mm.tau"],
        steps=cfg["mm.steps"],
        inner_tol=cfg["mm.inner_tol"],
        inner_max_sweeps=cfg["mm.inner_max_sweeps"],
    )


def _run_solver(cfg, u0):
    """Returns (trajectory, eps_for_densities, extra dict)."""
    kind = cfg["solver.kind"]
    if kind == "wed":
        wcfg = _wed_config(cfg)
        sol = wed.minimize_wed(u0, wcfg)
        return sol.trajectory, wcfg.eps, {"wed_solution": sol, "wed_config": wcfg}
    if kind == "mm":
        mcfg = _mm_config(cfg)
        traj, report = flows.minimizing_movement(u0, mcfg)
        return traj, 0.0, {"flow_report": report}
    dt = cfg.get("flow.dt", u0.domain.h**2 / (4.0 * u0.domain.dim))
    traj = flows.explicit_heat_flow(u0, dt, cfg["flow.steps"])
    return traj, 0.0, {}


def _emit_run_artifacts(manifest, outdir, cfg, traj, eps, extra):
    energies = grids.ks_energy_levels(traj)
    d = traj.space.distance(traj.values[1:], traj.values[:-1])
    dissipation = np.sum(d * d, axis=1) * traj.domain.cell_volume / traj.tau
    manifest.add_file(
        artifacts.write_energy_csv(outdir / "energy.csv", traj, energies, dissipation)
    )
    if "wed_solution" in extra:
        sol = extra["wed_solution"]
        manifest.add_file(
            artifacts.write_objective_csv(
                outdir / "wed_objective.csv", sol.objective_history
            )
        )
        manifest.add_summary(V_eps=sol.value, sweeps=sol.sweeps)
        if sol.el_residual is not None:
            manifest.add_summary(el_residual=sol.el_residual)
    if "flow_report" in extra:
        u0_map = grids.GridMap(traj.domain, traj.space, traj.values[0])
        residuals = flows.evi_residual_series(traj, u0_map)
        manifest.add_file(artifacts.write_evi_csv(outdir / "evi.csv", residuals))
        manifest.add_summary(evi_max_residual=float(np.max(residuals)))
    manifest.add_summary(
        E0=float(energies[0]), final_energy=float(energies[-1]), eps=eps
    )
    return energies


def _run_diagnostics(manifest, outdir, cfg, traj, eps, energies):
    tol = cfg["diagnostics.tol"]
    reports = []
    if cfg["diagnostics.energy"]:
        reports += diagnostics.energy_report(
            traj,
            eps,
            float(energies[0]),
            tol=tol,
            include_dissipation=cfg["solver.kind"] == "wed",
        )
    if cfg["diagnostics.subharmonicity"]:
        q = traj.values[0, 0]
        reports.append(diagnostics.subharmonicity_residual(traj, eps, q))
        reports.append(diagnostics.weak_subharmonicity_check(traj, eps, q))
    if cfg["diagnostics.bochner"] and traj.space.smooth:
        reports.append(diagnostics.bochner_residual(traj, eps))
    if cfg["diagnostics.sup_bound"] and eps > 0:
        reports.append(
            diagnostics.sup_bound_check(traj, eps, float(energies[0]))
        )
    if cfg["diagnostics.regularity"]:
        alpha, lip, t_exp = diagnostics.regularity_estimate(traj)
        manifest.add_summary(alpha=alpha, lip=lip, time_exponent=t_exp)
    if reports:
        manifest.add_file(
            artifacts.write_validation_csv(outdir / "validation.csv", reports)
        )
        manifest.add_summary(
            worst_residuals={r.name: r.worst_residual for r in reports}
        )
    return reports


def cmd_run(args):
    cfg, domain, space, u0 = _setup(args.config)
    outdir = artifacts.Path(cfg["output.dir"])
    manifest = artifacts.ManifestWriter(outdir, cfg.values)
    manifest.add_summary(threads=_threads())
    try:
        traj, eps, extra = _run_solver(cfg, u0)
        energies = _emit_run_artifacts(manifest, outdir, cfg, traj, eps, extra)
        reports = _run_diagnostics(manifest, outdir, cfg, traj, eps, energies)
        manifest.add_file(
            artifacts.write_plot_script(outdir / "plots.gp", outdir.name)
        )
        grids.save_map_csv(outdir / "final_map.csv", traj.level(traj.n_steps))
        manifest.add_file(outdir / "final_map.csv")
        failed = [r for r in reports if not r.passed]
        manifest.finish("ok" if not failed else "validation_failed")
        for r in reports:
            print(f"[{r.verdict}] {r.name}: residual {r.worst_residual:.3e} "
                  f"(tol {r.tolerance:.3e})")
        return EXIT_OK if not failed else EXIT_NUMERIC
    except (HmflowError, FloatingPointError) as exc:
        manifest.add_summary(error=str(exc))
        manifest.finish("failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def cmd_validate(args):
    cfg, domain, space, u0 = _setup(args.config)
    outdir = artifacts.Path(cfg["output.dir"])
    manifest = artifacts.ManifestWriter(outdir, cfg.values)
    try:
        traj, eps, extra = _run_solver(cfg, u0)
        energies = grids.ks_energy_levels(traj)
        e0 = float(energies[0])
        tol = cfg["diagnostics.tol"]
        reports = diagnostics.energy_report(
            traj, eps, e0, tol=tol,
            include_dissipation=cfg["solver.kind"] == "wed",
        )
        q = traj.values[0, 0]
        reports.append(diagnostics.subharmonicity_residual(traj, eps, q))
        reports.append(diagnostics.weak_subharmonicity_check(traj, eps, q))
        if traj.space.smooth:
            reports.append(diagnostics.bochner_residual(traj, eps))
        manifest.add_file(
            artifacts.write_validation_csv(outdir / "validation.csv", reports)
        )
        worst = max(reports, key=lambda r: r.worst_residual / max(r.tolerance, 1e-300))
        manifest.add_summary(E0=e0, worst_check=worst.name)
        failed = [r for r in reports if not r.passed]
        manifest.finish("ok" if not failed else "validation_failed")
        print(f"{len(reports)} checks, {len(reports) - len(failed)} passed")
        for r in reports:
            print(f"[{r.verdict}] {r.name}: residual {r.worst_residual:.3e} "
                  f"(tol {r.tolerance:.3e}){' -- ' + r.note if r.note else ''}")
        return EXIT_OK if not failed else EXIT_NUMERIC
    except (HmflowError, FloatingPointError) as exc:
        manifest.add_summary(error=str(exc))
        manifest.finish("failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def cmd_frequency(args):
    cfg, domain, space, u0 = _setup(args.config)
    outdir = artifacts.Path(cfg["output.dir"])
    manifest = artifacts.ManifestWriter(outdir, cfg.values)
    try:
        traj, eps, extra = _run_solver(cfg, u0)
        node = args.z0 if args.z0 is not None else cfg.get("frequency.node", 0)
        if isinstance(node, str):
            node = tuple(int(v) for v in node.split(","))
            node = domain.node_index(node)
        t_hi = traj.n_steps * traj.tau
        t0 = args.t0 if args.t0 is not None else cfg.get("frequency.t0", 0.8 * t_hi)
        spec = frequency.KernelSpec(domain, int(node), float(t0))
        r_hi_cap = min(spec.r_max, 0.95 * np.sqrt(t0))
        rmin = args.rmin if args.rmin is not None else cfg.get(
            "frequency.rmin", 0.25 * r_hi_cap
        )
        rmax = args.rmax if args.rmax is not None else cfg.get(
            "frequency.rmax", r_hi_cap
        )
        nr = args.nr if args.nr is not None else cfg["frequency.nr"]
        radii = np.geomspace(rmin, rmax, nr)
        k0 = frequency.nearest_level(traj, t0)
        q = traj.values[k0, spec.x0]
        report = frequency.frequency_profile(traj, eps, spec, q, radii)
        manifest.add_file(
            artifacts.write_frequency_csv(outdir / "frequency.csv", report)
        )
        struwe = frequency.struwe_profile(traj, eps, spec, radii)
        manifest.add_file(artifacts.write_struwe_csv(outdir / "struwe.csv", struwe))
        manifest.add_file(
            artifacts.write_plot_script(
                outdir / "plots.gp", outdir.name, have_frequency=True
            )
        )
        manifest.add_summary(
            n_limit_estimate=report.n_limit_estimate,
            monotone_violation_max=report.monotone_violation_max,
        )
        manifest.finish("ok")
        print(
            f"N rows: {len(report.radii)}; N({report.radii[0]:.4g}) = "
            f"{report.n_vals[0]:.6g}; worst monotonicity violation "
            f"{report.monotone_violation_max:.3e}"
        )
        return EXIT_OK
    except (HmflowError, FloatingPointError) as exc:
        manifest.add_summary(error=str(exc))
        manifest.finish("failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def cmd_sweep_eps(args):
    cfg, domain, space, u0 = _setup(args.config)
    outdir = artifacts.Path(cfg["output.dir"])
    manifest = artifacts.ManifestWriter(outdir, cfg.values)
    try:
        if args.eps:
            eps_list = [float(v) for v in args.eps.split(",")]
        else:
            eps_list = [float(v) for v in cfg["sweep.eps_list"].split(",")]
        eps_list = sorted(eps_list, reverse=True)
        e0 = grids.ks_energy(u0)
        records = []
        cross_rows = []
        for eps in eps_list:
            wcfg = wed.WedConfig(
                eps=eps,
                tau=eps / 20.0,
                t_max=8.0 * eps,
                tol=cfg["wed.tol"],
                max_sweeps=cfg["wed.max_sweeps"],
            )
            sol = wed.minimize_wed(u0, wcfg)
            records.append({"eps": eps, "V": sol.value, "E0": e0})
            mm_cfg = flows.MmConfig(
                tau=wcfg.tau,
                steps=sol.trajectory.n_steps,
                inner_tol=cfg["mm.inner_tol"],
                inner_max_sweeps=cfg["mm.inner_max_sweeps"],
            )
            mm_traj, _ = flows.minimizing_movement(u0, mm_cfg)
            for frac in (0.25, 0.5, 1.0):
                k = max(1, int(round(frac * sol.trajectory.n_steps)))
                dist = grids.l2_distance(
                    sol.trajectory.level(k), mm_traj.level(k)
                )
                cross_rows.append((eps, k * wcfg.tau, dist))
        manifest.add_file(
            artifacts.write_value_function_csv(outdir / "value_function.csv", records)
        )
        manifest.add_file(
            artifacts.write_csv(
                outdir / "cross_solver.csv", ["eps", "t", "dist"], cross_rows
            )
        )
        vs = [r["V"] for r in records]
        monotone_defect = max(
            (vs[i] - vs[i + 1] for i in range(len(vs) - 1)), default=0.0
        )
        manifest.add_summary(E0=e0, monotone_defect=monotone_defect)
        manifest.finish("ok" if monotone_defect <= 1e-8 else "monotonicity_violated")
        for r in records:
            print(f"eps = {r['eps']:.6g}: V = {r['V']:.10g}, gap = {e0 - r['V']:.6g}")
        if monotone_defect > 1e-8:
            print(
                f"error: V failed to increase as eps decreased "
                f"(defect {monotone_defect:.3e})",
                file=sys.stderr,
            )
            return EXIT_NUMERIC
        return EXIT_OK
    except (HmflowError, FloatingPointError) as exc:
        manifest.add_summary(error=str(exc))
        manifest.finish("failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def cmd_harmonic_limit(args):
    cfg, domain, space, u0 = _setup(args.config)
    outdir = artifacts.Path(cfg["output.dir"])
    manifest = artifacts.ManifestWriter(outdir, cfg.values)
    try:
        mcfg = _mm_config(cfg)
        limit, report = flows.harmonic_limit(u0, mcfg)
        grids.save_map_csv(outdir / "limit_map.csv", limit)
        manifest.add_file(outdir / "limit_map.csv")
        rows = [(k, k * mcfg.tau, e) for k, e in enumerate(report.energies)]
        manifest.add_file(
            artifacts.write_csv(outdir / "convergence.csv", ["k", "t", "E"], rows)
        )
        manifest.add_summary(
            limit_energy=float(report.energies[-1]),
            steps_run=report.steps_run,
            converged=bool(report.converged),
        )
        manifest.finish("ok" if report.converged else "not_converged")
        print(
            f"limit energy {report.energies[-1]:.10g} after {report.steps_run} steps "
            f"({'converged' if report.converged else 'NOT converged'})"
        )
        return EXIT_OK if report.converged else EXIT_NUMERIC
    except (HmflowError, FloatingPointError) as exc:
        manifest.add_summary(error=str(exc))
        manifest.finish("failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hmflow",
        description="Heat-flow solvers into flat and singular nonpositively "
        "curved targets, with frequency and inequality diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the configured solver + diagnostics")
    p_run.add_argument("config")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="run solver, emit validation.csv")
    p_val.add_argument("config")
    p_val.set_defaults(func=cmd_validate)

    p_freq = sub.add_parser("frequency", help="frequency/struwe profiles of a run")
    p_freq.add_argument("config")
    p_freq.add_argument("--z0", help="node index i or i,j", default=None)
    p_freq.add_argument("--t0", type=float, default=None)
    p_freq.add_argument("--rmin", type=float, default=None)
    p_freq.add_argument("--rmax", type=float, default=None)
    p_freq.add_argument("--nr", type=int, default=None)
    p_freq.set_defaults(func=cmd_frequency)

    p_sweep = sub.add_parser("sweep-eps", help="value-function sweep over eps")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--eps", help="comma-separated eps list", default=None)
    p_sweep.set_defaults(func=cmd_sweep_eps)

    p_lim = sub.add_parser("harmonic-limit", help="long-time minimizing movements")
    p_lim.add_argument("config")
    p_lim.set_defaults(func=cmd_harmonic_limit)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigNotFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MaxSweepsExceeded as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
