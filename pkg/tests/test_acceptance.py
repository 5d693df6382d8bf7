"""Acceptance suite: one test per criterion, tolerances pinned inline.

Run with `pytest tests/test_acceptance.py -s` to see one [PASS]/[FAIL] line
per criterion with its measured numbers and runtime.
"""

import time

import numpy as np
import pytest

from conftest import make_init
from oracles import wed_linear_solve

from hmflow import grids
from hmflow.diagnostics import (
    bochner_residual,
    energy_report,
    regularity_estimate,
    subharmonicity_residual,
)
from hmflow.flows import (
    MmConfig,
    evi_residual,
    explicit_heat_flow,
    harmonic_limit,
    minimizing_movement,
)
from hmflow.frequency import (
    KernelSpec,
    augmented_frequency,
    differentiable_nodes,
    frequency_profile,
)
from hmflow.grids import GridDomain, GridMap, Trajectory, ks_energy, l2_distance
from hmflow.targets import Euclidean
from hmflow.wed import WedConfig, minimize_wed, value_identity_residuals


def check(criterion, ok, detail, started):
    line = (
        f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail} "
        f"({time.perf_counter() - started:.1f}s)"
    )
    print(line)
    assert ok, line


def test_criterion_1_linear_map_frequency():
    """Closed-form frequency of l = Ax + Bt, |A| = |B| = 1, on n = 256."""
    started = time.perf_counter()
    n = 256
    dom = GridDomain((n,), 2 * np.pi / n)
    eu = Euclidean(1)
    t0, tau = 0.26, 1e-3
    k_count = int(round(t0 / tau))
    disp = dom.wrap_displacement(dom.coords(), dom.coords()[0])[:, 0]
    vals = np.empty((k_count + 1, n, 1))
    for k in range(k_count + 1):
        vals[k, :, 0] = disp + (k * tau - t0)
    traj = Trajectory(dom, eu, vals, tau)
    radii = np.linspace(0.05, 0.5, 16)
    rep = frequency_profile(traj, 0.0, KernelSpec(dom, 0, t0), np.zeros(1), radii)
    exact = 2.0 / (2.0 + radii**2)
    worst = float(np.max(np.abs(rep.n_vals - exact) / exact))
    limit_err = abs(rep.n_limit_estimate - 1.0)
    check(
        1,
        worst <= 0.02 and limit_err <= 0.01,
        f"max rel err {worst:.2e} (<= 2e-2), |N(0.05) - 1| = {limit_err:.2e} (<= 1e-2)",
        started,
    )


def test_criterion_2_frequency_monotonicity_and_lower_bound(
    spider_wed_run, hyperbolic_wed_run
):
    """N nondecreasing (violation <= 1e-3 N) and augmented N >= 0.98 at
    differentiable sample points of spider(3) and hyperbolic runs
    (n = 128, eps = 0.05, tau = 5e-3)."""
    started = time.perf_counter()
    t0 = 0.16
    radii = np.geomspace(0.1, 0.39, 9)
    details = []
    ok = True
    for domain, space, u0, cfg, sol in (spider_wed_run, hyperbolic_wed_run):
        k0 = round(t0 / cfg.tau)
        nodes = differentiable_nodes(sol.trajectory.level(k0))
        assert nodes.size >= 8
        worst_viol = 0.0
        worst_aug = np.inf
        for node in nodes:
            spec = KernelSpec(domain, int(node), t0)
            rep = frequency_profile(
                sol.trajectory, cfg.eps, spec, sol.trajectory.values[k0, node], radii
            )
            worst_viol = max(
                worst_viol, rep.monotone_violation_max / np.max(rep.n_vals)
            )
            aug = augmented_frequency(
                sol.trajectory, 0.5, spec, radii, eps=cfg.eps
            )
            worst_aug = min(worst_aug, aug.n_limit_estimate)
        ok = ok and worst_viol <= 1e-3 and worst_aug >= 0.98
        details.append(
            f"{space.kind}: viol {worst_viol:.1e}, min aug N {worst_aug:.3f} "
            f"over {nodes.size} pts"
        )
    check(2, ok, "; ".join(details), started)


def test_criterion_3_energy_estimates(
    spider_wed_run, hyperbolic_wed_run, circle_wed_run
):
    """sup E <= 1.01 E0, dissipation <= 0.505 E0 (weighted runs), discrete
    convexity, on every shipped NPC run."""
    started = time.perf_counter()
    failures = []
    runs = [
        (name, run, True)
        for name, run in (
            ("spider_wed", spider_wed_run),
            ("hyperbolic_wed", hyperbolic_wed_run),
            ("circle_wed", circle_wed_run),
        )
    ]
    for kind in ("spider", "hyperbolic", "circle"):
        domain, space, u0 = make_init(kind, amplitude=0.8)
        traj, _ = minimizing_movement(u0, MmConfig(tau=0.01, steps=40))
        runs.append((f"{kind}_mm", (domain, space, u0, None, traj), False))
    for name, run, is_wed in runs:
        if is_wed:
            domain, space, u0, cfg, sol = run
            traj, eps = sol.trajectory, cfg.eps
        else:
            domain, space, u0, _, traj = run
            eps = 0.0
        e0 = ks_energy(u0)
        reports = energy_report(traj, eps, e0, tol=1e-2, include_dissipation=is_wed)
        for rep in reports:
            if not rep.passed:
                failures.append(f"{name}:{rep.name}")
    check(3, not failures, f"6 runs x checks all pass" if not failures else str(failures), started)


def test_criterion_4_value_function_laws():
    """V monotone in eps, bounded by E0, gap shrinking >= 30% per halving;
    trajectory identity and dynamic-programming splitting residuals."""
    started = time.perf_counter()
    domain, space, u0 = make_init("euclidean", n=64, k=2, amplitude=1.0)
    e0 = ks_energy(u0)
    eps_list = (0.2, 0.1, 0.05, 0.025)
    values = {}
    sols = {}
    for eps in eps_list:
        cfg = WedConfig(eps=eps, tau=eps / 20, t_max=8 * eps, tol=1e-13,
                        max_sweeps=300000)
        sols[eps] = (minimize_wed(u0, cfg), cfg)
        values[eps] = sols[eps][0].value
    vs = [values[e] for e in eps_list]
    monotone = all(vs[i] <= vs[i + 1] + 1e-10 for i in range(3))
    bounded = all(v <= e0 for v in vs)
    gaps = [e0 - v for v in vs]
    decreases = [1 - gaps[i + 1] / gaps[i] for i in range(3)]
    trend = all(d >= 0.30 for d in decreases)

    sol, cfg = sols[0.05]
    pw, dpp = value_identity_residuals(sol, cfg)
    id_ok = pw <= 5 * (cfg.tau + domain.h**2) * e0
    dpp_ok = dpp <= 1e-2 * sol.value
    check(
        4,
        monotone and bounded and trend and id_ok and dpp_ok,
        f"V = {['%.4f' % v for v in vs]}, gap decreases "
        f"{['%.0f%%' % (100 * d) for d in decreases]}, identity {pw:.2e} "
        f"(<= {5 * (cfg.tau + domain.h**2) * e0:.2e}), DPP {dpp:.2e} "
        f"(<= {1e-2 * sol.value:.2e})",
        started,
    )


def test_criterion_5_exact_solution_oracle():
    """Sine-mode decay matches exp(-k^2 t) under all three solvers; the
    weighted minimizer matches the direct sparse solve to 1e-8."""
    started = time.perf_counter()
    domain, space, u0 = make_init("euclidean", n=64, k=1, amplitude=1.0)

    # explicit flow
    dt = domain.h**2 / 4
    steps = int(round(0.25 / dt))
    ex = explicit_heat_flow(u0, dt, steps)
    amp_ex = float(np.max(np.abs(ex.values[-1])))
    err_ex = abs(amp_ex - np.exp(-steps * dt)) / np.exp(-steps * dt)
    ok_ex = err_ex <= 2 * (dt + domain.h**2)

    # implicit Euler
    tau = 5e-3
    mm_steps = int(round(0.25 / tau))
    mm, _ = minimizing_movement(u0, MmConfig(tau=tau, steps=mm_steps,
                                             inner_tol=1e-13))
    amp_mm = float(np.max(np.abs(mm.values[-1])))
    err_mm = abs(amp_mm - np.exp(-mm_steps * tau)) / np.exp(-mm_steps * tau)
    ok_mm = err_mm <= 2 * (tau + domain.h**2)

    # weighted space-time solve, compared at t = t_max/2, plus oracle match
    eps, wtau = 0.02, 1e-3
    cfg = WedConfig(eps=eps, tau=wtau, t_max=0.16, tol=1e-15, max_sweeps=300000)
    sol = minimize_wed(u0, cfg, move_tol=2e-12)
    k_half = cfg.n_steps // 2
    amp_w = float(np.max(np.abs(sol.trajectory.values[k_half])))
    t_half = k_half * wtau
    err_w = abs(amp_w - np.exp(-t_half)) / np.exp(-t_half)
    ok_w = err_w <= 2 * (wtau + domain.h**2)
    oracle = wed_linear_solve(u0.values, domain, eps, wtau, cfg.n_steps)
    gap = float(np.max(np.abs(sol.trajectory.values - oracle)))
    ok_oracle = gap <= 1e-8

    check(
        5,
        ok_ex and ok_mm and ok_w and ok_oracle,
        f"decay errs explicit {err_ex:.2e}, implicit {err_mm:.2e}, "
        f"weighted {err_w:.2e}; oracle gap {gap:.2e} (<= 1e-8)",
        started,
    )


def test_criterion_6_evi_and_contraction():
    """Implicit flows satisfy the evolution inequality against 5 fixed
    competitors within 5 tau E0 and contract pairwise within 1e-8."""
    started = time.perf_counter()
    details = []
    ok = True
    for kind in ("spider", "hyperbolic"):
        domain, space, u0 = make_init(kind, amplitude=0.8)
        e0 = ks_energy(u0)
        mcfg = MmConfig(tau=0.01, steps=40, inner_tol=1e-12)
        traj, _ = minimizing_movement(u0, mcfg)
        _, _, u_half = make_init(kind, amplitude=0.4)
        _, _, u_k2 = make_init(kind, k=2, amplitude=0.5)
        from hmflow.config import _basepoint

        base = GridMap(domain, space, _basepoint(space, domain.n_nodes))
        competitors = [u0, u_half, u_k2, traj.level(traj.n_steps), base]
        worst = max(evi_residual(traj, v) for v in competitors)
        evi_ok = worst <= 5 * mcfg.tau * e0

        _, _, v0 = make_init(kind, amplitude=0.5)
        traj_v, _ = minimizing_movement(v0, mcfg)
        dists = np.array(
            [l2_distance(traj.level(k), traj_v.level(k)) for k in range(41)]
        )
        viol = float(np.max(np.diff(dists), initial=-np.inf))
        contract_ok = viol <= 1e-8
        ok = ok and evi_ok and contract_ok
        details.append(f"{kind}: EVI {worst:.2e} (<= {5 * mcfg.tau * e0:.2e}), "
                       f"contraction defect {viol:.2e}")
    check(6, ok, "; ".join(details), started)


def test_criterion_7_bochner_dichotomy(circle_wed_run, hyperbolic_wed_run):
    """Nonpositively curved smooth runs pass the density sign check with
    slack 10 (h + tau) max e; a sphere run reports a positive violation."""
    started = time.perf_counter()
    details = []
    ok = True
    for domain, space, u0, cfg, sol in (circle_wed_run, hyperbolic_wed_run):
        rep = bochner_residual(sol.trajectory, cfg.eps, tol_factor=10.0)
        ok = ok and rep.passed
        details.append(f"{space.kind} {rep.worst_residual:.2e} <= {rep.tolerance:.2e}")

    from hmflow.config import build_initial_map, build_target, parse_config_text

    n2 = 24
    dom2 = GridDomain((n2, n2), 2 * np.pi / n2)
    cfg2 = parse_config_text(
        f"""
domain.dim = 2
domain.n = {n2}
domain.n2 = {n2}
domain.h = {2 * np.pi / n2!r}
target.kind = sphere
init.kind = sine_mode
init.k = 1
init.amplitude = 1.4
"""
    )
    sph = build_target(cfg2)
    u0s = build_initial_map(cfg2, dom2, sph, np.random.default_rng(0))
    traj_s = explicit_heat_flow(u0s, dom2.h**2 / 8, 60)
    rep_s = bochner_residual(traj_s, 0.0, tol_factor=10.0)
    sphere_violates = rep_s.worst_residual > rep_s.tolerance
    ok = ok and sphere_violates
    details.append(f"sphere violation {rep_s.worst_residual:.2e} > {rep_s.tolerance:.2e}")
    check(7, ok, "; ".join(details), started)


def test_criterion_8_long_time_limits():
    """Degree-1 circle data converges to the constant-speed harmonic map
    (E = pi); a spider loop contracts to a point (E < 1e-8)."""
    started = time.perf_counter()
    n = 64
    dom = GridDomain((n,), 2 * np.pi / n)
    from hmflow.targets import FlatCircle

    circ = FlatCircle(1.0)
    x = dom.coords()[:, 0]
    theta = np.mod(x + 0.3 * np.sin(x), 2 * np.pi)
    u0 = GridMap(dom, circ, theta[:, None])
    _, rep_c = harmonic_limit(u0, MmConfig(tau=0.05, steps=1200, inner_tol=1e-7))
    err_c = abs(rep_c.energies[-1] - np.pi)
    ok_c = rep_c.converged and err_c <= 2 * dom.h**2 * np.pi

    domain, space, u0s = make_init("spider", n=64)
    _, rep_s = harmonic_limit(u0s, MmConfig(tau=0.05, steps=1500, inner_tol=1e-7))
    ok_s = rep_s.converged and rep_s.energies[-1] < 1e-8
    check(
        8,
        ok_c and ok_s,
        f"circle |E - pi| = {err_c:.2e} (<= {2 * dom.h**2 * np.pi:.2e}); "
        f"spider E = {rep_s.energies[-1]:.2e} (< 1e-8)",
        started,
    )


def test_criterion_9_subharmonicity(
    spider_wed_run, hyperbolic_wed_run, circle_wed_run
):
    """Positive part of the perturbed subharmonicity defect stays below
    C (h + tau) on NPC runs and decreases under (h, tau) -> (h/2, tau/4)."""
    started = time.perf_counter()
    details = []
    ok = True
    for domain, space, u0, cfg, sol in (
        spider_wed_run,
        hyperbolic_wed_run,
        circle_wed_run,
    ):
        rep = subharmonicity_residual(
            sol.trajectory, cfg.eps, sol.trajectory.values[0, 0]
        )
        ok = ok and rep.passed
        details.append(f"{space.kind} {rep.worst_residual:.2e}")

    domain, space, u0, cfg, sol = spider_wed_run
    coarse = subharmonicity_residual(
        sol.trajectory, cfg.eps, sol.trajectory.values[0, 0]
    ).worst_residual
    dom_f, space_f, u0_f = make_init("spider", n=256)
    tau_f = cfg.tau / 4
    mm_f, _ = minimizing_movement(
        u0_f, MmConfig(tau=tau_f, steps=round(cfg.t_max / tau_f), inner_tol=1e-11)
    )
    cfg_f = WedConfig(eps=cfg.eps, tau=tau_f, t_max=cfg.t_max, tol=1e-9,
                      max_sweeps=400000)
    sol_f = minimize_wed(u0_f, cfg_f, init=mm_f)
    refined = subharmonicity_residual(
        sol_f.trajectory, cfg_f.eps, sol_f.trajectory.values[0, 0]
    ).worst_residual
    decreases = refined < coarse
    ok = ok and decreases
    details.append(f"refinement {coarse:.2e} -> {refined:.2e}")
    check(9, ok, "; ".join(details), started)


def test_criterion_10_regularity_exponents(long_spider_run):
    """Spider run: spatial exponent >= 0.95, time exponent in [0.35, 0.65],
    weighted-distance log-slope >= 1.9."""
    started = time.perf_counter()
    domain, space, u0, cfg, sol = long_spider_run
    lev = round(0.05 / cfg.tau)
    alpha, lip, t_exp = regularity_estimate(
        sol.trajectory, level=lev, r_max=domain.periods()[0] / 64, n_centers=16
    )
    ok_alpha = alpha >= 0.95
    ok_texp = 0.35 <= t_exp <= 0.65

    t0 = 0.3
    k0 = round(t0 / cfg.tau)
    radii = np.geomspace(0.12, 0.38, 8)
    slopes = []
    for node in range(0, domain.n_nodes, 64):
        spec = KernelSpec(domain, node, t0)
        rep = frequency_profile(
            sol.trajectory, cfg.eps, spec, sol.trajectory.values[k0, node], radii
        )
        slopes.append(np.polyfit(np.log(rep.radii), np.log(rep.h_vals), 1)[0])
    ok_h = min(slopes) >= 1.9
    check(
        10,
        ok_alpha and ok_texp and ok_h,
        f"alpha {alpha:.3f} (>= 0.95), time exponent {t_exp:.3f} "
        f"(in [0.35, 0.65]), min H slope {min(slopes):.2f} (>= 1.9)",
        started,
    )
