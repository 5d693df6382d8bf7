"""Space-time minimization of the exponentially weighted action.

The discrete objective over a trajectory (u_0, ..., u_K) with step tau and
horizon t_max = K*tau is

    I(u) = sum_{k=0}^{K-1} w_k tau [ (eps/2) (d_2(u_{k+1}, u_k)/tau)^2 + E_h(u_k) ],
    w_k = exp(-t_k/eps)/eps,

with u_0 pinned to the initial map and the terminal level free: since E_h(u_K)
does not enter, exact block minimization at k = K copies u_{K-1}, which is the
discrete natural (zero-velocity) endpoint condition of the truncated problem.
The truncation error of the horizon is bounded by exp(-t_max/eps).

Minimization is geodesic Gauss-Seidel: every node (i, k), k >= 1, is replaced
by the weighted Frechet mean of its temporal neighbors (weights
eps*w_{k-1}*h^dim/tau and eps*w_k*h^dim/tau, the forward one absent at k = K)
and its spatial neighbors (weights w_k*tau*h^dim/h^2).  Per-node weight ratios
are k-independent, so the sweep uses the w_0-normalized weights and never
underflows; the minimizer is invariant under any positive rescaling of w.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import grids
from ._kernels import Sweeper
from .errors import MaxSweepsExceeded, UnsupportedOnTarget
from .grids import GridMap, Trajectory


@dataclass
class WedConfig:
    """Solver parameters; tau <= eps/10 keeps the temporal boundary layer resolved."""

    eps: float
    tau: float
    t_max: float
    tol: float = 1e-9
    max_sweeps: int = 20000
    terminal_bc: str = "natural"

    def __post_init__(self):
        if self.eps <= 0 or self.tau <= 0 or self.t_max <= 0:
            raise ValueError("eps, tau and t_max must be positive")
        if self.tau > self.eps / 10 * (1 + 1e-12):
            raise ValueError("tau must satisfy tau <= eps/10")
        if self.t_max < 5 * self.eps * (1 - 1e-12):
            raise ValueError("t_max must satisfy t_max >= 5*eps")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if self.terminal_bc != "natural":
            raise ValueError("only the natural terminal condition is supported")

    @property
    def n_steps(self):
        return max(1, int(round(self.t_max / self.tau)))


@dataclass
class WedSolution:
    """Minimizing trajectory plus solver telemetry."""

    trajectory: Trajectory
    objective_history: np.ndarray
    value: float
    el_residual: float | None
    converged: bool
    sweeps: int
    backend: str
    eps: float

    def __post_init__(self):
        self.objective_history = np.asarray(self.objective_history, dtype=float)


def interval_terms(traj, eps):
    """Per-interval pieces of the objective: (weights w_k, kinetic_k, energy_k).

    kinetic_k = (eps/2) (d_2(u_{k+1}, u_k)/tau)^2 and energy_k = E_h(u_k),
    for k = 0..K-1; the objective is sum w_k * tau * (kinetic_k + energy_k).
    """
    dom, space, tau = traj.domain, traj.space, traj.tau
    k_count = traj.n_steps
    d = space.distance(traj.values[1:], traj.values[:-1])
    d2 = np.sum(d * d, axis=1) * dom.cell_volume
    kinetic = 0.5 * eps * d2 / tau**2
    energy = grids.ks_energy_levels(traj)[:-1]
    t = np.arange(k_count) * tau
    weights = np.exp(-t / eps) / eps
    return weights, kinetic, energy


def wed_objective(traj, eps):
    """Exponentially weighted space-time action of a trajectory."""
    weights, kinetic, energy = interval_terms(traj, eps)
    return float(np.sum(weights * traj.tau * (kinetic + energy)))


def _initial_trajectory(u0, cfg, init):
    k_count = cfg.n_steps
    if isinstance(init, Trajectory):
        if init.values.shape[0] != k_count + 1:
            raise ValueError("initial trajectory has the wrong number of levels")
        values = init.values.copy()
        values[0] = u0.values
    else:
        values = np.repeat(u0.values[None, :, :], k_count + 1, axis=0)
    return Trajectory(u0.domain, u0.space, values, cfg.tau)


def minimize_wed(
    u0, cfg, init="constant", force_python=False, weight_scale=1.0, move_tol=None
):
    """Minimize the weighted action over trajectories starting at u0.

    Gauss-Seidel sweeps stop once the sweep-to-sweep objective decrease falls
    below cfg.tol; exhausting cfg.max_sweeps raises MaxSweepsExceeded with the
    partial solution attached.  ``weight_scale`` rescales every reported
    objective value; the iterates are computed from normalized weights and are
    bitwise independent of it.  ``move_tol``, when set, additionally requires
    the max node movement of the last sweep to fall below it: the objective is
    too flat in the weakly weighted late-time directions to certify iterate
    convergence on its own.
    """
    space, dom = u0.space, u0.domain
    if not space.npc:
        warnings.warn(
            f"target {space.kind} is not NPC: the action is not geodesically "
            "convex and the minimizer may not be unique",
            stacklevel=2,
        )
    u0 = GridMap(dom, space, space.canonical(u0.values))
    traj = _initial_trajectory(u0, cfg, init)
    values = traj.values
    eps, tau = cfg.eps, cfg.tau

    wb = eps / tau**2 * np.exp(tau / eps)
    wf = eps / tau**2
    ws = 1.0 / dom.h**2
    sweeper = Sweeper(space, dom, values.shape[0], force_python=force_python)

    history = [weight_scale * wed_objective(traj, eps)]
    converged = False
    sweeps = 0
    prev = values.copy() if move_tol is not None else None
    for sweeps in range(1, cfg.max_sweeps + 1):
        sweeper.sweep(values, wb, wf, ws, ws_last=0.0)
        obj = weight_scale * wed_objective(traj, eps)
        drop = history[-1] - obj
        history.append(obj)
        if drop < -1e-9 * (1.0 + abs(obj)):
            raise AssertionError(
                f"objective increased by {-drop:.3e}: block minimization is broken"
            )
        if drop < weight_scale * cfg.tol:
            if move_tol is None:
                converged = True
                break
            if float(np.max(np.abs(values - prev))) < move_tol:
                converged = True
                break
        if prev is not None:
            np.copyto(prev, values)

    def build(conv):
        return WedSolution(
            trajectory=traj,
            objective_history=np.asarray(history),
            value=history[-1] / weight_scale,
            el_residual=el_residual(traj, eps) if space.smooth else None,
            converged=conv,
            sweeps=sweeps,
            backend=sweeper.name,
            eps=eps,
        )

    if not converged:
        raise MaxSweepsExceeded(
            f"no convergence within {cfg.max_sweeps} sweeps "
            f"(last decrease {history[-2] - history[-1]:.3e})",
            partial=build(False),
        )
    return build(True)


def value_function(u0, cfg, **kwargs):
    """V(u0) = min I over trajectories from u0; between 0 and E_h(u0) up to
    the quadrature overweight factor tau/(eps*(1-exp(-tau/eps)))."""
    return minimize_wed(u0, cfg, **kwargs).value


def _ambient_diff(space, a, b):
    """Chart difference a - b used by finite-difference operators."""
    if space.kind == "flat_circle":
        from .targets import wrap_angle

        return wrap_angle(a - b)
    return a - b


def el_residual(traj, eps):
    """Max tangential norm of the discrete Euler-Lagrange field.

    Evaluates -eps*D_tt u + D_t u - Delta_h u with centered time differences
    at interior levels, projects onto the tangent space, and returns the max
    node norm.  Smooth kinds only.
    """
    space, dom, tau = traj.space, traj.domain, traj.tau
    if not space.smooth:
        raise UnsupportedOnTarget(f"no Euler-Lagrange residual on {space.kind}")
    if traj.n_steps < 2:
        return 0.0
    vals = traj.values
    mid = vals[1:-1]
    d_fwd = _ambient_diff(space, vals[2:], mid)
    d_back = _ambient_diff(space, mid, vals[:-2])
    levels = mid.shape[0]
    g = mid.reshape((levels,) + dom.sizes + (space.point_dim,))
    lap = np.zeros_like(g)
    for ax in range(dom.dim):
        for shift in (-1, 1):
            lap += _ambient_diff(space, np.roll(g, shift, axis=1 + ax), g)
    lap = lap.reshape(mid.shape) / dom.h**2
    f = -eps * (d_fwd - d_back) / tau**2 + (d_fwd + d_back) / (2 * tau) - lap
    f = space.tangent_project(mid, f)
    return float(np.max(space.tangent_norm(mid, f)))


def value_identity_residuals(sol, cfg, sample_levels=None, value_solver=None):
    """Residuals of the trajectory identities of the value function.

    pointwise_identity_max: max over sampled levels of
        |V(u(t_k)) - E_h(u(t_k)) + (eps/2)|u'|^2(t_k)|
    with V recomputed by a fresh minimization restarted at u(t_k) and the
    metric speed from centered difference quotients.

    dpp_residual: defect of splitting the action at T' = t_max/2 into the
    head integral plus exp(-T'/eps) times a fresh value at u(T').
    """
    traj, eps = sol.trajectory, cfg.eps
    space, dom, tau = traj.space, traj.domain, traj.tau
    k_count = traj.n_steps
    if value_solver is None:
        value_solver = lambda u: value_function(u, cfg)

    if sample_levels is None:
        sample_levels = sorted(
            {max(1, k_count // 5), max(1, k_count // 2), max(1, (4 * k_count) // 5)}
        )
    sample_levels = [k for k in sample_levels if 1 <= k <= k_count - 1]

    energies = grids.ks_energy_levels(traj)
    worst = 0.0
    for k in sample_levels:
        d = space.distance(traj.values[k + 1], traj.values[k - 1])
        speed_sq = np.sum(d * d) * dom.cell_volume / (2 * tau) ** 2
        v_fresh = value_solver(traj.level(k))
        resid = abs(v_fresh - (energies[k] - 0.5 * eps * speed_sq))
        worst = max(worst, resid)

    k_half = max(1, k_count // 2)
    weights, kinetic, energy = interval_terms(traj, eps)
    head = float(np.sum(weights[:k_half] * tau * (kinetic + energy)[:k_half]))
    v_tail = value_solver(traj.level(k_half))
    dpp = abs(sol.value - (head + np.exp(-k_half * tau / eps) * v_tail))
    return worst, dpp
