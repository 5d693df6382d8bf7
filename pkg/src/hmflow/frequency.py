"""Backward-heat-kernel energy ratios and their monotonicity data.

For a center z0 = (x0, t0) the backward kernel on the periodic domain uses
the minimal-image distance,

    G(x, t) = (4 pi (t0 - t))^(-n/2) exp(-|x - x0|^2 / (4 (t0 - t))),

and scales are restricted to R <= period/8 so the single-image kernel is a
quantified surrogate for the whole-space one: the discarded tail mass is
erfc(period/(4R)) (about 4.7e-3 at the window edge, < 1e-8 for
R <= period/16, < 1e-12 for R <= period/20).  At scale R the profile reads

    E(R) = 2 R^2 sum_i e(x_i, t0 - R^2) G(x_i, t0 - R^2) h^dim,
    H(R) = sum_i d^2(u(x_i, t0 - R^2), Q) G(x_i, t0 - R^2) h^dim,
    N(R) = E(R) / H(R),

with e the (eps-weighted) energy density; off-grid levels t0 - R^2
interpolate the scalar integrals linearly in t, never target points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grids
from .errors import DegenerateFrequency, InvalidTime, ScaleOutOfRange
from .grids import Trajectory
from .targets import ProductWithEuclidean


@dataclass(frozen=True)
class KernelSpec:
    """Backward-kernel center on a periodic domain with hard scale cap.

    The kernel is zeroed where the minimal-image distance exceeds the
    truncation radius period/2 - 2h: the margin of two cells keeps the seam
    edge of the periodic chart (where non-periodic synthetic data jumps)
    out of every quadrature; the truncated mass is erfc(r_trunc / (2R)).
    """

    domain: object
    x0: int
    t0: float

    def __post_init__(self):
        if self.t0 <= 0:
            raise InvalidTime("kernel center time must be positive")

    @property
    def r_max(self):
        return min(self.domain.periods()) / 8.0

    @property
    def r_trunc(self):
        return 0.5 * min(self.domain.periods()) - 2.0 * self.domain.h

    def displacement(self):
        coords = self.domain.coords()
        return self.domain.wrap_displacement(coords, coords[self.x0])

    def sq_dist(self):
        disp = self.displacement()
        return np.sum(disp * disp, axis=-1)


def heat_kernel_weight(spec, t, node=None):
    """Kernel values at time t < t0 over all nodes (or one node)."""
    if t >= spec.t0:
        raise InvalidTime("backward kernel needs t < t0")
    s = spec.t0 - t
    n = spec.domain.dim
    sq = spec.sq_dist()
    g = (4.0 * np.pi * s) ** (-0.5 * n) * np.exp(-sq / (4.0 * s))
    g = np.where(sq > spec.r_trunc**2, 0.0, g)
    return g if node is None else float(g[node])


def _resolve_z0(traj, z0):
    """Accept z0 as KernelSpec or (node index | multi-index, t0)."""
    if isinstance(z0, KernelSpec):
        return z0
    node, t0 = z0
    if not np.isscalar(node):
        node = traj.domain.node_index(node)
    return KernelSpec(traj.domain, int(node), float(t0))


def _check_scale(traj, spec, r):
    if r <= 0:
        raise ScaleOutOfRange("scale must be positive")
    if r > spec.r_max * (1 + 1e-12):
        raise ScaleOutOfRange(
            f"R = {r:.4g} exceeds the kernel validity window {spec.r_max:.4g}"
        )
    if r * r >= spec.t0:
        raise ScaleOutOfRange("scale must satisfy R < sqrt(t0)")
    t_level = spec.t0 - r * r
    if t_level > traj.n_steps * traj.tau + 1e-12:
        raise ScaleOutOfRange("level t0 - R^2 lies beyond the trajectory horizon")


def _level_weights(traj, t_level):
    """Bracketing level indices and the linear interpolation weight."""
    tau = traj.tau
    k_lo = int(np.floor(t_level / tau + 1e-12))
    k_lo = min(max(k_lo, 0), traj.n_steps)
    frac = t_level / tau - k_lo
    if k_lo == traj.n_steps:
        return k_lo, k_lo, 0.0
    return k_lo, k_lo + 1, float(np.clip(frac, 0.0, 1.0))


def _eh_rows(traj, spec, q, r_list, e_field):
    dom = traj.domain
    cell = dom.cell_volume
    rows_e = []
    rows_h = []
    levels = []
    for r in r_list:
        _check_scale(traj, spec, r)
        t_level = spec.t0 - r * r

        # G is evaluated at the exact time t0 - R^2 (it is smooth in t);
        # the discrete fields are taken at the bracketing levels.
        g = heat_kernel_weight(spec, t_level)

        def level_integrals(k):
            e_int = float(np.sum(e_field[k] * g) * cell)
            d = traj.space.distance(traj.values[k], q)
            h_int = float(np.sum(d * d * g) * cell)
            return e_int, h_int

        k_lo, k_hi, frac = _level_weights(traj, t_level)
        e_lo, h_lo = level_integrals(k_lo)
        if frac == 0.0:
            e_val, h_val = e_lo, h_lo
        else:
            e_hi, h_hi = level_integrals(k_hi)
            e_val = (1 - frac) * e_lo + frac * e_hi
            h_val = (1 - frac) * h_lo + frac * h_hi
        rows_e.append(2.0 * r * r * e_val)
        rows_h.append(h_val)
        levels.append(k_lo)
    return np.asarray(rows_e), np.asarray(rows_h), np.asarray(levels)


def eh_at_scale(traj, eps, z0, q, r):
    """(E, H) at one scale; see the module docstring for the formulas."""
    spec = _resolve_z0(traj, z0)
    _, _, e_field = grids.density_fields(traj, eps)
    e_rows, h_rows, _ = _eh_rows(traj, spec, np.asarray(q, dtype=float), [r], e_field)
    return float(e_rows[0]), float(h_rows[0])


@dataclass
class FrequencyReport:
    """Profile rows (R, E, H, N) plus monotonicity and limit summaries."""

    z0: tuple
    q: np.ndarray
    radii: np.ndarray
    e_vals: np.ndarray
    h_vals: np.ndarray
    n_vals: np.ndarray
    level_index: np.ndarray
    monotone_violation_max: float
    n_limit_estimate: float

    @property
    def rows(self):
        return list(zip(self.radii, self.e_vals, self.h_vals, self.n_vals))


def frequency_profile(traj, eps, z0, q, r_list):
    """Frequency table over ascending scales with monotonicity summary.

    Raises DegenerateFrequency when H vanishes at a requested scale (the map
    coincides with Q on that level: the constant case).
    """
    spec = _resolve_z0(traj, z0)
    q = np.asarray(q, dtype=float)
    radii = np.sort(np.asarray(list(r_list), dtype=float))
    _, _, e_field = grids.density_fields(traj, eps)
    e_rows, h_rows, levels = _eh_rows(traj, spec, q, radii, e_field)
    if np.any(h_rows <= 0.0):
        raise DegenerateFrequency("H = 0 at a requested scale: map constant at Q")
    n_rows = e_rows / h_rows
    viol = float(np.max(np.maximum(n_rows[:-1] - n_rows[1:], 0.0), initial=0.0))
    return FrequencyReport(
        z0=(spec.x0, spec.t0),
        q=q,
        radii=radii,
        e_vals=e_rows,
        h_vals=h_rows,
        n_vals=n_rows,
        level_index=levels,
        monotone_violation_max=viol,
        n_limit_estimate=float(n_rows[0]),
    )


def struwe_profile(traj, eps, z0, r_list):
    """Rows (R, Phi) of the renormalized parabolic energy Phi(R) = E(R)."""
    spec = _resolve_z0(traj, z0)
    radii = np.sort(np.asarray(list(r_list), dtype=float))
    _, _, e_field = grids.density_fields(traj, eps)
    dummy_q = traj.values[0, spec.x0]
    e_rows, _, _ = _eh_rows(traj, spec, dummy_q, radii, e_field)
    return list(zip(radii, e_rows))


def nearest_level(traj, t0):
    return int(np.clip(round(t0 / traj.tau), 0, traj.n_steps))


def augmented_frequency(traj, delta, z0, r_list, eps=0.0):
    """Frequency profile of the graph-augmented map (u(x,t), delta*x).

    The extras are the minimal-image displacement from x0, so the augmented
    map is smooth inside the kernel window; the single seam edge of the
    periodic chart carries weight G(period/2) < 2e-7 inside the validity
    window.  Q is the augmented value at z0, whose extras vanish.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    spec = _resolve_z0(traj, z0)
    dom = traj.domain
    prod = ProductWithEuclidean(traj.space, dom.dim, scale=float(delta))
    disp = spec.displacement()
    extras = np.broadcast_to(disp, (traj.values.shape[0],) + disp.shape)
    aug_values = np.concatenate([traj.values, extras], axis=-1)
    aug = Trajectory(dom, prod, aug_values, traj.tau)
    k0 = nearest_level(traj, spec.t0)
    q = aug.values[k0, spec.x0]
    return frequency_profile(aug, eps, spec, q, r_list)


def differentiability_fit(u_map, node, radius):
    """RMS residual and gradient norm of a local affine fit in chart coords.

    Fits value ~ c + disp @ A over the metric ball of the given radius; the
    selection rule for approximately differentiable sample points accepts a
    node when rms <= 0.1 * |A| * h.
    """
    dom = u_map.domain
    coords = dom.coords()
    disp = dom.wrap_displacement(coords, coords[node])
    mask = np.linalg.norm(disp, axis=-1) <= radius + 1e-12
    x = disp[mask]
    y = u_map.space.chart_coords(u_map.values[mask])
    design = np.concatenate([np.ones((x.shape[0], 1)), x], axis=1)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    rms = float(np.sqrt(np.mean(np.sum(resid**2, axis=-1))))
    grad_norm = float(np.linalg.norm(coef[1:]))
    return rms, grad_norm


def differentiable_nodes(u_map, radius=None, rel_tol=0.1):
    """Nodes passing the local linear-fit differentiability test."""
    dom = u_map.domain
    if radius is None:
        radius = 3.5 * dom.h
    good = []
    for node in range(dom.n_nodes):
        rms, grad_norm = differentiability_fit(u_map, node, radius)
        if grad_norm > 0 and rms <= rel_tol * grad_norm * dom.h:
            good.append(node)
    return np.asarray(good, dtype=int)
