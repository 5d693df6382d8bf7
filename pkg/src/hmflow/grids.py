"""Periodic lattice domains, target-valued grid maps, and discrete energies.

The spatial domain is a flat periodic lattice in one or two dimensions with
uniform spacing h.  Maps store one target payload row per node in flat
C-order; a trajectory stacks K+1 maps on a uniform time grid of step tau.

The Dirichlet energy is the nearest-neighbor quadratic form

    E_h(u) = 1/2 * sum_edges d(u_i, u_j)^2 / h^2 * h^dim,

each undirected edge counted once, which is the scale-h energy density
integrated over the domain; h-refinement studies in the test suite check
its convergence to the smooth Dirichlet integral at second order.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import KindMismatch, ShapeMismatch
from .targets import TargetSpace

FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class GridDomain:
    """Flat periodic lattice: sizes per axis and spacing h."""

    sizes: tuple
    h: float

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if len(sizes) not in (1, 2):
            raise ValueError("only 1-D and 2-D domains are supported")
        if any(n < 4 for n in sizes):
            raise ValueError("each axis needs at least 4 nodes")
        if self.h <= 0:
            raise ValueError("spacing h must be positive")

    @property
    def dim(self):
        return len(self.sizes)

    @property
    def n_nodes(self):
        return int(np.prod(self.sizes))

    @property
    def cell_volume(self):
        return self.h**self.dim

    @property
    def volume(self):
        return self.cell_volume * self.n_nodes

    def periods(self):
        return tuple(n * self.h for n in self.sizes)

    def coords(self):
        """Node coordinates, shape (n_nodes, dim)."""
        axes = [np.arange(n) * self.h for n in self.sizes]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def wrap_displacement(self, x, x0):
        """Minimal-image displacement x - x0 on the torus, componentwise."""
        out = np.asarray(x, dtype=float) - np.asarray(x0, dtype=float)
        for ax, period in enumerate(self.periods()):
            out[..., ax] = (out[..., ax] + 0.5 * period) % period - 0.5 * period
        return out

    def node_index(self, multi):
        """Flat index of a node given per-axis indices (int or tuple)."""
        if np.isscalar(multi):
            multi = (int(multi),)
        multi = tuple(int(i) % n for i, n in zip(multi, self.sizes))
        if len(multi) != self.dim:
            raise ValueError("node index arity does not match the domain dim")
        return int(np.ravel_multi_index(multi, self.sizes))

    def neighbor_table(self):
        """Flat indices of the 2*dim nearest neighbors, shape (n_nodes, 2*dim)."""
        idx = np.arange(self.n_nodes).reshape(self.sizes)
        cols = []
        for ax in range(self.dim):
            cols.append(np.roll(idx, -1, axis=ax).ravel())
            cols.append(np.roll(idx, 1, axis=ax).ravel())
        return np.stack(cols, axis=-1)


@dataclass
class GridMap:
    """Target-valued map on a GridDomain; values has shape (n_nodes, point_dim)."""

    domain: GridDomain
    space: TargetSpace
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float)
        if self.values.shape != (self.domain.n_nodes, self.space.point_dim):
            raise ShapeMismatch(
                f"values shape {self.values.shape} does not match "
                f"({self.domain.n_nodes}, {self.space.point_dim})"
            )

    def grid_values(self):
        return self.values.reshape(self.domain.sizes + (self.space.point_dim,))

    def copy(self):
        return GridMap(self.domain, self.space, self.values.copy())


@dataclass
class Trajectory:
    """Uniform-in-time stack of grid maps; values has shape (K+1, N, point_dim)."""

    domain: GridDomain
    space: TargetSpace
    values: np.ndarray
    tau: float

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float)
        if self.values.ndim != 3 or self.values.shape[0] < 2:
            raise ShapeMismatch("a trajectory needs at least two time levels")
        if self.values.shape[1:] != (self.domain.n_nodes, self.space.point_dim):
            raise ShapeMismatch("trajectory level shape does not match the domain")
        if self.tau <= 0:
            raise ValueError("time step tau must be positive")

    @property
    def n_steps(self):
        return self.values.shape[0] - 1

    @property
    def times(self):
        return np.arange(self.values.shape[0]) * self.tau

    def level(self, k):
        return GridMap(self.domain, self.space, self.values[k])

    @property
    def maps(self):
        return [self.level(k) for k in range(self.values.shape[0])]


def _check_pair(u, v):
    if u.space != v.space:
        raise KindMismatch("maps take values in different target kinds")
    if u.domain != v.domain:
        raise ShapeMismatch("maps live on different domains")


def l2_distance(u, v):
    """d_2(u, v) = (sum_nodes d^2(u_i, v_i) h^dim)^(1/2)."""
    _check_pair(u, v)
    d = u.space.distance(u.values, v.values)
    return float(np.sqrt(np.sum(d * d) * u.domain.cell_volume))


def _edge_sq_sums(space, grid_vals, dim):
    """Per-axis arrays of squared forward-edge lengths on the grid."""
    out = []
    for ax in range(dim):
        q = np.roll(grid_vals, -1, axis=ax)
        d = space.distance(grid_vals, q)
        out.append(d * d)
    return out


def ks_energy(u):
    """Nearest-neighbor Dirichlet energy of a grid map."""
    g = u.grid_values()
    total = 0.0
    for e2 in _edge_sq_sums(u.space, g, u.domain.dim):
        total += float(np.sum(e2))
    return 0.5 * total / u.domain.h**2 * u.domain.cell_volume


def ks_energy_levels(traj):
    """ks_energy evaluated at every level of a trajectory, shape (K+1,)."""
    dom, space = traj.domain, traj.space
    g = traj.values.reshape((-1,) + dom.sizes + (space.point_dim,))
    total = np.zeros(g.shape[0])
    for ax in range(dom.dim):
        q = np.roll(g, -1, axis=1 + ax)
        d = space.distance(g, q)
        total += np.sum(d * d, axis=tuple(range(1, 1 + dom.dim)))
    return 0.5 * total / dom.h**2 * dom.cell_volume


def grad_sq_field(u):
    """Per-node density sum_neighbors d^2(u_i, u_j) / (2 h^2), shape (N,)."""
    g = u.grid_values()
    acc = np.zeros(u.domain.sizes)
    for ax in range(u.domain.dim):
        for shift in (-1, 1):
            q = np.roll(g, shift, axis=ax)
            d = u.space.distance(g, q)
            acc += d * d
    return (acc / (2.0 * u.domain.h**2)).ravel()


def density_fields(traj, eps):
    """Discrete energy densities of a trajectory.

    Returns (grad_sq, time_sq, e_eps), each of shape (K+1, N):
    grad_sq via nearest-neighbor quotients, time_sq via centered distance
    quotients (one-sided at the ends), and e_eps = eps*time_sq + grad_sq.
    """
    dom, space = traj.domain, traj.space
    levels = traj.values.shape[0]
    if levels < 3:
        raise ValueError("time_sq needs at least 3 time levels")
    g = traj.values.reshape((levels,) + dom.sizes + (space.point_dim,))
    grad_sq = np.zeros((levels,) + dom.sizes)
    for ax in range(dom.dim):
        for shift in (-1, 1):
            q = np.roll(g, shift, axis=1 + ax)
            d = space.distance(g, q)
            grad_sq += d * d
    grad_sq = (grad_sq / (2.0 * dom.h**2)).reshape(levels, dom.n_nodes)

    tau = traj.tau
    time_sq = np.zeros((levels, dom.n_nodes))
    d_int = space.distance(traj.values[2:], traj.values[:-2])
    time_sq[1:-1] = (d_int / (2.0 * tau)) ** 2
    d0 = space.distance(traj.values[1], traj.values[0])
    dK = space.distance(traj.values[-1], traj.values[-2])
    time_sq[0] = (d0 / tau) ** 2
    time_sq[-1] = (dK / tau) ** 2

    return grad_sq, time_sq, eps * time_sq + grad_sq


def oscillation(u, center, r):
    """Max pairwise distance of values over nodes within metric radius r."""
    dom = u.domain
    if r > 0.5 * min(dom.periods()) + 1e-12:
        raise ValueError("oscillation radius exceeds half the domain period")
    if not np.isscalar(center):
        center = dom.node_index(center)
    coords = dom.coords()
    disp = dom.wrap_displacement(coords, coords[center])
    mask = np.linalg.norm(disp, axis=-1) <= r + 1e-12
    pts = u.values[mask]
    if pts.shape[0] < 2:
        return 0.0
    d = u.space.distance(pts[:, None, :], pts[None, :, :])
    return float(np.max(d))


# ----------------------------------------------------------------------
# CSV serialization: one row per node, index columns then payload columns.
# ----------------------------------------------------------------------


def _index_header(dim):
    return ["idx"] if dim == 1 else ["idx", "idx2"]


def save_map_csv(path, u):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dom = u.domain
    header = _index_header(dom.dim) + u.space.column_names()
    idx = np.indices(dom.sizes).reshape(dom.dim, -1).T
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(dom.n_nodes):
            row = [str(int(v)) for v in idx[i]]
            row += [FLOAT_FMT % v for v in u.values[i]]
            w.writerow(row)
    return path


def load_map_csv(path, domain, space):
    path = Path(path)
    expected = _index_header(domain.dim) + space.column_names()
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != expected:
        raise ShapeMismatch(
            f"{path}: header {rows[0] if rows else []} does not match {expected}"
        )
    body = rows[1:]
    if len(body) != domain.n_nodes:
        raise ShapeMismatch(f"{path}: expected {domain.n_nodes} rows, got {len(body)}")
    values = np.zeros((domain.n_nodes, space.point_dim))
    for row in body:
        multi = tuple(int(v) for v in row[: domain.dim])
        flat = domain.node_index(multi)
        values[flat] = [float(v) for v in row[domain.dim :]]
    return GridMap(domain, space, values)


def save_trajectory_csv(outdir, traj, prefix="level"):
    """One CSV per time level plus an index manifest."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    entries = []
    for k in range(traj.values.shape[0]):
        name = f"{prefix}_{k:05d}.csv"
        save_map_csv(outdir / name, traj.level(k))
        entries.append({"level": k, "t": k * traj.tau, "file": name})
    manifest = {"tau": traj.tau, "levels": entries}
    with open(outdir / f"{prefix}_index.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return outdir
