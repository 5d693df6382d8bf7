"""Pure-numpy Gauss-Seidel sweeps over the space-time lattice.

A sweep updates every node (i, k), k >= 1, to the weighted Frechet mean of
its backward/forward temporal neighbors and its 2*dim spatial neighbors.
Nodes are processed in red-black order (parity of k + sum of grid indices),
so each half-sweep touches a set of mutually uncoupled nodes and can be
evaluated as one vectorized batch; on odd-sized grids, where two-coloring
fails across the periodic seam, the sweep falls back to a per-node loop.
"""

from __future__ import annotations

import numpy as np


class SweepPlan:
    """Precomputed gather/scatter index arrays for one lattice shape."""

    def __init__(self, domain, n_levels):
        self.domain = domain
        self.n_levels = int(n_levels)
        n = domain.n_nodes
        k_max = self.n_levels - 1
        nbr = domain.neighbor_table()
        coords = np.indices(domain.sizes).reshape(domain.dim, -1).T
        space_parity = coords.sum(axis=1) % 2

        ks = np.repeat(np.arange(1, k_max + 1), n)
        iis = np.tile(np.arange(n), k_max)
        self.two_colorable = all(sz % 2 == 0 for sz in domain.sizes)
        if self.two_colorable:
            parity = (space_parity[iis] + ks) % 2
            groups = [np.flatnonzero(parity == c) for c in (0, 1)]
        else:
            groups = [np.arange(ks.size)]

        self.batches = []
        for sel in groups:
            k_sel, i_sel = ks[sel], iis[sel]
            flat = k_sel * n + i_sel
            back = (k_sel - 1) * n + i_sel
            fwd = np.minimum(k_sel + 1, k_max) * n + i_sel
            fwd_mask = (k_sel < k_max).astype(float)
            last_mask = (k_sel == k_max).astype(float)
            spat = k_sel[:, None] * n + nbr[i_sel]
            self.batches.append((flat, back, fwd, fwd_mask, last_mask, spat))


def sweep(values, space, plan, wb, wf, ws, ws_last):
    """One in-place Gauss-Seidel sweep; returns None.

    ws applies to spatial neighbors at interior levels, ws_last at the
    terminal level (0 for the truncated weighted objective, ws for the
    single-level implicit-Euler problem).
    """
    n_levels, n, pd = values.shape
    flat_vals = values.reshape(n_levels * n, pd)
    if plan.two_colorable:
        for batch in plan.batches:
            _update_batch(flat_vals, space, batch, wb, wf, ws, ws_last)
    else:
        # Correct but slow: strict serial order node by node.
        (batch,) = plan.batches
        for j in range(batch[0].size):
            sub = tuple(a[j : j + 1] for a in batch)
            _update_batch(flat_vals, space, sub, wb, wf, ws, ws_last)


def _update_batch(flat_vals, space, batch, wb, wf, ws, ws_last):
    flat, back, fwd, fwd_mask, last_mask, spat = batch
    w_spat = ws * (1.0 - last_mask) + ws_last * last_mask
    pts = [flat_vals[back], flat_vals[fwd]]
    wts = [np.full(flat.size, wb), wf * fwd_mask]
    for j in range(spat.shape[1]):
        pts.append(flat_vals[spat[:, j]])
        wts.append(w_spat)
    points = np.stack(pts, axis=0)
    weights = np.stack(wts, axis=0)
    total = np.sum(weights, axis=0)
    flat_vals[flat] = space._mean(points, weights, total)
