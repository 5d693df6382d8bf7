"""Backend selection for the hot Gauss-Seidel sweep kernels.

The compiled Cython extension is preferred when importable; setting
HMFLOW_PURE_PYTHON=1 in the environment forces the numpy fallback.  Both
backends implement the same node update (weighted Frechet mean of temporal
and spatial neighbors); the compiled kernel sweeps in strict serial order,
the fallback in vectorized red-black order, so individual iterates differ
while the minimizer they converge to is the same.
"""

from __future__ import annotations

import os

from .. import targets
from . import fallback

_FORCE_PY = os.environ.get("HMFLOW_PURE_PYTHON", "") not in ("", "0")

try:
    from . import _sweep as _compiled
except ImportError:  # extension not built
    _compiled = None

if _FORCE_PY:
    _compiled = None

HAVE_COMPILED = _compiled is not None
BACKEND = "compiled" if HAVE_COMPILED else "python"

_KIND_IDS = {
    targets.Euclidean: 0,
    targets.FlatCircle: 1,
    targets.Sphere2: 2,
    targets.Hyperbolic2: 3,
    targets.Spider: 4,
}


def kind_id(space):
    """Integer tag of the compiled kernel for this space, or None."""
    return _KIND_IDS.get(type(space))


class Sweeper:
    """Bound sweep kernel for one (space, domain, level-count) triple."""

    def __init__(self, space, domain, n_levels, force_python=False):
        self.space = space
        self.domain = domain
        self.n_levels = int(n_levels)
        kid = kind_id(space)
        self.use_compiled = (
            _compiled is not None
            and not force_python
            and kid is not None
            and space.point_dim <= _compiled.MAX_POINT_DIM
        )
        if self.use_compiled:
            self.name = "compiled"
            self._kid = kid
            self._rays = getattr(space, "rays", 0)
            sizes = domain.sizes
            self._n1 = sizes[0]
            self._n2 = sizes[1] if domain.dim == 2 else 1
        else:
            self.name = "python"
            self._plan = fallback.SweepPlan(domain, self.n_levels)

    def sweep(self, values, wb, wf, ws, ws_last=0.0):
        """One full Gauss-Seidel sweep over levels 1..K, in place."""
        if self.use_compiled:
            _compiled.sweep_spacetime(
                values,
                self._kid,
                self._rays,
                self.domain.dim,
                self._n1,
                self._n2,
                float(wb),
                float(wf),
                float(ws),
                float(ws_last),
            )
        else:
            fallback.sweep(values, self.space, self._plan, wb, wf, ws, ws_last)
