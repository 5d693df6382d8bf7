"""Heat flow of maps into flat and singular nonpositively curved targets.

Solvers: exponentially weighted space-time minimization, De Giorgi
minimizing movements, explicit flow on smooth targets.  Diagnostics:
energy laws, subharmonicity, Bochner sign, parabolic frequency profiles.
"""

__version__ = "0.1.0"

from . import diagnostics, flows, frequency, grids, targets, wed  # noqa: F401
from .grids import GridDomain, GridMap, Trajectory  # noqa: F401
from .targets import make_target  # noqa: F401
