"""Run configuration: flat dotted key-value files with a strict schema.

Format: one ``section.key = value`` per line, ``#`` comments, no nesting,
no embedded code.  Unknown keys are rejected with the offending key path;
every value is type-checked before any computation starts.  The full key
reference lives in docs/config_schema.md.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigInvalid, ConfigNotFound
from .grids import GridDomain, GridMap, load_map_csv
from .targets import canonical_angle, make_target


def _bool(text):
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser, default); required keys have default = REQUIRED
REQUIRED = object()

SCHEMA = {
    "domain.dim": (int, 1),
    "domain.n": (int, REQUIRED),
    "domain.n2": (int, None),
    "domain.h": (float, REQUIRED),
    "target.kind": (str, REQUIRED),
    "target.dim": (int, 1),
    "target.rays": (int, 3),
    "target.radius": (float, 1.0),
    "target.base": (str, "euclidean"),
    "target.extra_dim": (int, 1),
    "target.delta": (float, 1.0),
    "init.kind": (str, "constant"),
    "init.k": (int, 1),
    "init.amplitude": (float, 1.0),
    "init.d": (int, 1),
    "init.seed": (int, 0),
    "init.max_radial": (float, 1.0),
    "init.path": (str, None),
    "solver.kind": (str, "wed"),
    "wed.eps": (float, 0.05),
    "wed.tau": (float, None),
    "wed.t_max": (float, None),
    "wed.tol": (float, 1e-9),
    "wed.max_sweeps": (int, 20000),
    "mm.tau": (float, 0.01),
    "mm.steps": (int, 50),
    "mm.inner_tol": (float, 1e-10),
    "mm.inner_max_sweeps": (int, 5000),
    "flow.dt": (float, None),
    "flow.steps": (int, 100),
    "frequency.t0": (float, None),
    "frequency.node": (int, None),
    "frequency.rmin": (float, None),
    "frequency.rmax": (float, None),
    "frequency.nr": (int, 9),
    "diagnostics.energy": (_bool, True),
    "diagnostics.subharmonicity": (_bool, False),
    "diagnostics.bochner": (_bool, False),
    "diagnostics.sup_bound": (_bool, False),
    "diagnostics.regularity": (_bool, False),
    "diagnostics.tol": (float, 1e-2),
    "sweep.eps_list": (str, "0.2,0.1,0.05"),
    "output.dir": (str, "out"),
    "deterministic": (_bool, True),
    "seed": (int, 1234),
}

_TARGET_KINDS = ("euclidean", "circle", "sphere", "hyperbolic", "spider", "product")
_INIT_KINDS = ("constant", "sine_mode", "degree_map", "random_tree", "file")
_SOLVER_KINDS = ("wed", "mm", "explicit")


@dataclass
class RunConfig:
    """Validated flat configuration plus the path it was read from."""

    values: dict
    path: Path | None = None

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v


def parse_config_text(text, path=None):
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigInvalid(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in SCHEMA:
            raise ConfigInvalid(f"unknown key {key!r} (line {lineno})")
        if key in raw:
            raise ConfigInvalid(f"duplicate key {key!r} (line {lineno})")
        raw[key] = value

    values = {}
    for key, (parser, default) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = parser(raw[key])
            except (ValueError, TypeError) as exc:
                raise ConfigInvalid(f"bad value for {key!r}: {exc}") from exc
        elif default is REQUIRED:
            values[key] = None
        else:
            values[key] = default

    cfg = RunConfig(values=values, path=path)
    _validate(cfg)
    return cfg


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigNotFound(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), path=path)


def _require(cfg, key):
    if cfg.values.get(key) is None:
        raise ConfigInvalid(f"missing required key {key!r}")


def _validate(cfg):
    for key in ("domain.n", "domain.h", "target.kind"):
        _require(cfg, key)
    if cfg["domain.dim"] not in (1, 2):
        raise ConfigInvalid("domain.dim: must be 1 or 2")
    if cfg["domain.dim"] == 2 and cfg.values.get("domain.n2") is None:
        raise ConfigInvalid("domain.n2: required for 2-D domains")
    if cfg["target.kind"] not in _TARGET_KINDS:
        raise ConfigInvalid(f"target.kind: must be one of {_TARGET_KINDS}")
    if cfg["init.kind"] not in _INIT_KINDS:
        raise ConfigInvalid(f"init.kind: must be one of {_INIT_KINDS}")
    if cfg["solver.kind"] not in _SOLVER_KINDS:
        raise ConfigInvalid(f"solver.kind: must be one of {_SOLVER_KINDS}")
    if cfg["init.kind"] == "file" and cfg.values.get("init.path") is None:
        raise ConfigInvalid("init.path: required for init.kind = file")


def build_domain(cfg):
    sizes = (cfg["domain.n"],) if cfg["domain.dim"] == 1 else (
        cfg["domain.n"],
        cfg["domain.n2"],
    )
    return GridDomain(sizes=sizes, h=cfg["domain.h"])


def build_target(cfg):
    kind = cfg["target.kind"]
    return make_target(
        kind,
        dim=cfg["target.dim"],
        radius=cfg["target.radius"],
        rays=cfg["target.rays"],
        base=cfg["target.base"],
        extra_dim=cfg["target.extra_dim"],
        scale=cfg["target.delta"],
    )


def _sine_profile(cfg, domain):
    """Scalar profile a*sin(2 pi k x1/P1) (times cos(...) on the 2nd axis)."""
    coords = domain.coords()
    k = cfg["init.k"]
    amp = cfg["init.amplitude"]
    periods = domain.periods()
    s = np.sin(2 * np.pi * k * coords[:, 0] / periods[0])
    if domain.dim == 2:
        s = s * np.cos(2 * np.pi * k * coords[:, 1] / periods[1])
    return amp * s, coords, periods


def build_initial_map(cfg, domain, space, rng):
    """Initial data per target kind; semantics documented in the schema file."""
    kind = cfg["init.kind"]
    n = domain.n_nodes

    if kind == "file":
        return load_map_csv(cfg["init.path"], domain, space)

    if kind == "constant":
        return GridMap(domain, space, _basepoint(space, n))

    if kind == "sine_mode":
        s, coords, periods = _sine_profile(cfg, domain)
        return GridMap(domain, space, _sine_values(cfg, space, s, coords, periods))

    if kind == "degree_map":
        # theta = d * 2 pi x / P + amplitude * sin(2 pi k x / P): a wobbled
        # winding map; amplitude = 0 gives the exact constant-speed map.
        if space.kind != "flat_circle":
            raise ConfigInvalid("init.kind = degree_map needs target.kind = circle")
        coords = domain.coords()
        phase = 2 * np.pi * coords[:, 0] / domain.periods()[0]
        theta = canonical_angle(
            cfg["init.d"] * phase + cfg["init.amplitude"] * np.sin(cfg["init.k"] * phase)
        )
        return GridMap(domain, space, theta[:, None])

    if kind == "random_tree":
        if space.kind != "spider":
            raise ConfigInvalid("init.kind = random_tree needs target.kind = spider")
        local = np.random.default_rng(cfg["init.seed"])
        rays = local.integers(0, space.rays, size=n).astype(float)
        radial = local.uniform(0.0, cfg["init.max_radial"], size=n)
        values = space.canonical(np.stack([rays, radial], axis=-1))
        return GridMap(domain, space, values)

    raise ConfigInvalid(f"unhandled init kind {kind!r}")


def _basepoint(space, n):
    kind = space.kind
    if kind == "euclidean":
        return np.zeros((n, space.point_dim))
    if kind == "flat_circle":
        return np.zeros((n, 1))
    if kind == "sphere2":
        return np.tile([0.0, 0.0, 1.0], (n, 1))
    if kind == "hyperbolic2":
        return np.tile([1.0, 0.0, 0.0], (n, 1))
    if kind == "spider":
        return np.zeros((n, 2))
    if kind == "product":
        base = _basepoint(space.base, n)
        return np.concatenate([base, np.zeros((n, space.extra_dim))], axis=-1)
    raise ConfigInvalid(f"no basepoint rule for target {kind}")


def _sine_values(cfg, space, s, coords, periods):
    """sine_mode payloads: a scalar wobble rendered into each target kind."""
    kind = space.kind
    n = s.shape[0]
    if kind == "euclidean":
        vals = np.zeros((n, space.point_dim))
        vals[:, 0] = s
        return vals
    if kind == "flat_circle":
        return canonical_angle(s)[:, None]
    if kind in ("sphere2", "hyperbolic2"):
        # Exponential of a tangent field at the basepoint.  On 1-D domains the
        # tangent rotates at constant length (a closed metric circle, so the
        # image has 2-D span instead of collapsing onto one geodesic); on 2-D
        # domains the two tangent components carry one sine mode per axis.
        amp = cfg["init.amplitude"]
        k = cfg["init.k"]
        if coords.shape[1] == 1:
            phase = 2 * np.pi * k * coords[:, 0] / periods[0]
            t1, t2 = amp * np.sin(phase), amp * np.cos(phase)
        else:
            t1 = amp * np.sin(2 * np.pi * k * coords[:, 0] / periods[0])
            t2 = amp * np.sin(2 * np.pi * k * coords[:, 1] / periods[1])
        mag = np.sqrt(t1**2 + t2**2)
        safe = np.maximum(mag, 1e-300)
        if kind == "sphere2":
            vals = np.stack(
                [np.sin(mag) * t1 / safe, np.sin(mag) * t2 / safe, np.cos(mag)],
                axis=-1,
            )
        else:
            vals = np.stack(
                [np.cosh(mag), np.sinh(mag) * t1 / safe, np.sinh(mag) * t2 / safe],
                axis=-1,
            )
        return space.retract(vals)
    if kind == "spider":
        # Arc j of the profile (between consecutive zeros) goes out and back
        # on ray j mod K: a branch-crossing loop through the origin.
        k = cfg["init.k"]
        period = periods[0]
        arc = np.floor(2 * k * coords[:, 0] / period).astype(int)
        rays = (arc % space.rays).astype(float)
        radial = np.abs(s)
        return space.canonical(np.stack([rays, radial], axis=-1))
    if kind == "product":
        base_vals = _sine_values(cfg, space.base, s, coords, periods)
        return np.concatenate([base_vals, np.zeros((n, space.extra_dim))], axis=-1)
    raise ConfigInvalid(f"no sine_mode rule for target {kind}")
