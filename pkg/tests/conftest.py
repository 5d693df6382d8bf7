"""Shared fixtures: random generators, target-space samplers, solver runs.

The expensive solver runs used by several modules (acceptance, diagnostics,
frequency) are session-scoped so they are computed once per test session.
"""

import numpy as np
import pytest

from hmflow.config import build_initial_map, build_target, parse_config_text
from hmflow.flows import MmConfig, minimizing_movement
from hmflow.grids import GridDomain
from hmflow.targets import (
    Euclidean,
    FlatCircle,
    Hyperbolic2,
    ProductWithEuclidean,
    Spider,
    Sphere2,
)
from hmflow.wed import WedConfig, minimize_wed


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_points(space, rng, n):
    """n random points of a target kind, stacked on axis 0."""
    kind = space.kind
    if kind == "euclidean":
        return rng.normal(size=(n, space.dim))
    if kind == "flat_circle":
        return rng.uniform(0, 2 * np.pi, size=(n, 1))
    if kind == "sphere2":
        return space.retract(rng.normal(size=(n, 3)))
    if kind == "hyperbolic2":
        v = rng.normal(size=(n, 2))
        return np.stack(
            [np.sqrt(1.0 + np.sum(v * v, axis=-1)), v[:, 0], v[:, 1]], axis=-1
        )
    if kind == "spider":
        rays = rng.integers(0, space.rays, size=n).astype(float)
        radial = rng.uniform(0, 2.0, size=n)
        return space.canonical(np.stack([rays, radial], axis=-1))
    if kind == "product":
        base = random_points(space.base, rng, n)
        extra = rng.normal(size=(n, space.extra_dim))
        return np.concatenate([base, extra], axis=-1)
    raise ValueError(kind)


ALL_SPACES = [
    Euclidean(2),
    FlatCircle(1.0),
    Sphere2(),
    Hyperbolic2(),
    Spider(3),
    ProductWithEuclidean(Spider(3), 1, 0.7),
]

NPC_SPACES = [s for s in ALL_SPACES if s.npc]
# Globally CAT(0) kinds: the flat circle is only locally flat.
CAT0_SPACES = [s for s in NPC_SPACES if s.kind != "flat_circle"]


def make_init(kind, n=128, period=2 * np.pi, k=1, amplitude=0.8, rays=3, seed=0):
    """(domain, space, initial map) from the config-layer builders."""
    h = period / n
    domain = GridDomain((n,), h)
    cfg = parse_config_text(
        f"""
domain.n = {n}
domain.h = {h!r}
target.kind = {kind}
target.rays = {rays}
init.kind = sine_mode
init.k = {k}
init.amplitude = {amplitude}
"""
    )
    space = build_target(cfg)
    u0 = build_initial_map(cfg, domain, space, np.random.default_rng(seed))
    return domain, space, u0


@pytest.fixture(scope="session")
def spider_wed_run():
    """n=128 spider run at eps=0.05, tau=5e-3: the main singular-target run."""
    domain, space, u0 = make_init("spider")
    cfg = WedConfig(eps=0.05, tau=5e-3, t_max=0.25, tol=1e-10, max_sweeps=100000)
    sol = minimize_wed(u0, cfg)
    return domain, space, u0, cfg, sol


@pytest.fixture(scope="session")
def hyperbolic_wed_run():
    """n=128 hyperbolic-plane run at eps=0.05, tau=5e-3."""
    domain, space, u0 = make_init("hyperbolic", amplitude=0.9)
    cfg = WedConfig(eps=0.05, tau=5e-3, t_max=0.25, tol=1e-10, max_sweeps=100000)
    sol = minimize_wed(u0, cfg)
    return domain, space, u0, cfg, sol


@pytest.fixture(scope="session")
def circle_wed_run():
    domain, space, u0 = make_init("circle", amplitude=0.7)
    cfg = WedConfig(eps=0.05, tau=5e-3, t_max=0.25, tol=1e-10, max_sweeps=100000)
    sol = minimize_wed(u0, cfg)
    return domain, space, u0, cfg, sol


@pytest.fixture(scope="session")
def long_spider_run():
    """n=512, k=4 run over a longer horizon, warm-started from implicit Euler;
    spans the regularity-measurement window."""
    domain, space, u0 = make_init("spider", n=512, k=4)
    tau, t_max = 2e-3, 0.5
    mm_traj, _ = minimizing_movement(
        u0, MmConfig(tau=tau, steps=round(t_max / tau), inner_tol=1e-11)
    )
    cfg = WedConfig(eps=0.02, tau=tau, t_max=t_max, tol=1e-10, max_sweeps=300000)
    sol = minimize_wed(u0, cfg, init=mm_traj)
    return domain, space, u0, cfg, sol
