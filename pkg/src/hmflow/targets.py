"""Metric target spaces: distances, geodesics, means, curvature data.

Every space operates on plain float64 arrays whose trailing axis holds the
point payload (``point_dim`` entries); leading axes are batch axes, so a
single point is a shape ``(point_dim,)`` array.  Payload layouts:

==============  =========  =======================================
kind            point_dim  payload
==============  =========  =======================================
euclidean(L)    L          ambient coordinates
flat_circle(r)  1          angle in [0, 2pi)
sphere2         3          unit vector in R^3
hyperbolic2     3          hyperboloid point, Minkowski form (-,+,+)
spider(K)       2          (ray index, radial >= 0), origin is (0, 0)
product         base + m   base payload then m euclidean extras
==============  =========  =======================================

All nonpositively curved kinds carry ``npc = True``; the flat circle is
flagged npc for solver purposes (it is flat, hence locally CAT(0)) even
though it is not globally CAT(0).  Weighted means use closed forms where
they exist (euclidean, spider, product splitting) and a damped fixed-point
tangent average elsewhere.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    EmptyInput,
    KindMismatch,
    NonUniqueGeodesic,
    UnsupportedOnTarget,
)

# Fixed-point iteration for means on curved kinds.
MEAN_DAMPING = 0.5
MEAN_TOL = 1e-10
MEAN_MAX_ITER = 200

TWO_PI = 2.0 * np.pi


def wrap_angle(theta):
    """Wrap to (-pi, pi]."""
    w = np.mod(np.asarray(theta, dtype=float) + np.pi, TWO_PI) - np.pi
    return np.where(w == -np.pi, np.pi, w)


def canonical_angle(theta):
    """Wrap to [0, 2pi)."""
    return np.mod(np.asarray(theta, dtype=float), TWO_PI)


def minkowski_dot(a, b):
    """Pairing with signature (-,+,+) on the trailing axis."""
    return -a[..., 0] * b[..., 0] + np.sum(a[..., 1:] * b[..., 1:], axis=-1)


def _as_s(s):
    """Normalize a geodesic parameter to broadcast against leading axes."""
    s = np.asarray(s, dtype=float)
    return s[..., None]


class TargetSpace:
    """Common machinery; concrete kinds override the geometry hooks."""

    kind = "abstract"
    npc = False
    point_dim = 0
    smooth = False          # admits tangent vectors / explicit flow
    embeddable = False      # has a declared small-scale isometric embedding

    # -- validation -------------------------------------------------------

    def check_points(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape[-1:] != (self.point_dim,):
            raise KindMismatch(
                f"{self.kind} expects trailing dim {self.point_dim}, "
                f"got shape {p.shape}"
            )
        return p

    def validate(self, p, atol=1e-12):
        """Raise if ``p`` violates the kind's payload invariants."""
        self.check_points(p)

    def canonical(self, p):
        """Canonical payload form (identity unless a kind overrides)."""
        return self.check_points(p)

    # -- metric geometry ---------------------------------------------------

    def distance(self, p, q):
        raise NotImplementedError

    def geodesic(self, p, q, s):
        """Constant-speed geodesic with geodesic(p,q,0)=p, geodesic(p,q,1)=q."""
        raise NotImplementedError

    def contract(self, lam, q, p):
        """Map p to the point a fraction ``lam`` along the geodesic from q."""
        lam = float(lam)
        if not 0.0 <= lam <= 1.0:
            raise ValueError("contraction parameter must lie in [0, 1]")
        if not self.npc:
            raise UnsupportedOnTarget(f"contract needs an NPC kind, not {self.kind}")
        return self.geodesic(q, p, lam)

    def frechet_mean(self, points, weights, allow_non_npc=False):
        """Weighted Frechet mean, i.e. the minimizer of sum_i w_i d^2(., p_i).

        ``points`` is stacked on axis 0 with shape (m, ..., point_dim);
        ``weights`` has shape (m,) or (m, ...) and must have positive sum.
        """
        points = self.check_points(np.asarray(points, dtype=float))
        if points.shape[0] == 0:
            raise EmptyInput("frechet_mean needs at least one point")
        if not self.npc and not allow_non_npc:
            raise UnsupportedOnTarget(
                f"frechet_mean is only guaranteed on NPC kinds, not {self.kind}"
            )
        weights = np.asarray(weights, dtype=float)
        if weights.ndim == 1:
            weights = weights.reshape((-1,) + (1,) * (points.ndim - 2))
        weights = np.broadcast_to(weights, points.shape[:-1])
        total = np.sum(weights, axis=0)
        if np.any(total <= 0):
            raise EmptyInput("weights must have positive sum")
        return self._mean(points, weights, total)

    def _mean(self, points, weights, total):
        raise NotImplementedError

    def npc_residual(self, p, q, r, lam):
        """Signed defect of the comparison inequality for the triple (p,q,r).

        Returns d^2(p, q_lam) - [(1-lam) d^2(p,q) + lam d^2(p,r)
        - lam(1-lam) d^2(q,r)] with q_lam on the geodesic from q to r;
        nonpositive (up to roundoff) exactly on CAT(0) kinds.
        """
        lam = float(lam)
        q_lam = self.geodesic(q, r, lam)
        return (
            self.distance(p, q_lam) ** 2
            - (1.0 - lam) * self.distance(p, q) ** 2
            - lam * self.distance(p, r) ** 2
            + lam * (1.0 - lam) * self.distance(q, r) ** 2
        )

    # -- smooth-kind hooks (overridden where meaningful) -------------------

    def retract(self, v):
        """Nearest-point retraction of an ambient perturbation."""
        raise UnsupportedOnTarget(f"no retraction on {self.kind}")

    def tangent_project(self, p, v):
        raise UnsupportedOnTarget(f"no tangent structure on {self.kind}")

    def tangent_residual(self, p, v):
        """Scalar violation of tangency of v at p (0 for flat kinds)."""
        raise UnsupportedOnTarget(f"no tangent structure on {self.kind}")

    def tangent_norm(self, p, v):
        raise UnsupportedOnTarget(f"no tangent structure on {self.kind}")

    def second_fundamental_form(self, p, x):
        raise UnsupportedOnTarget(
            f"second fundamental form undefined on {self.kind}"
        )

    def embed_coords(self, p):
        raise UnsupportedOnTarget(f"no declared embedding for {self.kind}")

    def chart_coords(self, p):
        """Coordinates usable for local linear fits (differentiability probes).

        Falls back to ``embed_coords``; smooth ambient kinds override.
        """
        return self.embed_coords(p)

    # -- misc ---------------------------------------------------------------

    def column_names(self):
        raise NotImplementedError

    def __eq__(self, other):
        return isinstance(other, TargetSpace) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def _key(self):
        return (self.kind,)

    def __repr__(self):
        return f"<target {self.kind}>"


class Euclidean(TargetSpace):
    """Flat R^L."""

    kind = "euclidean"
    npc = True
    smooth = True
    embeddable = True

    def __init__(self, dim):
        if dim < 1:
            raise ValueError("euclidean ambient dim must be >= 1")
        self.dim = int(dim)
        self.point_dim = self.dim

    def _key(self):
        return (self.kind, self.dim)

    def distance(self, p, q):
        p, q = self.check_points(p), self.check_points(q)
        return np.linalg.norm(p - q, axis=-1)

    def geodesic(self, p, q, s):
        p, q = self.check_points(p), self.check_points(q)
        s = _as_s(s)
        return (1.0 - s) * p + s * q

    def _mean(self, points, weights, total):
        return np.sum(weights[..., None] * points, axis=0) / total[..., None]

    def retract(self, v):
        return np.asarray(v, dtype=float)

    def tangent_project(self, p, v):
        return np.asarray(v, dtype=float)

    def tangent_residual(self, p, v):
        return np.zeros(np.asarray(v).shape[:-1])

    def tangent_norm(self, p, v):
        return np.linalg.norm(v, axis=-1)

    def second_fundamental_form(self, p, x):
        check_tangent(self, p, x)
        return np.zeros_like(self.check_points(p))

    def embed_coords(self, p):
        return self.check_points(p).copy()

    def column_names(self):
        return [f"x{i}" for i in range(self.dim)]


class FlatCircle(TargetSpace):
    """Circle of a given radius with the flat 1-D metric, angle payload.

    Treated as a smooth flat target; flagged npc so the solvers accept it,
    but it is not globally CAT(0): contraction toward q is restricted to
    points strictly closer than half the circumference.
    """

    kind = "flat_circle"
    npc = True
    smooth = True
    point_dim = 1

    def __init__(self, radius=1.0):
        if radius <= 0:
            raise ValueError("circle radius must be positive")
        self.radius = float(radius)

    def _key(self):
        return (self.kind, self.radius)

    def canonical(self, p):
        return canonical_angle(self.check_points(p))

    def distance(self, p, q):
        p, q = self.check_points(p), self.check_points(q)
        return self.radius * np.abs(wrap_angle(p[..., 0] - q[..., 0]))

    def geodesic(self, p, q, s):
        p, q = self.check_points(p), self.check_points(q)
        s = _as_s(s)
        delta = wrap_angle(q - p)
        return canonical_angle(p + s * delta)

    def contract(self, lam, q, p):
        if np.any(self.distance(p, q) >= np.pi * self.radius - 1e-14):
            raise NonUniqueGeodesic(
                "contract on the circle needs d(p, q) < pi * radius"
            )
        return super().contract(lam, q, p)

    def _mean(self, points, weights, total):
        m = points[0].copy()
        w = weights[..., None]
        for _ in range(MEAN_MAX_ITER):
            step = np.sum(w * wrap_angle(points - m), axis=0) / total[..., None]
            m = m + MEAN_DAMPING * step
            if np.max(np.abs(step)) <= MEAN_TOL:
                break
        return canonical_angle(m)

    def retract(self, v):
        return canonical_angle(np.asarray(v, dtype=float))

    def tangent_project(self, p, v):
        return np.asarray(v, dtype=float)

    def tangent_residual(self, p, v):
        return np.zeros(np.asarray(v).shape[:-1])

    def tangent_norm(self, p, v):
        return self.radius * np.abs(np.asarray(v, dtype=float)[..., 0])

    def second_fundamental_form(self, p, x):
        check_tangent(self, p, x)
        return np.zeros_like(self.check_points(p))

    def column_names(self):
        return ["theta"]


class Sphere2(TargetSpace):
    """Unit round sphere in R^3 (positively curved; not NPC)."""

    kind = "sphere2"
    npc = False
    smooth = True
    point_dim = 3

    def validate(self, p, atol=1e-12):
        p = self.check_points(p)
        err = np.max(np.abs(np.linalg.norm(p, axis=-1) - 1.0))
        if err > atol:
            raise ValueError(f"sphere point off the unit sphere by {err:.3e}")

    def distance(self, p, q):
        # arctan2 of (sine, cosine) of the angle: exact zeros on equal inputs
        # and well conditioned at both ends, unlike arccos of the dot product.
        p, q = self.check_points(p), self.check_points(q)
        cross = np.cross(p, q)
        sin = np.linalg.norm(np.atleast_1d(cross), axis=-1)
        return np.arctan2(sin, np.sum(p * q, axis=-1))

    def log(self, m, p):
        c = np.clip(np.sum(m * p, axis=-1, keepdims=True), -1.0, 1.0)
        u = p - c * m
        nu = np.linalg.norm(u, axis=-1, keepdims=True)
        theta = np.arccos(c)
        coef = np.where(nu > 1e-300, theta / np.maximum(nu, 1e-300), 1.0)
        return coef * u

    def exp(self, m, v):
        n = np.linalg.norm(v, axis=-1, keepdims=True)
        safe = np.maximum(n, 1e-300)
        out = np.cos(n) * m + np.sin(n) * (v / safe)
        return self.retract(out)

    def geodesic(self, p, q, s):
        p, q = self.check_points(p), self.check_points(q)
        dot = np.sum(p * q, axis=-1)
        if np.any(dot <= -1.0 + 1e-12):
            raise NonUniqueGeodesic("antipodal sphere points have no unique geodesic")
        s = _as_s(s)
        return self.exp(p, s * self.log(p, q))

    def _mean(self, points, weights, total):
        m = points[0].copy()
        w = weights[..., None]
        for _ in range(MEAN_MAX_ITER):
            step = np.sum(w * self.log(m, points), axis=0) / total[..., None]
            m = self.exp(m, MEAN_DAMPING * step)
            if np.max(np.linalg.norm(step, axis=-1)) <= MEAN_TOL:
                break
        return m

    def retract(self, v):
        v = np.asarray(v, dtype=float)
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    def tangent_project(self, p, v):
        p = self.check_points(p)
        return v - np.sum(p * v, axis=-1, keepdims=True) * p

    def tangent_residual(self, p, v):
        return np.abs(np.sum(self.check_points(p) * v, axis=-1))

    def tangent_norm(self, p, v):
        return np.linalg.norm(v, axis=-1)

    def second_fundamental_form(self, p, x):
        p = self.check_points(p)
        check_tangent(self, p, x)
        return -np.sum(x * x, axis=-1, keepdims=True) * p

    def column_names(self):
        return ["x", "y", "z"]


class Hyperbolic2(TargetSpace):
    """Hyperbolic plane in the hyperboloid model.

    Points sit on the upper sheet <p,p> = -1, p0 >= 1, with the Minkowski
    pairing of signature (-,+,+); the pairing is clamped to <= -1 before
    arccosh so the distance never produces NaN on rounded inputs.
    """

    kind = "hyperbolic2"
    npc = True
    smooth = True
    point_dim = 3

    def validate(self, p, atol=1e-12):
        p = self.check_points(p)
        err = np.max(np.abs(minkowski_dot(p, p) + 1.0))
        if err > atol:
            raise ValueError(f"hyperboloid constraint violated by {err:.3e}")
        if np.any(p[..., 0] < 1.0 - 1e-12):
            raise ValueError("hyperboloid point off the upper sheet")

    def distance(self, p, q):
        # arccosh(-<p,q>) rewritten through the Minkowski chord,
        # arccosh(c) = 2 asinh(sqrt((c-1)/2)) with (c-1)/2 = <p-q,p-q>/4:
        # same function, but exactly zero on equal points and fully
        # conditioned near zero (the pairing is still clamped to >= -1).
        p, q = self.check_points(p), self.check_points(q)
        diff = p - q
        chord_sq = np.maximum(minkowski_dot(diff, diff), 0.0)
        return 2.0 * np.arcsinh(0.5 * np.sqrt(chord_sq))

    def log(self, m, p):
        c = np.maximum(-minkowski_dot(m, p), 1.0)[..., None]
        u = p - c * m
        # <u,u> = c^2 - 1 = sinh(theta)^2
        su = np.sqrt(np.maximum(c * c - 1.0, 0.0))
        theta = np.arccosh(c)
        coef = np.where(su > 1e-300, theta / np.maximum(su, 1e-300), 1.0)
        return coef * u

    def exp(self, m, v):
        s2 = np.maximum(minkowski_dot(v, v), 0.0)[..., None]
        s = np.sqrt(s2)
        safe = np.maximum(s, 1e-300)
        out = np.cosh(s) * m + np.sinh(s) * (v / safe)
        return self.retract(out)

    def geodesic(self, p, q, s):
        p, q = self.check_points(p), self.check_points(q)
        s = _as_s(s)
        return self.exp(p, s * self.log(p, q))

    def _mean(self, points, weights, total):
        m = points[0].copy()
        w = weights[..., None]
        for _ in range(MEAN_MAX_ITER):
            step = np.sum(w * self.log(m, points), axis=0) / total[..., None]
            m = self.exp(m, MEAN_DAMPING * step)
            if np.max(np.sqrt(np.maximum(minkowski_dot(step, step), 0.0))) <= MEAN_TOL:
                break
        return m

    def retract(self, v):
        v = np.asarray(v, dtype=float)
        norm2 = -minkowski_dot(v, v)
        scale = np.sqrt(np.maximum(norm2, 1e-300))[..., None]
        out = v / scale
        return np.where(out[..., :1] < 0, -out, out)

    def tangent_project(self, p, v):
        p = self.check_points(p)
        return v + minkowski_dot(v, p)[..., None] * p

    def tangent_residual(self, p, v):
        return np.abs(minkowski_dot(self.check_points(p), v))

    def tangent_norm(self, p, v):
        return np.sqrt(np.maximum(minkowski_dot(v, v), 0.0))

    def second_fundamental_form(self, p, x):
        p = self.check_points(p)
        check_tangent(self, p, x)
        return minkowski_dot(x, x)[..., None] * p

    def chart_coords(self, p):
        return self.check_points(p).copy()

    def column_names(self):
        return ["x0", "x1", "x2"]


class Spider(TargetSpace):
    """K half-lines glued at one origin: the canonical singular CAT(0) target.

    Realizes the orthant space {x in R^K : x_i x_j = 0, x_i >= 0} through
    ``embed_coords``; the induced tree metric sums radial parts through the
    origin for points on different rays.
    """

    kind = "spider"
    npc = True
    point_dim = 2
    embeddable = True

    def __init__(self, rays):
        if rays < 2:
            raise ValueError("a spider needs at least 2 rays")
        self.rays = int(rays)

    def _key(self):
        return (self.kind, self.rays)

    def validate(self, p, atol=1e-12):
        p = self.check_points(p)
        ray, rad = p[..., 0], p[..., 1]
        if np.any(rad < -atol):
            raise ValueError("spider radial part must be nonnegative")
        r = np.rint(ray)
        if np.max(np.abs(ray - r)) > atol or np.any(r < 0) or np.any(r >= self.rays):
            raise ValueError("spider ray index must be an integer below the ray count")
        if np.any((rad == 0) & (r != 0)):
            raise ValueError("origin must be stored canonically as (0, 0)")

    def canonical(self, p):
        p = self.check_points(p).copy()
        rad = np.maximum(p[..., 1], 0.0)
        ray = np.where(rad > 0.0, np.rint(p[..., 0]), 0.0)
        return np.stack([ray, rad], axis=-1)

    def distance(self, p, q):
        p, q = self.check_points(p), self.check_points(q)
        a, b = p[..., 1], q[..., 1]
        same = (p[..., 0] == q[..., 0]) | (a == 0.0) | (b == 0.0)
        return np.where(same, np.abs(a - b), a + b)

    def geodesic(self, p, q, s):
        p, q = self.check_points(p), self.check_points(q)
        s = np.asarray(s, dtype=float)
        a, b = p[..., 1], q[..., 1]
        same = (p[..., 0] == q[..., 0]) | (a == 0.0) | (b == 0.0)
        ray_p = np.where(a > 0.0, p[..., 0], q[..., 0])
        # Shared-ray branch: plain linear interpolation of the radial part.
        rad_same = (1.0 - s) * a + s * b
        # Through-origin branch: walk distance s * (a + b) from p toward q.
        t = s * (a + b)
        on_p = t <= a
        ray_diff = np.where(on_p, p[..., 0], q[..., 0])
        rad_diff = np.where(on_p, a - t, t - a)
        ray = np.where(same, ray_p, ray_diff)
        rad = np.maximum(np.where(same, rad_same, rad_diff), 0.0)
        ray = np.where(rad > 0.0, ray, 0.0)
        return np.stack(np.broadcast_arrays(ray, rad), axis=-1)

    def _mean(self, points, weights, total):
        rays = points[..., 0]
        rad = points[..., 1]
        best_val = None
        best_ray = None
        best_x = None
        for r in range(self.rays):
            signed = np.where(rays == float(r), rad, -rad)
            x = np.maximum(np.sum(weights * signed, axis=0) / total, 0.0)
            val = np.sum(weights * (x[None] - signed) ** 2, axis=0)
            if best_val is None:
                best_val, best_ray, best_x = val, np.full_like(x, float(r)), x
            else:
                better = val < best_val
                best_val = np.where(better, val, best_val)
                best_ray = np.where(better, float(r), best_ray)
                best_x = np.where(better, x, best_x)
        best_ray = np.where(best_x > 0.0, best_ray, 0.0)
        return np.stack([best_ray, best_x], axis=-1)

    def embed_coords(self, p):
        p = self.check_points(p)
        out = np.zeros(p.shape[:-1] + (self.rays,))
        idx = np.rint(p[..., 0]).astype(int)
        np.put_along_axis(out, idx[..., None], p[..., 1:2], axis=-1)
        return out

    def column_names(self):
        return ["ray", "radial"]


class ProductWithEuclidean(TargetSpace):
    """Metric product of a base kind with R^m, extras scaled in the metric.

    d^2((p,a),(q,b)) = d_base^2(p,q) + scale^2 |a-b|^2; geodesics and means
    split componentwise, so the product is NPC exactly when the base is.
    """

    kind = "product"

    def __init__(self, base, extra_dim, scale=1.0):
        if extra_dim < 1:
            raise ValueError("product needs at least one extra coordinate")
        if scale <= 0:
            raise ValueError("product scale must be positive")
        self.base = base
        self.extra_dim = int(extra_dim)
        self.scale = float(scale)
        self.point_dim = base.point_dim + self.extra_dim
        self.npc = base.npc
        self.embeddable = base.embeddable

    def _key(self):
        return (self.kind, self.base._key(), self.extra_dim, self.scale)

    def split(self, p):
        p = self.check_points(p)
        return p[..., : self.base.point_dim], p[..., self.base.point_dim :]

    def join(self, b, e):
        return np.concatenate([b, e], axis=-1)

    def validate(self, p, atol=1e-12):
        b, _ = self.split(p)
        self.base.validate(b, atol)

    def canonical(self, p):
        b, e = self.split(p)
        return self.join(self.base.canonical(b), e)

    def distance(self, p, q):
        pb, pe = self.split(p)
        qb, qe = self.split(q)
        d2 = self.base.distance(pb, qb) ** 2
        d2 = d2 + self.scale**2 * np.sum((pe - qe) ** 2, axis=-1)
        return np.sqrt(d2)

    def geodesic(self, p, q, s):
        pb, pe = self.split(p)
        qb, qe = self.split(q)
        se = _as_s(s)
        return self.join(self.base.geodesic(pb, qb, s), (1.0 - se) * pe + se * qe)

    def _mean(self, points, weights, total):
        b = self.base._mean(points[..., : self.base.point_dim], weights, total)
        e = np.sum(weights[..., None] * points[..., self.base.point_dim :], axis=0)
        return self.join(b, e / total[..., None])

    def embed_coords(self, p):
        if not self.base.embeddable:
            raise UnsupportedOnTarget(
                f"product over {self.base.kind} has no declared embedding"
            )
        b, e = self.split(p)
        return np.concatenate([self.base.embed_coords(b), self.scale * e], axis=-1)

    def chart_coords(self, p):
        b, e = self.split(p)
        return np.concatenate([self.base.chart_coords(b), self.scale * e], axis=-1)

    def column_names(self):
        return self.base.column_names() + [f"e{i}" for i in range(self.extra_dim)]


def check_tangent(space, p, x, atol=1e-10):
    """Validate that x is tangent to the target at p (residual <= atol)."""
    x = np.asarray(x, dtype=float)
    res = np.max(np.atleast_1d(space.tangent_residual(p, x)))
    if res > atol:
        raise ValueError(f"vector fails tangency at the base point by {res:.3e}")
    return x


def make_target(kind, **params):
    """Factory used by the config layer.

    kind in {euclidean, circle, sphere, hyperbolic, spider, product}.
    """
    if kind == "euclidean":
        return Euclidean(params.get("dim", 1))
    if kind == "circle":
        return FlatCircle(params.get("radius", 1.0))
    if kind == "sphere":
        return Sphere2()
    if kind == "hyperbolic":
        return Hyperbolic2()
    if kind == "spider":
        return Spider(params.get("rays", 3))
    if kind == "product":
        base = params["base"]
        if isinstance(base, str):
            base = make_target(base, **params.get("base_params", {}))
        return ProductWithEuclidean(
            base, params.get("extra_dim", 1), params.get("scale", 1.0)
        )
    raise UnsupportedOnTarget(f"unknown target kind {kind!r}")
