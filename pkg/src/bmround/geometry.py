"""Primitives for origin-symmetric convex bodies in the plane.

Two representations share one interface:

* :class:`PolygonBody` stores the full symmetric vertex list in CCW order.
  Every quantity (gauge, radii, area, images under linear maps) is exact up
  to floating point.
* :class:`RadialBody` stores the radial function ``r(theta)`` on a uniform
  grid over ``[0, pi)``.  Between samples the reciprocal radius (the gauge
  restricted to the unit circle) is interpolated by a periodic cubic spline.

Linear maps are plain ``(2, 2)`` numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

__all__ = [
    "BodyValidationError",
    "SingularMapError",
    "SymmetricConvexBody",
    "PolygonBody",
    "RadialBody",
    "Ellipse",
    "as_map",
    "rotation",
    "validate",
    "gauge_norm",
    "radial_point",
    "inner_radius",
    "outer_radius",
    "area",
    "apply_map",
    "square",
    "regular_polygon",
    "disk",
    "lp_ball",
    "radial_distance",
    "image_radii",
    "inclusion_gauges",
]

DEFAULT_RADIAL_SAMPLES = 2048
MAX_RADIAL_SAMPLES = 1 << 16
THIN_RATIO = 1e-6


class BodyValidationError(ValueError):
    """Raised when input does not describe a valid symmetric convex body.

    ``invariant`` names the violated condition: one of ``"malformed"``,
    ``"asymmetric"``, ``"nonconvex"``, ``"origin_not_interior"`` or
    ``"degenerate"``.
    """

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class SingularMapError(ValueError):
    pass


def as_map(T) -> np.ndarray:
    """Return ``T`` as a float (2, 2) array, rejecting singular matrices."""
    M = np.array(T, dtype=float).reshape(2, 2)
    if not np.all(np.isfinite(M)):
        raise SingularMapError("linear map has non-finite entries")
    scale = float(np.max(np.abs(M)))
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if scale == 0.0 or abs(det) <= 1e-12 * scale**2:
        raise SingularMapError(f"linear map is singular (det={det:.3g})")
    M.setflags(write=False)
    return M


def rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class SymmetricConvexBody:
    """Common interface of :class:`PolygonBody` and :class:`RadialBody`."""

    def gauge(self, points) -> np.ndarray:
        raise NotImplementedError

    def radius_at(self, theta) -> np.ndarray:
        """Euclidean length of the boundary point in direction ``theta``."""
        theta = np.asarray(theta, dtype=float)
        u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        return 1.0 / self.gauge(u)

    def radial_point(self, theta: float) -> np.ndarray:
        r = float(self.radius_at(theta))
        return np.array([r * math.cos(theta), r * math.sin(theta)])

    def boundary_points(self, n: int = 4096) -> np.ndarray:
        """``n`` boundary points with directions uniform on ``[0, pi)``."""
        theta = np.arange(n) * (math.pi / n)
        r = self.radius_at(theta)
        return np.column_stack([r * np.cos(theta), r * np.sin(theta)])

    def support(self, directions) -> np.ndarray:
        raise NotImplementedError

    def inner_radius(self) -> float:
        raise NotImplementedError

    def outer_radius(self) -> float:
        raise NotImplementedError

    def area(self) -> float:
        raise NotImplementedError

    def mapped(self, T) -> "SymmetricConvexBody":
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class PolygonBody(SymmetricConvexBody):
    """Symmetric convex polygon.

    ``vertices`` has shape ``(2m, 2)``, is ordered CCW and satisfies
    ``vertices[i + m] == -vertices[i]``.  Use :func:`validate` (or
    :meth:`from_vertices`) to build one from arbitrary input.
    """

    vertices: np.ndarray
    # edge j joins vertex j to vertex j+1; the body is {x : normals @ x <= 1}
    normals: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        V = _frozen(self.vertices)
        object.__setattr__(self, "vertices", V)
        W = np.roll(V, -1, axis=0)
        cross = V[:, 0] * W[:, 1] - V[:, 1] * W[:, 0]
        # line through v, w has outward normal (w - v) rotated clockwise;
        # scale so that <n, v> = 1
        N = np.column_stack([W[:, 1] - V[:, 1], V[:, 0] - W[:, 0]]) / cross[:, None]
        object.__setattr__(self, "normals", _frozen(N))

    @classmethod
    def from_vertices(cls, vertices) -> "PolygonBody":
        return validate(vertices)

    @property
    def half(self) -> int:
        return len(self.vertices) // 2

    def gauge(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return np.max(p @ self.normals.T, axis=-1)

    def support(self, directions) -> np.ndarray:
        u = np.asarray(directions, dtype=float)
        return np.max(u @ self.vertices.T, axis=-1)

    def edge_distances(self) -> np.ndarray:
        """Distance from the origin to each edge line."""
        return 1.0 / np.hypot(self.normals[:, 0], self.normals[:, 1])

    def inner_radius(self) -> float:
        return float(np.min(self.edge_distances()))

    def outer_radius(self) -> float:
        return float(np.max(np.hypot(self.vertices[:, 0], self.vertices[:, 1])))

    def area(self) -> float:
        V = self.vertices
        W = np.roll(V, -1, axis=0)
        return 0.5 * math.fsum(V[:, 0] * W[:, 1] - V[:, 1] * W[:, 0])

    def mapped(self, T) -> "PolygonBody":
        T = as_map(T)
        V = self.vertices @ T.T
        if np.linalg.det(T) < 0:
            # reversal restores CCW order and keeps v[i+m] = -v[i]
            V = V[::-1]
        return PolygonBody(V)

    def to_json(self) -> dict:
        return {"type": "polygon", "vertices": self.vertices.tolist()}


@dataclass(frozen=True, eq=False)
class RadialBody(SymmetricConvexBody):
    """Body given by its radial function sampled at ``theta_k = k*pi/n``."""

    samples: np.ndarray
    _spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        r = _frozen(self.samples)
        object.__setattr__(self, "samples", r)
        n = len(r)
        knots = np.arange(n + 1) * (math.pi / n)
        g = np.append(1.0 / r, 1.0 / r[0])
        object.__setattr__(self, "_spline", CubicSpline(knots, g, bc_type="periodic"))

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def thetas(self) -> np.ndarray:
        return np.arange(self.n) * (math.pi / self.n)

    def _inv_radius(self, theta) -> np.ndarray:
        return self._spline(np.mod(theta, math.pi))

    def gauge(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        norm = np.hypot(p[..., 0], p[..., 1])
        theta = np.arctan2(p[..., 1], p[..., 0])
        return norm * self._inv_radius(theta)

    def radius_at(self, theta) -> np.ndarray:
        return 1.0 / self._inv_radius(np.asarray(theta, dtype=float))

    def support(self, directions) -> np.ndarray:
        u = np.asarray(directions, dtype=float)
        X = self.boundary_points(8 * self.n)
        return np.max(np.abs(u @ X.T), axis=-1)

    def _extreme_radius(self, sign: float) -> float:
        # sign=+1 finds the maximum radius, sign=-1 the minimum
        refine = 4
        m = refine * self.n
        theta = np.arange(m) * (math.pi / m)
        r = 1.0 / self._inv_radius(theta)
        k = int(np.argmax(sign * r))
        step = math.pi / m
        res = minimize_scalar(
            lambda t: -sign / float(self._inv_radius(t)),
            bounds=(theta[k] - step, theta[k] + step),
            method="bounded",
            options={"xatol": 1e-13},
        )
        return float(max(sign * r[k], -res.fun) * sign)

    def inner_radius(self) -> float:
        return self._extreme_radius(-1.0)

    def outer_radius(self) -> float:
        return self._extreme_radius(+1.0)

    def area(self) -> float:
        # (1/2) int_0^{2 pi} r^2 = int_0^pi r^2; periodic trapezoid rule
        return (math.pi / self.n) * math.fsum(self.samples**2)

    def mapped(self, T) -> "RadialBody":
        T = as_map(T)
        Tinv = np.linalg.inv(T)
        theta = self.thetas
        U = np.column_stack([np.cos(theta), np.sin(theta)])
        return RadialBody(1.0 / self.gauge(U @ Tinv.T))

    def to_json(self) -> dict:
        return {"type": "radial", "samples": self.samples.tolist()}


@dataclass(frozen=True)
class Ellipse:
    """Origin-centred ellipse; ``angle`` is the direction of the major axis."""

    semi_major: float
    semi_minor: float
    angle: float = 0.0

    def __post_init__(self):
        if not (self.semi_major >= self.semi_minor > 0):
            raise ValueError(
                f"need semi_major >= semi_minor > 0, got {self.semi_major}, {self.semi_minor}"
            )
        object.__setattr__(self, "angle", float(self.angle) % math.pi)

    @classmethod
    def from_shape(cls, M) -> "Ellipse":
        """Ellipse ``M(B)`` for the unit disk ``B``."""
        U, s, _ = np.linalg.svd(np.asarray(M, dtype=float))
        angle = math.atan2(U[1, 0], U[0, 0])
        return cls(float(s[0]), float(s[1]), angle)

    @classmethod
    def preimage_of_disk(cls, T, radius: float) -> "Ellipse":
        """The ellipse ``T^{-1}(B(0, radius))``."""
        return cls.from_shape(radius * np.linalg.inv(as_map(T)))

    @property
    def shape(self) -> np.ndarray:
        return rotation(self.angle) @ np.diag([self.semi_major, self.semi_minor])

    @property
    def axis_ratio(self) -> float:
        return self.semi_major / self.semi_minor

    def area(self) -> float:
        return math.pi * self.semi_major * self.semi_minor

    def gauge(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float) @ np.linalg.inv(self.shape).T
        return np.hypot(p[..., 0], p[..., 1])

    def support(self, directions) -> np.ndarray:
        u = np.asarray(directions, dtype=float) @ self.shape
        return np.hypot(u[..., 0], u[..., 1])

    def boundary_points(self, n: int = 4096) -> np.ndarray:
        t = np.arange(n) * (2 * math.pi / n)
        return np.column_stack([np.cos(t), np.sin(t)]) @ self.shape.T

    def to_body(self, n: int = DEFAULT_RADIAL_SAMPLES) -> RadialBody:
        theta = np.arange(n) * (math.pi / n)
        U = np.column_stack([np.cos(theta), np.sin(theta)])
        return RadialBody(1.0 / self.gauge(U))


def _angles_increase(V: np.ndarray) -> bool:
    ang = np.arctan2(V[:, 1], V[:, 0])
    d = np.mod(np.diff(np.append(ang, ang[0])), 2 * math.pi)
    return bool(np.all(d > 0) and abs(d.sum() - 2 * math.pi) < 1e-9)


def _validate_polygon(vertices) -> PolygonBody:
    V = np.asarray(vertices, dtype=float)
    if V.ndim != 2 or V.shape[1] != 2 or len(V) < 4:
        raise BodyValidationError("malformed", "need at least 4 vertices of shape (k, 2)")
    if not np.all(np.isfinite(V)):
        raise BodyValidationError("malformed", "vertices must be finite")
    scale = float(np.max(np.abs(V)))
    if scale == 0.0:
        raise BodyValidationError("origin_not_interior", "all vertices are zero")
    tol = 1e-9 * scale
    if len(V) % 2:
        raise BodyValidationError("asymmetric", "odd number of vertices")
    m = len(V) // 2
    signed = 0.5 * np.sum(V[:, 0] * np.roll(V[:, 1], -1) - V[:, 1] * np.roll(V[:, 0], -1))
    if signed < 0:
        V = V[::-1]
    elif signed == 0:
        raise BodyValidationError("origin_not_interior", "polygon has zero area")
    # symmetry in CCW order means v[i+m] = -v[i]
    if not np.allclose(np.roll(V, -m, axis=0), -V, rtol=0, atol=tol):
        matched = all(np.min(np.linalg.norm(V + v, axis=1)) <= tol for v in V)
        raise BodyValidationError(
            "asymmetric" if not matched else "nonconvex",
            "vertex set is not closed under v -> -v"
            if not matched
            else "vertices are not in convex position order",
        )
    V = 0.5 * (V - np.roll(V, -m, axis=0))
    E = np.roll(V, -1, axis=0) - V
    turn = E[:, 0] * np.roll(E[:, 1], -1) - E[:, 1] * np.roll(E[:, 0], -1)
    if np.any(turn < -1e-12 * scale**2) or np.any(np.linalg.norm(E, axis=1) <= tol):
        raise BodyValidationError("nonconvex", "polygon is not convex")
    cross = V[:, 0] * np.roll(V[:, 1], -1) - V[:, 1] * np.roll(V[:, 0], -1)
    if np.any(cross <= 0) or not _angles_increase(V):
        raise BodyValidationError("origin_not_interior", "origin is not interior to the polygon")
    # drop exactly collinear middle vertices so edges are well defined
    keep = turn > 1e-14 * scale**2
    keep = np.roll(keep, 1)
    if not keep.all() and keep.sum() >= 4:
        V = V[keep]
    body = PolygonBody(V)
    if body.inner_radius() < THIN_RATIO * body.outer_radius():
        raise BodyValidationError("degenerate", "body is too thin (inner/outer < 1e-6)")
    return body


def _validate_radial(samples) -> RadialBody:
    r = np.asarray(samples, dtype=float).ravel()
    if len(r) < 8:
        raise BodyValidationError("malformed", "need at least 8 radial samples")
    if not np.all(np.isfinite(r)):
        raise BodyValidationError("malformed", "radial samples must be finite")
    if np.any(r <= 0):
        raise BodyValidationError("origin_not_interior", "radial samples must be positive")
    if r.min() < THIN_RATIO * r.max():
        raise BodyValidationError("degenerate", "body is too thin (inner/outer < 1e-6)")
    # the sampled boundary points form a convex polygon iff the body is convex
    n = len(r)
    theta = np.arange(2 * n) * (math.pi / n)
    rr = np.concatenate([r, r])
    P = np.column_stack([rr * np.cos(theta), rr * np.sin(theta)])
    E = np.roll(P, -1, axis=0) - P
    turn = E[:, 0] * np.roll(E[:, 1], -1) - E[:, 1] * np.roll(E[:, 0], -1)
    if np.any(turn < -1e-12 * r.max() ** 2):
        raise BodyValidationError("nonconvex", "radial samples do not bound a convex body")
    return RadialBody(r)


def validate(vertices=None, *, samples=None) -> SymmetricConvexBody:
    """Build a validated body from polygon ``vertices`` or radial ``samples``.

    Raises :class:`BodyValidationError` naming the violated invariant.
    """
    if (vertices is None) == (samples is None):
        raise BodyValidationError("malformed", "give exactly one of vertices or samples")
    if vertices is not None:
        return _validate_polygon(vertices)
    return _validate_radial(samples)


def gauge_norm(body: SymmetricConvexBody, p) -> float:
    """Minkowski gauge of ``p``; ``body == {x : gauge_norm(body, x) <= 1}``."""
    return float(body.gauge(np.asarray(p, dtype=float)))


def radial_point(body: SymmetricConvexBody, theta: float) -> np.ndarray:
    return body.radial_point(theta)


def inner_radius(body: SymmetricConvexBody) -> float:
    return body.inner_radius()


def outer_radius(body: SymmetricConvexBody) -> float:
    return body.outer_radius()


def area(body: SymmetricConvexBody) -> float:
    return body.area()


def apply_map(T, body: SymmetricConvexBody) -> SymmetricConvexBody:
    """The image ``T(body)``."""
    return body.mapped(T)


def image_radii(body: SymmetricConvexBody, T) -> tuple[float, float]:
    """``(inner_radius, outer_radius)`` of ``T(body)`` without resampling."""
    T = as_map(T)
    if isinstance(body, PolygonBody):
        m = body.half
        V = body.vertices[:m]
        E = body.vertices[1 : m + 1] - V
        cross = V[:, 0] * E[:, 1] - V[:, 1] * E[:, 0]
        TE = E @ T.T
        det = abs(T[0, 0] * T[1, 1] - T[0, 1] * T[1, 0])
        inner = det * float(np.min(np.abs(cross) / np.hypot(TE[:, 0], TE[:, 1])))
        TV = V @ T.T
        return inner, float(np.max(np.hypot(TV[:, 0], TV[:, 1])))

    n = 8 * body.n
    step = math.pi / n
    theta = np.arange(n) * step
    Y = body.boundary_points(n) @ T.T
    norm = np.hypot(Y[:, 0], Y[:, 1])

    def image_norm(t):
        return float(np.hypot(*(T @ body.radial_point(t))))

    out = []
    for sign in (-1.0, 1.0):
        k = int(np.argmax(sign * norm))
        res = minimize_scalar(
            lambda t: -sign * image_norm(t),
            bounds=(theta[k] - step, theta[k] + step),
            method="bounded",
            options={"xatol": 1e-13},
        )
        out.append(sign * max(sign * norm[k], -res.fun))
    return out[0], out[1]


def inclusion_gauges(E: Ellipse, body: SymmetricConvexBody, n: int = 8192) -> tuple[float, float]:
    """``(max gauge_A over E, max gauge_E over A)``.

    ``E <= A`` iff the first is at most 1 and ``A <= s E`` iff the second is at
    most ``s``.  Exact for polygons, sampled for radial bodies.
    """
    if isinstance(body, PolygonBody):
        return float(np.max(E.support(body.normals))), float(np.max(E.gauge(body.vertices)))
    return float(np.max(body.gauge(E.boundary_points(n)))), float(np.max(E.gauge(body.boundary_points(n))))


def square(half_side: float = 1.0) -> PolygonBody:
    a = half_side
    return validate([[a, -a], [a, a], [-a, a], [-a, -a]])


def regular_polygon(n_sides: int, circumradius: float = 1.0, phase: float = 0.0) -> PolygonBody:
    if n_sides % 2 or n_sides < 4:
        raise ValueError("a symmetric regular polygon needs an even number >= 4 of sides")
    t = phase + np.arange(n_sides) * (2 * math.pi / n_sides)
    return validate(circumradius * np.column_stack([np.cos(t), np.sin(t)]))


def disk(radius: float = 1.0, n: int = DEFAULT_RADIAL_SAMPLES) -> RadialBody:
    return RadialBody(np.full(n, float(radius)))


def lp_ball(p: float, n: int = DEFAULT_RADIAL_SAMPLES) -> SymmetricConvexBody:
    """Unit ball of the l^p norm.

    ``p == inf`` and ``p == 1`` are polygons.  Otherwise the radial function
    is sampled, doubling the resolution until the area stabilises to 1e-8.
    """
    p = float(p)
    if p < 1:
        raise BodyValidationError("nonconvex", f"l^p ball is not convex for p={p}")
    if math.isinf(p):
        return square(1.0)
    if p == 1.0:
        return validate([[1, 0], [0, 1], [-1, 0], [0, -1]])

    def sampled(k: int) -> RadialBody:
        theta = np.arange(k) * (math.pi / k)
        c, s = np.abs(np.cos(theta)), np.abs(np.sin(theta))
        return RadialBody(1.0 / (c**p + s**p) ** (1.0 / p))

    body = sampled(n)
    while body.n < MAX_RADIAL_SAMPLES:
        finer = sampled(2 * body.n)
        if abs(finer.area() - body.area()) <= 1e-8 * finer.area():
            return body
        body = finer
    return body


def radial_distance(a: SymmetricConvexBody, b: SymmetricConvexBody, n: int = 8192) -> float:
    """Sup over directions of ``| r_a - r_b |``; an upper bound on Hausdorff distance."""
    theta = np.arange(n) * (math.pi / n)
    return float(np.max(np.abs(a.radius_at(theta) - b.radius_at(theta))))
