"""Banach-Mazur rounding of a symmetric convex body.

For a body ``A`` and an invertible linear map ``T`` the rounding ratio is
``r(A, T) = L(TA) / l(TA)``, outer radius over inner radius.  Its infimum over
``GL(2)`` is the multiplicative Banach-Mazur distance from ``A`` to the disk.
Because ``r(A, c Q T) = r(A, T)`` for ``c > 0`` and orthogonal ``Q``, the search
runs over symmetric positive-definite matrices of determinant one.

A minimiser is recognised by its contact pattern: modulo ``pi`` the
directions where ``T(A)`` touches its outer circle and its inner circle must
alternate outer/inner/outer/inner.  When they do not, a stretch along the
bisector of the inner contacts lowers the ratio.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _search
from ._search import OptimizerError
from .geometry import (
    Ellipse,
    PolygonBody,
    RadialBody,
    SymmetricConvexBody,
    as_map,
    image_radii,
)

__all__ = [
    "OptimizerError",
    "RoundingResult",
    "StretchProbe",
    "Contacts",
    "ratio",
    "minimize_ratio",
    "contact_points",
    "alternation_certificate",
    "improvement_stretch",
    "stretch_bound",
    "stretch_bound_derivative",
    "directional_stretch",
    "canonical_ellipse",
    "coset_deviation",
    "same_canonical_ellipse",
    "ratio_objective",
]

ROUND_TOL = 1e-9
DEFAULT_CONTACT_TOL = 1e-5


@dataclass(frozen=True)
class RoundingResult:
    """Minimiser of the rounding ratio and its optimality certificate.

    ``T_star`` is symmetric positive definite with determinant one.  Contact
    angles are directions in ``T_star(A)`` reduced to ``[0, pi)``.
    ``full_circle`` marks the ellipse case, where every direction is a contact.
    """

    T_star: np.ndarray
    rho: float
    inner: float
    outer: float
    outer_contacts: tuple[float, ...]
    inner_contacts: tuple[float, ...]
    certified: bool
    full_circle: bool = False
    evaluations: int = 0
    restarts: tuple[np.ndarray, ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class StretchProbe:
    """Improving stretch for a map whose contacts fail to alternate.

    ``direction`` is the stretch axis (angle in the frame of ``T(A)``),
    ``theta`` half the angular width of the inner-contact arc,
    ``theta_ell = arccos(l)`` with ``l`` the inner radius after scaling the
    outer radius to one, and ``derivative`` the slope at ``lam = 1`` of the
    upper bound :func:`stretch_bound` on the squared ratio.
    """

    direction: float
    derivative: float
    theta: float
    theta_ell: float


class Contacts(NamedTuple):
    outer: tuple[float, ...]
    inner: tuple[float, ...]
    full_circle: bool = False


def ratio(body: SymmetricConvexBody, T) -> float:
    """``L(TA) / l(TA)``."""
    inner, outer = image_radii(body, T)
    return outer / inner


def ratio_objective(body: SymmetricConvexBody, dense: bool = True):
    """Squared rounding ratio as a function of the entries of ``P = T^T T``.

    Only valid for ``det P = 1``.  Vectorised for :func:`_search.search`.
    """
    if isinstance(body, PolygonBody):
        m = body.half
        V = body.vertices[:m]
        E = body.vertices[1 : m + 1] - V
        c2 = (V[:, 0] * E[:, 1] - V[:, 1] * E[:, 0]) ** 2
        vx, vy = V[:, 0], V[:, 1]
        ex, ey = E[:, 0] / np.sqrt(c2), E[:, 1] / np.sqrt(c2)

        def objective(p11, p12, p22):
            p11, p12, p22 = p11[..., None], p12[..., None], p22[..., None]
            outer2 = np.max(p11 * vx * vx + 2 * p12 * vx * vy + p22 * vy * vy, axis=-1)
            inv_inner2 = np.max(p11 * ex * ex + 2 * p12 * ex * ey + p22 * ey * ey, axis=-1)
            return outer2 * inv_inner2

        return objective

    X = body.boundary_points(4 * body.n if dense else body.n)
    xx, xy, yy = X[:, 0] ** 2, 2 * X[:, 0] * X[:, 1], X[:, 1] ** 2

    def objective(p11, p12, p22):
        q = p11[..., None] * xx + p12[..., None] * xy + p22[..., None] * yy
        return np.max(q, axis=-1) / np.min(q, axis=-1)

    return objective


def _search_bound(body: SymmetricConvexBody) -> float:
    return 2.0 * body.outer_radius() / body.inner_radius()


def minimize_ratio(
    body: SymmetricConvexBody,
    grid_n: int = 200,
    restarts: int = 1,
    tol: float = ROUND_TOL,
    seed: int = 0,
    contact_tol: float = DEFAULT_CONTACT_TOL,
) -> RoundingResult:
    """Find ``T`` minimising ``r(A, T)``.

    The first run uses the plain grid; further restarts shift the grid and
    reorient the local simplex with a generator seeded by ``seed``.  The best
    run is returned and every run's minimiser is kept in ``restarts``.

    Raises
    ------
    OptimizerError
        if the local phase neither converged nor reached a certified point;
        ``err.best`` carries the best result found.
    """
    coarse = ratio_objective(body, dense=False)
    fine = coarse if isinstance(body, PolygonBody) else ratio_objective(body, dense=True)
    rng = np.random.default_rng(seed)
    bound = _search_bound(body)
    runs = [
        _search.search(coarse, bound, grid_n, tol, None if k == 0 else rng, local_objective=fine)
        for k in range(max(restarts, 1))
    ]
    best = min(runs, key=lambda r: r.value)
    T = _search.stretch_from_disk(best.a, best.b)
    inner, outer = image_radii(body, T)
    rho = outer / inner
    if rho < 1.0 + ROUND_TOL:
        contacts = Contacts((), (), True)
        certified = True
    else:
        contacts = contact_points(body, T, contact_tol)
        certified = alternation_certificate(*contacts)
    result = RoundingResult(
        T_star=T,
        rho=rho,
        inner=inner,
        outer=outer,
        outer_contacts=contacts.outer,
        inner_contacts=contacts.inner,
        certified=certified,
        full_circle=contacts.full_circle,
        evaluations=sum(r.evaluations for r in runs),
        restarts=tuple(_search.stretch_from_disk(r.a, r.b) for r in runs),
    )
    if not best.converged and not certified:
        raise OptimizerError(f"local refinement did not converge (rho={rho:.15g})", result)
    return result


def _merge_runs(angles: np.ndarray, flags: np.ndarray, links: np.ndarray) -> tuple[tuple[float, ...], bool]:
    """Collapse runs of linked flagged items on a cycle to their mid angle.

    ``angles`` increase along the cycle and item ``k + len`` sits at
    ``angles[k] + pi``.  ``links[k]`` says whether items ``k`` and ``k + 1``
    belong to the same boundary arc.  Returns the run midpoints reduced mod
    ``pi`` and whether one run covers the whole cycle.
    """
    m = len(angles)
    if not flags.any():
        return (), False
    joined = flags & np.roll(flags, -1) & links
    if joined.all():
        return (), True
    # start scanning right after a break so no run straddles the start
    start = int(np.flatnonzero(~joined)[0]) + 1
    mids = []
    k = 0
    while k < m:
        idx = (start + k) % m
        if not flags[idx]:
            k += 1
            continue
        first = angles[idx] + (math.pi if start + k >= m else 0.0)
        last = first
        while k + 1 < m and joined[(start + k) % m]:
            k += 1
            j = (start + k) % m
            last = angles[j] + (math.pi if start + k >= m else 0.0)
        mids.append(float((first + last) / 2.0) % math.pi)
        k += 1
    return tuple(sorted(mids)), False


def _increasing(angles: np.ndarray) -> np.ndarray:
    steps = np.mod(np.diff(angles), 2 * math.pi)
    return angles[0] + np.concatenate([[0.0], np.cumsum(steps)])


def contact_points(body: SymmetricConvexBody, T, tol: float = DEFAULT_CONTACT_TOL) -> Contacts:
    """Directions where ``T(A)`` touches its outer or inner circle.

    A direction is an outer contact when ``|z| >= L (1 - tol)`` and an inner
    contact when ``|z| <= l (1 + tol)``.  Adjacent contacts along one boundary
    arc are merged to the arc's midpoint.  Angles are reduced to ``[0, pi)``.
    """
    T = as_map(T)
    inner, outer = image_radii(body, T)
    if outer / inner < 1.0 + ROUND_TOL:
        return Contacts((), (), True)
    hi, lo = outer * (1.0 - tol), inner * (1.0 + tol)

    if isinstance(body, PolygonBody):
        image = body.mapped(T)
        m = image.half
        W = image.vertices[: m + 1]
        vnorm = np.hypot(W[:, 0], W[:, 1])
        E = W[1:] - W[:-1]
        t = np.clip(-np.sum(W[:-1] * E, axis=1) / np.sum(E * E, axis=1), 0.0, 1.0)
        C = W[:-1] + t[:, None] * E
        cnorm = np.hypot(C[:, 0], C[:, 1])
        vang = _increasing(np.arctan2(W[:m, 1], W[:m, 0]))
        cang = _increasing(np.arctan2(C[:, 1], C[:, 0]))
        # vertices k, k+1 share an arc iff edge k stays near the outer circle;
        # edges k, k+1 share an arc iff vertex k+1 stays near the inner circle
        outer_c, _ = _merge_runs(vang, vnorm[:m] >= hi, cnorm >= hi)
        inner_c, _ = _merge_runs(cang, cnorm <= lo, vnorm[1:] <= lo)
        return Contacts(outer_c, inner_c, False)

    n = 8 * body.n
    Y = body.boundary_points(n) @ T.T
    if np.linalg.det(T) < 0:
        Y = -Y[::-1]
    norm = np.hypot(Y[:, 0], Y[:, 1])
    ang = _increasing(np.arctan2(Y[:, 1], Y[:, 0]))
    links = np.ones(n, dtype=bool)
    outer_c, full_o = _merge_runs(ang, norm >= hi, links)
    inner_c, full_i = _merge_runs(ang, norm <= lo, links)
    return Contacts(outer_c, inner_c, full_o and full_i)


def alternation_certificate(outer, inner, full_circle: bool = False) -> bool:
    """True iff outer and inner contacts alternate at least twice modulo ``pi``.

    That is, some rotation of ``[0, pi)`` contains angles
    ``t0 < t1 < t2 < t3`` that are outer, inner, outer, inner contacts.
    """
    if full_circle:
        return True
    items = sorted([(a % math.pi, 0) for a in outer] + [(a % math.pi, 1) for a in inner])
    labels = [lab for _, lab in items]
    changes = sum(labels[k] != labels[k - 1] for k in range(len(labels)))
    return changes >= 4


def stretch_bound(lam, ell: float, theta: float, eps: float = 0.0):
    """Upper bound on the squared ratio after stretching by ``lam``.

    The numerator is the squared image of the unit vector at angle
    ``theta + arccos(ell) - eps`` from the stretch axis, the denominator that
    of the vector of length ``ell`` at angle ``theta + eps``.
    """
    lam = np.asarray(lam, dtype=float)
    a = theta + math.acos(ell) - eps
    b = theta + eps
    num = lam**2 * math.cos(a) ** 2 + math.sin(a) ** 2
    den = ell**2 * (lam**2 * math.cos(b) ** 2 + math.sin(b) ** 2)
    return num / den


def stretch_bound_derivative(lam, ell: float, theta: float):
    """d/dlam of ``stretch_bound(lam, ell, theta)`` at ``eps = 0``.

    Negative for ``lam > 0`` whenever ``2 theta + arccos(ell) < pi`` and
    ``ell < 1``.
    """
    lam = np.asarray(lam, dtype=float)
    theta_ell = math.acos(ell)
    den = ell**2 * (lam**2 * math.cos(theta) ** 2 + math.sin(theta) ** 2) ** 2
    return -2.0 * lam * math.sqrt(1.0 - ell * ell) * math.sin(2 * theta + theta_ell) / den


def directional_stretch(direction: float, lam: float) -> np.ndarray:
    """The map ``(x, y) -> (lam x, y)`` in the frame rotated by ``direction``."""
    c, s = math.cos(direction), math.sin(direction)
    R = np.array([[c, -s], [s, c]])
    return R @ np.diag([lam, 1.0]) @ R.T


def improvement_stretch(
    body: SymmetricConvexBody, T, tol: float = DEFAULT_CONTACT_TOL
) -> StretchProbe | None:
    """Improving stretch direction when the contacts of ``T(A)`` do not alternate.

    Returns ``None`` when they alternate (or ``T(A)`` is a disk).  Otherwise
    every inner contact lies in one arc free of outer contacts; stretching
    along the bisector of that arc pushes the inner circle out faster than
    the outer one, and ``directional_stretch(probe.direction, lam) @ T`` has
    a smaller ratio for ``lam`` slightly above one.
    """
    contacts = contact_points(body, T, tol)
    if contacts.full_circle or alternation_certificate(*contacts):
        return None
    items = sorted([(a % math.pi, 0) for a in contacts.outer] + [(a % math.pi, 1) for a in contacts.inner])
    k = len(items)
    first = next(i for i in range(k) if items[i][1] == 1 and items[i - 1][1] == 0)
    arc = []
    for step in range(k):
        i = (first + step) % k
        if items[i][1] != 1:
            break
        arc.append(items[i][0] + (math.pi if first + step >= k else 0.0))
    theta1, theta3 = arc[0], arc[-1]
    inner, outer = image_radii(body, T)
    ell = inner / outer
    theta = 0.5 * (theta3 - theta1)
    return StretchProbe(
        direction=(0.5 * (theta1 + theta3)) % math.pi,
        derivative=float(stretch_bound_derivative(1.0, ell, theta)),
        theta=theta,
        theta_ell=math.acos(ell),
    )


def canonical_ellipse(body: SymmetricConvexBody, result: RoundingResult) -> Ellipse:
    """``T*^{-1}`` applied to the disk of radius ``l(T* A)``; ``E <= A <= rho E``."""
    return Ellipse.preimage_of_disk(result.T_star, result.inner)


def coset_deviation(T1, T2) -> float:
    """Singular-value ratio of ``T1 T2^{-1}`` minus one; zero iff ``T1 = c Q T2``."""
    M = as_map(T1) @ np.linalg.inv(as_map(T2))
    s = np.linalg.svd(M, compute_uv=False)
    return float(s[0] / s[1] - 1.0)


def same_canonical_ellipse(T1, T2, tol: float = 1e-6) -> bool:
    """Whether ``T1^{-1}(B)`` and ``T2^{-1}(B)`` agree up to scale."""
    return coset_deviation(T1, T2) <= tol
