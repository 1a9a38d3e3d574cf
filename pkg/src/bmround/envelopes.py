"""Area envelopes for optimally rounded bodies, the John ellipse and dilatation factors.

Scale an optimally rounded body so that its outer radius is 1 and let ``l``
be its inner radius, so ``2**-0.5 <= l <= 1``.  Its area then lies between
``m_env(l)`` and ``M_env(l)``, and these envelopes in turn give
``2 <= area <= 4 l**2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _search
from .banach_mazur import RoundingResult
from .geometry import (
    Ellipse,
    PolygonBody,
    SymmetricConvexBody,
    as_map,
    image_radii,
    inclusion_gauges,
)

__all__ = [
    "ELL_MIN",
    "Lemma1Report",
    "M_env",
    "m_env",
    "envelope_derivatives",
    "verify_lemma1",
    "default_tol",
    "john_ellipse",
    "dilatation_factors",
]

ELL_MIN = 2.0**-0.5


def _check_domain(ell) -> np.ndarray:
    ell = np.asarray(ell, dtype=float)
    if np.any((ell < ELL_MIN) | (ell > 1.0)) or np.any(np.isnan(ell)):
        raise ValueError(f"envelopes are defined for ell in [2**-0.5, 1], got {ell}")
    return ell


def M_env(ell):
    """Upper area envelope ``pi - 4 arccos(l) + 4 l sqrt(1 - l^2)``."""
    ell = _check_domain(ell)
    return np.pi - 4.0 * np.arccos(ell) + 4.0 * ell * np.sqrt(1.0 - ell * ell)


def m_env(ell):
    """Lower area envelope ``(pi - 4 arccos(l)) l^2 + 4 l sqrt(1 - l^2)``."""
    ell = _check_domain(ell)
    return (np.pi - 4.0 * np.arccos(ell)) * ell * ell + 4.0 * ell * np.sqrt(1.0 - ell * ell)


def envelope_derivatives(ell):
    """``(M_env'(l), m_env'(l))``."""
    ell = _check_domain(ell)
    root = np.sqrt(1.0 - ell * ell)
    return 8.0 * root, 2.0 * np.pi * ell + 4.0 * root - 8.0 * ell * np.arccos(ell)


@dataclass(frozen=True)
class Lemma1Report:
    """Area bounds for one optimally rounded body, normalised to outer radius 1."""

    ell: float
    area: float
    lower_ok: bool
    upper_ok: bool
    envelope_ok: bool
    K_O_factor: float
    K_I_factor: float
    M: float
    m: float


def default_tol(body: SymmetricConvexBody) -> float:
    # radial bodies carry quadrature error in the area
    return 1e-6 if isinstance(body, PolygonBody) else 1e-4


def verify_lemma1(body: SymmetricConvexBody, result: RoundingResult, tol: float | None = None) -> Lemma1Report:
    """Check ``m_env(l) <= |T*A| <= M_env(l)``, ``|T*A| >= 2`` and ``|T*A| <= 4 l^2``.

    All quantities are taken after scaling ``T*A`` to outer radius 1.  An
    ``l`` outside ``[2**-0.5, 1]`` by more than ``tol`` fails every check.
    """
    if tol is None:
        tol = default_tol(body)
    T = as_map(result.T_star)
    outer, inner = result.outer, result.inner
    area = abs(np.linalg.det(T)) * body.area() / outer**2
    ell = inner / outer
    lower_ok = area >= 2.0 - tol
    upper_ok = area <= 4.0 * ell * ell + tol
    if ELL_MIN - tol <= ell <= 1.0 + tol:
        e = min(max(ell, ELL_MIN), 1.0)
        M, m = float(M_env(e)), float(m_env(e))
        envelope_ok = m - tol <= area <= M + tol
    else:
        M = m = math.nan
        envelope_ok = lower_ok = upper_ok = False
    return Lemma1Report(
        ell=ell,
        area=area,
        lower_ok=bool(lower_ok),
        upper_ok=bool(upper_ok),
        envelope_ok=bool(envelope_ok),
        K_O_factor=math.pi / area,
        K_I_factor=area / (math.pi * ell * ell),
        M=M,
        m=m,
    )


def _inner_objective(body: SymmetricConvexBody, dense: bool):
    # 1 / l(TA)^2 for det-1 T, as a function of P = T^T T
    if isinstance(body, PolygonBody):
        m = body.half
        V = body.vertices[:m]
        E = body.vertices[1 : m + 1] - V
        c = np.abs(V[:, 0] * E[:, 1] - V[:, 1] * E[:, 0])
        ex, ey = E[:, 0] / c, E[:, 1] / c

        def objective(p11, p12, p22):
            p11, p12, p22 = p11[..., None], p12[..., None], p22[..., None]
            return np.max(p11 * ex * ex + 2 * p12 * ex * ey + p22 * ey * ey, axis=-1)

        return objective

    X = body.boundary_points(4 * body.n if dense else body.n)
    xx, xy, yy = X[:, 0] ** 2, 2 * X[:, 0] * X[:, 1], X[:, 1] ** 2

    def objective(p11, p12, p22):
        q = p11[..., None] * xx + p12[..., None] * xy + p22[..., None] * yy
        return 1.0 / np.min(q, axis=-1)

    return objective


def john_ellipse(body: SymmetricConvexBody, grid_n: int = 200, tol: float = 1e-10) -> Ellipse:
    """Maximal-area ellipse inside ``body``; satisfies ``E <= A <= sqrt(2) E``.

    For det-1 ``T`` the ellipse ``T^{-1}(B(0, l(TA)))`` is the largest one of its
    shape inside ``A`` and has area ``pi l(TA)^2``, so maximising ``l(TA)``
    over det-1 ``T`` gives the John ellipse.

    Raises
    ------
    OptimizerError
        if the local search did not converge.
    """
    coarse = _inner_objective(body, dense=False)
    fine = coarse if isinstance(body, PolygonBody) else _inner_objective(body, dense=True)
    bound = 2.0 * body.outer_radius() / body.inner_radius()
    res = _search.search(coarse, bound, grid_n, tol, local_objective=fine, polish=True)
    T = _search.stretch_from_disk(res.a, res.b)
    inner, _ = image_radii(body, T)
    E = Ellipse.preimage_of_disk(T, inner)
    if not res.converged:
        raise _search.OptimizerError("John ellipse search did not converge", E)
    return E


def dilatation_factors(body: SymmetricConvexBody, T) -> tuple[float, float]:
    """``(pi L(TA)^2 / |TA|, |TA| / (pi l(TA)^2))``.

    At a minimiser of the rounding ratio these are at most ``pi/2`` and
    ``4/pi``; their product is ``L^2 / l^2 = r(A, T)^2 <= 2``.
    """
    T = as_map(T)
    inner, outer = image_radii(body, T)
    area = abs(np.linalg.det(T)) * body.area()
    return math.pi * outer**2 / area, area / (math.pi * inner**2)
