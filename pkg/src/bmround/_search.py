"""Two-parameter search over symmetric positive-definite matrices of det 1.

A det-1 SPD matrix ``T`` is the stretch by ``lam >= 1`` along the angle
``phi``: ``T = R(phi) diag(lam, 1/lam) R(phi)^T``.  Objectives are written in
terms of ``P = T^T T`` and only see its three entries.

The coarse phase scans a grid in ``(log lam, phi)``.  The local phase runs
Nelder-Mead in the projective disk coordinates ``(a, b)`` where
``P ~ [[1 + a, b], [b, 1 - a]]``; these have no singularity at the identity,
and a ratio of the form ``max_i x_i^T P x_i / min_j y_j^T P y_j`` is
quasi-convex in them, so the local phase cannot get trapped away from the
minimiser.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize

# objective(p11, p12, p22) -> values, vectorised over equal-shape arrays
Objective = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

_CHUNK = 4096


class OptimizerError(RuntimeError):
    """Local refinement did not converge; ``best`` holds the best point found."""

    def __init__(self, message: str, best):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class SearchResult:
    a: float
    b: float
    value: float
    evaluations: int
    converged: bool


def grid_to_disk(log_lam, phi):
    rho = np.tanh(2.0 * np.asarray(log_lam))
    return rho * np.cos(2.0 * np.asarray(phi)), rho * np.sin(2.0 * np.asarray(phi))


def disk_to_grid(a: float, b: float) -> tuple[float, float]:
    rho = math.hypot(a, b)
    return 0.5 * math.atanh(min(rho, 1 - 1e-16)), (0.5 * math.atan2(b, a)) % math.pi


def disk_to_P(a, b):
    """Entries of the det-1 matrix ``P`` at disk coordinates ``(a, b)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = np.sqrt(np.maximum(1.0 - a * a - b * b, 0.0))
    return (1.0 + a) / s, b / s, (1.0 - a) / s


def stretch_from_disk(a: float, b: float) -> np.ndarray:
    """The SPD det-1 square root ``T`` of ``P(a, b)``."""
    p11, p12, p22 = (float(v) for v in disk_to_P(a, b))
    # sqrt of a 2x2 SPD matrix with det 1: (P + I) / sqrt(tr P + 2)
    k = 1.0 / math.sqrt(p11 + p22 + 2.0)
    return np.array([[(p11 + 1.0) * k, p12 * k], [p12 * k, (p22 + 1.0) * k]])


def disk_from_stretch(T) -> tuple[float, float]:
    """Inverse of :func:`stretch_from_disk` for a symmetric positive definite ``T``."""
    P = np.asarray(T, dtype=float)
    P = P.T @ P
    tr = P[0, 0] + P[1, 1]
    return float((P[0, 0] - P[1, 1]) / tr), float(2.0 * P[0, 1] / tr)


def stretch_matrix(lam: float, phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    R = np.array([[c, -s], [s, c]])
    return R @ np.diag([lam, 1.0 / lam]) @ R.T


def _evaluate_grid(objective: Objective, log_lam: np.ndarray, phi: np.ndarray) -> np.ndarray:
    LL, PH = np.meshgrid(log_lam, phi, indexing="ij")
    a, b = grid_to_disk(LL.ravel(), PH.ravel())
    out = np.empty(a.size)
    for start in range(0, a.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        out[sl] = objective(*disk_to_P(a[sl], b[sl]))
    return out.reshape(LL.shape)


def search(
    objective: Objective,
    lam_max: float,
    grid_n: int = 200,
    tol: float = 1e-9,
    rng: np.random.Generator | None = None,
    max_rounds: int = 8,
    local_objective: Objective | None = None,
    polish: bool = False,
) -> SearchResult:
    """Minimise ``objective`` over det-1 SPD matrices.

    ``local_objective``, when given, replaces ``objective`` in the local phase
    (a cheap coarse objective can drive the grid).  ``polish`` adds restarts
    from simplices of several sizes and orientations.  With ``rng`` given the grid is shifted by a random fraction of a cell and
    the first simplex is randomly oriented, which makes repeated calls
    independent restarts.
    """
    top = math.log(max(lam_max, 1.0 + 1e-6))
    d_log = top / max(grid_n - 1, 1)
    d_phi = math.pi / grid_n
    off_l, off_p = (0.0, 0.0) if rng is None else rng.uniform(0.0, 1.0, 2)
    log_lam = np.minimum((np.arange(grid_n) + off_l) * d_log, top)
    phi = (np.arange(grid_n) + off_p) * d_phi
    values = _evaluate_grid(objective, log_lam, phi)
    # argmin returns the first minimum: lowest lam, then lowest phi
    i, j = np.unravel_index(int(np.argmin(values)), values.shape)
    evaluations = values.size

    local = objective if local_objective is None else local_objective

    def f(x):
        if x[0] * x[0] + x[1] * x[1] >= 1.0:
            return math.inf
        return float(local(*disk_to_P(x[0], x[1])))

    x = np.array(grid_to_disk(log_lam[i], phi[j]), dtype=float)
    fx = f(x)
    # simplex about one grid cell wide in disk coordinates
    r = math.tanh(2 * log_lam[i])
    size = max(2.0 * d_log * (1.0 - r * r), 2.0 * d_phi * r, 1e-6)
    angle = 0.0 if rng is None else rng.uniform(0.0, 2 * math.pi)

    def nelder_mead(x, size, angle):
        dirs = np.array([[math.cos(angle + k * 2 * math.pi / 3), math.sin(angle + k * 2 * math.pi / 3)] for k in (1, 2)])
        return minimize(
            f,
            x,
            method="Nelder-Mead",
            options={
                "initial_simplex": np.vstack([x, x + size * dirs]),
                "xatol": tol,
                "fatol": tol * 1e-3,
                "maxiter": 4000,
                "maxfev": 8000,
            },
        )

    converged = False
    for _ in range(max_rounds):
        res = nelder_mead(x, size, angle)
        evaluations += res.nfev
        moved = float(np.hypot(*(res.x - x)))
        if res.fun < fx:
            x, fx = np.array(res.x), float(res.fun)
        if res.success and moved <= 10 * tol:
            converged = True
            break
        size = max(min(size, 10 * moved), 10 * tol)
        angle += 0.5
    # Nelder-Mead can stall on a kink that is not the minimum; fresh simplices
    # of several sizes and orientations get it moving along the kink again
    for _ in range(max_rounds if polish else 0):
        improved = False
        for size in (1e-2, 1e-4, 1e-6):
            for turn in (0.0, math.pi / 3):
                res = nelder_mead(x, size, angle + turn)
                evaluations += res.nfev
                if res.fun < fx:
                    improved = improved or float(np.hypot(*(res.x - x))) > 10 * tol
                    x, fx = np.array(res.x), float(res.fun)
        angle += 0.7
        if not improved:
            break
    return SearchResult(float(x[0]), float(x[1]), fx, evaluations, converged)
