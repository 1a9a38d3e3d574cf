"""Canonical ellipse fields and their complex dilatation.

A norm field assigns a symmetric convex body (the unit ball of the local
norm) to each cell of a rectangular lattice.  Each body gets its canonical
ellipse from the Banach-Mazur rounding, and each ellipse is encoded by a
complex number ``mu`` with ``|mu| < 1``: the linear map ``z -> z + mu conj(z)``
sends the unit circle onto a homothetic copy of the ellipse.  So
``|mu| = (K - 1)/(K + 1)`` for axis ratio ``K`` and ``arg mu`` is twice the
major-axis angle.  The map ``z -> z - mu conj(z)`` straightens it back to a
circle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .banach_mazur import ROUND_TOL, OptimizerError, canonical_ellipse, minimize_ratio
from .geometry import Ellipse, SymmetricConvexBody

__all__ = [
    "NormField",
    "ellipse_to_beltrami",
    "beltrami_matrix",
    "field_to_beltrami",
    "beltrami_sup",
    "affine_uniformizer",
]


@dataclass(frozen=True, eq=False)
class NormField:
    """Cellwise-constant norm field on ``rect = (x0, y0, x1, y1)``.

    ``cells`` are row-major with ``ny`` rows of ``nx`` cells; row 0 is at the
    bottom.  A constant field has a single cell.
    """

    nx: int
    ny: int
    rect: tuple[float, float, float, float]
    cells: tuple[SymmetricConvexBody, ...]

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("field needs at least one cell")
        if len(self.cells) != self.nx * self.ny:
            raise ValueError(f"expected {self.nx * self.ny} cells, got {len(self.cells)}")
        x0, y0, x1, y1 = self.rect
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"bad rectangle {self.rect}")
        object.__setattr__(self, "rect", tuple(float(v) for v in self.rect))
        object.__setattr__(self, "cells", tuple(self.cells))

    @classmethod
    def constant(cls, body: SymmetricConvexBody, rect=(0.0, 0.0, 1.0, 1.0)) -> "NormField":
        return cls(1, 1, tuple(rect), (body,))

    @property
    def is_constant(self) -> bool:
        first = self.cells[0]
        return all(c is first for c in self.cells)

    def cell_index(self, x, y) -> np.ndarray:
        """Row-major index of the field cell containing each point (clamped)."""
        x0, y0, x1, y1 = self.rect
        i = np.clip(((np.asarray(x) - x0) / (x1 - x0) * self.nx).astype(int), 0, self.nx - 1)
        j = np.clip(((np.asarray(y) - y0) / (y1 - y0) * self.ny).astype(int), 0, self.ny - 1)
        return j * self.nx + i


def ellipse_to_beltrami(E: Ellipse) -> complex:
    K = E.semi_major / E.semi_minor
    k = (K - 1.0) / (K + 1.0)
    return complex(k * math.cos(2 * E.angle), k * math.sin(2 * E.angle))


def beltrami_matrix(mu: complex) -> np.ndarray:
    """Real matrix of ``z -> z + mu conj(z)``."""
    p, q = mu.real, mu.imag
    return np.array([[1.0 + p, q], [q, 1.0 - p]])


def field_to_beltrami(field: NormField, **options) -> np.ndarray:
    """Complex dilatation of the canonical ellipse of every cell, shape ``(ny, nx)``.

    Cells whose body is an ellipse up to ``rho < 1 + 1e-9`` get ``mu = 0``.
    Bodies shared between cells are rounded once.  ``options`` go to
    :func:`minimize_ratio`.
    """
    cache: dict[int, complex] = {}
    out = np.zeros(field.nx * field.ny, dtype=complex)
    for k, body in enumerate(field.cells):
        key = id(body)
        if key not in cache:
            try:
                result = minimize_ratio(body, **options)
            except OptimizerError as err:
                raise OptimizerError(f"cell {k}: {err}", err.best) from err
            if result.rho < 1.0 + ROUND_TOL:
                cache[key] = 0j
            else:
                cache[key] = ellipse_to_beltrami(canonical_ellipse(body, result))
        out[k] = cache[key]
    return out.reshape(field.ny, field.nx)


def beltrami_sup(mu) -> float:
    """``max |mu|`` over the cells, the essential supremum of a cellwise-constant field.

    No bound below 1 is implied for arbitrary fields; the value is reported as is.
    """
    return float(np.max(np.abs(np.asarray(mu))))


def affine_uniformizer(body: SymmetricConvexBody, **options) -> np.ndarray:
    """Det-1 SPD map sending the canonical ellipse of ``body`` to a disk."""
    return minimize_ratio(body, **options).T_star
