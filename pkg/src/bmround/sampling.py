"""Seeded random symmetric polygons."""
from __future__ import annotations

import math

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .geometry import THIN_RATIO, BodyValidationError, PolygonBody, validate

MAX_ATTEMPTS = 64


def random_body(seed: int, k: int = 6) -> PolygonBody:
    """Symmetric hull of ``k`` random points in the upper half-plane and their negatives.

    Points have direction uniform on ``[0, pi)`` and length uniform on
    ``[0.2, 1]``.  Degenerate hulls are redrawn from the substream
    ``(seed, attempt)``; the result depends only on ``(seed, k)``.
    """
    if k < 3:
        raise ValueError("random_body needs k >= 3")
    for attempt in range(MAX_ATTEMPTS):
        rng = np.random.default_rng([seed, attempt])
        theta = rng.uniform(0.0, math.pi, k)
        r = rng.uniform(0.2, 1.0, k)
        P = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        P = np.vstack([P, -P])
        try:
            hull = ConvexHull(P)
        except QhullError:
            continue
        try:
            body = validate(P[hull.vertices])
        except BodyValidationError:
            continue
        if body.inner_radius() >= THIN_RATIO * body.outer_radius():
            return body
    raise RuntimeError(f"no valid body for seed={seed}, k={k} after {MAX_ATTEMPTS} attempts")


def batch_seeds(seed: int, count: int) -> list[int]:
    """Per-item seeds for a batch; stable across platforms."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def batch_bodies(seed: int, count: int) -> list[PolygonBody]:
    """``count`` random bodies with 3 to 10 sampled points (6 to 20 vertices at most)."""
    return [random_body(s, 3 + i % 8) for i, s in enumerate(batch_seeds(seed, count))]
