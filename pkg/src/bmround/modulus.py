"""Discrete conformal 2-modulus of curve families on normed-plane grids.

The domain is cut into square cells of side ``h``, each carrying one density
value ``rho(c)`` and the norm of the field at its centre.  Curves are paths
on the cell adjacency graph (axis steps, optionally diagonal steps).  A step
between neighbouring cells ``c, c'`` along the vector ``d`` has length
``(rho(c) |d|_c + rho(c') |d|_c') / 2``; a path also pays for the half step
from the source boundary to its first cell centre and from its last cell
centre to the sink boundary.  Cell areas are the Hausdorff 2-measure of the
local norm, ``pi / Leb(unit ball)`` times the Lebesgue area.

The modulus ``min sum_c w(c) rho(c)^2`` subject to every path having length
at least 1 is computed by constraint generation.  Paths shorter than
``1 - feas_tol`` under the current density become constraints and the
restricted quadratic program is re-solved, until the shortest path is long
enough.  The constraint set starts from Euclidean geodesics and Dijkstra
breaks ties towards Euclidean-short paths; in degenerate metrics such as
l-infinity, where many paths tie, this keeps the active set small.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_triangular
from scipy.sparse.csgraph import dijkstra

from .ellipse_field import NormField, affine_uniformizer
from .geometry import Ellipse

__all__ = [
    "ModulusError",
    "CurveFamily",
    "GridDomain",
    "ModulusResult",
    "build_grid",
    "discrete_modulus",
    "ModulusComparison",
    "compare_moduli",
    "modulus_ratio",
]

# unit steps; the first four are the axis steps
STEPS = np.array([(1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, 1), (-1, -1), (1, -1)])
RECT_SIDES = ("left", "right", "bottom", "top")
DIAMOND_SIDES = ("sw", "ne", "nw", "se")


class ModulusError(RuntimeError):
    """Constraint generation hit ``max_iter``; carries the partial result."""

    def __init__(self, message: str, result: "ModulusResult"):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class CurveFamily:
    """Paths in the grid domain joining the source boundary to the sink boundary.

    Sides are ``"left"``, ``"right"``, ``"bottom"``, ``"top"`` or
    ``("arc", t0, t1)`` (boundary cells whose direction from the centre lies
    in ``[t0, t1]`` modulo ``2 pi``) on a rectangle, and ``"sw"``, ``"ne"``,
    ``"nw"``, ``"se"`` on the diamond inscribed in it.  A tuple of sides is
    their union.
    """

    source: tuple
    sink: tuple
    connectivity: str = "diag"
    domain: str = "rect"

    def __post_init__(self):
        if self.connectivity not in ("axis", "diag"):
            raise ValueError(f"connectivity must be 'axis' or 'diag', got {self.connectivity!r}")
        if self.domain not in ("rect", "diamond"):
            raise ValueError(f"domain must be 'rect' or 'diamond', got {self.domain!r}")
        allowed = RECT_SIDES if self.domain == "rect" else DIAMOND_SIDES
        for side in self.source + self.sink:
            if isinstance(side, str) and side not in allowed:
                raise ValueError(f"side {side!r} not available on a {self.domain}")
            if not isinstance(side, str) and (self.domain != "rect" or side[0] != "arc"):
                raise ValueError(f"bad side {side!r}")

    @classmethod
    def from_spec(cls, spec: dict) -> "CurveFamily":
        """Build from ``{"source": ..., "sink": ..., "connectivity": ..., "domain": ...}``.

        A side is a name, ``{"arc": [t0, t1]}`` or a list of those.
        """

        def sides(value):
            if isinstance(value, list):
                return tuple(s for v in value for s in sides(v))
            if isinstance(value, dict):
                t0, t1 = value["arc"]
                return (("arc", float(t0), float(t1)),)
            return (str(value),)

        return cls(
            sides(spec["source"]),
            sides(spec["sink"]),
            spec.get("connectivity", "diag"),
            spec.get("domain", "rect"),
        )

    def to_spec(self) -> dict:
        def enc(s):
            return s if isinstance(s, str) else {"arc": [s[1], s[2]]}

        return {
            "source": [enc(s) for s in self.source],
            "sink": [enc(s) for s in self.sink],
            "connectivity": self.connectivity,
            "domain": self.domain,
        }


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Square-cell discretisation of a norm field over its rectangle.

    ``cell_area_weight`` and ``step_length`` have shapes ``(ny, nx)`` and
    ``(ny, nx, 8)``; ``step_length[..., k]`` is the local norm of
    ``h * STEPS[k]``.  ``norms[body_index[j, i]]`` is the norm of cell
    ``(i, j)`` (anything with ``gauge`` and ``area``).
    """

    n: int
    rect: tuple[float, float, float, float]
    h: float
    nx: int
    ny: int
    cell_area_weight: np.ndarray
    step_length: np.ndarray
    body_index: np.ndarray
    norms: tuple = field(repr=False)

    @property
    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        x0, y0 = self.rect[0], self.rect[1]
        x = x0 + (np.arange(self.nx) + 0.5) * self.h
        y = y0 + (np.arange(self.ny) + 0.5) * self.h
        return np.meshgrid(x, y)

    def norm_of(self, vectors: np.ndarray, cells: np.ndarray) -> np.ndarray:
        """Local norm of ``vectors[k]`` at flat cell index ``cells[k]``."""
        idx = self.body_index.ravel()[cells]
        out = np.empty(len(cells))
        for b in np.unique(idx):
            sel = idx == b
            out[sel] = self.norms[b].gauge(vectors[sel])
        return out

    def domain_mask(self, domain: str) -> np.ndarray:
        if domain == "rect":
            return np.ones((self.ny, self.nx), dtype=bool)
        X, Y = self.centers
        cx, cy, R = self._diamond()
        return np.abs(X - cx) + np.abs(Y - cy) < R

    def _diamond(self):
        x0, y0, x1, y1 = self.rect
        return 0.5 * (x0 + x1), 0.5 * (y0 + y1), 0.5 * min(x1 - x0, y1 - y0)


def build_grid(field: NormField, n: int, norms: Sequence | None = None) -> GridDomain:
    """Discretise ``field`` with ``n`` cells along the shorter side of its rectangle.

    ``norms`` optionally replaces the field's bodies by other unit balls
    (matched by position in ``field.cells``); used for pulled-back metrics.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    x0, y0, x1, y1 = field.rect
    h = min(x1 - x0, y1 - y0) / n
    nx, ny = int(round((x1 - x0) / h)), int(round((y1 - y0) / h))
    x = x0 + (np.arange(nx) + 0.5) * h
    y = y0 + (np.arange(ny) + 0.5) * h
    X, Y = np.meshgrid(x, y)
    cells = field.cells if norms is None else tuple(norms)
    # distinct unit balls, so each is evaluated once
    distinct: list = []
    slot: dict[int, int] = {}
    for c in cells:
        if id(c) not in slot:
            slot[id(c)] = len(distinct)
            distinct.append(c)
    cell_to_slot = np.array([slot[id(c)] for c in cells])
    body_index = cell_to_slot[field.cell_index(X, Y)]
    weights = np.array([math.pi / b.area() * h * h for b in distinct])
    steps = np.array([b.gauge(h * STEPS.astype(float)) for b in distinct])
    return GridDomain(
        n=n,
        rect=(x0, y0, x1, y1),
        h=h,
        nx=nx,
        ny=ny,
        cell_area_weight=weights[body_index],
        step_length=steps[body_index],
        body_index=body_index,
        norms=tuple(distinct),
    )


@dataclass(frozen=True)
class ModulusResult:
    """Restricted-QP optimum; ``value`` is a lower bound on the discrete modulus.

    ``density / min_path_length`` is admissible, so
    ``value / min_path_length**2`` bounds it from above.
    """

    value: float
    density: np.ndarray
    iterations: int
    constraint_count: int
    min_path_length: float
    converged: bool = True

    @property
    def upper_bound(self) -> float:
        return self.value / self.min_path_length**2 if self.min_path_length > 0 else math.inf


def _boundary_cells(grid: GridDomain, mask: np.ndarray, side) -> tuple[np.ndarray, np.ndarray]:
    """Flat indices of the cells on ``side`` and the vectors to the boundary line."""
    X, Y = grid.centers
    h = grid.h
    if isinstance(side, str) and side in RECT_SIDES:
        J, I = np.indices((grid.ny, grid.nx))
        sel = {
            "left": I == 0,
            "right": I == grid.nx - 1,
            "bottom": J == 0,
            "top": J == grid.ny - 1,
        }[side] & mask
        d = {"left": (-h / 2, 0), "right": (h / 2, 0), "bottom": (0, -h / 2), "top": (0, h / 2)}[side]
        idx = np.flatnonzero(sel)
        return idx, np.tile(np.array(d, dtype=float), (len(idx), 1))
    if not isinstance(side, str):
        _, t0, t1 = side
        cx = 0.5 * (grid.rect[0] + grid.rect[2])
        cy = 0.5 * (grid.rect[1] + grid.rect[3])
        out_i, out_d = [], []
        for name in RECT_SIDES:
            idx, d = _boundary_cells(grid, mask, name)
            ang = np.mod(np.arctan2(Y.ravel()[idx] - cy, X.ravel()[idx] - cx) - t0, 2 * math.pi)
            keep = ang <= np.mod(t1 - t0, 2 * math.pi) + 1e-12
            out_i.append(idx[keep])
            out_d.append(d[keep])
        return np.concatenate(out_i), np.concatenate(out_d)
    cx, cy, R = grid._diamond()
    U, V = X - cx, Y - cy
    padded = np.pad(mask, 1)
    exposed = mask & ~(
        padded[1:-1, :-2] & padded[1:-1, 2:] & padded[:-2, 1:-1] & padded[2:, 1:-1]
    )
    sx, sy = {"sw": (-1, -1), "ne": (1, 1), "nw": (-1, 1), "se": (1, -1)}[side]
    sel = exposed & (sx * U >= 0) & (sy * V >= 0)
    idx = np.flatnonzero(sel)
    # distance to the side sx*u + sy*v = R along its normal (sx, sy)
    t = (R - sx * U.ravel()[idx] - sy * V.ravel()[idx]) / 2.0
    return idx, t[:, None] * np.array([sx, sy], dtype=float)


class _PathGraph:
    """Cell graph whose edge weights are linear in the density."""

    def __init__(self, grid: GridDomain, family: CurveFamily):
        mask = grid.domain_mask(family.domain)
        self.mask = mask
        nx, ny = grid.nx, grid.ny
        C = nx * ny
        self.C = C
        self.S, self.T = C, C + 1
        steps = range(4) if family.connectivity == "axis" else range(8)
        J, I = np.indices((ny, nx))
        src, dst, cs, cd, eu = [], [], [], [], []
        sl = grid.step_length.reshape(C, 8)
        for k in steps:
            di, dj = STEPS[k]
            I2, J2 = I + di, J + dj
            ok = mask & (I2 >= 0) & (I2 < nx) & (J2 >= 0) & (J2 < ny)
            ok[ok] &= mask[J2[ok], I2[ok]]
            a = (J * nx + I)[ok]
            b = (J2 * nx + I2)[ok]
            src.append(a)
            dst.append(b)
            cs.append(0.5 * sl[a, k])
            cd.append(0.5 * sl[b, k])
            eu.append(np.full(len(a), grid.h * math.hypot(di, dj)))
        ends = []
        for terminal, sides in ((self.S, family.source), (self.T, family.sink)):
            best: dict[int, tuple[float, float]] = {}
            for side in sides:
                idx, d = _boundary_cells(grid, mask, side)
                for c, length, e in zip(idx.tolist(), grid.norm_of(d, idx).tolist(), np.hypot(*d.T).tolist()):
                    best[c] = min((length, e), best.get(c, (math.inf, 0.0)))
            if not best:
                raise ValueError(f"family side {sides} selects no cells")
            ends.append(set(best))
            cells = np.fromiter(best.keys(), dtype=int)
            lengths = np.array([v[0] for v in best.values()])
            eu.append(np.array([v[1] for v in best.values()]))
            term = np.full(len(cells), terminal)
            none = np.zeros(len(cells))
            if terminal == self.S:
                src.append(term), dst.append(cells), cs.append(none), cd.append(lengths)
            else:
                src.append(cells), dst.append(term), cs.append(lengths), cd.append(none)
        if ends[0] & ends[1]:
            raise ValueError("source and sink share cells")
        self.src = np.concatenate(src)
        self.dst = np.concatenate(dst)
        self.coef_src = np.concatenate(cs)
        self.coef_dst = np.concatenate(cd)
        self.euclid = np.concatenate(eu)
        nodes = C + 2
        E = len(self.src)
        mat = sp.csr_matrix((np.arange(1, E + 1, dtype=float), (self.src, self.dst)), shape=(nodes, nodes))
        self.matrix = mat
        self.order = mat.data.astype(np.int64) - 1
        self.indptr, self.indices = mat.indptr, mat.indices
        # ties go to the Euclidean-shorter path; zero-density cells still
        # cost a little so paths stay short; measured in cells, not in units
        # of the rectangle, so the choice is the same at every scale
        self.tie = 1e-12 * self.euclid / grid.h

    def weights(self, rho_ext: np.ndarray) -> np.ndarray:
        return self.coef_src * rho_ext[self.src] + self.coef_dst * rho_ext[self.dst]

    def _edge(self, u: int, v: int) -> int:
        lo, hi = self.indptr[u], self.indptr[u + 1]
        return int(self.order[lo + int(np.searchsorted(self.indices[lo:hi], v))])

    def _row(self, edges: list[int]) -> np.ndarray:
        e = np.array(edges)
        a = np.zeros(self.C + 2)
        np.add.at(a, self.src[e], self.coef_src[e])
        np.add.at(a, self.dst[e], self.coef_dst[e])
        return a[: self.C]

    def violated(self, rho: np.ndarray, threshold: float, limit: int, euclidean: bool = False) -> tuple[float, list]:
        """Shortest path length and up to ``limit`` paths shorter than ``threshold``.

        Candidates are the shortest paths through each cell, assembled from the
        shortest-path trees out of the source and into the sink, taken in
        order of length and skipping cells already on a chosen path.  Paths
        are returned as coefficient vectors ``a`` with length ``a . rho``.
        With ``euclidean`` the trees are built for Euclidean step lengths.
        """
        if euclidean:
            w = self.euclid
        else:
            w = self.weights(np.concatenate([rho, [0.0, 0.0]])) + self.tie
        self.matrix.data = w[self.order]
        d_s, pred_s = dijkstra(self.matrix, directed=True, indices=self.S, return_predecessors=True)
        d_t, pred_t = dijkstra(self.matrix.T.tocsr(), directed=True, indices=self.T, return_predecessors=True)
        if not math.isfinite(d_s[self.T]):
            raise ValueError("sink is unreachable from source")

        def to_source(node):
            while node != self.S:
                prev = int(pred_s[node])
                yield self._edge(prev, node)
                node = prev

        def to_sink(node):
            while node != self.T:
                nxt = int(pred_t[node])
                yield self._edge(node, nxt)
                node = nxt

        # exact length of the overall shortest path, without the tie-break term
        shortest = float(self._row(list(to_source(self.T))) @ rho)
        through = (d_s + d_t)[: self.C]
        candidates = np.flatnonzero(through < threshold)
        candidates = candidates[np.argsort(through[candidates], kind="stable")]
        covered = np.zeros(self.C, dtype=bool)
        rows = []
        for c in candidates.tolist():
            if len(rows) >= limit:
                break
            if covered[c]:
                continue
            a = self._row(list(to_source(c)) + list(to_sink(c)))
            if a @ rho >= threshold:
                continue
            covered[a > 0] = True
            rows.append(a)
        return shortest, rows


class _Cholesky:
    """Upper factor ``R`` of ``G[F, F] + ridge I`` for an ordered index list ``F``."""

    def __init__(self, G: np.ndarray, ridge: float):
        self.G, self.ridge = G, ridge
        self.index: list[int] = []
        self.R = np.zeros((0, 0))

    def solve(self, b: np.ndarray) -> np.ndarray:
        y = solve_triangular(self.R, b, trans="T")
        return solve_triangular(self.R, y)

    def add(self, j: int) -> bool:
        """Append ``j``; refuses (returns False) if the column is numerically dependent."""
        F = self.index
        r = solve_triangular(self.R, self.G[F, j], trans="T") if F else np.zeros(0)
        d2 = self.G[j, j] + self.ridge - r @ r
        if d2 <= self.ridge:
            return False
        f = len(F)
        R = np.zeros((f + 1, f + 1))
        R[:f, :f] = self.R
        R[:f, f] = r
        R[f, f] = math.sqrt(d2)
        self.R = R
        F.append(j)
        return True

    def remove(self, j: int) -> None:
        p = self.index.index(j)
        del self.index[p]
        R = np.delete(self.R, p, axis=1)
        # Givens rotations restore the triangle below the deleted column
        for i in range(p, R.shape[1]):
            a, b = R[i, i], R[i + 1, i]
            h = math.hypot(a, b)
            if h == 0.0:
                continue
            c, s = a / h, b / h
            top, bot = R[i, i:].copy(), R[i + 1, i:]
            R[i, i:] = c * top + s * bot
            R[i + 1, i:] = c * bot - s * top
        self.R = R[:-1]


def _nnqp(G: np.ndarray, lam: np.ndarray, tol: float, max_steps: int = 100000) -> np.ndarray:
    """Minimise ``lam^T G lam / 2 - sum(lam)`` over ``lam >= 0`` (active set, warm start)."""
    k = len(G)
    ridge = 1e-13 * max(float(np.trace(G)) / k, 1e-300)
    chol = _Cholesky(G, ridge)
    lam = lam.copy()
    for j in np.flatnonzero(lam > 0):
        if not chol.add(int(j)):
            lam[j] = 0.0
    blocked = np.zeros(k, dtype=bool)
    for _ in range(max_steps):
        F = np.array(chol.index, dtype=int)
        z = np.zeros(k)
        if len(F):
            z[F] = chol.solve(np.ones(len(F)))
        if np.all(z[F] > 0):
            lam = z
            slack = 1.0 - G @ lam
            slack[F] = -np.inf
            slack[blocked] = -np.inf
            t = int(np.argmax(slack))
            if slack[t] <= tol:
                return lam
            if not chol.add(t):
                blocked[t] = True
            continue
        # move towards z until a free variable hits zero, then drop it
        neg = F[z[F] <= 0]
        alpha = np.min(lam[neg] / (lam[neg] - z[neg]))
        lam = lam + alpha * (z - lam)
        drop = F[(lam[F] <= 0) | (np.isin(F, neg) & (lam[F] <= lam.max() * 1e-15))]
        if not len(drop):
            drop = neg[[int(np.argmin(lam[neg]))]]
        for j in drop.tolist():
            chol.remove(j)
            lam[j] = 0.0
        blocked[:] = False
    raise RuntimeError("active-set solver did not terminate")


IDLE_ROUNDS = 5


def discrete_modulus(
    grid: GridDomain,
    family: CurveFamily,
    feas_tol: float = 1e-4,
    qp_tol: float = 1e-8,
    max_iter: int | None = None,
) -> ModulusResult:
    """Discrete 2-modulus of ``family`` on ``grid`` by constraint generation.

    Each round adds up to ``4 n`` violated paths and re-solves the restricted
    quadratic program in its dual form
    ``max sum(lam) - lam^T G lam / 2``, ``G = A W^-1 A^T / 2``, whose
    solution gives ``rho = W^-1 A^T lam / 2``.

    Raises
    ------
    ModulusError
        after ``max_iter`` rounds (default ``10 n``) without reaching
        ``min path length >= 1 - feas_tol``.
    """
    if max_iter is None:
        max_iter = 10 * grid.n
    graph = _PathGraph(grid, family)
    w = grid.cell_area_weight.ravel()
    winv = np.where(graph.mask.ravel(), 1.0 / w, 0.0)
    A = sp.csr_matrix((0, graph.C))
    G = np.zeros((0, 0))
    lam = np.zeros(0)
    idle = np.zeros(0, dtype=int)
    rho = np.zeros(graph.C)
    length = 0.0
    iterations = generated = 0
    converged = False
    # seed with Euclidean geodesics, one through every cell
    new = graph.violated(rho, math.inf, graph.C, euclidean=True)[1]
    for iterations in range(1, max_iter + 1):
        if iterations > 1:
            length, new = graph.violated(rho, 1.0 - feas_tol, 4 * grid.n)
        if not new:
            converged = True
            break
        B = sp.csr_matrix(np.array(new))
        BW = B.multiply(winv[None, :]).tocsr()
        cross = 0.5 * (A @ BW.T).toarray()
        corner = 0.5 * (B @ BW.T).toarray()
        G = np.block([[G, cross], [cross.T, corner]])
        A = sp.vstack([A, B]).tocsr()
        lam = _nnqp(G, np.concatenate([lam, np.zeros(B.shape[0])]), qp_tol)
        rho = 0.5 * winv * (A.T @ lam)
        generated += B.shape[0]
        # drop constraints only after a few idle rounds; dropping them at once cycles
        idle = np.where(lam > 0, 0, np.concatenate([idle, np.zeros(B.shape[0], dtype=int)]) + 1)
        keep = idle <= IDLE_ROUNDS
        A, G, lam, idle = A[keep], G[np.ix_(keep, keep)], lam[keep], idle[keep]
    value = float(np.dot(w, rho * rho))
    result = ModulusResult(
        value=value,
        density=rho.reshape(grid.ny, grid.nx),
        iterations=iterations,
        constraint_count=generated,
        min_path_length=length,
        converged=converged,
    )
    if not converged:
        gap = result.upper_bound - value
        raise ModulusError(
            f"no convergence after {max_iter} rounds (min length {length:.6g}, gap <= {gap:.3g})",
            result,
        )
    return result


class ModulusComparison(NamedTuple):
    """Both moduli of one family on one grid."""

    field: ModulusResult
    euclid: ModulusResult

    @property
    def ratio(self) -> float:
        return self.euclid.value / self.field.value


def compare_moduli(field: NormField, family: CurveFamily, n: int, **options) -> ModulusComparison:
    """``Mod_field(G)`` and ``Mod_euclid(nu G)`` for a constant field.

    ``nu`` is the affine uniformiser.  The Euclidean modulus of ``nu(G)`` is the
    modulus of ``G`` for the pulled-back norm ``|nu x|``, whose unit ball is the
    ellipse ``nu^{-1}(B)``, so both are computed on the same grid.
    """
    if not field.is_constant:
        raise ValueError("modulus ratio needs a constant field")
    nu = affine_uniformizer(field.cells[0])
    pulled = Ellipse.preimage_of_disk(nu, 1.0)
    return ModulusComparison(
        discrete_modulus(build_grid(field, n), family, **options),
        discrete_modulus(build_grid(field, n, [pulled] * len(field.cells)), family, **options),
    )


def modulus_ratio(field: NormField, family: CurveFamily, n: int, **options) -> float:
    """``Mod_euclid(nu G) / Mod_field(G)``; lies in ``[2/pi, 4/pi]`` up to discretisation."""
    return compare_moduli(field, family, n, **options).ratio
