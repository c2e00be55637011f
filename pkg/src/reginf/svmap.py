"""Set-valued mappings as polyhedral graphs, plus sampled single-valued maps.

A mapping F : R^n => R^m is identified with its graph, a finite union of
closed polyhedra in R^(n+m).  Slicing substitutes a fixed input (or output)
into the graph constraints.  Non-polyhedral perturbations enter only through
`SampledMap` evaluators and are never converted to polyhedral form.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import geom
from .geom import (DimensionMismatch, Polyhedron, UnionRegion, dist_union,
                   lp_feasible_point, reduce_rows)
from .tolerances import FEAS_TOL


@dataclass(frozen=True)
class SetValuedMap:
    """Polyhedral set-valued mapping with input dim n and output dim m."""

    n: int
    m: int
    graph: UnionRegion

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise DimensionMismatch("input and output dimensions must be >= 1")
        if self.graph.dim != self.n + self.m:
            raise DimensionMismatch("graph dimension must equal n + m")

    def graph_contains(self, x, y, tol: float = FEAS_TOL) -> bool:
        return self.graph.contains(np.concatenate([np.atleast_1d(x), np.atleast_1d(y)]), tol)

    def scale_outputs(self, c: float) -> "SetValuedMap":
        """The mapping x -> c * F(x); graph rows rescale in the y block."""
        if c <= 0:
            raise ValueError("output scaling must be positive")
        pieces = []
        for p in self.graph.pieces:
            normals = p.normals.copy()
            normals[:, self.n:] /= c
            pieces.append(Polyhedron(normals, p.offsets))
        return SetValuedMap(self.n, self.m, UnionRegion(self.n + self.m, tuple(pieces)))


@dataclass(frozen=True)
class SampledMap:
    """Black-box single-valued mapping used through sampling only."""

    n: int
    m: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    lipschitz_window: Optional[tuple[float, float]] = None  # (lambda, R) when known

    def __call__(self, x) -> np.ndarray:
        y = np.asarray(self.evaluator(np.asarray(x, dtype=float)), dtype=float)
        if y.shape != (self.m,):
            raise DimensionMismatch("evaluator output has wrong dimension")
        return y

    @staticmethod
    def zero(n: int, m: int) -> "SampledMap":
        return SampledMap(n, m, lambda x: np.zeros(m), lipschitz_window=(0.0, 0.0))

    def scaled(self, c: float) -> "SampledMap":
        win = None
        if self.lipschitz_window is not None:
            win = (abs(c) * self.lipschitz_window[0], self.lipschitz_window[1])
        return SampledMap(self.n, self.m, lambda x: c * self(x), lipschitz_window=win)


@dataclass(frozen=True)
class InfinityWindow:
    """Window describing 'x large, y near ybar, small residual'."""

    R: float
    r: float
    gamma: float
    schedule: tuple[float, ...]

    def __post_init__(self):
        if not (self.R > 0 and self.r > 0 and self.gamma > 0):
            raise ValueError("window radii must be positive")
        sched = tuple(float(s) for s in self.schedule)
        if len(sched) < 2 or any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("schedule must be strictly increasing with >= 2 stages")
        object.__setattr__(self, "schedule", sched)


# ---------------------------------------------------------------------------
# slicing
# ---------------------------------------------------------------------------

def _substitute(piece: Polyhedron, fixed: np.ndarray, keep: slice, drop: slice):
    """Substitute the `drop` coordinate block by `fixed`; rows over `keep`.

    Returns a Polyhedron (row-free when every constraint becomes vacuous,
    i.e. the slice is the whole space) or None when a substituted row is
    structurally infeasible.
    """
    a_keep = piece.normals[:, keep]
    a_drop = piece.normals[:, drop]
    rhs = piece.offsets - a_drop @ fixed
    normals, offsets, feasible = reduce_rows(a_keep, rhs)
    if not feasible:
        return None
    return Polyhedron(normals.reshape(-1, a_keep.shape[1]), offsets)


def image_slice(F: SetValuedMap, x) -> UnionRegion:
    """{y : (x, y) in gph F} as a union of polyhedra (possibly empty)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (F.n,):
        raise DimensionMismatch("input point dimension mismatch")
    pieces = []
    for p in F.graph.pieces:
        sl = _substitute(p, x, slice(F.n, F.n + F.m), slice(0, F.n))
        if sl is not None:
            pieces.append(sl)
    return UnionRegion(F.m, tuple(pieces))


def preimage_slice(F: SetValuedMap, y) -> UnionRegion:
    """{x : y in F(x)}; symmetric to image_slice."""
    y = np.asarray(y, dtype=float)
    if y.shape != (F.m,):
        raise DimensionMismatch("output point dimension mismatch")
    pieces = []
    for p in F.graph.pieces:
        sl = _substitute(p, y, slice(0, F.n), slice(F.n, F.n + F.m))
        if sl is not None:
            pieces.append(sl)
    return UnionRegion(F.n, tuple(pieces))


def dist_to_image(F: SetValuedMap, x, y) -> float:
    """dist(y, F(x)); +inf exactly when F(x) is empty."""
    return dist_union(np.asarray(y, dtype=float), image_slice(F, x))


# ---------------------------------------------------------------------------
# Jelonek set membership
# ---------------------------------------------------------------------------

JELONEK_EPS_GRID = (1e-1, 1e-2, 1e-3)
JELONEK_M_GRID = (1e2, 1e4, 1e6)


@dataclass(frozen=True)
class JelonekResult:
    contains: bool
    piece: Optional[int]
    direction: Optional[np.ndarray]
    grid: tuple[tuple[float, float, bool], ...] = field(default=())

    def __bool__(self) -> bool:
        return self.contains


def _piece_feasible_near(piece: Polyhedron, n: int, m: int, ybar: np.ndarray,
                         eps: float, M: float) -> bool:
    """Feasibility of piece /\\ {||y - ybar||_inf <= eps, ||x||_inf >= M}."""
    dim = n + m
    box_rows = []
    box_rhs = []
    for j in range(m):
        e = np.zeros(dim)
        e[n + j] = 1.0
        box_rows += [e, -e]
        box_rhs += [ybar[j] + eps, -(ybar[j] - eps)]
    base_rows = np.vstack([piece.normals, box_rows])
    base_rhs = np.concatenate([piece.offsets, box_rhs])
    for j in range(n):
        for s in (1.0, -1.0):
            e = np.zeros(dim)
            e[j] = -s  # s * x_j >= M  <=>  -s * x_j <= -M
            rows = np.vstack([base_rows, e[None, :]])
            rhs = np.concatenate([base_rhs, [-M]])
            if lp_feasible_point(rows, rhs) is not None:
                return True
    return False


def _piece_escape_direction(piece: Polyhedron, n: int, m: int) -> Optional[np.ndarray]:
    """A recession direction (d_x, 0) with d_x != 0, if one exists."""
    dim = n + m
    rec_rows = piece.normals
    eq_rows = np.zeros((m, dim))
    for j in range(m):
        eq_rows[j, n + j] = 1.0
    for j in range(n):
        for s in (1.0, -1.0):
            pin = np.zeros(dim)
            pin[j] = 1.0
            A_eq = np.vstack([eq_rows, pin[None, :]])
            b_eq = np.concatenate([np.zeros(m), [s]])
            d = lp_feasible_point(rec_rows, np.zeros(len(rec_rows)), A_eq, b_eq)
            if d is not None:
                return d[:n]
    return None


def jelonek_contains(F: SetValuedMap, ybar) -> JelonekResult:
    """Decide ybar in J(F) for a polyhedral graph.

    Decision procedure: a piece votes YES when it is feasible at the
    strictest (eps, M) window pair and its recession cone contains a
    direction (d_x, 0) with d_x != 0.  The full grid is evaluated and
    reported for diagnostics.
    """
    ybar = np.asarray(ybar, dtype=float)
    if ybar.shape != (F.m,):
        raise DimensionMismatch("ybar dimension mismatch")
    eps_strict, m_strict = min(JELONEK_EPS_GRID), max(JELONEK_M_GRID)
    grid_report = []
    witness_piece = None
    witness_dir = None
    for idx, piece in enumerate(F.graph.pieces):
        direction = _piece_escape_direction(piece, F.n, F.m)
        if direction is None:
            continue
        grid_ok = True
        for eps in JELONEK_EPS_GRID:
            for M in JELONEK_M_GRID:
                feas = _piece_feasible_near(piece, F.n, F.m, ybar, eps, M)
                grid_report.append((eps, M, feas))
                if eps == eps_strict and M == m_strict and not feas:
                    grid_ok = False
        if grid_ok and witness_piece is None:
            witness_piece = idx
            witness_dir = direction
    return JelonekResult(witness_piece is not None, witness_piece, witness_dir,
                         tuple(grid_report))


# ---------------------------------------------------------------------------
# perturbed mapping handle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbedMap:
    """Handle for F + f with polyhedral F and sampled f.

    Image queries are exact (translate the polyhedral image slice by f(x));
    preimage queries are only available through iteration or sampling, never
    by exact slicing.
    """

    F: SetValuedMap
    f: SampledMap

    def __post_init__(self):
        if (self.F.n, self.F.m) != (self.f.n, self.f.m):
            raise DimensionMismatch("F and f dimensions disagree")

    @property
    def n(self) -> int:
        return self.F.n

    @property
    def m(self) -> int:
        return self.F.m

    def image_region(self, x) -> UnionRegion:
        return image_slice(self.F, x).translate(self.f(x))

    def dist_to_image(self, x, y) -> float:
        y = np.asarray(y, dtype=float)
        return dist_union(y - self.f(x), image_slice(self.F, x))


def sum_map(F: SetValuedMap, f: SampledMap) -> PerturbedMap:
    """The perturbed mapping handle (F + f)(x) = F(x) + f(x)."""
    return PerturbedMap(F, f)


# ---------------------------------------------------------------------------
# graph sampling (shared by estimators and the sampled coderivative limit)
# ---------------------------------------------------------------------------

def sample_graph_points(F: SetValuedMap, ybar, xlo: float, xhi: float,
                        ytol: float, rng: np.random.Generator,
                        budget: int) -> list[np.ndarray]:
    """Graph points with ||x||_inf in [xlo, xhi] and ||y - ybar||_inf <= ytol.

    Vertices of the windowed pieces (random LP objectives) plus pairwise
    midpoints, so both top strata and boundary strata get represented.
    """
    ybar = np.asarray(ybar, dtype=float)
    n, m = F.n, F.m
    dim = n + m
    points: list[np.ndarray] = []
    for piece in F.graph.pieces:
        box_rows = []
        box_rhs = []
        for j in range(m):
            e = np.zeros(dim)
            e[n + j] = 1.0
            box_rows += [e, -e]
            box_rhs += [ybar[j] + ytol, -(ybar[j] - ytol)]
        for j in range(n):
            e = np.zeros(dim)
            e[j] = 1.0
            box_rows += [e, -e]
            box_rhs += [xhi, xhi]
        base_rows = np.vstack([piece.normals, box_rows])
        base_rhs = np.concatenate([piece.offsets, box_rhs])
        piece_pts: list[np.ndarray] = []
        for j in range(n):
            for s in (1.0, -1.0):
                e = np.zeros(dim)
                e[j] = -s
                rows = np.vstack([base_rows, e[None, :]])
                rhs = np.concatenate([base_rhs, [-xlo]])
                if lp_feasible_point(rows, rhs) is None:
                    continue
                trials = max(2, budget // (2 * n * max(1, len(F.graph.pieces))))
                for _ in range(trials):
                    c = rng.standard_normal(dim)
                    _, z = geom.lp_support(c, rows, rhs)
                    if z is not None:
                        piece_pts.append(z)
        mids = [0.5 * (piece_pts[a] + piece_pts[b])
                for a, b in itertools.combinations(range(min(len(piece_pts), 12)), 2)]
        for p in piece_pts + mids:
            x_norm = np.max(np.abs(p[:n])) if n else 0.0
            y_err = np.max(np.abs(p[n:] - ybar)) if m else 0.0
            if xlo - 1e-9 <= x_norm <= xhi + 1e-9 and y_err <= ytol + 1e-9:
                points.append(p)
    deduped: list[np.ndarray] = []
    for p in points:
        if all(np.linalg.norm(p - q) > 1e-9 for q in deduped):
            deduped.append(p)
    return deduped
