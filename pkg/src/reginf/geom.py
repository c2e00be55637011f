"""Exact small-dimension convex geometry.

Polyhedra in H-representation, polyhedral cones with dual (H / generator)
representations kept in sync by the double description method, Euclidean
projections by an active-set scheme, distances to finite unions, and the
min-norm slice problem used by the regularity-modulus computations.

Everything here targets desk-scale instances (dimension <= 6, a few dozen
constraints); exactness is favoured over throughput.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .tolerances import FEAS_TOL


class GeometryError(Exception):
    pass


class DimensionMismatch(GeometryError):
    pass


class EmptyPolyhedron(GeometryError):
    """Raised when an operation requires a nonempty polyhedron."""


class Infeasible(GeometryError):
    """Raised when a slice or constraint system has no solution."""


# ---------------------------------------------------------------------------
# small linear-programming helpers (scipy HiGHS under the hood)
# ---------------------------------------------------------------------------

_FREE = (None, None)


def _linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None):
    n = len(c)
    return linprog(
        c,
        A_ub=A_ub if A_ub is not None and len(A_ub) else None,
        b_ub=b_ub if A_ub is not None and len(A_ub) else None,
        A_eq=A_eq if A_eq is not None and len(A_eq) else None,
        b_eq=b_eq if A_eq is not None and len(A_eq) else None,
        bounds=[_FREE] * n,
        method="highs",
    )


def lp_feasible_point(A_ub, b_ub, A_eq=None, b_eq=None) -> Optional[np.ndarray]:
    """A point of {A_ub z <= b_ub, A_eq z = b_eq}, or None if empty."""
    n = A_ub.shape[1] if A_ub is not None and len(A_ub) else A_eq.shape[1]
    res = _linprog(np.zeros(n), A_ub, b_ub, A_eq, b_eq)
    if res.status == 0:
        return np.asarray(res.x, dtype=float)
    return None


def lp_strict_point(A_strict, b_strict, A_eq=None, b_eq=None,
                    A_ub=None, b_ub=None) -> Optional[np.ndarray]:
    """A point with A_strict z < b_strict (strictly), plus weak rows.

    Returns None when no strictly feasible point exists.  Uses the margin
    trick: maximize t subject to A_strict z + t * scale <= b_strict, t <= 1.
    """
    n = A_strict.shape[1] if len(A_strict) else (
        A_eq.shape[1] if A_eq is not None and len(A_eq) else A_ub.shape[1])
    if not len(A_strict):
        z = lp_feasible_point(
            A_ub if A_ub is not None else np.zeros((0, n)),
            b_ub if b_ub is not None else np.zeros(0), A_eq, b_eq)
        return z
    scale = np.maximum(np.linalg.norm(A_strict, axis=1), 1e-12)
    rows = [np.column_stack([A_strict, scale])]
    rhs = [np.asarray(b_strict, dtype=float)]
    if A_ub is not None and len(A_ub):
        rows.append(np.column_stack([A_ub, np.zeros(len(A_ub))]))
        rhs.append(np.asarray(b_ub, dtype=float))
    rows.append(np.concatenate([np.zeros((1, n)), [[1.0]]], axis=1))
    rhs.append(np.array([1.0]))
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    Aeq = None
    beq = None
    if A_eq is not None and len(A_eq):
        Aeq = np.column_stack([A_eq, np.zeros(len(A_eq))])
        beq = np.asarray(b_eq, dtype=float)
    c = np.zeros(n + 1)
    c[-1] = -1.0
    res = _linprog(c, A, b, Aeq, beq)
    if res.status != 0:
        return None
    t = res.x[-1]
    if t <= FEAS_TOL:
        return None
    return np.asarray(res.x[:n], dtype=float)


def lp_support(c, A_ub, b_ub, A_eq=None, b_eq=None):
    """max <c, z> over the system; returns (value, argmax) with value possibly inf."""
    res = _linprog(-np.asarray(c, dtype=float), A_ub, b_ub, A_eq, b_eq)
    if res.status == 0:
        return -res.fun, np.asarray(res.x, dtype=float)
    if res.status == 3:
        return math.inf, None
    return -math.inf, None


# ---------------------------------------------------------------------------
# ray utilities
# ---------------------------------------------------------------------------

def unitize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n < 1e-14:
        raise GeometryError("cannot normalize the zero vector")
    return v / n


def _dedupe_rays(rays: list[np.ndarray], tol: float = 1e-10) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for r in rays:
        if all(np.linalg.norm(r - s) > tol for s in out):
            out.append(r)
    return out


def _in_conic_hull(v: np.ndarray, gens: np.ndarray, tol: float = 1e-9) -> bool:
    """Is v a nonnegative combination of the rows of gens?"""
    if not len(gens):
        return np.linalg.norm(v) <= tol
    from scipy.optimize import nnls
    coeffs, residual = nnls(gens.T, v)
    return residual <= tol * max(1.0, np.linalg.norm(v))


def _prune_rays(rays: list[np.ndarray]) -> list[np.ndarray]:
    rays = _dedupe_rays(rays)
    kept = list(rays)
    i = 0
    while i < len(kept):
        others = np.array(kept[:i] + kept[i + 1:])
        if len(others) and _in_conic_hull(kept[i], others):
            kept.pop(i)
        else:
            i += 1
    return kept


def cone_rays_from_halfspaces(normals: np.ndarray, dim: int) -> np.ndarray:
    """Generators of {z : <n_i, z> <= 0 for all i} via double description.

    Starts from the generators of the full space (+-e_i) and restricts by one
    halfspace at a time, combining positive/negative pairs and pruning
    redundant rays.  Handles non-pointed cones: lineality directions appear
    as opposite ray pairs.
    """
    rays = [np.eye(dim)[i] * s for i in range(dim) for s in (1.0, -1.0)]
    for a in np.asarray(normals, dtype=float):
        vals = [float(a @ r) for r in rays]
        tol = 1e-12 * max(1.0, np.linalg.norm(a))
        neg = [r for r, v in zip(rays, vals) if v < -tol]
        zero = [r for r, v in zip(rays, vals) if abs(v) <= tol]
        pos = [(r, v) for r, v in zip(rays, vals) if v > tol]
        new = []
        for rp, vp in pos:
            for rn in neg:
                vn = float(a @ rn)
                combo = vp * rn - vn * rp
                nrm = np.linalg.norm(combo)
                if nrm > 1e-12:
                    new.append(combo / nrm)
        rays = _prune_rays(zero + neg + new)
    return np.array([unitize(r) for r in rays]) if rays else np.zeros((0, dim))


# ---------------------------------------------------------------------------
# polyhedron
# ---------------------------------------------------------------------------

def reduce_rows(normals: np.ndarray, offsets: np.ndarray):
    """Drop zero-normal rows; report structural infeasibility.

    Returns (normals, offsets, feasible_flag).  A zero row with negative
    offset makes the whole system empty; zero rows with nonnegative offsets
    are vacuous and removed.
    """
    normals = np.asarray(normals, dtype=float)
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    if normals.shape[0] == 0:
        return normals, offsets, True
    norms = np.linalg.norm(normals, axis=1)
    degenerate = norms < 1e-13
    if np.any(degenerate & (offsets < -FEAS_TOL)):
        return normals[~degenerate], offsets[~degenerate], False
    return normals[~degenerate], offsets[~degenerate], True


@dataclass(frozen=True)
class Polyhedron:
    """Convex polyhedron {z : <a_i, z> <= b_i} in R^dim."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        normals = np.atleast_2d(np.asarray(self.normals, dtype=float))
        offsets = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        if normals.shape[0] != offsets.shape[0]:
            raise DimensionMismatch("row/offset count mismatch")
        if normals.shape[0] and np.any(np.linalg.norm(normals, axis=1) < 1e-13):
            raise GeometryError("zero normal vector rejected at parse time")
        if normals.ndim != 2 or normals.shape[1] < 1:
            raise DimensionMismatch("polyhedron dimension must be >= 1")
        normals.setflags(write=False)
        offsets.setflags(write=False)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", offsets)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def nrows(self) -> int:
        return self.normals.shape[0]

    def residuals(self, z: np.ndarray) -> np.ndarray:
        return self.normals @ np.asarray(z, dtype=float) - self.offsets

    def contains(self, z, tol: float = FEAS_TOL) -> bool:
        if self.nrows == 0:
            return True
        return bool(np.max(self.residuals(z)) <= tol)

    @cached_property
    def _feasible_point(self) -> Optional[np.ndarray]:
        if self.nrows == 0:
            return np.zeros(self.dim)
        return lp_feasible_point(self.normals, self.offsets)

    def is_empty(self) -> bool:
        return self._feasible_point is None

    def feasible_point(self) -> np.ndarray:
        if self._feasible_point is None:
            raise EmptyPolyhedron("polyhedron is empty")
        return self._feasible_point

    def active_set(self, z, tol: float = FEAS_TOL) -> tuple[int, ...]:
        res = self.residuals(z)
        scale = np.maximum(np.linalg.norm(self.normals, axis=1), 1.0)
        return tuple(int(i) for i in np.nonzero(np.abs(res) <= tol * scale)[0])

    def translate(self, v: np.ndarray) -> "Polyhedron":
        """The translated set {z + v : z in P}."""
        v = np.asarray(v, dtype=float)
        return Polyhedron(self.normals, self.offsets + self.normals @ v)

    def intersect_rows(self, normals, offsets) -> "Polyhedron":
        return Polyhedron(np.vstack([self.normals, np.atleast_2d(normals)]),
                          np.concatenate([self.offsets, np.atleast_1d(offsets)]))

    def recession_cone(self) -> "PolyCone":
        return PolyCone.from_halfspaces(self.normals, dim=self.dim)

    def vertices(self) -> np.ndarray:
        """All vertices (0-dimensional faces).  Exhaustive over row subsets."""
        d = self.dim
        if self.nrows < d:
            return np.zeros((0, d))
        found: list[np.ndarray] = []
        for idx in itertools.combinations(range(self.nrows), d):
            A = self.normals[list(idx)]
            if abs(np.linalg.det(A)) < 1e-12:
                continue
            v = np.linalg.solve(A, self.offsets[list(idx)])
            if self.contains(v, tol=1e-7):
                if all(np.linalg.norm(v - w) > 1e-9 for w in found):
                    found.append(v)
        return np.array(found) if found else np.zeros((0, d))

    def is_bounded(self) -> bool:
        return len(self.recession_cone().rays) == 0

    def project(self, z: np.ndarray) -> np.ndarray:
        return project(z, self)


def _eq_projection(z, A, b):
    """Projection of z onto {A w = b} plus least-norm multipliers."""
    G = A @ A.T
    lam, *_ = np.linalg.lstsq(G, A @ z - b, rcond=None)
    w = z - A.T @ lam
    return w, lam


def _project_add_drop(z, normals, offsets, max_iter):
    """Dual-style active-set projection; no feasible start required."""
    W: list[int] = []
    w = np.array(z, dtype=float)
    for _ in range(max_iter):
        if W:
            w, lam = _eq_projection(z, normals[W], offsets[W])
            resid = normals[W] @ w - offsets[W]
            if np.max(np.abs(resid)) > 1e-7 * max(1.0, np.linalg.norm(offsets[W])):
                return None  # inconsistent working set; caller falls back
            neg = [W[i] for i in range(len(W)) if lam[i] < -FEAS_TOL]
            if neg:
                W.remove(min(neg))  # Bland-style lowest index
                continue
        else:
            w = np.array(z, dtype=float)
        viol = normals @ w - offsets
        vmax = float(np.max(viol)) if len(viol) else 0.0
        if vmax <= FEAS_TOL:
            return w
        near = np.nonzero(viol >= vmax - 1e-12 * max(1.0, abs(vmax)))[0]
        j = int(min(i for i in near if i not in W)) if any(i not in W for i in near) else None
        if j is None:
            return None
        W.append(j)
        W.sort()
    return None


def _project_primal(z, normals, offsets):
    """Feasible-start primal active set (fallback path, LP-assisted)."""
    scale = np.linalg.norm(normals, axis=1)
    start = lp_strict_point(normals, offsets)
    if start is None:
        start = lp_feasible_point(normals, offsets)
        if start is None:
            raise EmptyPolyhedron("projection onto empty polyhedron")
    w = np.array(start, dtype=float)
    W: list[int] = [i for i in range(len(normals))
                    if normals[i] @ w - offsets[i] > -FEAS_TOL * max(1.0, scale[i])]
    for _ in range(400):
        if W:
            A = normals[W]
            d = z - w
            lam, *_ = np.linalg.lstsq(A @ A.T, A @ d, rcond=None)
            p = d - A.T @ lam
        else:
            p = z - w
            lam = np.zeros(0)
        if np.linalg.norm(p) <= 1e-11 * max(1.0, np.linalg.norm(z)):
            if len(lam) == 0 or np.min(lam) >= -FEAS_TOL:
                return w
            candidates = [W[i] for i in range(len(W)) if lam[i] < -FEAS_TOL]
            W.remove(min(candidates))
            continue
        alpha = 1.0
        blocking = None
        for i in range(len(normals)):
            if i in W:
                continue
            den = normals[i] @ p
            if den > 1e-13:
                step = (offsets[i] - normals[i] @ w) / den
                if step < alpha - 1e-13:
                    alpha = max(step, 0.0)
                    blocking = i
                elif abs(step - alpha) <= 1e-13 and blocking is not None:
                    blocking = min(blocking, i)
        w = w + alpha * p
        if blocking is not None:
            W.append(blocking)
            W.sort()
    raise GeometryError("active-set projection did not terminate")


def _antiparallel_empty(normals, offsets) -> bool:
    """Cheap infeasibility witness: opposite rows with a negative gap."""
    k = len(normals)
    for i in range(k):
        ni = normals[i]
        nn = ni @ ni
        for j in range(i + 1, k):
            nj = normals[j]
            t = -(ni @ nj) / nn
            if t > 1e-13 and np.linalg.norm(nj + t * ni) <= 1e-10 * max(1.0, np.linalg.norm(nj)):
                if offsets[j] + t * offsets[i] < -FEAS_TOL:
                    return True
    return False


def project(z, P: Polyhedron) -> np.ndarray:
    """Euclidean projection of z onto P.

    Primary path is an LP-free active-set iteration with lexicographic
    tie-breaking; a feasible-start primal active set backs it up.  Raises
    EmptyPolyhedron when P is infeasible.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (P.dim,):
        raise DimensionMismatch(f"point dim {z.shape} vs polyhedron dim {P.dim}")
    if P.nrows == 0:
        return z.copy()
    if P.dim == 1:
        a = P.normals[:, 0]
        bounds = P.offsets / a
        his = bounds[a > 0]
        los = bounds[a < 0]
        hi = np.min(his) if len(his) else math.inf
        lo = np.max(los) if len(los) else -math.inf
        if lo > hi + FEAS_TOL:
            raise EmptyPolyhedron("projection onto empty polyhedron")
        return np.array([min(max(z[0], lo), hi)])
    w = _project_add_drop(z, P.normals, P.offsets, max_iter=60 + 6 * P.nrows)
    if w is not None:
        return w
    if _antiparallel_empty(P.normals, P.offsets) or P.is_empty():
        raise EmptyPolyhedron("projection onto empty polyhedron")
    return _project_primal(z, P.normals, P.offsets)


# ---------------------------------------------------------------------------
# unions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnionRegion:
    """Finite union of equal-dimension polyhedra (a closed set)."""

    dim: int
    pieces: tuple[Polyhedron, ...]

    def __post_init__(self):
        pieces = tuple(self.pieces)
        for p in pieces:
            if p.dim != self.dim:
                raise DimensionMismatch("piece dimension mismatch")
        object.__setattr__(self, "pieces", pieces)

    def contains(self, z, tol: float = FEAS_TOL) -> bool:
        return any(p.contains(z, tol) for p in self.pieces)

    def translate(self, v) -> "UnionRegion":
        return UnionRegion(self.dim, tuple(p.translate(v) for p in self.pieces))


def dist_union(z, region: UnionRegion) -> float:
    """Distance from z to a union of polyhedra; inf when every piece is empty."""
    z = np.asarray(z, dtype=float)
    if z.shape != (region.dim,):
        raise DimensionMismatch("dist_union dimension mismatch")
    best = math.inf
    for piece in region.pieces:
        try:
            w = project(z, piece)
        except EmptyPolyhedron:
            continue
        best = min(best, float(np.linalg.norm(z - w)))
    return best


def project_union(z, region: UnionRegion) -> np.ndarray:
    """Nearest point of the union; ties resolved by piece order."""
    z = np.asarray(z, dtype=float)
    best = None
    best_d = math.inf
    for piece in region.pieces:
        try:
            w = project(z, piece)
        except EmptyPolyhedron:
            continue
        d = float(np.linalg.norm(z - w))
        if d < best_d - 1e-15:
            best, best_d = w, d
    if best is None:
        raise EmptyPolyhedron("all pieces empty")
    return best


# ---------------------------------------------------------------------------
# polyhedral cones
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolyCone:
    """Polyhedral cone carrying both H-representation and generators.

    The two representations are produced from each other by double
    description at construction and cross-validated.  `rays` rows are unit
    vectors; a non-pointed cone lists both directions of its lineality
    space.
    """

    dim: int
    normals: np.ndarray
    rays: np.ndarray

    def __post_init__(self):
        normals = np.asarray(self.normals, dtype=float).reshape(-1, self.dim)
        rays = np.asarray(self.rays, dtype=float).reshape(-1, self.dim)
        normals.setflags(write=False)
        rays.setflags(write=False)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "rays", rays)
        if len(normals) and len(rays):
            if float(np.max(normals @ rays.T)) > 1e-8:
                raise GeometryError("cone representations disagree")

    @staticmethod
    def from_halfspaces(normals, dim: Optional[int] = None) -> "PolyCone":
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        if normals.size == 0:
            if dim is None:
                raise DimensionMismatch("dimension required for trivial cone")
            normals = normals.reshape(0, dim)
        d = normals.shape[1] if normals.size else dim
        rays = cone_rays_from_halfspaces(normals, d)
        return PolyCone(d, normals, rays)

    @staticmethod
    def from_rays(rays, dim: Optional[int] = None) -> "PolyCone":
        rays = np.atleast_2d(np.asarray(rays, dtype=float))
        if rays.size == 0:
            if dim is None:
                raise DimensionMismatch("dimension required for trivial cone")
            rays = rays.reshape(0, dim)
        d = rays.shape[1] if rays.size else dim
        nonzero = [r for r in rays if np.linalg.norm(r) > 1e-13]
        pruned = _prune_rays([unitize(r) for r in nonzero]) if nonzero else []
        ray_mat = np.array(pruned) if pruned else np.zeros((0, d))
        normals = cone_rays_from_halfspaces(ray_mat, d)
        return PolyCone(d, normals, ray_mat)

    def contains(self, z, tol: float = FEAS_TOL) -> bool:
        z = np.asarray(z, dtype=float)
        if len(self.normals) == 0:
            return True
        scale = max(1.0, float(np.linalg.norm(z)))
        return bool(np.max(self.normals @ z) <= tol * scale)

    def is_trivial(self, tol: float = 1e-10) -> bool:
        return len(self.rays) == 0

    def polar(self) -> "PolyCone":
        """{z* : <z*, z> <= 0 for all z in the cone}.

        With both representations stored the polar is a representation swap:
        the generators become the halfspace normals and vice versa.
        """
        rays = np.array([unitize(n) for n in self.normals]) if len(self.normals) \
            else np.zeros((0, self.dim))
        rays = np.array(_prune_rays(list(rays))) if len(rays) else rays
        return PolyCone(self.dim, self.rays.copy(), rays)

    def linear_image(self, T: np.ndarray) -> "PolyCone":
        """Image {T z : z in cone} for invertible T."""
        Tinv = np.linalg.inv(T)
        normals = self.normals @ Tinv
        rays = (T @ self.rays.T).T if len(self.rays) else self.rays
        rays = np.array([unitize(r) for r in rays]) if len(rays) else rays
        return PolyCone(self.dim, normals, rays)

    def project_point(self, z: np.ndarray) -> np.ndarray:
        if len(self.normals) == 0:
            return np.asarray(z, dtype=float)
        return project(z, Polyhedron(self.normals, np.zeros(len(self.normals))))


def polar(cone: PolyCone) -> PolyCone:
    return cone.polar()


def intersect_cones(cones: Sequence[PolyCone]) -> PolyCone:
    if not cones:
        raise GeometryError("empty intersection list")
    dim = cones[0].dim
    rows = [c.normals for c in cones if len(c.normals)]
    normals = np.vstack(rows) if rows else np.zeros((0, dim))
    return PolyCone.from_halfspaces(normals, dim=dim)


def cone_from_active_normals(normals: Iterable[np.ndarray], dim: int) -> PolyCone:
    """Conic hull of a set of constraint normals (a regular normal cone)."""
    rows = [np.asarray(a, dtype=float) for a in normals]
    return PolyCone.from_rays(np.array(rows) if rows else np.zeros((0, dim)), dim=dim)


@dataclass(frozen=True)
class ConeUnion:
    """Finite union of polyhedral cones; may be empty (the N-hat(x not in set) case)."""

    dim: int
    pieces: tuple[PolyCone, ...]

    def __post_init__(self):
        pieces = tuple(self.pieces)
        for p in pieces:
            if p.dim != self.dim:
                raise DimensionMismatch("cone piece dimension mismatch")
        object.__setattr__(self, "pieces", pieces)

    @property
    def is_empty(self) -> bool:
        return len(self.pieces) == 0

    def contains(self, z, tol: float = FEAS_TOL) -> bool:
        return any(p.contains(z, tol) for p in self.pieces)

    def all_rays(self) -> np.ndarray:
        rays = [r for p in self.pieces for r in p.rays]
        return np.array(_dedupe_rays(rays)) if rays else np.zeros((0, self.dim))


def angular_dist_to_union(ray: np.ndarray, union: ConeUnion) -> float:
    """Chord distance on the unit sphere from a unit ray to a cone union."""
    best = math.inf
    for piece in union.pieces:
        w = piece.project_point(ray)
        nw = np.linalg.norm(w)
        if nw < 1e-12:
            best = min(best, math.sqrt(2.0))  # nearest point is the apex
            continue
        best = min(best, float(np.linalg.norm(ray - w / nw)))
    return best


def cone_union_hausdorff(u1: ConeUnion, u2: ConeUnion) -> float:
    """Hausdorff distance between unit-sphere sections, computed on extreme rays.

    Unions with no rays (the cone {0} or empty unions) compare equal to each
    other and at distance sqrt(2) from anything with rays.
    """
    r1, r2 = u1.all_rays(), u2.all_rays()
    if len(r1) == 0 and len(r2) == 0:
        return 0.0
    if len(r1) == 0 or len(r2) == 0:
        return math.sqrt(2.0)
    d12 = max(angular_dist_to_union(r, u2) for r in r1)
    d21 = max(angular_dist_to_union(r, u1) for r in r2)
    return max(d12, d21)


def cone_unions_equal(u1: ConeUnion, u2: ConeUnion, tol: float) -> bool:
    return cone_union_hausdorff(u1, u2) <= tol


# ---------------------------------------------------------------------------
# min-norm slice
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MinNormResult:
    point: np.ndarray
    norm: float


def slice_cone_at_ystar(cone: PolyCone, n: int, ystar: np.ndarray):
    """H-rows of {x* : (x*, -y*) in cone} for fixed y*; None when empty.

    Rows (a_x, a_y) of the cone become a_x . x* <= <a_y, y*>.  Degenerate
    rows (a_x = 0) either drop out or witness structural emptiness.
    """
    ystar = np.asarray(ystar, dtype=float)
    m = cone.dim - n
    if ystar.shape != (m,):
        raise DimensionMismatch("ystar dimension mismatch")
    if len(cone.normals) == 0:
        return np.zeros((0, n)), np.zeros(0)
    ax = cone.normals[:, :n]
    ay = cone.normals[:, n:]
    rhs = ay @ ystar
    normals, offsets, feasible = reduce_rows(ax, rhs)
    if not feasible:
        return None
    return normals, offsets


def min_norm_in_slice(cone: PolyCone, n: int, ystar: np.ndarray) -> MinNormResult:
    """min ||x*|| subject to (x*, -y*) in cone, for unit y*.

    The slice is a polyhedron in x*; the minimizer is its projection of the
    origin.  Raises Infeasible when the slice is empty (the caller folds
    this into the inf-over-empty = +inf convention).
    """
    rows = slice_cone_at_ystar(cone, n, ystar)
    if rows is None:
        raise Infeasible("slice at ystar is empty")
    normals, offsets = rows
    if len(normals) == 0:
        return MinNormResult(np.zeros(n), 0.0)
    P = Polyhedron(normals, offsets)
    try:
        x = project(np.zeros(n), P)
    except EmptyPolyhedron as exc:
        raise Infeasible("slice at ystar is empty") from exc
    return MinNormResult(x, float(np.linalg.norm(x)))
