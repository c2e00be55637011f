"""Normal cones and coderivatives, at points and at infinity.

For polyhedral unions everything is computed exactly through a finite
decomposition into strata: combinatorial patterns recording which pieces
contain a locus and which constraints are active there.  The regular normal
cone is constant on each stratum, so outer limits (the limiting cone at a
point, the cone at infinity) reduce to finite unions over strata whose
closure reaches the locus.

A sampling oracle realizes the outer-limit representation of the
coderivative at infinity independently of the exact path; its stabilization
rule (two consecutive schedule stages agreeing) is a heuristic and is
flagged as such in the diagnostics it returns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geom, svmap
from .geom import (ConeUnion, Polyhedron, PolyCone, UnionRegion,
                   cone_from_active_normals, intersect_cones,
                   lp_feasible_point, lp_strict_point, lp_support)
from .svmap import SetValuedMap, InfinityWindow, jelonek_contains
from .tolerances import ANGULAR_TOL_SAMPLED, FEAS_TOL


class NotInJelonekSet(Exception):
    """Raised when an at-infinity operation is asked for ybar not in J(F)."""


class NotStabilized(Exception):
    """Sampled outer limit exhausted its schedule without two-stage agreement."""


@dataclass(frozen=True)
class CovectorPair:
    xstar: np.ndarray
    ystar: np.ndarray

    @property
    def covector(self) -> np.ndarray:
        return np.concatenate([self.xstar, -self.ystar])


@dataclass(frozen=True)
class Stratum:
    """A combinatorial pattern of the union: containing pieces + active sets."""

    piece_indices: tuple[int, ...]
    active_sets: tuple[tuple[int, ...], ...]
    representative: np.ndarray
    cone: PolyCone
    unbounded_in_x: Optional[bool] = None
    y_limit: Optional[np.ndarray] = None
    escape_point: Optional[np.ndarray] = None
    escape_direction: Optional[np.ndarray] = None

    @property
    def key(self):
        return (self.piece_indices, self.active_sets)


# ---------------------------------------------------------------------------
# faces of a single polyhedron
# ---------------------------------------------------------------------------

def _face_closure(piece: Polyhedron, act: frozenset[int]) -> Optional[frozenset[int]]:
    """Close an active set under implicit equalities; None if face empty."""
    idx = sorted(act)
    others = [j for j in range(piece.nrows) if j not in act]
    A_eq = piece.normals[idx] if idx else None
    b_eq = piece.offsets[idx] if idx else None
    A_ub = piece.normals[others] if others else np.zeros((0, piece.dim))
    b_ub = piece.offsets[others] if others else np.zeros(0)
    if lp_feasible_point(A_ub, b_ub, A_eq, b_eq) is None:
        return None
    closed = set(act)
    for j in others:
        val, _ = lp_support(-piece.normals[j], A_ub, b_ub, A_eq, b_eq)
        if val == -math.inf:
            return None
        min_val = -val
        if min_val >= piece.offsets[j] - FEAS_TOL * max(1.0, abs(piece.offsets[j])):
            closed.add(j)
    return frozenset(closed)


def faces_of_piece(piece: Polyhedron) -> list[frozenset[int]]:
    """All nonempty faces of a polyhedron, as closed active sets."""
    root = _face_closure(piece, frozenset())
    if root is None:
        return []
    seen = {root}
    queue = [root]
    while queue:
        act = queue.pop()
        for j in range(piece.nrows):
            if j in act:
                continue
            child = _face_closure(piece, act | {j})
            if child is not None and child not in seen:
                seen.add(child)
                queue.append(child)
    return sorted(seen, key=lambda s: (len(s), sorted(s)))


# ---------------------------------------------------------------------------
# regular normal cone (direct, no enumeration)
# ---------------------------------------------------------------------------

def regular_normal_cone(region: UnionRegion, z) -> ConeUnion:
    """N-hat of a finite union at a point.

    Intersection, over the pieces containing z, of the conic hulls of their
    active constraint normals (the polar-of-tangent formula, exact in the
    polyhedral case).  Returns the empty union when z is outside the set.
    """
    z = np.asarray(z, dtype=float)
    cones = []
    for piece in region.pieces:
        if not piece.contains(z):
            continue
        act = piece.active_set(z)
        cones.append(cone_from_active_normals(piece.normals[list(act)], region.dim))
    if not cones:
        return ConeUnion(region.dim, ())
    return ConeUnion(region.dim, (intersect_cones(cones),))


def _pattern_cone(region: UnionRegion, piece_indices, active_sets) -> PolyCone:
    cones = [cone_from_active_normals(region.pieces[i].normals[list(act)], region.dim)
             for i, act in zip(piece_indices, active_sets)]
    return intersect_cones(cones)


# ---------------------------------------------------------------------------
# pattern enumeration
# ---------------------------------------------------------------------------

@dataclass
class _System:
    """Accumulated constraint system of a partial pattern."""

    dim: int
    eq_rows: list = field(default_factory=list)
    eq_rhs: list = field(default_factory=list)
    strict_rows: list = field(default_factory=list)   # a z < b
    strict_rhs: list = field(default_factory=list)

    def copy(self) -> "_System":
        return _System(self.dim, list(self.eq_rows), list(self.eq_rhs),
                       list(self.strict_rows), list(self.strict_rhs))

    def arrays(self):
        A_eq = np.array(self.eq_rows) if self.eq_rows else np.zeros((0, self.dim))
        b_eq = np.array(self.eq_rhs) if self.eq_rhs else np.zeros(0)
        A_st = np.array(self.strict_rows) if self.strict_rows else np.zeros((0, self.dim))
        b_st = np.array(self.strict_rhs) if self.strict_rhs else np.zeros(0)
        return A_eq, b_eq, A_st, b_st

    def closure_feasible_with(self, extra_eq_rows, extra_eq_rhs) -> bool:
        A_eq, b_eq, A_st, b_st = self.arrays()
        if len(extra_eq_rows):
            A_eq = np.vstack([A_eq, extra_eq_rows])
            b_eq = np.concatenate([b_eq, extra_eq_rhs])
        if _weak_system_structurally_empty(A_eq, b_eq, A_st, b_st):
            return False
        return lp_feasible_point(A_st, b_st, A_eq, b_eq) is not None

    def strict_point(self) -> Optional[np.ndarray]:
        A_eq, b_eq, A_st, b_st = self.arrays()
        return lp_strict_point(A_st, b_st, A_eq, b_eq)

    def closure_admits(self, z: np.ndarray) -> bool:
        A_eq, b_eq, A_st, b_st = self.arrays()
        if len(A_eq) and np.max(np.abs(A_eq @ z - b_eq)) > 1e-7:
            return False
        if len(A_st) and np.max(A_st @ z - b_st) > 1e-7:
            return False
        return True


def _weak_system_structurally_empty(A_eq, b_eq, A_ub, b_ub) -> bool:
    """LP-free infeasibility witness: antiparallel row pairs with a gap.

    Equalities are unfolded into opposite inequality pairs; the check then
    looks for rows a z <= b1 and -t a z <= b2 with t > 0 and t b1 + b2 < 0.
    Only a sufficient emptiness test, used to prune before the LP."""
    rows = [A_ub] if len(A_ub) else []
    rhs = [b_ub] if len(A_ub) else []
    if len(A_eq):
        rows += [A_eq, -A_eq]
        rhs += [b_eq, -b_eq]
    if not rows:
        return False
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    return geom._antiparallel_empty(A, b)


def _piece_options(piece: Polyhedron, faces: list[frozenset[int]]):
    """Pattern options for one piece: each face, or 'out' through one row."""
    options = []
    for act in faces:
        options.append(("face", act))
    for j in range(piece.nrows):
        options.append(("out", j))
    return options


def _apply_option(system: _System, piece: Polyhedron, option) -> _System:
    sys2 = system.copy()
    kind, payload = option
    if kind == "face":
        act = payload
        for j in range(piece.nrows):
            if j in act:
                sys2.eq_rows.append(piece.normals[j])
                sys2.eq_rhs.append(piece.offsets[j])
            else:
                sys2.strict_rows.append(piece.normals[j])
                sys2.strict_rhs.append(piece.offsets[j])
    else:
        j = payload
        sys2.strict_rows.append(-piece.normals[j])
        sys2.strict_rhs.append(-piece.offsets[j])
    return sys2


def _cell_closure_disjoint(system: _System, piece: Polyhedron) -> bool:
    """Is the closure of the partial cell provably disjoint from the piece?

    When true, every completion of the pattern automatically excludes the
    piece and no violated-row witness needs to be branched on.
    """
    A_eq, b_eq, A_st, b_st = system.arrays()
    A_ub = np.vstack([A_st, piece.normals]) if len(A_st) else piece.normals
    b_ub = np.concatenate([b_st, piece.offsets]) if len(A_st) else piece.offsets
    if _weak_system_structurally_empty(A_eq, b_eq, A_ub, b_ub):
        return True
    return lp_feasible_point(A_ub, b_ub, A_eq, b_eq) is None


def _enumerate_patterns(region: UnionRegion, prune, order=None,
                        can_be_member=None) -> list[tuple[tuple, tuple, _System]]:
    """All realizable patterns (containing pieces with exact active sets).

    `prune(system) -> bool` must be monotone under adding constraints: once
    it rejects a partial system it would reject every completion.  `order`
    permutes piece processing; fronting likely members lets the disjointness
    shortcut collapse the out-branching of unreachable pieces.
    `can_be_member[i] = False` asserts that no face of piece i can survive
    the prune, letting member-less branches die early.
    """
    order = list(order) if order is not None else list(range(len(region.pieces)))
    if can_be_member is None:
        can_be_member = [True] * len(region.pieces)
    piece_faces = {i: faces_of_piece(region.pieces[i]) for i in order}
    results: list[tuple[tuple, tuple, _System]] = []

    def recurse(pos: int, system: _System, members: list, actives: list):
        if not members and not any(can_be_member[i] for i in order[pos:]):
            return
        if pos == len(order):
            if system.strict_point() is None:
                return
            pairs = sorted(zip(members, actives))
            results.append((tuple(i for i, _ in pairs),
                            tuple(a for _, a in pairs), system))
            return
        i = order[pos]
        piece = region.pieces[i]
        if _cell_closure_disjoint(system, piece):
            recurse(pos + 1, system, members, actives)
            return
        for option in _piece_options(piece, piece_faces[i]):
            if option[0] == "face" and not can_be_member[i]:
                continue
            sys2 = _apply_option(system, piece, option)
            if not prune(sys2):
                continue
            if option[0] == "face":
                recurse(pos + 1, sys2, members + [i],
                        actives + [tuple(sorted(option[1]))])
            else:
                recurse(pos + 1, sys2, members, actives)

    recurse(0, _System(region.dim), [], [])
    return results


# ---------------------------------------------------------------------------
# limiting normal cone at a point
# ---------------------------------------------------------------------------

def limiting_strata_at_point(region: UnionRegion, z) -> list[Stratum]:
    z = np.asarray(z, dtype=float)
    # pieces at positive distance from z never matter for the local pattern
    # structure; points of any realizable cell near z are outside them anyway
    near = [i for i, p in enumerate(region.pieces) if p.contains(z, tol=1e-7)]
    sub = UnionRegion(region.dim, tuple(region.pieces[i] for i in near))

    def prune(system: _System) -> bool:
        # the closure of the pattern cell must contain z
        return system.closure_admits(z)

    patterns = _enumerate_patterns(sub, prune)
    strata: dict = {}
    for members, actives, system in patterns:
        orig = tuple(near[i] for i in members)
        key = (orig, actives)
        if key in strata:
            continue
        rep = system.strict_point()
        cone = _pattern_cone(sub, members, actives)
        strata[key] = Stratum(orig, actives, rep, cone)
    return list(strata.values())


def limiting_normal_cone(region: UnionRegion, z) -> ConeUnion:
    """Limiting (Mordukhovich) normal cone of a polyhedral union at z.

    Union of the regular cones over all strata whose closure contains z;
    exact because the active patterns near z are finitely many.
    """
    z = np.asarray(z, dtype=float)
    if not region.contains(z):
        return ConeUnion(region.dim, ())
    strata = limiting_strata_at_point(region, z)
    return _dedupe_union(region.dim, [s.cone for s in strata])


def _dedupe_union(dim: int, cones: list[PolyCone]) -> ConeUnion:
    """Drop repeated cones and trivial {0} pieces dominated by others."""
    kept: list[PolyCone] = []
    for c in cones:
        if not any(_same_cone(c, k) for k in kept):
            kept.append(c)
    nontrivial = [c for c in kept if len(c.rays)]
    if nontrivial:
        kept = nontrivial  # {0} is a subset of every cone piece
    return ConeUnion(dim, tuple(kept))


# ---------------------------------------------------------------------------
# normal cone at infinity
# ---------------------------------------------------------------------------

def _escape_data(system: _System, n: int, ybar: np.ndarray):
    """Escape test for a pattern cell: closure meets {y = ybar} and recedes in x.

    Returns (point_with_y_ybar, recession_direction) or None.  For a
    relatively open polyhedral cell both conditions together are equivalent
    to the existence of a sequence in the cell with ||x|| -> inf, y -> ybar.
    """
    A_eq, b_eq, A_st, b_st = system.arrays()
    dim = system.dim
    m = dim - n
    y_rows = np.zeros((m, dim))
    for j in range(m):
        y_rows[j, n + j] = 1.0
    A_eq_y = np.vstack([A_eq, y_rows])
    b_eq_y = np.concatenate([b_eq, ybar])
    point = lp_feasible_point(A_st, b_st, A_eq_y, b_eq_y)
    if point is None:
        return None
    # recession cone of the closure: eq rows = 0, weak rows <= 0, y block = 0
    for j in range(n):
        for s in (1.0, -1.0):
            pin = np.zeros(dim)
            pin[j] = 1.0
            A_eq_r = np.vstack([A_eq, y_rows, pin[None, :]])
            b_eq_r = np.concatenate([np.zeros(len(A_eq) + m), [s]])
            d = lp_feasible_point(A_st, np.zeros(len(A_st)), A_eq_r, b_eq_r)
            if d is not None:
                return point, d
    return None


def strata_at_infinity(region: UnionRegion, n: int, ybar) -> list[Stratum]:
    """Strata of the union admitting escape to (infinity, ybar)."""
    ybar = np.asarray(ybar, dtype=float)
    m = region.dim - n
    if ybar.shape != (m,):
        raise geom.DimensionMismatch("ybar dimension mismatch")

    y_rows = np.zeros((m, region.dim))
    for j in range(m):
        y_rows[j, n + j] = 1.0

    def prune(system: _System) -> bool:
        return system.closure_feasible_with(y_rows, ybar)

    # escape-capable pieces first: their face equalities constrain the cell
    # early, so unreachable pieces collapse through the disjointness shortcut;
    # pieces missing {y = ybar} entirely can never contribute a member face
    touches_ybar = [
        lp_feasible_point(p.normals, p.offsets, y_rows, ybar) is not None
        for p in region.pieces]
    capable = [
        touches_ybar[i]
        and svmap._piece_escape_direction(region.pieces[i], n, m) is not None
        for i in range(len(region.pieces))]
    order = sorted(range(len(region.pieces)), key=lambda i: 0 if capable[i] else 1)
    patterns = _enumerate_patterns(region, prune, order=order,
                                   can_be_member=touches_ybar)
    strata: dict = {}
    for members, actives, system in patterns:
        key = (members, actives)
        if key in strata:
            continue
        esc = _escape_data(system, n, ybar)
        if esc is None:
            continue
        point, direction = esc
        cone = _pattern_cone(region, members, actives)
        strata[key] = Stratum(members, actives, system.strict_point(), cone,
                              unbounded_in_x=True, y_limit=ybar,
                              escape_point=point, escape_direction=direction)
    return list(strata.values())


def normal_cone_at_infinity(region: UnionRegion, n: int, ybar) -> ConeUnion:
    """N(infinity, ybar): union of regular cones over escaping strata.

    Exact outer limit of N-hat over (x, y) -> (infinity, ybar) in the union;
    empty when no stratum escapes.
    """
    strata = strata_at_infinity(region, n, ybar)
    if not strata:
        return ConeUnion(region.dim, ())
    return _dedupe_union(region.dim, [s.cone for s in strata])


# ---------------------------------------------------------------------------
# coderivatives
# ---------------------------------------------------------------------------

def _slice_cone_union(cones: ConeUnion, n: int, ystar: np.ndarray) -> UnionRegion:
    pieces = []
    for cone in cones.pieces:
        rows = geom.slice_cone_at_ystar(cone, n, ystar)
        if rows is None:
            continue
        normals, offsets = rows
        pieces.append(Polyhedron(normals.reshape(-1, n), offsets))
    return UnionRegion(n, tuple(pieces))


def coderivative_at_point(F: SetValuedMap, x, y, ystar) -> UnionRegion:
    """D*F(x, y)(y*) = {x* : (x*, -y*) in N_gph(x, y)} as polyhedral slices."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ystar = np.asarray(ystar, dtype=float)
    z = np.concatenate([x, y])
    if not F.graph.contains(z):
        raise geom.GeometryError("(x, y) is not a graph point")
    cones = limiting_normal_cone(F.graph, z)
    return _slice_cone_union(cones, F.n, ystar)


def coderivative_at_infinity(F: SetValuedMap, ybar, ystar) -> UnionRegion:
    """D*F(infinity, ybar)(y*); requires ybar in J(F)."""
    if not jelonek_contains(F, ybar):
        raise NotInJelonekSet("ybar is not in the Jelonek set of F")
    cones = normal_cone_at_infinity(F.graph, F.n, ybar)
    return _slice_cone_union(cones, F.n, np.asarray(ystar, dtype=float))


# ---------------------------------------------------------------------------
# sampled outer-limit oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampledLimitDiagnostics:
    stage_counts: tuple[int, ...]
    stabilized_at: int
    stage_distances: tuple[float, ...]
    direction_samples: np.ndarray
    heuristic: str = "two-stage agreement (heuristic; no convergence rate is guaranteed)"


def _local_cone_pieces(region: UnionRegion, z: np.ndarray) -> list[PolyCone]:
    cu = regular_normal_cone(region, z)
    return list(cu.pieces)


def sampled_coderivative_limit(F: SetValuedMap, ybar, ystar,
                               window: InfinityWindow,
                               seed: int = 0,
                               budget_per_stage: int = 8):
    """Outer-limit sampling of the coderivative at (infinity, ybar).

    Walks the window schedule; at stage j it samples graph points with
    ||x|| in [R_j, R_(j+1)] and ||y - ybar|| <= r/j, evaluates regular
    normal cones there, and slices them at covectors z* with
    ||z* - y*|| <= 1/j.  Stops once two consecutive stages produce cone
    unions equal within the sampled angular tolerance.

    Returns (ConeUnion, SampledLimitDiagnostics).  Raises NotInJelonekSet
    or NotStabilized.
    """
    ybar = np.asarray(ybar, dtype=float)
    ystar = np.asarray(ystar, dtype=float)
    if not jelonek_contains(F, ybar):
        raise NotInJelonekSet("ybar is not in the Jelonek set of F")
    rng = np.random.default_rng(seed)
    sched = window.schedule
    stage_unions: list[ConeUnion] = []
    stage_counts: list[int] = []
    stage_distances: list[float] = []
    directions: list[tuple[int, np.ndarray]] = []
    dim = F.n + F.m
    stabilized_at = -1
    for j in range(1, len(sched)):
        xlo, xhi = sched[j - 1], sched[j]
        ytol = window.r / j
        pts = svmap.sample_graph_points(F, ybar, xlo, xhi, ytol, rng,
                                        budget_per_stage)
        pts = [p for p in pts if np.linalg.norm(p[F.n:] - ybar) <= ytol + 1e-9]
        cones: list[PolyCone] = []
        for p in pts:
            for cone in _local_cone_pieces(F.graph, p):
                if not any(_same_cone(cone, c) for c in cones):
                    cones.append(cone)
                for _ in range(3):
                    zstar = ystar + rng.standard_normal(F.m) / (j * math.sqrt(F.m) * 3.0)
                    if np.linalg.norm(zstar - ystar) > 1.0 / j:
                        continue
                    sl = geom.slice_cone_at_ystar(cone, F.n, zstar)
                    if sl is None:
                        continue
                    normals, offsets = sl
                    poly = Polyhedron(normals.reshape(-1, F.n), offsets)
                    try:
                        xstar = geom.project(np.zeros(F.n), poly)
                    except geom.EmptyPolyhedron:
                        continue
                    cov = np.concatenate([xstar, -zstar])
                    nv = np.linalg.norm(cov)
                    if nv > 1e-12:
                        directions.append((j, cov / nv))
                    for v in poly.vertices():
                        cov = np.concatenate([v, -zstar])
                        nv = np.linalg.norm(cov)
                        if nv > 1e-12:
                            directions.append((j, cov / nv))
        union = ConeUnion(dim, tuple(cones))
        stage_counts.append(len(pts))
        stage_unions.append(union)
        if len(stage_unions) >= 2:
            d = geom.cone_union_hausdorff(stage_unions[-2], stage_unions[-1])
            stage_distances.append(d)
            if d <= ANGULAR_TOL_SAMPLED and stage_counts[-1] > 0 and stage_counts[-2] > 0:
                stabilized_at = j
                break
    if stabilized_at < 0:
        raise NotStabilized("schedule exhausted without two-stage agreement")
    pieces: list[PolyCone] = []
    for union in stage_unions[-2:]:
        for cone in union.pieces:
            if not any(_same_cone(cone, c) for c in pieces):
                pieces.append(cone)
    result = ConeUnion(dim, tuple(pieces))
    # the reported direction set matches the stabilized result: directions
    # from earlier stages are transient sieve data and are dropped
    final = [d for stage, d in directions if stage >= stabilized_at - 1]
    diag = SampledLimitDiagnostics(tuple(stage_counts), stabilized_at,
                                   tuple(stage_distances),
                                   np.array(final) if final
                                   else np.zeros((0, dim)))
    return result, diag


def _same_cone(a: PolyCone, b: PolyCone) -> bool:
    return geom.cone_union_hausdorff(ConeUnion(a.dim, (a,)),
                                     ConeUnion(b.dim, (b,))) <= 1e-9
