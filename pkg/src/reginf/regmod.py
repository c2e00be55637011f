"""Regularity moduli at infinity.

Empirical estimation of the metric-regularity modulus by ratio sampling,
exact computation of the dual quantity rg+ on polyhedral graphs, the
criterion equality check rg+ = 1/reg, Lipschitz-modulus estimation at
infinity, upper norms of positively homogeneous maps, the strong-regularity
localization test, and the consolidated radius report.

The estimators are sampled quantities: every report they feed tags values
as exact or sampled and carries the tolerance used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import geom, svmap
from .geom import (ConeUnion, Infeasible, PolyCone, Polyhedron, UnionRegion,
                   dist_union, min_norm_in_slice)
from .normals import (CovectorPair, NotInJelonekSet, faces_of_piece,
                      normal_cone_at_infinity)
from .svmap import (InfinityWindow, PerturbedMap, SampledMap, SetValuedMap,
                    image_slice, jelonek_contains, preimage_slice)
from .tolerances import CRITERION_REL_TOL, RATIO_CAP


class NoAdmissibleSamples(Exception):
    """The sampling window admitted no ratio samples at all."""


@dataclass(frozen=True)
class SamplerConfig:
    budget: int = 10000
    seed: int = 0
    n_shells: int = 4
    directions_per_shell: int = 8


@dataclass(frozen=True)
class RegEstimate:
    value: float
    witness: Optional[tuple[np.ndarray, np.ndarray]]
    window: InfinityWindow
    samples: int
    failed: bool
    ratios: tuple = field(default=(), repr=False)

    def witness_ratio(self, F) -> float:
        """Re-evaluate the witness ratio (reproducibility invariant)."""
        x, y = self.witness
        den = svmap.dist_to_image(F, x, y)
        num = dist_union(x, preimage_slice(F, y))
        return num / den


@dataclass(frozen=True)
class RgPlusResult:
    value: float
    argmin: Optional[CovectorPair]
    method: str
    grid_value: float = math.nan
    face_value: float = math.nan


# ---------------------------------------------------------------------------
# direction designs
# ---------------------------------------------------------------------------

def sphere_directions(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic spherical design: exact for dim 1, uniform for dim 2,
    Fibonacci points for dim 3, seeded Gaussian directions above."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        ang = np.linspace(0.0, 2.0 * math.pi, count, endpoint=False)
        return np.column_stack([np.cos(ang), np.sin(ang)])
    if dim == 3:
        k = np.arange(count) + 0.5
        phi = math.pi * (1.0 + math.sqrt(5.0)) * k
        z = 1.0 - 2.0 * k / count
        rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((count, dim))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def _y_samples(ybar: np.ndarray, r: float, count: int,
               offset: int = 0) -> list[np.ndarray]:
    """Half low-discrepancy grid in the ball, half radial shells toward ybar.

    `offset` continues the deterministic sequences across passes.
    """
    m = len(ybar)
    out: list[np.ndarray] = []
    half = max(1, count // 2)
    golden = 0.6180339887498949
    dirs = sphere_directions(m, max(4, half), seed=1)
    for idx in range(half):
        i = idx + offset
        rho = r * ((i * golden + 0.37) % 1.0)
        if rho < 1e-12:
            continue
        out.append(ybar + rho * dirs[i % len(dirs)])
    shells = count - half
    sdirs = sphere_directions(m, max(2, shells), seed=2)
    for idx in range(shells):
        i = idx + offset
        rho = r * 2.0 ** (-(i % 12)) * (1.0 - golden * (i % 7) / 16.0)
        out.append(ybar + rho * sdirs[i % len(sdirs)])
    return out


# ---------------------------------------------------------------------------
# reg estimation
# ---------------------------------------------------------------------------

def _preimage_distance_exact(F: SetValuedMap, cache: dict, y: np.ndarray,
                             x: np.ndarray) -> float:
    key = tuple(np.round(y, 12))
    region = cache.get(key)
    if region is None:
        region = preimage_slice(F, y)
        cache[key] = region
    return dist_union(x, region)


def _preimage_distance_iterative(handle: PerturbedMap, y: np.ndarray,
                                 x: np.ndarray, max_iters: int = 60) -> float:
    """Upper bound on dist(x, (F+f)^{-1}(y)) by the contraction iteration.

    Exact preimages of the perturbed map are out of scope; this walks
    z -> nearest point of F^{-1}(y - f(z)) and returns ||z_final - x|| when
    the walk settles on a solution, +inf otherwise.
    """
    z = np.array(x, dtype=float)
    prev_res = math.inf
    for _ in range(max_iters):
        target = y - handle.f(z)
        region = preimage_slice(handle.F, target)
        try:
            z_next = geom.project_union(z, region)
        except geom.EmptyPolyhedron:
            return math.inf
        res = float(np.linalg.norm(z_next - z))
        z = z_next
        if res <= 1e-12:
            break
        if res > 4.0 * prev_res and res > 1e-6:
            return math.inf  # diverging walk: no usable bound
        prev_res = res
    if handle.dist_to_image(z, y) > 1e-7:
        return math.inf
    return float(np.linalg.norm(z - x))


def estimate_reg_at_infinity(F, ybar, window: InfinityWindow,
                             config: SamplerConfig = SamplerConfig()) -> RegEstimate:
    """Empirical modulus of metric regularity at (infinity, ybar).

    Samples pairs (x, y) with ||x|| on dyadic shells above window.R,
    ||y - ybar|| < window.r and residual dist(y, F(x)) in (0, window.gamma),
    and takes the supremum of dist(x, F^{-1}(y)) / dist(y, F(x)).  An empty
    preimage with admissible residual (or a ratio beyond the cap) sets the
    failure flag and the value +inf, matching 1/0 = inf and inf-empty = inf.
    """
    ybar = np.asarray(ybar, dtype=float)
    perturbed = isinstance(F, PerturbedMap)
    base = F.F if perturbed else F
    if not jelonek_contains(base, ybar):
        raise NotInJelonekSet("ybar is not in the Jelonek set of the base map")
    n = base.n
    x_dirs = sphere_directions(n, config.directions_per_shell, seed=config.seed)
    x_points = []
    for j in range(config.n_shells):
        radius = window.R * (2.0 ** j)
        for d in x_dirs:
            x_points.append(radius * d)
    images = []
    for x in x_points:
        img = F.image_region(x) if perturbed else image_slice(base, x)
        if img.pieces:
            images.append((x, img))
    y_count = max(4, config.budget // max(1, len(images)))
    cache: dict = {}
    best = 0.0
    witness = None
    failed = False
    samples = 0
    ratios = []
    y_offset = 0
    for _ in range(8):  # top-up passes until the admitted budget is reached
        ys = _y_samples(ybar, window.r, y_count, offset=y_offset)
        y_offset += y_count
        for x, img in images:
            for y in ys:
                den = dist_union(y, img)
                if not (1e-12 < den < window.gamma):
                    continue
                if perturbed:
                    num = _preimage_distance_iterative(F, y, x)
                else:
                    num = _preimage_distance_exact(base, cache, y, x)
                samples += 1
                ratio = num / den if math.isfinite(num) else math.inf
                ratios.append((tuple(x), tuple(y), num, den,
                               ratio if math.isfinite(ratio) else math.inf))
                if ratio > RATIO_CAP:
                    failed = True
                    best = math.inf
                    if witness is None:
                        witness = (np.array(x), np.array(y))
                    continue
                if ratio > best:
                    best = ratio
                    witness = (np.array(x), np.array(y))
        if samples >= config.budget:
            break
    if samples == 0:
        raise NoAdmissibleSamples("window admitted no ratio samples")
    return RegEstimate(best, witness, window, samples, failed, tuple(ratios))


# ---------------------------------------------------------------------------
# rg+ (exact on polyhedral graphs)
# ---------------------------------------------------------------------------

def _face_spans(cone: PolyCone) -> list[np.ndarray]:
    """Orthonormal bases of the affine hulls of all faces of the cone."""
    if len(cone.normals) == 0:
        return [np.eye(cone.dim)]
    poly = Polyhedron(cone.normals, np.zeros(len(cone.normals)))
    spans = []
    for act in faces_of_piece(poly):
        rows = poly.normals[sorted(act)]
        if len(rows) == 0:
            spans.append(np.eye(cone.dim))
            continue
        _, s, vt = np.linalg.svd(rows)
        rank = int(np.sum(s > 1e-10 * max(1.0, s[0] if len(s) else 1.0)))
        basis = vt[rank:].T
        if basis.shape[1]:
            spans.append(basis)
    return spans


def _pencil_extrema(cone: PolyCone, n: int) -> list[tuple[float, np.ndarray]]:
    """Critical values of ||first block|| over face spans with unit second
    block, filtered by cone feasibility.

    The optimum of the block-norm quotient over the cone intersected with
    the unit-sphere condition lies in the relative interior of some face and
    is a critical point of that face's span-restricted Rayleigh quotient, so
    enumerating all eigenpairs of all face pencils and filtering by cone
    membership is exact for both minimization and maximization.  Candidate
    values are recomputed from the candidate point, so spurious eigenpairs
    can never distort the extremum.
    """
    dim = cone.dim
    m = dim - n
    num_proj = np.zeros((dim, dim))
    num_proj[:n, :n] = np.eye(n)
    den_proj = np.zeros((dim, dim))
    den_proj[n:, n:] = np.eye(m)
    out: list[tuple[float, np.ndarray]] = []
    for B in _face_spans(cone):
        M = B.T @ num_proj @ B
        W = B.T @ den_proj @ B
        wvals, wvecs = np.linalg.eigh(W)
        pos = wvals > 1e-12
        if not np.any(pos):
            continue
        Vr = wvecs[:, pos]
        V0 = wvecs[:, ~pos]
        S_half_inv = np.diag(1.0 / np.sqrt(wvals[pos]))
        A = S_half_inv @ Vr.T @ M @ Vr @ S_half_inv
        if V0.shape[1]:
            B0 = S_half_inv @ Vr.T @ M @ V0
            C = V0.T @ M @ V0
            Cp = np.linalg.pinv(C, rcond=1e-12)
            red = A - B0 @ Cp @ B0.T
        else:
            B0 = Cp = None
            red = A
        _, evecs = np.linalg.eigh(red)
        for w in evecs.T:
            v = Vr @ S_half_inv @ w
            if B0 is not None:
                v = v + V0 @ (-Cp @ B0.T @ w)
            z = B @ v
            un = np.linalg.norm(den_proj @ z)
            if un < 1e-10:
                continue
            z = z / un
            for cand in (z, -z):
                if cone.contains(cand, tol=1e-8):
                    out.append((float(np.linalg.norm(num_proj @ cand)), cand))
                    break
    return out


def _grid_min_for_cone(cone: PolyCone, n: int, m: int):
    """Sphere-grid + local bisection refinement minimum of the slice norm."""
    if m == 1:
        grid = [np.array([1.0]), np.array([-1.0])]
        refine_rounds = 0
    elif m == 2:
        grid = list(sphere_directions(2, 360))
        refine_rounds = 3
    else:
        grid = list(sphere_directions(m, 2000, seed=11))
        refine_rounds = 3
    best = math.inf
    best_pair = None

    def eval_at(ystar):
        nonlocal best, best_pair
        try:
            res = min_norm_in_slice(cone, n, ystar)
        except Infeasible:
            return
        if res.norm < best:
            best = res.norm
            best_pair = CovectorPair(res.point, np.array(ystar, dtype=float))

    for ystar in grid:
        eval_at(ystar)
    if best_pair is not None and refine_rounds and m >= 2:
        step = math.pi / 180.0
        for _ in range(refine_rounds):
            step /= 2.0
            center = best_pair.ystar
            for d in sphere_directions(m, 8, seed=7):
                cand = center + step * d
                cand = cand / np.linalg.norm(cand)
                eval_at(cand)
    return best, best_pair


def rg_plus(F: SetValuedMap, ybar) -> RgPlusResult:
    """rg+ F(infinity, ybar): inf ||x*|| over D*F(infinity, ybar)(y*), ||y*|| = 1.

    Exact for polyhedral graphs.  Per cone piece of the normal cone at
    infinity the minimum is located by a sphere grid with per-point min-norm
    solves plus local refinement, cross-checked (m <= 3) by exhaustive face
    enumeration with equality-constrained critical-point solves.  An empty
    feasible set contributes +inf (inf over the empty set).
    """
    ybar = np.asarray(ybar, dtype=float)
    if not jelonek_contains(F, ybar):
        raise NotInJelonekSet("ybar is not in the Jelonek set of F")
    cones = normal_cone_at_infinity(F.graph, F.n, ybar)
    if cones.is_empty:
        return RgPlusResult(math.inf, None, "exact-face-enumeration")
    n, m = F.n, F.m
    grid_best = math.inf
    grid_pair = None
    face_best = math.inf
    face_pair = None
    for cone in cones.pieces:
        g, gp = _grid_min_for_cone(cone, n, m)
        if g < grid_best:
            grid_best, grid_pair = g, gp
        if m <= 3:
            for val, z in _pencil_extrema(cone, n):
                if val < face_best:
                    face_best = val
                    face_pair = CovectorPair(z[:n], -z[n:])
    if m <= 3 and math.isfinite(face_best):
        value = face_best
        pair = face_pair
        method = "exact-face-enumeration"
        if math.isfinite(grid_best) and abs(grid_best - face_best) > 1e-6 * max(1.0, face_best):
            # keep the smaller of the two routes; both are recorded
            if grid_best < face_best:
                value, pair = grid_best, grid_pair
    else:
        value = grid_best
        pair = grid_pair
        method = "sphere-grid-refined"
    if not math.isfinite(value):
        return RgPlusResult(math.inf, None, method, grid_best, face_best)
    ystar = pair.ystar / np.linalg.norm(pair.ystar)
    pair = CovectorPair(pair.xstar, ystar)
    return RgPlusResult(float(value), pair, method, grid_best, face_best)


# ---------------------------------------------------------------------------
# criterion check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CriterionReport:
    rg_plus_value: float
    reg_estimate: float
    reg_failed: bool
    gap: float
    branch: str
    passed: bool
    tolerance: float
    samples: int


def criterion_check(F: SetValuedMap, ybar, window: InfinityWindow,
                    config: SamplerConfig = SamplerConfig(),
                    tol: float = CRITERION_REL_TOL) -> CriterionReport:
    """Mordukhovich criterion at infinity: rg+ = 1/reg, checked numerically.

    The infinite/zero pairing (reg = inf <=> rg+ = 0) is resolved through
    the estimator failure flag rather than a numeric gap.
    """
    rg = rg_plus(F, ybar)
    est = estimate_reg_at_infinity(F, ybar, window, config)
    if est.failed:
        passed = rg.value <= 1e-9
        return CriterionReport(rg.value, math.inf, True, rg.value,
                               "degenerate-inf-reg", passed, tol, est.samples)
    if not math.isfinite(rg.value):
        passed = est.value <= tol
        return CriterionReport(math.inf, est.value, False, est.value,
                               "degenerate-inf-rgplus", passed, tol, est.samples)
    recip = 1.0 / est.value if est.value > 0 else math.inf
    gap = abs(rg.value - recip) / max(rg.value, 1e-9)
    return CriterionReport(rg.value, est.value, False, gap, "finite",
                           gap <= tol, tol, est.samples)


# ---------------------------------------------------------------------------
# Lipschitz modulus at infinity
# ---------------------------------------------------------------------------

def lip_at_infinity(f: SampledMap, window: InfinityWindow, seed: int = 0,
                    budget: int = 2000,
                    extra_pairs: Iterable[tuple[np.ndarray, np.ndarray]] = ()) -> float:
    """sup ||f(x) - f(x')|| / ||x - x'|| over sampled pairs beyond window.R.

    Pair sampling concentrates on small separations; callers with structural
    knowledge (bump constructions) pass extra pairs straddling the features.
    """
    rng = np.random.default_rng(seed)
    n = f.n
    sup = 0.0
    pairs = list(extra_pairs)
    n_base = max(1, budget // 8)
    for _ in range(n_base):
        radius = window.R * (1.0 + 7.0 * rng.random())
        x = radius * _random_unit(rng, n)
        for k in range(8):
            delta = 10.0 ** (-1 - (k % 6)) * (1.0 + rng.random())
            xp = x + delta * _random_unit(rng, n)
            pairs.append((x, xp))
    for x, xp in pairs:
        dx = np.linalg.norm(np.asarray(x) - np.asarray(xp))
        if dx < 1e-14:
            continue
        q = np.linalg.norm(f(np.asarray(x)) - f(np.asarray(xp))) / dx
        sup = max(sup, float(q))
    return sup


def _random_unit(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# upper norm of a positively homogeneous polyhedral-graph map
# ---------------------------------------------------------------------------

def upper_norm(H: ConeUnion, in_dim: int) -> float:
    """sup{||y|| : y in H(x), ||x|| <= 1} for a cone-union graph of H.

    Per cone piece: +inf as soon as the piece contains (0, y) with y != 0;
    otherwise exhaustive face enumeration with critical-point solves of the
    quotient ||y||/||x||.  An unbounded supremum is reported as +inf, not an
    error.
    """
    out_dim = H.dim - in_dim
    best = 0.0
    for cone in H.pieces:
        # unboundedness: a direction with vanishing input block
        rows = cone.normals
        for j in range(out_dim):
            for s in (1.0, -1.0):
                A_eq = np.zeros((in_dim + 1, cone.dim))
                b_eq = np.zeros(in_dim + 1)
                for i in range(in_dim):
                    A_eq[i, i] = 1.0
                A_eq[in_dim, in_dim + j] = 1.0
                b_eq[in_dim] = s
                d = geom.lp_feasible_point(rows, np.zeros(len(rows)), A_eq, b_eq)
                if d is not None:
                    return math.inf
        # maximize ||out|| / ||in||: swap blocks so the pencil numerator
        # is the output norm and the unit condition sits on the input
        perm = np.concatenate([np.arange(in_dim, cone.dim), np.arange(in_dim)])
        T = np.eye(cone.dim)[perm]
        swapped = cone.linear_image(T)
        for val, _ in _pencil_extrema(swapped, out_dim):
            best = max(best, val)
    return best


# ---------------------------------------------------------------------------
# strong metric regularity check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StrongRegularityReport:
    decision: bool
    diagnostic: str
    localization: tuple[tuple[tuple, tuple], ...]  # (y, x) pairs found
    lipschitz: float
    reg_estimate: float
    reg_failed: bool
    tolerance: float


def _window_cut_pieces(region: UnionRegion, radius: float) -> list[Polyhedron]:
    """Pieces of region /\\ {||x|| > radius}, via 2n half-space cuts.

    The cut is at radius/sqrt(n) in each coordinate so the union of cuts
    covers the Euclidean complement (conservative for single-valuedness).
    """
    n = region.dim
    cut = radius / math.sqrt(n)
    out = []
    for piece in region.pieces:
        for j in range(n):
            for s in (1.0, -1.0):
                e = np.zeros(n)
                e[j] = -s
                cand = piece.intersect_rows(e[None, :], np.array([-cut]))
                if not cand.is_empty():
                    out.append(cand)
    return out


def strong_regularity_check(F: SetValuedMap, ybar, window: InfinityWindow,
                            config: SamplerConfig = SamplerConfig(),
                            rel_tol: float = CRITERION_REL_TOL) -> StrongRegularityReport:
    """Single-valued-localization test on a punctured grid around ybar.

    For y on shells around ybar (excluding ybar itself: a polyhedral graph
    escaping to (infinity, ybar) always carries a preimage ray at exactly
    ybar), each nonempty slice of F^{-1}(y) beyond window.R must be a single
    point (diameter <= 1e-9 by vertex enumeration).  The resulting
    localization is given an empirical Lipschitz constant and compared with
    the reg estimate per the localization equivalence.
    """
    ybar = np.asarray(ybar, dtype=float)
    if not jelonek_contains(F, ybar):
        raise NotInJelonekSet("ybar is not in the Jelonek set of F")
    dirs = sphere_directions(F.m, 8)
    ys = []
    for i in range(10):
        rho = window.r * 2.0 ** (-i)
        for d in dirs:
            ys.append(ybar + rho * d)
    loc_pairs: list[tuple[np.ndarray, np.ndarray]] = []
    nonempty = 0
    for y in ys:
        pieces = _window_cut_pieces(preimage_slice(F, y), window.R)
        pts: list[np.ndarray] = []
        for piece in pieces:
            if not piece.is_bounded():
                est = estimate_reg_at_infinity(F, ybar, window, config)
                return StrongRegularityReport(
                    False, "UnboundedSlice", (), math.inf, est.value,
                    est.failed, rel_tol)
            pts.extend(piece.vertices())
        if not pts:
            continue
        nonempty += 1
        diam = max(np.linalg.norm(a - b) for a in pts for b in pts)
        if diam > 1e-9:
            est = estimate_reg_at_infinity(F, ybar, window, config)
            return StrongRegularityReport(
                False, "MultivaluedSlice", (), math.inf, est.value,
                est.failed, rel_tol)
        loc_pairs.append((y, pts[0]))
    if nonempty == 0:
        est = estimate_reg_at_infinity(F, ybar, window, config)
        return StrongRegularityReport(False, "EmptyLocalization", (),
                                      math.inf, est.value, est.failed, rel_tol)
    lip = 0.0
    for i in range(len(loc_pairs)):
        for j in range(i + 1, len(loc_pairs)):
            dy = np.linalg.norm(loc_pairs[i][0] - loc_pairs[j][0])
            if dy < 1e-12:
                continue
            lip = max(lip, float(np.linalg.norm(loc_pairs[i][1] - loc_pairs[j][1]) / dy))
    est = estimate_reg_at_infinity(F, ybar, window, config)
    lip_ok = math.isfinite(lip) and (est.failed or lip <= (1.0 + rel_tol) * est.value)
    return StrongRegularityReport(
        bool(lip_ok), "SingleValued" if lip_ok else "LipschitzMismatch",
        tuple((tuple(y), tuple(x)) for y, x in loc_pairs),
        lip, est.value, est.failed, rel_tol)


# ---------------------------------------------------------------------------
# radius report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadiusReport:
    mode: str
    rg_plus_value: float
    reg_estimate: float
    reg_failed: bool
    destabilizer_lip: float
    chain_gap: float
    destabilization_evidence: bool
    branch: str
    passed: bool
    tolerance: float


def radius_report(F: SetValuedMap, ybar, perturbation_lip: float,
                  destabilization_evidence: bool, window: InfinityWindow,
                  mode: str = "plain",
                  config: SamplerConfig = SamplerConfig(),
                  tol: float = CRITERION_REL_TOL,
                  strong_perturbed_fails: Optional[bool] = None) -> RadiusReport:
    """Radius-theorem chain: the constructed destabilizer attains 1/reg.

    PASS when the destabilizer's empirical lip f(infinity) is within the
    tolerance of 1/reg_estimate and destabilization evidence is present.
    rg+ = 0 is the degenerate branch: the radius is zero and any
    perturbation is vacuously consistent.
    """
    rg = rg_plus(F, ybar)
    est = estimate_reg_at_infinity(F, ybar, window, config)
    if rg.value <= 1e-9:
        return RadiusReport(mode, rg.value, est.value, est.failed,
                            perturbation_lip, 0.0, True, "degenerate",
                            True, tol)
    recip = math.inf if est.failed or est.value <= 0 else 1.0 / est.value
    gap = abs(perturbation_lip - recip) / max(recip, 1e-9) if math.isfinite(recip) else math.inf
    chain_ok = math.isfinite(recip) and gap <= tol
    passed = bool(chain_ok and destabilization_evidence)
    if mode == "strong" and strong_perturbed_fails is not None:
        passed = passed and strong_perturbed_fails
    return RadiusReport(mode, rg.value, est.value, est.failed,
                        perturbation_lip, gap, destabilization_evidence,
                        "finite", passed, tol)
