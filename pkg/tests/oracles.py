"""Independent oracles for the test suite.

Each oracle solves a problem by a route disjoint from the implementation it
checks: projections by exhaustive KKT subset enumeration, perturbed
generalized equations by scalar bisection on the closed-form reduction.
"""

import itertools
import math

import numpy as np


def project_oracle(z, normals, offsets):
    """Exhaustive active-set projection onto {A w <= b}.

    Enumerates all row subsets up to the dimension, solves the equality
    KKT system per subset, and keeps feasible candidates with nonnegative
    multipliers; the best candidate is the projection (Caratheodory lets the
    optimal multiplier support be at most dim).  Returns None when no
    feasible candidate exists and the unconstrained point is infeasible.
    """
    z = np.asarray(z, dtype=float)
    normals = np.asarray(normals, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    dim = z.shape[0]
    best = None
    best_d = math.inf

    def consider(w, lam_ok):
        nonlocal best, best_d
        if not lam_ok:
            return
        res = normals @ w - offsets
        if len(res) and np.max(res) > 1e-7:
            return
        d = np.linalg.norm(w - z)
        if d < best_d:
            best, best_d = w, d

    consider(z, True)
    nrows = len(normals)
    for size in range(1, dim + 1):
        for idx in itertools.combinations(range(nrows), size):
            A = normals[list(idx)]
            G = A @ A.T
            try:
                lam = np.linalg.solve(G, A @ z - offsets[list(idx)])
            except np.linalg.LinAlgError:
                continue
            w = z - A.T @ lam
            consider(w, bool(np.all(lam >= -1e-9)))
    return best


def bisect_fixed_point(g, lo, hi, tol=1e-13, max_iter=200):
    """Root of g on [lo, hi] by bisection (g(lo), g(hi) of opposite sign)."""
    flo, fhi = g(lo), g(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise ValueError("no sign change on the bracket")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = g(mid)
        if fm == 0.0 or hi - lo < tol:
            return mid
        if flo * fm < 0:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def plane_bump_solution(f, x1, y, bracket=10.0):
    """Closed-form-reduced solution of y in (F + f)(x) for the plane map
    F(x1, x2) = {x2}: solves s + f((x1, s))_0 = y by bisection in s."""
    def g(s):
        return s + f(np.array([x1, s]))[0] - y
    return bisect_fixed_point(g, y - bracket, y + bracket)


def dist_point_segment(p, a, b):
    """Distance from p to the segment [a, b] (used as a slice oracle)."""
    p, a, b = map(np.asarray, (p, a, b))
    d = b - a
    t = float(np.clip((p - a) @ d / (d @ d), 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * d)))
