"""Contraction solver for perturbed generalized equations y in (F + f)(x).

The iteration alternates evaluation of the perturbation with exact nearest-
point selection on the polyhedral preimage slice:

    z_(k+1) = nearest point of F^{-1}(y - f(z_k)) to z_k.

Under kappa * lambda < 1 the residuals contract geometrically with ratio at
most kappa * lambda + epsilon, and the terminal point satisfies the
a-posteriori distance bound with constant kappa / (1 - kappa * lambda).
Perturbed preimages are never sliced exactly; the loop only ever needs
F^{-1} (polyhedral) plus evaluations of f.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geom, svmap
from .geom import EmptyPolyhedron, project_union
from .svmap import SampledMap, SetValuedMap, preimage_slice, sum_map


class EmptyPreimage(Exception):
    """F^{-1}(y - f(z_k)) was empty: the iterate left the solvable window."""


class ContractionViolated(Exception):
    """Residual ratios exceeded kappa*lambda + epsilon three times in a row."""

    def __init__(self, message: str, trace: "IterationTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class IterationTrace:
    iterates: tuple[tuple[float, ...], ...]
    residuals: tuple[float, ...]
    kappa: float
    lam: float
    epsilon: float
    status: str  # converged | stalled | max-iters

    @property
    def terminal(self) -> np.ndarray:
        return np.array(self.iterates[-1])

    @property
    def ratios(self) -> tuple[float, ...]:
        return tuple(self.residuals[i + 1] / self.residuals[i]
                     for i in range(len(self.residuals) - 1)
                     if self.residuals[i] > 1e-15)

    def to_rows(self):
        return [(i, r) for i, r in enumerate(self.residuals)]


def lg_solve(F: SetValuedMap, f: SampledMap, y, x0, kappa: float, lam: float,
             epsilon: float, max_iters: int = 200) -> IterationTrace:
    """Solve y in (F + f)(x) from x0 by the contraction iteration.

    Requires kappa * lam < 1 and 0 < epsilon < 1 - kappa * lam.  Raises
    EmptyPreimage when an iterate's preimage slice is empty (window
    hypothesis violated) and ContractionViolated after three consecutive
    residual-ratio violations.
    """
    if not (kappa > 0 and lam >= 0 and kappa * lam < 1.0):
        raise ValueError("need kappa > 0, lam >= 0, kappa * lam < 1")
    if not (0.0 < epsilon < 1.0 - kappa * lam):
        raise ValueError("need 0 < epsilon < 1 - kappa * lam")
    y = np.asarray(y, dtype=float)
    z = np.asarray(x0, dtype=float)
    handle = sum_map(F, f)
    iterates = [tuple(z)]
    residuals: list[float] = []
    if handle.dist_to_image(z, y) <= 1e-9:
        return IterationTrace(tuple(iterates), (), kappa, lam, epsilon, "converged")
    strikes = 0
    ratio_cap = kappa * lam + epsilon
    status = "max-iters"
    for _ in range(max_iters):
        target = y - f(z)
        region = preimage_slice(F, target)
        try:
            z_next = project_union(z, region)
        except EmptyPolyhedron as exc:
            raise EmptyPreimage("empty preimage slice during iteration") from exc
        res = float(np.linalg.norm(z_next - z))
        if residuals and residuals[-1] > 1e-15:
            if res / residuals[-1] > ratio_cap + 1e-12:
                strikes += 1
            else:
                strikes = 0
        residuals.append(res)
        iterates.append(tuple(z_next))
        z = z_next
        if strikes >= 3:
            raise ContractionViolated(
                "residual ratio exceeded kappa*lambda + epsilon three times",
                IterationTrace(tuple(iterates), tuple(residuals), kappa, lam,
                               epsilon, "stalled"))
        if res <= 1e-12 or handle.dist_to_image(z, y) <= 1e-12:
            status = "converged" if handle.dist_to_image(z, y) <= 1e-9 else "stalled"
            break
    return IterationTrace(tuple(iterates), tuple(residuals), kappa, lam,
                          epsilon, status)


@dataclass(frozen=True)
class BoundCertificate:
    passed: bool
    lhs: float            # ||z - x0||
    rhs: float            # kappa/(1 - kappa lam) * dist(y, (F+f)(x0)) + 1e-9
    initial_residual: float
    slack: float


def certify_bound(trace: IterationTrace, F: SetValuedMap, f: SampledMap,
                  y, x0, kappa: float, lam: float) -> BoundCertificate:
    """A-posteriori distance certificate for a converged trace."""
    if trace.status != "converged":
        raise ValueError("certificate requires a converged trace")
    y = np.asarray(y, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    handle = sum_map(F, f)
    d0 = handle.dist_to_image(x0, y)
    lhs = float(np.linalg.norm(trace.terminal - x0))
    rhs = kappa / (1.0 - kappa * lam) * d0 + 1e-9
    return BoundCertificate(lhs <= rhs, lhs, rhs, d0, rhs - lhs)
