"""Canonical desk-scale fixtures.

Each builder returns (map, ybar, window) tuned so the sampling windows and
the graph geometry line up; the numbers here are the ones the test suite
and the bundled scenarios rely on.
"""

from __future__ import annotations

import numpy as np

from .geom import Polyhedron, UnionRegion
from .svmap import InfinityWindow, SetValuedMap

DEFAULT_SCHEDULE = tuple(10.0 * 2.0 ** j for j in range(11))


def plane_map(slope: float = 1.0):
    """F(x1, x2) = {slope * x2}: metrically regular with reg = 1/slope."""
    graph = UnionRegion(3, (
        Polyhedron(np.array([[0.0, slope, -1.0], [0.0, -slope, 1.0]]),
                   np.zeros(2)),))
    F = SetValuedMap(2, 1, graph)
    window = InfinityWindow(R=10.0, r=0.5, gamma=0.5, schedule=DEFAULT_SCHEDULE)
    return F, np.array([0.0]), window


def horizontal_ray_map():
    """F with graph {(x, 0) : x >= 1}: the degenerate rg+ = 0 / reg = inf case."""
    graph = UnionRegion(2, (
        Polyhedron(np.array([[-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]),
                   np.array([-1.0, 0.0, 0.0])),))
    F = SetValuedMap(1, 1, graph)
    window = InfinityWindow(R=10.0, r=0.5, gamma=0.5, schedule=DEFAULT_SCHEDULE)
    return F, np.array([0.0]), window


def three_piece_map():
    """Piecewise-affine F(x1, x2) = {g(x2)} with slopes 2 / 0.5 / 2 around 0.

    g(x2) = 2 x2 for x2 <= 0, x2/2 on [0, 2], 2 x2 - 3 beyond; near ybar = 0
    the worst inverse slope is 2, so reg = 2 and rg+ = 0.5.
    """
    p1 = Polyhedron(np.array([[0.0, 2.0, -1.0], [0.0, -2.0, 1.0],
                              [0.0, 1.0, 0.0]]), np.zeros(3))
    p2 = Polyhedron(np.array([[0.0, 0.5, -1.0], [0.0, -0.5, 1.0],
                              [0.0, -1.0, 0.0], [0.0, 1.0, 0.0]]),
                    np.array([0.0, 0.0, 0.0, 2.0]))
    p3 = Polyhedron(np.array([[0.0, 2.0, -1.0], [0.0, -2.0, 1.0],
                              [0.0, -1.0, 0.0]]), np.array([3.0, -3.0, -2.0]))
    F = SetValuedMap(2, 1, UnionRegion(3, (p1, p2, p3)))
    window = InfinityWindow(R=10.0, r=0.45, gamma=0.45, schedule=DEFAULT_SCHEDULE)
    return F, np.array([0.0]), window


def staircase_map(levels: int = 6):
    """Reciprocal staircase: y follows 1/x piecewise on [1, 2^levels],
    then a horizontal tail at 0.

    Preimages of y in (0, 2^-levels-ish) windows are single points, which is
    what the strong-regularity localization test exercises; the tail supplies
    the escape to (infinity, 0).
    """
    pieces = []
    for j in range(levels):
        x0, x1 = 2.0 ** j, 2.0 ** (j + 1)
        y0, y1 = 2.0 ** (-j), 2.0 ** (-j - 1)
        slope = (y1 - y0) / (x1 - x0)
        # y = y0 + slope (x - x0), x in [x0, x1]
        row = np.array([-slope, 1.0])
        off = y0 - slope * x0
        pieces.append(Polyhedron(
            np.array([[row[0], row[1]], [-row[0], -row[1]],
                      [-1.0, 0.0], [1.0, 0.0]]),
            np.array([off, -off, -x0, x1])))
    tail_start = 2.0 ** levels
    pieces.append(Polyhedron(
        np.array([[-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]),
        np.array([-tail_start, 0.0, 0.0])))
    F = SetValuedMap(1, 1, UnionRegion(2, tuple(pieces)))
    # the schedule reaches past the staircase end so the outer-limit sampler
    # eventually sees only the escaping tail; estimator shells stay within
    # the staircase (they scale off R, not the schedule)
    schedule = tuple(4.0 * 2.0 ** j for j in range(11))
    # gamma sits just below the staircase value at the largest sampled shell,
    # so every admitted residual pairs with a nonempty single-point preimage
    gamma = 2.0 ** (-levels) * 0.99
    window = InfinityWindow(R=4.0, r=0.3, gamma=gamma, schedule=schedule)
    return F, np.array([0.0]), window


FIXTURES = {
    "plane": lambda: plane_map(1.0),
    "plane2x": lambda: plane_map(2.0),
    "horizontal-ray": horizontal_ray_map,
    "three-piece": three_piece_map,
    "staircase": staircase_map,
}


def scenario_dict(name: str, **extras) -> dict:
    """Scenario-file payload (JSON-ready) for a named fixture."""
    F, ybar, window = FIXTURES[name]()
    data = {
        "name": name,
        "map": {
            "n": F.n,
            "m": F.m,
            "pieces": [
                {"normals": p.normals.tolist(), "offsets": p.offsets.tolist()}
                for p in F.graph.pieces
            ],
        },
        "ybar": list(ybar),
        "window": {
            "R": window.R,
            "r": window.r,
            "gamma": window.gamma,
            "schedule": list(window.schedule),
        },
        "budget": 10000,
        "seed": 0,
        "tolerances": {"criterion": 0.05, "angular": 1e-3},
        "perturbation": {"K": 8},
    }
    data.update(extras)
    return data
