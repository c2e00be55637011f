import math

import numpy as np
import pytest

from reginf import svmap
from reginf.geom import Polyhedron, UnionRegion
from reginf.svmap import (InfinityWindow, SampledMap, SetValuedMap,
                          dist_to_image, image_slice, jelonek_contains,
                          preimage_slice, sum_map)


def identity_map():
    graph = UnionRegion(2, (Polyhedron(np.array([[1.0, -1.0], [-1.0, 1.0]]),
                                       np.zeros(2)),))
    return SetValuedMap(1, 1, graph)


def ray_map():
    graph = UnionRegion(2, (Polyhedron(
        np.array([[-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]),
        np.array([-1.0, 0.0, 0.0])),))
    return SetValuedMap(1, 1, graph)


def wedge_map():
    # {y >= x} union {y <= -x}
    graph = UnionRegion(2, (Polyhedron(np.array([[1.0, -1.0]]), np.zeros(1)),
                            Polyhedron(np.array([[1.0, 1.0]]), np.zeros(1))))
    return SetValuedMap(1, 1, graph)


class TestSlicing:
    def test_identity_image(self):
        sl = image_slice(identity_map(), np.array([3.0]))
        assert sl.contains([3.0]) and not sl.contains([3.1])

    def test_empty_image_outside_domain(self):
        sl = image_slice(ray_map(), np.array([0.0]))
        assert len(sl.pieces) == 0

    def test_wedge_image(self):
        sl = image_slice(wedge_map(), np.array([1.0]))
        assert sl.contains([1.0]) and sl.contains([7.0])
        assert sl.contains([-1.0]) and sl.contains([-7.0])
        assert not sl.contains([0.0])

    def test_identity_preimage(self):
        sl = preimage_slice(identity_map(), np.array([3.0]))
        assert sl.contains([3.0]) and not sl.contains([2.0])

    def test_ray_preimages(self):
        assert preimage_slice(ray_map(), np.array([0.0])).contains([1.5])
        assert not preimage_slice(ray_map(), np.array([0.0])).contains([0.5])
        assert len(preimage_slice(ray_map(), np.array([0.1])).pieces) == 0

    def test_slice_consistency_random(self, rng):
        F = wedge_map()
        for _ in range(150):
            x = 3.0 * rng.standard_normal(1)
            y = 3.0 * rng.standard_normal(1)
            in_graph = F.graph_contains(x, y)
            assert in_graph == image_slice(F, x).contains(y)
            assert in_graph == preimage_slice(F, y).contains(x)


class TestDistToImage:
    def test_on_graph(self):
        assert dist_to_image(identity_map(), [1.0], [1.0]) == 0.0

    def test_off_graph(self):
        assert dist_to_image(identity_map(), [1.0], [3.0]) == pytest.approx(2.0)

    def test_empty_slice_is_inf(self):
        assert dist_to_image(ray_map(), [0.0], [0.0]) == math.inf

    def test_zero_iff_membership(self, rng):
        F = wedge_map()
        for _ in range(100):
            x = 2.0 * rng.standard_normal(1)
            y = 2.0 * rng.standard_normal(1)
            assert (dist_to_image(F, x, y) <= 1e-9) == F.graph_contains(x, y)


class TestJelonek:
    def test_ray_contains_zero(self):
        res = jelonek_contains(ray_map(), [0.0])
        assert res and res.piece == 0
        assert abs(res.direction[0]) > 0.5

    def test_identity_does_not_contain(self):
        # y escapes together with x: recession directions are diagonal
        assert not jelonek_contains(identity_map(), [0.0])

    def test_union_second_piece_witnesses(self):
        graph = UnionRegion(2, (
            Polyhedron(np.array([[1.0, -1.0], [-1.0, 1.0]]), np.zeros(2)),
            Polyhedron(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]),
                       np.array([-1.0, 0.0, 0.0]))))
        res = jelonek_contains(SetValuedMap(1, 1, graph), [0.0])
        assert res and res.piece == 1

    def test_monotone_under_added_pieces(self):
        base = ray_map()
        res_before = jelonek_contains(base, [0.0])
        bigger = SetValuedMap(1, 1, UnionRegion(2, base.graph.pieces + (
            Polyhedron(np.array([[1.0, 0.0]]), np.array([5.0])),)))
        assert bool(jelonek_contains(bigger, [0.0])) >= bool(res_before)


class TestSumMap:
    def test_zero_perturbation_observationally_equal(self, rng):
        F = wedge_map()
        handle = sum_map(F, SampledMap.zero(1, 1))
        for _ in range(1000):
            x = 4.0 * rng.standard_normal(1)
            y = 4.0 * rng.standard_normal(1)
            assert handle.dist_to_image(x, y) == dist_to_image(F, x, y)

    def test_constant_shift(self):
        F = identity_map()
        c = np.array([0.7])
        handle = sum_map(F, SampledMap(1, 1, lambda x: c))
        assert handle.dist_to_image(np.array([0.0]), c) == pytest.approx(0.0)
        assert handle.dist_to_image(np.array([1.0]), np.array([1.7])) == pytest.approx(0.0)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(Exception):
            sum_map(identity_map(), SampledMap.zero(2, 1))


class TestInfinityWindow:
    def test_schedule_must_increase(self):
        with pytest.raises(ValueError):
            InfinityWindow(R=1.0, r=1.0, gamma=1.0, schedule=(2.0, 1.0))

    def test_positive_radii(self):
        with pytest.raises(ValueError):
            InfinityWindow(R=0.0, r=1.0, gamma=1.0, schedule=(1.0, 2.0))


class TestSampledMapContract:
    def test_output_dimension_checked(self):
        bad = SampledMap(1, 2, lambda x: np.zeros(1))
        with pytest.raises(Exception):
            bad(np.array([0.0]))

    def test_scaled(self):
        f = SampledMap(1, 1, lambda x: np.array([2.0 * x[0]]),
                       lipschitz_window=(2.0, 0.0))
        g = f.scaled(0.5)
        assert g(np.array([3.0]))[0] == pytest.approx(3.0)
        assert g.lipschitz_window[0] == pytest.approx(1.0)
