import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reginf import geom
from reginf.geom import (ConeUnion, EmptyPolyhedron, Infeasible, PolyCone,
                         Polyhedron, UnionRegion, cone_union_hausdorff,
                         dist_union, min_norm_in_slice, polar, project)

from oracles import project_oracle


def box2(half=1.0):
    return Polyhedron(np.array([[1.0, 0], [-1.0, 0], [0, 1.0], [0, -1.0]]),
                      np.full(4, half))


class TestPolyhedron:
    def test_zero_normal_rejected(self):
        with pytest.raises(geom.GeometryError):
            Polyhedron(np.array([[0.0, 0.0]]), np.array([1.0]))

    def test_contains_and_active_set(self):
        b = box2()
        assert b.contains([0.3, -0.2])
        assert not b.contains([1.5, 0.0])
        assert b.active_set([1.0, 1.0]) == (0, 2)

    def test_translate(self):
        b = box2().translate(np.array([5.0, 0.0]))
        assert b.contains([5.9, 0.5]) and not b.contains([3.5, 0.0])

    def test_emptiness(self):
        empty = Polyhedron(np.array([[1.0], [-1.0]]), np.array([0.0, -1.0]))
        assert empty.is_empty()
        assert not box2().is_empty()

    def test_vertices_box(self):
        v = box2().vertices()
        expect = {(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)}
        assert {tuple(np.round(p, 9)) for p in v} == expect

    def test_boundedness(self):
        assert box2().is_bounded()
        assert not Polyhedron(np.array([[1.0, 0.0]]), np.array([0.0])).is_bounded()


class TestProject:
    def test_interior_point(self):
        assert np.allclose(project(np.array([0.5, 0.5]), box2()), [0.5, 0.5])

    def test_face_projection(self):
        assert np.allclose(project(np.array([2.0, 0.0]), box2()), [1.0, 0.0])

    def test_halfplane_kkt(self):
        # hand-solved KKT: onto {x + y <= 0} from (1, 1)
        P = Polyhedron(np.array([[1.0, 1.0]]), np.array([0.0]))
        assert np.allclose(project(np.array([1.0, 1.0]), P), [0.0, 0.0])

    def test_empty_raises(self):
        empty = Polyhedron(np.array([[1.0], [-1.0]]), np.array([0.0, -1.0]))
        with pytest.raises(EmptyPolyhedron):
            project(np.array([0.3]), empty)

    def test_matches_subset_enumeration_oracle(self, rng):
        for _ in range(40):
            dim = int(rng.integers(1, 4))
            k = int(rng.integers(1, 7))
            normals = rng.standard_normal((k, dim))
            normals = normals[np.linalg.norm(normals, axis=1) > 1e-6]
            if not len(normals):
                continue
            offsets = rng.standard_normal(len(normals)) + 0.5
            P = Polyhedron(normals, offsets)
            z = 2.0 * rng.standard_normal(dim)
            expected = project_oracle(z, normals, offsets)
            if expected is None:
                with pytest.raises(EmptyPolyhedron):
                    project(z, P)
                continue
            got = project(z, P)
            assert np.linalg.norm(got - expected) < 1e-7

    def test_variational_inequality(self, rng):
        # <z - proj, w - proj> <= 0 for sampled feasible w
        P = Polyhedron(np.array([[1.0, 1.0], [-1.0, 0.3], [0.2, -1.0]]),
                       np.array([1.0, 0.7, 0.4]))
        for _ in range(25):
            z = 3.0 * rng.standard_normal(2)
            p = project(z, P)
            for _ in range(20):
                w = 3.0 * rng.standard_normal(2)
                if P.contains(w):
                    assert (z - p) @ (w - p) <= 1e-8


class TestDistUnion:
    def test_inside_is_zero(self):
        R = UnionRegion(2, (box2(),))
        assert dist_union(np.zeros(2), R) == 0.0

    def test_min_over_pieces(self):
        # box [-1,1]^2 and box [5,6] x [-1,1]; from (3, 0) the min is 2
        right = Polyhedron(np.array([[1.0, 0], [-1.0, 0], [0, 1.0], [0, -1.0]]),
                           np.array([6.0, -5.0, 1.0, 1.0]))
        R = UnionRegion(2, (box2(), right))
        assert dist_union(np.array([3.0, 0.0]), R) == pytest.approx(2.0, abs=1e-12)

    def test_all_pieces_empty_gives_inf(self):
        empty = Polyhedron(np.array([[1.0, 0.0], [-1.0, 0.0]]),
                           np.array([0.0, -1.0]))
        R = UnionRegion(2, (empty,))
        assert dist_union(np.zeros(2), R) == math.inf

    def test_membership_agreement(self, rng):
        R = UnionRegion(2, (box2(), box2().translate(np.array([3.0, 0.0]))))
        for _ in range(60):
            z = 4.0 * rng.standard_normal(2)
            assert (dist_union(z, R) <= 1e-9) == R.contains(z, tol=1e-9)


class TestPolyCone:
    def test_orthant_polar(self):
        C = PolyCone.from_halfspaces(np.array([[-1.0, 0.0], [0.0, -1.0]]))
        P = polar(C)
        assert P.contains([-1.0, -0.5]) and not P.contains([0.1, 0.0])

    def test_zero_cone_polar_is_everything(self):
        Z = PolyCone.from_rays(np.zeros((0, 2)), dim=2)
        assert Z.contains([0.0, 0.0]) and not Z.contains([1.0, 0.0])
        assert polar(Z).contains([17.0, -4.0])

    def test_polar_of_generated_cone(self):
        # cone{(1,0),(1,1)} -> cone{(0,-1),(-1,1)}, double description at dim 2
        C = PolyCone.from_rays(np.array([[1.0, 0.0], [1.0, 1.0]]))
        P = polar(C)
        for v in ([0.0, -1.0], [-1.0, 1.0]):
            assert P.contains(np.array(v) / np.linalg.norm(v))
        assert not P.contains([1.0, 0.0])
        expected = ConeUnion(2, (PolyCone.from_rays(
            np.array([[0.0, -1.0], [-1.0, 1.0]])),))
        assert cone_union_hausdorff(ConeUnion(2, (P,)), expected) < 1e-9

    def test_double_polar_identity(self):
        C = PolyCone.from_rays(np.array([[1.0, 0.2], [0.3, 1.0], [1.0, 1.0]]))
        CC = polar(polar(C))
        assert cone_union_hausdorff(ConeUnion(2, (C,)),
                                    ConeUnion(2, (CC,))) < 1e-9

    def test_representation_cross_validation(self, rng):
        for _ in range(20):
            raw = rng.standard_normal((int(rng.integers(1, 5)), 3))
            C = PolyCone.from_halfspaces(raw)
            for r in C.rays:
                assert C.contains(r)
            D = PolyCone.from_rays(C.rays, dim=3) if len(C.rays) else C
            assert cone_union_hausdorff(ConeUnion(3, (C,)),
                                        ConeUnion(3, (D,))) < 1e-8

    @given(t=st.floats(min_value=1e-3, max_value=1e3),
           a=st.floats(min_value=-2, max_value=2),
           b=st.floats(min_value=-2, max_value=2))
    @settings(max_examples=60, deadline=None)
    def test_membership_positively_homogeneous(self, t, a, b):
        C = PolyCone.from_halfspaces(np.array([[-1.0, 0.4], [0.2, -1.0]]))
        z = np.array([a, b])
        if np.linalg.norm(z) < 1e-6:
            return
        assert C.contains(t * z) == C.contains(z)

    def test_linear_image(self):
        C = PolyCone.from_rays(np.array([[1.0, 0.0]]))
        T = np.array([[0.0, -1.0], [1.0, 0.0]])  # rotate 90 degrees
        D = C.linear_image(T)
        assert D.contains([0.0, 1.0]) and not D.contains([1.0, 0.0])


class TestMinNormSlice:
    def test_proportional_slice(self):
        # C = {(x*, -y*) : x* = 2 y*} = {(u, v): u = -2v}; at ystar = 1 -> {2}
        C = PolyCone.from_halfspaces(np.array([[1.0, 2.0], [-1.0, -2.0]]))
        res = min_norm_in_slice(C, 1, np.array([1.0]))
        assert res.norm == pytest.approx(2.0, abs=1e-9)
        assert np.allclose(res.point, [2.0])

    def test_forced_zero(self):
        C = PolyCone.from_halfspaces(np.array([[1.0, 0.0], [-1.0, 0.0]]))
        res = min_norm_in_slice(C, 1, np.array([1.0]))
        assert res.norm == 0.0

    def test_infeasible_slice(self):
        C = PolyCone.from_halfspaces(np.array([[0.0, 1.0], [0.0, -1.0]]))
        with pytest.raises(Infeasible):
            min_norm_in_slice(C, 1, np.array([1.0]))


class TestConeUnionMetric:
    def test_identical_unions(self):
        U = ConeUnion(2, (PolyCone.from_rays(np.array([[0.0, 1.0]])),))
        assert cone_union_hausdorff(U, U) == 0.0

    def test_trivial_vs_ray(self):
        U0 = ConeUnion(2, (PolyCone.from_rays(np.zeros((0, 2)), dim=2),))
        U1 = ConeUnion(2, (PolyCone.from_rays(np.array([[0.0, 1.0]])),))
        assert cone_union_hausdorff(U0, U1) == pytest.approx(math.sqrt(2.0))

    def test_metric_is_extreme_ray_based(self):
        # the metric compares extreme-ray sets: a union of two boundary rays
        # and their filled hull agree on extreme rays (membership does not)
        rays = ConeUnion(2, (PolyCone.from_rays(np.array([[1.0, 0.0]])),
                             PolyCone.from_rays(np.array([[0.0, 1.0]]))))
        hull = ConeUnion(2, (PolyCone.from_rays(np.array([[1.0, 0.0],
                                                          [0.0, 1.0]])),))
        assert cone_union_hausdorff(rays, hull) == 0.0
        diag = np.array([1.0, 1.0]) / math.sqrt(2.0)
        assert hull.contains(diag) and not rays.contains(diag)
