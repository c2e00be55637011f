import numpy as np
import pytest

from reginf import lgsolve, perturb
from reginf.lgsolve import (ContractionViolated, EmptyPreimage,
                            IterationTrace, certify_bound, lg_solve)
from reginf.svmap import SampledMap

from oracles import plane_bump_solution


@pytest.fixture(scope="module")
def bump_f(plane):
    F, ybar, _ = plane
    spec = perturb.build_perturbation(F, ybar, K=1)
    return perturb.as_sampled_map(spec).scaled(0.3), spec


class TestPlainSolve:
    def test_zero_perturbation_single_step(self, plane):
        F, _, _ = plane
        f = SampledMap.zero(2, 1)
        x0 = np.array([40.0, 0.3])
        y = np.array([0.1])
        trace = lg_solve(F, f, y, x0, kappa=1.05, lam=1e-9, epsilon=0.05)
        assert trace.status == "converged"
        assert len(trace.iterates) == 2  # z0 and the one projection step
        # z1 is the exact projection of x0 onto F^{-1}(y) = {x : x2 = y}
        assert np.allclose(trace.terminal, [40.0, 0.1], atol=1e-15)

    def test_already_solved_zero_length(self, plane):
        F, _, _ = plane
        f = SampledMap.zero(2, 1)
        x0 = np.array([40.0, 0.1])
        trace = lg_solve(F, f, np.array([0.1]), x0, 1.05, 1e-9, 0.05)
        assert trace.status == "converged"
        assert len(trace.iterates) == 1 and trace.residuals == ()


class TestPerturbedSolve:
    def test_matches_bisection_oracle(self, plane, bump_f):
        F, _, _ = plane
        f, spec = bump_f
        c = spec.centers[0]
        rho = spec.rhos[0]
        y = np.array([0.04 * rho])
        x0 = c + np.array([0.0, 0.6 * rho])
        trace = lg_solve(F, f, y, x0, kappa=1.05, lam=0.3, epsilon=0.05)
        assert trace.status == "converged"
        expected_x2 = plane_bump_solution(f, x0[0], y[0], bracket=2 * rho + 1.0)
        assert trace.terminal[1] == pytest.approx(expected_x2, abs=1e-9)
        assert trace.terminal[0] == pytest.approx(x0[0], abs=1e-12)

    def test_geometric_residual_decay(self, plane, bump_f):
        F, _, _ = plane
        f, spec = bump_f
        c, rho = spec.centers[0], spec.rhos[0]
        x0 = c + np.array([0.0, 0.9 * rho])
        trace = lg_solve(F, f, np.array([0.02 * rho]), x0, 1.05, 0.3, 0.05)
        cap = 1.05 * 0.3 + 0.05
        for ratio in trace.ratios:
            assert ratio <= cap + 1e-12
        # cumulative form: ||z^{k+1} - z^k|| <= cap^k ||z^1 - z^0||
        for k, res in enumerate(trace.residuals):
            assert res <= cap ** k * trace.residuals[0] + 1e-15

    def test_cauchy_consistency(self, plane, bump_f):
        F, _, _ = plane
        f, spec = bump_f
        c, rho = spec.centers[0], spec.rhos[0]
        x0 = c + np.array([0.0, 0.8 * rho])
        trace = lg_solve(F, f, np.array([0.03 * rho]), x0, 1.05, 0.3, 0.05)
        q = 1.05 * 0.3 + 0.05
        pts = [np.array(p) for p in trace.iterates]
        r1 = trace.residuals[0]
        for mi in range(len(pts)):
            for ni in range(mi + 1, len(pts)):
                bound = q ** mi / (1 - q) * r1 + 1e-12
                assert np.linalg.norm(pts[ni] - pts[mi]) <= bound

    def test_terminal_inclusion(self, plane, bump_f):
        F, _, _ = plane
        f, spec = bump_f
        from reginf.svmap import sum_map
        c, rho = spec.centers[0], spec.rhos[0]
        x0 = c + np.array([0.0, 0.5 * rho])
        y = np.array([0.01 * rho])
        trace = lg_solve(F, f, y, x0, 1.05, 0.3, 0.05)
        assert sum_map(F, f).dist_to_image(trace.terminal, y) <= 1e-9


class TestCertificate:
    def test_zero_perturbation_closed_form(self, plane):
        F, _, _ = plane
        f = SampledMap.zero(2, 1)
        x0 = np.array([40.0, 0.3])
        y = np.array([0.1])
        trace = lg_solve(F, f, y, x0, 1.05, 1e-9, 0.05)
        cert = certify_bound(trace, F, f, y, x0, 1.05, 1e-9)
        assert cert.passed
        assert cert.lhs == pytest.approx(0.2, abs=1e-12)       # |y - x0_2|
        assert cert.rhs == pytest.approx(1.05 * 0.2 + 1e-9, rel=1e-6)

    def test_perturbed_certificate(self, plane, bump_f):
        F, _, _ = plane
        f, spec = bump_f
        c, rho = spec.centers[0], spec.rhos[0]
        x0 = c + np.array([0.0, 0.7 * rho])
        y = np.array([0.05 * rho])
        trace = lg_solve(F, f, y, x0, 1.05, 0.3, 0.05)
        cert = certify_bound(trace, F, f, y, x0, 1.05, 0.3)
        assert cert.passed and cert.slack >= 0.0

    def test_damaged_trace_fails(self, plane):
        F, _, _ = plane
        f = SampledMap.zero(2, 1)
        x0 = np.array([40.0, 0.3])
        y = np.array([0.1])
        trace = lg_solve(F, f, y, x0, 1.05, 1e-9, 0.05)
        far = IterationTrace(trace.iterates[:-1] + ((500.0, 0.1),),
                             trace.residuals, trace.kappa, trace.lam,
                             trace.epsilon, "converged")
        cert = certify_bound(far, F, f, y, x0, 1.05, 1e-9)
        assert not cert.passed


class TestFailureModes:
    def test_empty_preimage(self, ray):
        F, _, _ = ray
        f = SampledMap(1, 1, lambda x: np.array([0.05]))
        with pytest.raises(EmptyPreimage):
            lg_solve(F, f, np.array([0.2]), np.array([5.0]), 1.05, 0.1, 0.05)

    def test_contraction_violated(self, plane):
        # lie about the modulus: f has lip 0.9 but lam claims 0.01
        F, _, _ = plane
        f = SampledMap(2, 1, lambda x: np.array([0.9 * abs(x[1])]))
        with pytest.raises(ContractionViolated) as err:
            lg_solve(F, f, np.array([0.0]), np.array([30.0, 1.0]),
                     kappa=1.05, lam=0.01, epsilon=0.01, max_iters=100)
        assert err.value.trace.residuals  # trace attached for diagnosis

    def test_hypothesis_validation(self, plane):
        F, _, _ = plane
        f = SampledMap.zero(2, 1)
        with pytest.raises(ValueError):
            lg_solve(F, f, np.array([0.0]), np.array([30.0, 1.0]),
                     kappa=2.0, lam=0.6, epsilon=0.05)
        with pytest.raises(ValueError):
            lg_solve(F, f, np.array([0.0]), np.array([30.0, 1.0]),
                     kappa=1.0, lam=0.5, epsilon=0.7)
