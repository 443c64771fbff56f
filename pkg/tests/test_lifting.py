import numpy as np
import pytest

from qbbt.lifting import (Exponential, HadamardProduct, LiftSpec,
                          MonomialPower, NonPolynomialLift,
                          consistency_residual, example2_matrices,
                          example2_system, lift_poly_scalar, lift_state,
                          poly_scalar_matrices)
from qbbt.qbsys import integrate_rk4, partition
from qbbt.reactor import lift_spec as reactor_lift_spec


def integrate_scalar(f, x0, t_end, dt=1e-4, sample_every=0.01):
    times, states = integrate_rk4(lambda t, x: np.array([f(t, x[0])]),
                                  np.array([x0]), t_end, dt, sample_every)
    return times, states[0]


class TestLiftState:
    def test_cubic_spec(self):
        _, spec = lift_poly_scalar((0.0, 0.0, 1.0), 1.0)
        assert lift_state(spec, [2.0]) == pytest.approx([2.0, 4.0, 8.0])

    def test_exponential_spec(self):
        _, spec = example2_system(1.0, 1.0)
        assert lift_state(spec, [0.0]) == pytest.approx([0.0, 1.0])

    def test_reactor_spec_componentwise(self):
        spec = reactor_lift_spec(2)
        z = lift_state(spec, [1.0, 2.0, 3.0, 4.0])  # psi=[1,2], theta=[3,4]
        assert z[4:6] == pytest.approx([3.0, 8.0])       # w1 = psi*theta
        assert z[6:8] == pytest.approx([9.0, 32.0])      # w2 = psi*theta^2
        assert z[8:10] == pytest.approx([27.0, 128.0])   # w3 = psi*theta^3
        assert z[10:12] == pytest.approx([9.0, 16.0])    # w4 = theta^2
        assert z[12:14] == pytest.approx([27.0, 64.0])   # w5 = theta^3

    def test_forward_reference_rejected(self):
        with pytest.raises(ValueError, match="references"):
            LiftSpec(n_orig=1, aux=[HadamardProduct(0, 2),
                                    MonomialPower(0, 2)])


class TestQuadraticDefs:
    def test_monomial_chain(self):
        _, spec = lift_poly_scalar((0.0, 0.0, 0.0, 1.0), 0.0)
        assert spec.quadratic_defs() == [(1, 0, 0), (2, 0, 1), (3, 0, 2)]

    def test_exponential_raises(self):
        _, spec = example2_system(1.0, 1.0)
        with pytest.raises(NonPolynomialLift):
            spec.quadratic_defs()

    def test_hadamard_passthrough(self):
        spec = LiftSpec(n_orig=2, aux=[HadamardProduct(0, 1)])
        assert spec.quadratic_defs() == [(2, 0, 1)]


class TestPolyScalarMatrices:
    def test_cubic_matches_display(self):
        # x' = a x^3 + b u at b = 1 reproduces the canonical lifted display.
        a = -2.0
        A, H, N1, B, C = poly_scalar_matrices((0.0, 0.0, a), 1.0)
        assert A == pytest.approx(np.array([[0, 0, a], [0, 0, 0], [0, 0, 0]]))
        H_ref = np.zeros((3, 9))
        H_ref[1, 2] = 2 * a
        H_ref[2, 5] = 3 * a
        assert H == pytest.approx(H_ref)
        assert N1 == pytest.approx(np.array([[0, 0, 0], [2, 0, 0], [0, 3, 0]]))
        assert B == pytest.approx(np.array([[1.0], [0.0], [0.0]]))

    def test_degree_below_two_rejected(self):
        with pytest.raises(ValueError, match="nothing to lift"):
            lift_poly_scalar((1.0,), 0.0)

    def test_structure_passes_partition(self):
        for coeffs in ((0.3, -1.0), (0.0, 0.5, -0.25), (0.1, 0.0, 0.0, -2.0)):
            sys_k, spec = lift_poly_scalar(coeffs, 0.7)
            s = partition(sys_k, 1, lift_defs=spec.quadratic_defs())
            assert s.n1 == 1


class TestExample2Matrices:
    def test_matches_display(self):
        a, b = -0.4, 1.7
        A, H, N1, B, C = example2_matrices(a, b)
        assert A == pytest.approx(np.array([[a, 1.0], [0.0, 0.0]]))
        assert H == pytest.approx(np.array([[0, 0, 0, 0], [0, 0, -a, -1.0]]))
        assert N1 == pytest.approx(np.array([[0, 0], [0, -b]]))
        assert B == pytest.approx(np.array([[b], [0.0]]))
        assert C == pytest.approx(np.array([[1.0, 0.0]]))


class TestLiftingEquivalence:
    def test_quadratic_ode(self):
        # x' = -x + x^2 from 0.5
        sys_q, spec = lift_poly_scalar((-1.0, 1.0), 0.0)
        traj = sys_q.simulate(lambda t: [0.0], lift_state(spec, [0.5]), 5.0,
                              dt=1e-4)
        _, ref = integrate_scalar(lambda t, x: -x + x * x, 0.5, 5.0)
        assert np.max(np.abs(traj.states[0] - ref)) <= 1e-8

    def test_forced_cubic_ode(self):
        sys_c, spec = lift_poly_scalar((0.0, 0.0, -1.0), 1.0)
        traj = sys_c.simulate(lambda t: [np.cos(t)], lift_state(spec, [0.1]),
                              10.0, dt=1e-4)
        _, ref = integrate_scalar(lambda t, x: -x**3 + np.cos(t), 0.1, 10.0)
        assert np.max(np.abs(traj.states[0] - ref)) <= 1e-6

    def test_exponential_ode(self):
        sys_e, spec = example2_system(-1.0, 0.0)
        traj = sys_e.simulate(lambda t: [0.0], lift_state(spec, [0.0]), 5.0,
                              dt=1e-4)
        _, ref = integrate_scalar(lambda t, x: -x + np.exp(-x), 0.0, 5.0)
        assert np.max(np.abs(traj.states[0] - ref)) <= 1e-7
        # auxiliary tracks exp(-x) along the trajectory
        assert np.max(np.abs(traj.states[1] - np.exp(-traj.states[0]))) <= 1e-7


class TestConsistencyResidual:
    def test_linear_system_exact(self):
        sys_l, spec = lift_poly_scalar((-1.0, 0.0), 0.0)
        traj = sys_l.simulate(lambda t: [0.0], lift_state(spec, [1.0]), 2.0,
                              dt=1e-3)
        assert consistency_residual(spec, traj) <= 1e-9

    def test_cubic_within_integrator_error(self):
        sys_c, spec = lift_poly_scalar((0.0, 0.0, -1.0), 0.0)
        traj = sys_c.simulate(lambda t: [0.0], lift_state(spec, [0.5]), 2.0,
                              dt=1e-4)
        assert consistency_residual(spec, traj) <= 1e-8

    def test_detects_perturbed_auxiliary(self):
        sys_c, spec = lift_poly_scalar((0.0, 0.0, -1.0), 0.0)
        x0 = lift_state(spec, [0.5])
        x0[1] += 0.1
        traj = sys_c.simulate(lambda t: [0.0], x0, 2.0, dt=1e-3)
        assert consistency_residual(spec, traj) >= 0.01

    def test_residual_growth_bounded(self):
        sys_c, spec = lift_poly_scalar((0.0, 0.0, -1.0), 1.0)
        x0 = lift_state(spec, [0.4])
        r1 = consistency_residual(
            spec, sys_c.simulate(lambda t: [np.cos(t)], x0, 1.0, dt=1e-4))
        r2 = consistency_residual(
            spec, sys_c.simulate(lambda t: [np.cos(t)], x0, 2.0, dt=1e-4))
        assert r2 <= 2.5 * max(r1, 1e-14)


class TestExponentialGuard:
    def test_spec_flags_polynomial(self):
        _, spec_poly = lift_poly_scalar((0.0, 0.0, 1.0), 1.0)
        _, spec_exp = example2_system(1.0, 1.0)
        assert spec_poly.is_polynomial()
        assert not spec_exp.is_polynomial()

    def test_exponential_definition_evaluates(self):
        spec = LiftSpec(n_orig=1, aux=[Exponential(-2.0, 0)])
        assert lift_state(spec, [0.5]) == pytest.approx([0.5, np.exp(-1.0)])
