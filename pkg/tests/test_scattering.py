import numpy as np
import pytest
import sympy
from dataclasses import replace

from cubic_string.errors import BoundStateCandidate, DomainError
from cubic_string.geometry import ZETA
from cubic_string.scattering import (
    InvolutionJ, TransitionMatrix, coefficients, compute_scattering_data, damping_constant, dual_matrix,
    energetic_balance_check, find_bound_states, printed_unitarity_residual, product_residual, reciprocity_check,
    reflection_residual, step_transition_matrix, step_transition_row, transition_matrix, transition_row,
    transition_rows, unitarity_residual, winding_number,
)

LAMS = [0.3 * np.exp(1j * np.radians(7.0 + 45.0 * j)) for j in range(8)]


class TestStepOracle:
    def test_exact_row(self):
        t00, t01, t02 = step_transition_row(2)
        assert sympy.simplify(t00 - sympy.Rational(7, 3)) == 0
        assert sympy.simplify(t01 - (-2 + sympy.sqrt(3) * sympy.I) / 3) == 0
        assert sympy.simplify(t02 - (-2 - sympy.sqrt(3) * sympy.I) / 3) == 0

    def test_matrix(self):
        t = step_transition_matrix(2.0)
        assert np.linalg.det(t) == pytest.approx(8.0, abs=1e-12)
        j = InvolutionJ().matrix
        np.testing.assert_allclose(t @ j @ t.conj().T, 4 * j, atol=1e-12)

    @pytest.mark.parametrize('lam', LAMS[:3])
    def test_numeric_row_matches(self, step, lam):
        np.testing.assert_allclose(transition_row(step, lam), step_transition_matrix(2.0)[0], atol=1e-8)

    def test_constant_potential_has_identity_row(self, flat):
        np.testing.assert_allclose(transition_row(flat, 0.2 + 0.1j), [1, 0, 0], atol=1e-13)

    def test_row_does_not_depend_on_x(self, bump):
        rows = transition_rows(bump, LAMS[1], [-0.5, 0.0, 1.2])
        assert np.max(np.abs(rows - rows[0])) <= 1e-8


class TestConservationLaws:
    @pytest.fixture(params=['step', 'bump'])
    def matrices(self, request):
        p = request.getfixturevalue(request.param)
        return [transition_matrix(p, lam) for lam in LAMS]

    def test_determinant(self, matrices):
        assert max(t.det_residual() for t in matrices) <= 1e-6

    def test_j_unitarity(self, matrices):
        assert max(t.j_unitarity_residual() for t in matrices) <= 1e-6

    def test_mutated_j_fails(self, matrices):
        assert max(t.j_unitarity_residual(InvolutionJ(mutated=True)) for t in matrices) > 1e-3

    def test_scalar_and_dual_unitarity(self, matrices):
        for t in matrices:
            assert unitarity_residual(coefficients(t)) <= 1e-6
            assert unitarity_residual(coefficients(dual_matrix(t))) <= 1e-6

    def test_dual_is_inverse(self, matrices):
        for t in matrices:
            assert product_residual(t, dual_matrix(t)) <= 1e-6
            np.testing.assert_allclose(dual_matrix(dual_matrix(t)).entries, t.entries, atol=1e-12)

    def test_energetic_balance(self, matrices):
        for t in matrices:
            c = coefficients(t)
            assert energetic_balance_check(c) <= 1e-6
            assert energetic_balance_check(c, InvolutionJ(mutated=True)) > 1e-3

    def test_reciprocity(self, matrices):
        for t in matrices:
            report = reciprocity_check(coefficients(t), coefficients(dual_matrix(t)))
            assert report.symmetric <= 1e-6


class TestPrintedVariants:
    def test_printed_unitarity_fails_for_the_step(self, step):
        c = coefficients(transition_matrix(step, LAMS[0]))
        assert unitarity_residual(c) <= 1e-8
        assert printed_unitarity_residual(c) > 1e-2


class TestDualAndReflection:
    def test_step_dual_is_exact_inverse(self, step):
        t = transition_matrix(step, LAMS[2])
        assert product_residual(t, dual_matrix(t)) <= 1e-10
        assert dual_matrix(t).kappa == pytest.approx(0.5)

    def test_reflection_identity(self, bump):
        assert reflection_residual(bump, LAMS[4]) <= 1e-6

    def test_zero_lambda(self, step):
        with pytest.raises(DomainError):
            transition_matrix(step, 0)

    def test_vanishing_diagonal(self):
        entries = np.diag([0.0, 1.0, 1.0]).astype(complex)
        t = TransitionMatrix(0.2j, entries, entries, 1.0)
        with pytest.raises(BoundStateCandidate):
            coefficients(t)


class TestBoundStates:
    def test_winding_number(self):
        assert winding_number(lambda z: z, 0, 1.0) == pytest.approx(1.0)
        assert winding_number(lambda z: z ** 2, 0, 1.0) == pytest.approx(2.0)
        assert winding_number(lambda z: z - 3, 0, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_injected_zeros(self, step):
        zeros = (0.3 * ZETA[2], -0.2 * ZETA[1])
        t00 = lambda lam: (lam - zeros[0]) * (lam - zeros[1])
        states = find_bound_states(step, 0.5, t00=t00)

        assert [s.parameter for s in states.mu] == [pytest.approx(0.3, abs=1e-9)]
        assert [s.parameter for s in states.nu] == [pytest.approx(-0.2, abs=1e-9)]
        assert states.mu[0].multiplicity == pytest.approx(1.0, abs=1e-6)
        assert states.off_ray_min > 0

    def test_double_zero(self, step):
        zero = 0.25 * ZETA[2]
        states = find_bound_states(step, 0.5, t00=lambda lam: (lam - zero) ** 2, off_ray=False)
        assert len(states.mu) == 1
        assert states.mu[0].multiplicity == pytest.approx(2.0, abs=1e-6)

    def test_pure_step_has_none(self, step):
        assert find_bound_states(step, 0.5, samples=20).empty

    def test_radius_must_be_positive(self, step):
        with pytest.raises(DomainError):
            find_bound_states(step, 0.0)


class TestScatteringData:
    def test_constant_potential(self, flat, small_mesh):
        data = compute_scattering_data(flat, small_mesh, bound_radius=0.3)
        for family in (data.direct, data.dual):
            np.testing.assert_allclose(family['r0'], 1, atol=1e-12)
            np.testing.assert_allclose(family['s1'], 0, atol=1e-12)
            np.testing.assert_allclose(family['s2'], 0, atol=1e-12)
        assert len(data.mu) == 0 and len(data.nu) == 0

    def test_step_coefficients(self, step_data):
        np.testing.assert_allclose(step_data.direct['r0'], 3 / 7, atol=1e-10)
        np.testing.assert_allclose(step_data.direct['s1'], (-2 + 1j * np.sqrt(3)) / 7, atol=1e-10)
        np.testing.assert_allclose(step_data.dual['r0'], 12 / 7, atol=1e-10)

    def test_coefficient_lookup(self, step_data):
        tau = step_data.tau[3]
        assert step_data.coefficient('r0', 1j * tau * ZETA[1]) == pytest.approx(step_data.direct['r0'][1, 3])
        assert step_data.coefficient('s2', -1j * tau * ZETA[2], dual=True) == pytest.approx(step_data.dual['s2'][2, 3])

    def test_coefficient_outside_the_rays(self, step_data):
        with pytest.raises(DomainError):
            step_data.coefficient('r0', 0.3 + 0.1j)
        with pytest.raises(DomainError):
            step_data.coefficient('r0', 1j * (step_data.tau[-1] + 1.0))
        with pytest.raises(DomainError):
            step_data.coefficient('t9', 1j * step_data.tau[0])

    def test_step_coefficients_are_the_small_lam_limits(self, step_data):
        s1, s2 = step_data.step_coefficients
        assert s1 == pytest.approx(complex(-2, 3 ** 0.5) / 7, abs=1e-14)
        assert s2 == pytest.approx(complex(-2, -3 ** 0.5) / 7, abs=1e-14)
        np.testing.assert_allclose(step_data.direct['s1'], s1, atol=1e-8)
        np.testing.assert_allclose(step_data.direct['s2'], s2, atol=1e-8)
        mirrored = step_data.reflected().step_coefficients
        np.testing.assert_allclose(step_data.dual['s1'], mirrored[0], atol=1e-8)
        np.testing.assert_allclose(step_data.dual['s2'], mirrored[1], atol=1e-8)
        assert mirrored[0] == pytest.approx(complex(5, -3 ** 0.5) / 14, abs=1e-14)

    def test_positive_limits(self, step_data):
        with pytest.raises(DomainError, match='positive'):
            replace(step_data, m_minus=-8.0)

    def test_reflected(self, step_data):
        mirrored = step_data.reflected()
        assert mirrored.direct is step_data.dual
        assert mirrored.kappa == pytest.approx(0.5)
        assert (mirrored.m_plus, mirrored.m_minus) == (step_data.m_minus, step_data.m_plus)
        assert mirrored.reflected().m_plus == step_data.m_plus

    def test_damping_constant(self, step, bump):
        assert damping_constant(step) == 0.25
        assert damping_constant(bump) >= 0.25

    def test_injected_residues_are_kept(self, step_data):
        injected = replace(step_data, mu=np.array([0.3]))
        assert injected.mu[0] == 0.3
        assert injected._interpolants == {}
