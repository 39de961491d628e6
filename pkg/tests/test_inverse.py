from dataclasses import replace

import numpy as np
import pytest

from config import config
from cubic_string import inverse
from cubic_string.errors import DomainError, GridError, SingularSystemError
from cubic_string.geometry import ZETA
from cubic_string.inverse import (
    ReconstructedField, Recovery, _check_half_axis, assemble_direct, assemble_dual, psi0_plus, reconstruct_F,
    reconstruct_Phi, recover_m, sector, small_tau_quotient, solve_dual, solve_system, step_F, v0_plus,
)
from cubic_string.jost import jost_grid
from cubic_string.panels import TauMesh, tau_mesh
from cubic_string.potential import GaussianBumps, Potential
from cubic_string.scattering import compute_scattering_data


def forward_v_plus(p, k, tau, x):
    """v_k^+(i tau, x) = conj(v_k(-i tau, x)) from the Jost solver"""
    return np.array([np.conj(jost_grid('v', p, -1j * t, k, [x]).value[0]) for t in tau])


class TestSystemLayout:
    def test_sizes(self, flat_data):
        injected = replace(flat_data, mu=np.array([0.3]), nu=np.array([-0.25]))
        system = assemble_direct(injected, 0.5)
        n = len(flat_data.tau)

        assert system.size == 2 * n + 2
        assert system.matrix.shape == (system.size, system.size)
        layout = system.layout()
        assert (layout['X'].start, layout['Y'].start, layout['R'].start, layout['R_hat'].start) == (0, n, 2 * n, 2 * n + 1)

    def test_one_node_grid(self, flat, make_data):
        data = make_data(flat, TauMesh(np.array([1.0]), np.array([1.0]), 2.0))
        with pytest.raises(GridError, match='grid too small'):
            assemble_direct(data, 0.5)


class TestStepF:
    def test_sectors(self):
        assert sector(-0.3j) == 0
        assert sector(0.5) == 1
        assert sector(-0.5) == 2
        with pytest.raises(DomainError):
            sector(0.3j)

    def test_equal_limits(self):
        for lam in (-0.3j, 0.5 + 0.1j, -0.5 + 0.1j):
            assert step_F(lam, 1.3, 1.0, (0.0, 0.0)) == 1.0

    def test_decays_to_one_inside_the_side_sectors(self):
        s_step = (complex(-2, 3 ** 0.5) / 7, complex(-2, -3 ** 0.5) / 7)
        assert step_F(40.0 + 20j, 2.0, 1.0, s_step) == pytest.approx(1.0, abs=1e-12)
        assert step_F(-40.0 + 20j, 2.0, 1.0, s_step) == pytest.approx(1.0, abs=1e-12)


class TestSmallTauQuotient:
    def test_quadratic_is_restored(self):
        tau = np.array([1e-4, 1e-3, 0.01, 0.06, 0.1, 0.2, 0.4, 1.0])
        exact = (1 + 2j) + 3 * tau - 1j * tau ** 2
        noisy = exact.copy()
        noisy[tau < 0.05] += 1e3
        np.testing.assert_allclose(small_tau_quotient(tau, noisy, 0.05), exact, atol=1e-10)

    def test_untouched_above_the_floor(self):
        tau = np.array([0.1, 0.2, 0.3])
        values = np.array([1.0, 5.0, -2.0], dtype=complex)
        assert small_tau_quotient(tau, values, 0.05) is values


class TestConstantBackground:
    def test_identity_system(self, flat_data):
        system = assemble_direct(flat_data, 0.7)
        np.testing.assert_allclose(system.matrix, np.eye(system.size), atol=1e-14)
        np.testing.assert_allclose(system.rhs, 0.0, atol=1e-14)

    @pytest.mark.parametrize('x', [0.0, 0.7, 2.0])
    def test_boundary_values_are_plane_waves(self, flat_data, x):
        solution = solve_system(assemble_direct(flat_data, x))
        tau = flat_data.tau

        np.testing.assert_allclose(solution.v1_plus(), np.exp(tau * ZETA[2] * x), atol=1e-12)
        np.testing.assert_allclose(solution.v2_plus(), np.exp(tau * ZETA[1] * x), atol=1e-12)
        assert not solution.flagged

    def test_psi0_is_one(self, flat_data):
        solution = solve_system(assemble_direct(flat_data, 0.7))
        assert psi0_plus(solution, -0.3j) == pytest.approx(1.0, abs=1e-12)
        assert v0_plus(solution, -0.3j) == pytest.approx(np.exp(-0.21), abs=1e-12)

    def test_dual_mirror(self, flat_data):
        system = assemble_dual(flat_data, -0.7)
        assert system.side == 'dual' and system.x == -0.7 and system.frame_x == 0.7
        solution = solve_dual(system)
        assert reconstruct_Phi(solution, 0.3j) == pytest.approx(1.0, abs=1e-12)


class TestStep:
    """kappa = 2: every density vanishes and the boundary values are the plane waves of each side"""

    @pytest.mark.parametrize('x', [0.0, 0.7, 2.0])
    def test_boundary_values_match_the_jost_solutions(self, step, step_data, x):
        solution = solve_system(assemble_direct(step_data, x))
        tau = step_data.tau

        np.testing.assert_allclose(solution.v1_plus(), forward_v_plus(step, 1, tau, x), atol=1e-4)
        np.testing.assert_allclose(solution.v2_plus(), forward_v_plus(step, 2, tau, x), atol=1e-4)
        for density in solution.densities():
            assert np.max(np.abs(density)) <= 1e-8

    def test_psi0(self, step_data):
        solution = solve_system(assemble_direct(step_data, 1.1))
        assert psi0_plus(solution, -0.2j) == pytest.approx(1.0, abs=1e-8)
        assert np.isfinite(solution.condition) and solution.condition < 1e6

    @pytest.mark.parametrize('x', [-0.3, -1.5])
    def test_dual_side(self, step, step_data, x):
        solution = solve_dual(assemble_dual(step_data, x))
        tau, mirrored = step_data.tau, step.reflected()

        np.testing.assert_allclose(solution.v1_plus(), forward_v_plus(mirrored, 1, tau, -x), atol=1e-4)
        np.testing.assert_allclose(solution.v2_plus(), forward_v_plus(mirrored, 2, tau, -x), atol=1e-4)
        assert reconstruct_Phi(solution, 0.2j) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize('side, xs', [('+', np.linspace(0, 3, 40)), ('-', np.linspace(-3, 0, 40))])
    def test_recovery_via_the_system(self, step, step_data, side, xs):
        recon = ReconstructedField.from_system(step_data, xs, side)
        recovery = recover_m(recon)
        limit = step.limit(side)
        interior = (np.abs(xs) >= 0.2) & (np.abs(xs) <= 2.8)

        assert not recon.singular.any()
        assert np.all(np.isfinite(recon.condition))
        np.testing.assert_allclose(recovery.m_route_a[interior], limit, rtol=1e-3)
        np.testing.assert_allclose(recovery.m_route_b[interior], limit, rtol=1e-3)


@pytest.mark.slow
class TestBump:
    @pytest.fixture(scope='class')
    def bump_data(self):
        p = Potential(m_plus=1.0, m_minus=8.0, a=1.0, perturbation=GaussianBumps(((1.0, 0.3, 0.05),)))
        return p, compute_scattering_data(p, tau_mesh(n_nodes=64, tau_max=8.0), bound_radius=0.5)

    def test_system_route_against_the_jost_solutions(self, bump_data):
        p, data = bump_data
        xs = np.linspace(0.2, 1.0, 6)
        recon = ReconstructedField.from_system(data, xs, '+')
        exact = ReconstructedField.from_forward(p, xs, '+')

        report = recover_m(recon).report_rows()
        assert all(row['condition'] is not None and row['condition'] < 1e8 for row in report)
        assert not any(row['singular'] for row in report)
        assert np.all(recon.residual <= 1e-8)
        np.testing.assert_allclose(recon.v0_plus, exact.v0_plus, atol=1e-2)


class TestManufactured:
    def test_residues_are_recovered(self, step_data):
        injected = replace(step_data, mu=np.array([0.3]), nu=np.array([-0.25]))
        system = assemble_direct(injected, 0.5)
        rng = np.random.default_rng(11)
        exact = rng.normal(size=system.size) + 1j * rng.normal(size=system.size)
        system.rhs = system.matrix @ exact

        solution = solve_system(system)
        np.testing.assert_allclose(solution.unknowns, exact, rtol=1e-6)


class TestErrors:
    def test_singular_matrix(self, flat_data):
        system = assemble_direct(flat_data, 0.5)
        system.matrix = np.zeros_like(system.matrix)
        with pytest.raises(SingularSystemError):
            solve_system(system)

    def test_non_finite_matrix(self, flat_data):
        system = assemble_direct(flat_data, 0.5)
        system.matrix[0, 0] = np.nan
        with pytest.raises(SingularSystemError, match='non-finite'):
            solve_system(system)

    def test_non_finite_systems_mark_their_rows(self, flat_data, monkeypatch):
        def broken(data, x, side='direct'):
            system = assemble_direct(data, x, side)
            system.matrix[0, 0] = np.nan
            return system

        monkeypatch.setattr(inverse, 'assemble_direct', broken)
        recon = ReconstructedField.from_system(flat_data, np.linspace(0, 1, 6), '+')
        assert recon.singular.all()
        assert np.all(np.isnan(recover_m(recon).m_route_a))

    def test_reconstruct_on_a_jump_ray(self, flat_data):
        solution = solve_system(assemble_direct(flat_data, 0.5))
        with pytest.raises(DomainError):
            reconstruct_F(solution, 0.5j * ZETA[1])

    def test_psi0_outside_its_sector(self, flat_data):
        solution = solve_system(assemble_direct(flat_data, 0.5))
        with pytest.raises(DomainError):
            psi0_plus(solution, 0.3j)

    def test_dual_needs_negative_x(self, flat_data):
        with pytest.raises(DomainError):
            assemble_dual(flat_data, 0.5)

    def test_solve_dual_needs_a_dual_system(self, flat_data):
        with pytest.raises(DomainError):
            solve_dual(assemble_direct(flat_data, 0.5))

    @pytest.mark.parametrize('xs, side, error', [
        (np.linspace(0, 1, 5), '+', GridError),
        (np.linspace(-1, 1, 8), '+', DomainError),
        (np.linspace(-1, 0, 8), '+', DomainError),
        (np.array([0.0, 0.1, 0.1, 0.2, 0.3, 0.4]), '+', GridError),
        (np.linspace(0, 1, 8), 'up', DomainError),
    ])
    def test_half_axis_grid(self, xs, side, error):
        with pytest.raises(error):
            _check_half_axis(xs, side)


class TestRecovery:
    @pytest.mark.parametrize('side, xs', [('+', np.linspace(0, 3, 40)), ('-', np.linspace(-3, 0, 40))])
    def test_step_from_jost_solutions(self, step, side, xs):
        recovery = recover_m(ReconstructedField.from_forward(step, xs, side))
        limit = step.limit(side)
        interior = (np.abs(xs) >= 0.2) & (np.abs(xs) <= 2.8)

        np.testing.assert_allclose(recovery.m_route_a[interior], limit, rtol=1e-3)
        np.testing.assert_allclose(recovery.m_route_b[interior], limit, rtol=1e-3)

    @pytest.mark.slow
    def test_bump_route_a(self, bump):
        xs = np.linspace(0, 3, 60)
        recovery = recover_m(ReconstructedField.from_forward(bump, xs, '+'))
        interior = (xs >= 0.3) & (xs <= 2.7)
        exact = bump.values(xs)
        assert np.max(np.abs(recovery.m_route_a[interior] / exact[interior] - 1)) <= 5e-2
        assert np.max(np.abs(recovery.m_route_b[interior] / exact[interior] - 1)) <= 5e-2

    def test_system_route_on_constant_data(self, flat_data):
        xs = np.linspace(0.25, 2.75, 8)
        recon = ReconstructedField.from_system(flat_data, xs, '+')
        recovery = recover_m(recon)

        assert recon.source == 'system'
        assert not recovery.singular.any()
        np.testing.assert_allclose(recovery.m_route_a, 1.0, atol=1e-4)
        np.testing.assert_allclose(recovery.m_route_b, 1.0, atol=1e-4)

    def test_sweep_comes_from_config(self, step):
        config.lambda_sweep = (0.05, 0.07, 0.09)
        recon = ReconstructedField.from_forward(step, np.linspace(0, 1, 8), '+')
        assert recon.psi0.shape == (3, 8)

    def test_rows_and_report(self):
        recovery = Recovery(
            x=np.array([0.0, 0.5]),
            M_profile=np.zeros(2),
            m_route_a=np.array([1.0, 1.1]),
            m_route_b=np.array([1.0, 1.0]),
            residual=np.array([1e-12, np.nan]),
            singular=np.array([False, True]),
            condition=np.array([10.0, np.inf]),
        )
        rows = recovery.rows()
        assert rows.shape == (2, 6)
        assert rows[1, 3] == pytest.approx(0.1)
        assert rows[1, 5] == 1.0

        report = recovery.report_rows()
        assert report[0] == {'x': 0.0, 'condition': 10.0, 'residual': 1e-12, 'singular': False}
        assert report[1]['condition'] is None and report[1]['residual'] is None
