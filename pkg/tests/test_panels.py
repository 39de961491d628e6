import numpy as np
import pytest

from cubic_string.errors import GridError
from cubic_string.panels import PanelMesh, reference_rule, tau_mesh


class TestReferenceRule:
    def test_weights(self):
        _, weights, _ = reference_rule(8)
        assert weights.sum() == pytest.approx(2.0, abs=1e-14)

    def test_partial_integrals_are_exact_for_polynomials(self):
        nodes, _, partial = reference_rule(8)
        np.testing.assert_allclose(partial @ nodes ** 2, (1 - nodes ** 3) / 3, atol=1e-14)


class TestPanelMesh:
    def test_breaks_contain_the_points(self):
        mesh = PanelMesh.covering([0.0, 1.0, 2.3], panel_length=0.25, order=12)
        for point in (0.0, 1.0, 2.3):
            assert np.min(np.abs(mesh.breaks - point)) == 0
        assert np.all(np.diff(mesh.breaks) <= 0.25 + 1e-15)

    def test_integrate(self):
        mesh = PanelMesh.covering([0.0, 2.3], panel_length=0.25, order=12)
        assert mesh.integrate(np.cos(mesh.nodes)) == pytest.approx(np.sin(2.3), abs=1e-13)

    def test_needs_two_points(self):
        with pytest.raises(GridError):
            PanelMesh.covering([1.0, 1.0])


class TestTauMesh:
    def test_grid_too_small(self):
        with pytest.raises(GridError, match='grid too small'):
            tau_mesh(n_nodes=1)

    def test_nodes_and_weights(self):
        mesh = tau_mesh(n_nodes=64, tau_max=8.0)
        assert len(mesh) == 64
        assert np.all(np.diff(mesh.nodes) > 0)
        assert 0 < mesh.nodes[0] and mesh.nodes[-1] < 8.0
        assert mesh.weights.sum() == pytest.approx(8.0, rel=1e-13)
        assert np.sum(mesh.weights * np.exp(-mesh.nodes)) == pytest.approx(1 - np.exp(-8.0), rel=1e-12)

    def test_grading_refines_the_origin(self):
        mesh = tau_mesh(n_nodes=64, tau_max=8.0)
        assert mesh.nodes[0] < 1e-2

    def test_rejects_negative_range(self):
        with pytest.raises(GridError):
            tau_mesh(n_nodes=16, tau_max=-1.0)

    def test_rejects_partial_panels(self):
        with pytest.raises(GridError, match='multiple of 8'):
            tau_mesh(n_nodes=20, order=8)
        assert len(tau_mesh(n_nodes=6, order=8)) == 6
