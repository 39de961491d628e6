from dataclasses import asdict

import numpy as np
import pytest

from config import config
from cubic_string.panels import tau_mesh
from cubic_string.potential import GaussianBumps, Potential
from cubic_string.scattering import COEFFICIENTS, ScatteringData, compute_scattering_data


@pytest.fixture(autouse=True)
def restore_config():
    """The CLI writes into the config singleton; undo it after every test"""
    saved = asdict(config)
    yield
    for name, value in saved.items():
        setattr(config, name, value)


@pytest.fixture
def flat():
    return Potential(m_plus=1.0, m_minus=1.0, a=1.0)


@pytest.fixture
def step():
    """kappa = 2"""
    return Potential(m_plus=1.0, m_minus=8.0, a=1.0)


@pytest.fixture
def bump():
    return Potential(m_plus=1.0, m_minus=8.0, a=1.0, perturbation=GaussianBumps(((1.0, 0.3, 0.05),)))


@pytest.fixture
def small_mesh():
    return tau_mesh(n_nodes=16, tau_max=4.0)


def constant_data(p: Potential, mesh, r0=1.0, s1=0.0, s2=0.0, mu=(), nu=(), c=0.25) -> ScatteringData:
    """Scattering data with the same coefficients on every ray, direct and dual"""
    shape = (3, len(mesh))
    values = {'r0': r0, 's1': s1, 's2': s2}
    coefficients = {name: np.full(shape, values[name], dtype=complex) for name in COEFFICIENTS}
    return ScatteringData(
        tau=mesh.nodes,
        weights=mesh.weights,
        tau_max=mesh.tau_max,
        direct=coefficients,
        dual={name: array.copy() for name, array in coefficients.items()},
        mu=np.asarray(mu, dtype=float),
        nu=np.asarray(nu, dtype=float),
        m_plus=p.m_plus,
        m_minus=p.m_minus,
        c=c,
    )


@pytest.fixture
def flat_data(flat, small_mesh):
    return constant_data(flat, small_mesh)


@pytest.fixture(scope='session')
def step_data():
    p = Potential(m_plus=1.0, m_minus=8.0, a=1.0)
    return compute_scattering_data(p, tau_mesh(n_nodes=16, tau_max=4.0), bound_radius=0.5)


@pytest.fixture
def make_data():
    return constant_data
