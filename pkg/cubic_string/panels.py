"""
Composite Gauss-Legendre meshes.

`PanelMesh` covers [lo, hi] with panels whose breakpoints include every
requested point, so values there come out of the quadrature directly.
`tau_mesh` builds the graded mesh on (0, tau_max] used for ray integrals.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Tuple

import numpy as np
from numpy.polynomial import legendre
from scipy.special import roots_legendre

from config import config
from .errors import GridError


@lru_cache(maxsize=16)
def reference_rule(order: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Nodes and weights on [-1, 1] plus the partial-integration matrix
    P[i, k] = int_{x_i}^{1} l_k(s) ds of the Lagrange basis l_k.
    """
    nodes, weights = roots_legendre(order)
    vandermonde = legendre.legvander(nodes, order - 1)
    basis = np.linalg.inv(vandermonde)
    antiderivative = legendre.legint(basis, lbnd=1.0)
    partial = -legendre.legval(nodes, antiderivative).T

    return nodes, weights, partial


@dataclass(frozen=True)
class PanelMesh:
    breaks: np.ndarray          # (P + 1,)
    nodes: np.ndarray           # (P, n)
    weights: np.ndarray         # (P, n)
    partial: np.ndarray         # (P, n, n), scaled to each panel

    @property
    def lo(self) -> float:
        return float(self.breaks[0])

    @property
    def hi(self) -> float:
        return float(self.breaks[-1])

    @property
    def n_panels(self) -> int:
        return len(self.breaks) - 1

    def integrate(self, values: np.ndarray) -> complex:
        return np.sum(self.weights * values)

    @classmethod
    def covering(cls, points: Iterable[float], panel_length: float = None, order: int = None) -> 'PanelMesh':
        panel_length = panel_length or config.panel_length
        order = order or config.gl_order

        points = np.unique(np.asarray(list(points), dtype=float))
        if len(points) < 2:
            raise GridError('a panel mesh needs at least two distinct points')

        breaks = [points[0]]
        for a, b in zip(points[:-1], points[1:]):
            n_sub = max(1, int(np.ceil((b - a) / panel_length)))
            breaks.extend(np.linspace(a, b, n_sub + 1)[1:])
        breaks = np.asarray(breaks)

        ref_nodes, ref_weights, ref_partial = reference_rule(order)
        half = np.diff(breaks) / 2
        mid = (breaks[:-1] + breaks[1:]) / 2

        return cls(
            breaks=breaks,
            nodes=mid[:, None] + half[:, None] * ref_nodes[None, :],
            weights=half[:, None] * ref_weights[None, :],
            partial=half[:, None, None] * ref_partial[None, :, :],
        )


@dataclass(frozen=True)
class TauMesh:
    """Graded composite Gauss-Legendre mesh on (0, tau_max]"""
    nodes: np.ndarray
    weights: np.ndarray
    tau_max: float

    def __len__(self):
        return len(self.nodes)


def tau_mesh(n_nodes: int = None, tau_max: float = None, order: int = None, grading: float = None) -> TauMesh:
    n_nodes = n_nodes or config.tau_nodes
    tau_max = tau_max or config.tau_max
    order = order or config.tau_order
    grading = grading or config.tau_grading

    if n_nodes < 2:
        raise GridError(f'grid too small: {n_nodes} tau node(s)')
    if tau_max <= 0:
        raise GridError(f'tau_max must be positive, got {tau_max}')

    order = min(order, n_nodes)
    if n_nodes % order:
        raise GridError(f'{n_nodes} tau nodes do not fill whole panels of {order}, pick a multiple of {order}')
    n_panels = n_nodes // order
    # geometric breakpoints from tau_max * grading up, one plain panel at the origin
    if n_panels == 1:
        breaks = np.array([0.0, tau_max])
    else:
        inner = np.geomspace(tau_max * grading, tau_max, n_panels)[:-1]
        breaks = np.concatenate([[0.0], inner, [tau_max]])

    ref_nodes, ref_weights, _ = reference_rule(order)
    half = np.diff(breaks) / 2
    mid = (breaks[:-1] + breaks[1:]) / 2

    return TauMesh(
        nodes=(mid[:, None] + half[:, None] * ref_nodes[None, :]).ravel(),
        weights=(half[:, None] * ref_weights[None, :]).ravel(),
        tau_max=float(tau_max),
    )
