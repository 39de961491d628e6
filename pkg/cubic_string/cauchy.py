"""
Cauchy integrals over the rays il_zk, their boundary values, the damping
function Q and the jump data of the Riemann problem.

A ray with direction e is parametrized by tau > 0, lam = tau * e, and every
integral is written in the parameter xi = lam / e,

    C[d](lam) = 1/(2 pi i) int_0^T d(tau) / (tau - xi) dtau.

The left bank of the ray (counterclockwise side) carries +1/2 d(t) in the
Sokhotski formula, the right bank -1/2 d(t).
"""
import cmath
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from config import config
from .errors import DomainError, GridError, QuadratureError
from .geometry import RAY_DIRECTIONS, ZETA, SectorId
from .trig3 import complex_quad


logger = logging.getLogger(__name__)

SIDES = ('left', 'right')


@dataclass(frozen=True)
class RayDensity:
    """
    Density on a ray: samples interpolated by monotone cubics, or an exact
    callable when one is known.
    """
    ray: SectorId
    tau: np.ndarray
    values: np.ndarray
    tau_max: float
    function: Optional[Callable[[float], complex]] = None

    def __post_init__(self):
        if not self.ray.is_ray:
            raise DomainError(f'{self.ray} is not a ray')
        tau = np.asarray(self.tau, dtype=float)
        if len(tau) < 2:
            raise GridError('grid too small: a density needs two or more nodes')
        if np.any(tau <= 0) or np.any(np.diff(tau) <= 0):
            raise GridError('density nodes must be positive and strictly increasing')
        if not np.all(np.isfinite(self.values)):
            raise DomainError('density values must be finite')

    @classmethod
    def from_function(cls, ray: SectorId, f: Callable[[float], complex], tau_max: float, n_nodes: int = 64):
        tau = np.linspace(tau_max / n_nodes, tau_max, n_nodes)
        values = np.array([f(t) for t in tau], dtype=complex)
        return cls(ray, tau, values, tau_max, f)

    @property
    def direction(self) -> complex:
        return RAY_DIRECTIONS[self.ray]

    def __call__(self, t):
        if self.function is not None:
            return self.function(t)
        values = np.asarray(self.values)
        re = PchipInterpolator(self.tau, values.real)(t)
        im = PchipInterpolator(self.tau, values.imag)(t)
        return re + 1j * im

    @property
    def tail_bound(self) -> float:
        """|d(T)| (1 + |ln T|), the size of the neglected tail"""
        return abs(complex(self(self.tau_max))) * (1 + abs(math.log(self.tau_max)))


def parameter(d: RayDensity, lam: complex) -> complex:
    return complex(lam) / d.direction


def cauchy_integral(d: RayDensity, lam: complex) -> complex:
    xi = parameter(d, lam)
    if abs(xi.imag) <= 1e-12 * max(1.0, abs(xi)) and xi.real >= 0:
        raise DomainError(f'lam = {lam} lies on the ray {d.ray.value}, use boundary_value')

    f = lambda t: complex(d(t)) / (t - xi)
    points = [xi.real] if 0 < xi.real < d.tau_max else None
    try:
        value = complex_quad(f, 0.0, d.tau_max, points=points)
    except (ValueError, ArithmeticError) as e:
        raise QuadratureError(f'Cauchy integral failed: {e}') from e

    return value / (2j * math.pi)


def principal_value(d: RayDensity, t: float) -> complex:
    """PV int_0^T d(tau)/(tau - t) by subtracting d(t)"""
    if not 0 < t < d.tau_max:
        raise DomainError(f't = {t} must lie strictly inside (0, {d.tau_max})')

    dt = complex(d(t))
    f = lambda s: (complex(d(s)) - dt) / (s - t) if s != t else 0.0
    try:
        smooth = complex_quad(f, 0.0, d.tau_max, points=[t])
    except (ValueError, ArithmeticError) as e:
        raise QuadratureError(f'principal value failed: {e}') from e

    return smooth + dt * math.log((d.tau_max - t) / t)


def boundary_value(d: RayDensity, t: float, side: str) -> complex:
    if side not in SIDES:
        raise DomainError(f"side must be 'left' or 'right', got {side!r}")

    half = 0.5 * complex(d(t))
    pv = principal_value(d, t) / (2j * math.pi)

    return pv + half if side == 'left' else pv - half


def cauchy_matrix(tau: np.ndarray, weights: np.ndarray, xi: Sequence[complex]) -> np.ndarray:
    """Nystrom rows for C[d](xi), off the ray"""
    xi = np.atleast_1d(np.asarray(xi, dtype=complex))
    return weights[None, :] / (tau[None, :] - xi[:, None]) / (2j * math.pi)


def panel_differentiation(tau: np.ndarray, order: int) -> np.ndarray:
    """Block-diagonal Lagrange differentiation over consecutive panels of `order` nodes"""
    n = len(tau)
    diff = np.zeros((n, n))
    for start in range(0, n, order):
        x = tau[start:start + order]
        gaps = x[:, None] - x[None, :]
        np.fill_diagonal(gaps, 1.0)
        c = np.prod(gaps, axis=1)
        block = (c[:, None] / c[None, :]) / gaps
        np.fill_diagonal(block, 0.0)
        np.fill_diagonal(gaps, np.inf)
        block[np.diag_indices_from(block)] = np.sum(1 / gaps, axis=1)
        diff[start:start + order, start:start + order] = block
    return diff


def pv_matrix(tau: np.ndarray, weights: np.ndarray, tau_max: float, order: int = None) -> np.ndarray:
    """
    Nystrom rows for PV/(2 pi i) at the nodes themselves. The singularity is
    subtracted; the node's own term w_i d'(tau_i) comes from the panel
    interpolant of the density.
    """
    order = min(order or config.tau_order, len(tau))
    diff = tau[None, :] - tau[:, None]
    np.fill_diagonal(diff, np.inf)
    matrix = weights[None, :] / diff

    log_term = np.log((tau_max - tau) / tau)
    np.fill_diagonal(matrix, log_term - matrix.sum(axis=1))
    if len(tau) % order:
        raise GridError(f'{len(tau)} nodes do not split into panels of {order}, the on-node term needs whole panels')
    matrix += weights[:, None] * panel_differentiation(tau, order)

    return matrix / (2j * math.pi)


@dataclass(frozen=True)
class DampingQ:
    """
    Q(lam) = exp(c (e^{-i theta} lam n)^2), entire and zero-free. theta = 0
    grows on il_z1, il_z2 and the real axis; theta = pi/2 grows on il_z0.
    """
    c: float
    n: float = 1.0
    theta: float = 0.0

    def __post_init__(self):
        if self.c <= 0:
            raise DomainError(f'damping constant must be positive, got {self.c}')

    @property
    def beta(self) -> complex:
        return self.c * self.n ** 2 * cmath.exp(-2j * self.theta)

    def rotated(self, theta: float) -> 'DampingQ':
        return DampingQ(self.c, self.n, theta)

    def __call__(self, lam):
        return np.exp(self.beta * np.asarray(lam, dtype=complex) ** 2)

    def inverse(self, lam):
        return np.exp(-self.beta * np.asarray(lam, dtype=complex) ** 2)

    def inverse_d2(self, lam):
        """(1/Q)'' in lam"""
        lam = np.asarray(lam, dtype=complex)
        beta = self.beta
        return (4 * beta ** 2 * lam ** 2 - 2 * beta) * np.exp(-beta * lam ** 2)


def q_eval(q: DampingQ, lam: complex) -> complex:
    value = complex(q(lam))
    if value == 0 or not cmath.isfinite(value):
        raise DomainError(f'Q({lam}) under- or overflows')
    return value


JUMP_KINDS = ('p1', 'p2', 'p3', 'p4', 'p1~', 'p2~', 'p3~', 'p4~')


def jump_data(kind: str, lam: complex, x: float, data) -> complex:
    """
    Jump functions of the Riemann problems, left bank minus right bank on the
    outward rays. Direct kinds use z+ and s1, s2; dual kinds (suffix ~) use z-
    and the dual coefficients at the same rotated arguments.

        il_z2:  F(left) - F(right) = p1 v1^+(lam),    p1 = -z2 s1(lam z2) e^{i z+ x}
        il_z1:  F(left) - F(right) = p2 v2^+(lam),    p2 =  z1 s2(lam z1) e^{i z+ x}
        il_z0:  F(left) - F(right) = p3 v1^+ + p4 v2^+,
                p3 = z2 s1(lam z2) e^{i z+ x},        p4 = -z1 s2(lam z1) e^{i z+ x}
    """
    if kind not in JUMP_KINDS:
        raise DomainError(f'unknown jump kind {kind!r}')

    lam = complex(lam)
    dual = kind.endswith('~')
    z = lam * (data.n_minus if dual else data.n_plus)
    wave = cmath.exp(1j * z * x)

    base = kind.rstrip('~')
    if base in ('p1', 'p3'):
        value = ZETA[2] * data.coefficient('s1', lam * ZETA[2], dual=dual) * wave
        return -value if base == 'p1' else value

    value = ZETA[1] * data.coefficient('s2', lam * ZETA[1], dual=dual) * wave
    return value if base == 'p2' else -value
