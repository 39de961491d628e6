"""
Jost solutions of i y''' = m(x) lam^3 y.

v_k ~ exp(i z+ zeta_k x) at +inf solves the Volterra equation

    v_k(x) = e^{w zeta_k x} - w int_x^inf s2(w (x - t)) q(t) v_k(t) dt,
    w = i z+ = i lam n+,   q = m/m+ - 1,

with v' and v'' given by the same integral over the kernels s1, s0 and the
prefactors w^2, w^3. The series is iterated in the normalized form
psi_k = v_k exp(-w zeta_k x) on composite Gauss-Legendre panels, where the
kernel splits into three exponentials and every tail integral is carried
panel by panel from the right.

u_k ~ exp(i z- zeta_k x) at -inf is v_k of the reflected potential:
u_k(lam, x; m) = v_k(-lam, -x; m(-.)), u' = -v', u'' = v''.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from config import config
from .errors import DomainError, JostConvergenceError
from .geometry import ZETA, in_omega
from .panels import PanelMesh
from .potential import Potential, sigma
from .trig3 import ZETA_ARRAY, _WEIGHTS as KERNEL_WEIGHTS


logger = logging.getLogger(__name__)

FAMILIES = ('v', 'u')


@dataclass(frozen=True)
class JostEval:
    family: str
    k: int
    lam: complex
    x: float
    value: complex
    d1: complex
    d2: complex


@dataclass
class NeumannDiagnostics:
    terms_used: int
    last_term_norm: float
    bound_margin: float
    backend: str = 'neumann'
    term_norms: List[float] = field(default_factory=list)
    term_bounds: List[float] = field(default_factory=list)
    tail_bound: float = 0.0


@dataclass
class JostGrid:
    family: str
    k: int
    lam: complex
    x: np.ndarray
    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    diagnostics: NeumannDiagnostics

    def at(self, i: int) -> JostEval:
        return JostEval(self.family, self.k, self.lam, float(self.x[i]),
                        complex(self.value[i]), complex(self.d1[i]), complex(self.d2[i]))


def _check(k: int, lam: complex):
    if k not in (0, 1, 2):
        raise DomainError(f'Jost index must be 0, 1 or 2, got {k!r}')
    if lam == 0:
        raise DomainError('Jost solutions are normalized for lam != 0')


class RightVolterra:
    """
    Discretized Volterra operator for v_k of one potential at one (lam, k).
    Breakpoints include every requested x, 0 (the step) and the right end.
    """

    def __init__(self, p: Potential, lam: complex, k: int, points: Sequence[float]):
        self.p = p
        self.lam = complex(lam)
        self.k = k
        self.w = 1j * self.lam * p.n_plus

        points = np.asarray(points, dtype=float)
        self.right = max(p.edge('+') + config.tail_margin, float(points.max()) + config.tail_margin)
        breaks = list(points) + [self.right]
        if points.min() < 0 < self.right:
            breaks.append(0.0)

        self.mesh = PanelMesh.covering(breaks)
        self.q = p.deviation(self.mesh.nodes, '+')
        self.alpha = (ZETA_ARRAY - ZETA[k]) * self.w
        self.length = self.mesh.hi - self.mesh.lo

        growth = np.max(-self.alpha.real) * self.length
        if growth > config.overflow_guard:
            raise DomainError(f'kernel growth exp({growth:.1f}) exceeds the overflow guard')

        self._prepare()

    def _prepare(self):
        mesh, alpha = self.mesh, self.alpha
        t = mesh.nodes                                   # (P, n)
        a, b = mesh.breaks[:-1], mesh.breaks[1:]          # (P,)
        diff = t[:, :, None] - t[:, None, :]              # t_i - s_k

        # within-panel partial integrals int_{t_i}^{b} e^{alpha (t_i - s)} g(s) ds
        self.within = mesh.partial[None] * np.exp(alpha[:, None, None, None] * diff[None])
        # whole-panel integral seen from its left end
        self.whole = mesh.weights[None] * np.exp(alpha[:, None, None] * (a[None, :, None] - t[None]))
        self.carry = np.exp(alpha[:, None] * (a - b)[None])
        self.to_nodes = np.exp(alpha[:, None, None] * (t - b[:, None])[None])

    def tail(self, g: np.ndarray):
        """I_j(x) = int_x^right e^{alpha_j (x - t)} g(t) dt at nodes and breakpoints"""
        n_panels = self.mesh.n_panels
        at_nodes = np.empty((3,) + g.shape, dtype=complex)
        at_breaks = np.zeros((3, n_panels + 1), dtype=complex)
        carried = np.zeros(3, dtype=complex)

        for p in range(n_panels - 1, -1, -1):
            at_nodes[:, p, :] = (
                self.to_nodes[:, p, :] * carried[:, None]
                + np.einsum('jik,k->ji', self.within[:, p], g[p])
            )
            carried = self.carry[:, p] * carried + self.whole[:, p, :] @ g[p]
            at_breaks[:, p] = carried

        return at_nodes, at_breaks

    @staticmethod
    def kernel(integrals: np.ndarray, s: int) -> np.ndarray:
        """Combine the three exponential tails into the kernel s_s"""
        return np.tensordot(KERNEL_WEIGHTS[s], integrals, axes=1)

    def kernel_bound(self) -> float:
        return float(np.mean(np.maximum(1.0, np.exp(-self.alpha.real * self.length))))

    def neumann(self, max_terms: int = None, strict: bool = True):
        max_terms = max_terms or config.neumann_max_terms
        w = self.w

        psi_nodes = np.ones_like(self.q, dtype=complex)
        term = psi_nodes.copy()
        norms = [1.0]

        for n in range(1, max_terms + 1):
            at_nodes, at_breaks = self.tail(self.q * term)
            term = -w * self.kernel(at_nodes, 2)
            norm = max(np.max(np.abs(term)), np.max(np.abs(-w * self.kernel(at_breaks, 2))))
            norms.append(float(norm))
            psi_nodes = psi_nodes + term
            if norm < config.neumann_tol:
                break
        else:
            if strict:
                raise JostConvergenceError(
                    f'Neumann series for lam={self.lam:.4g}, k={self.k} did not settle '
                    f'in {max_terms} terms (last term {norms[-1]:.2e})'
                )

        return psi_nodes, norms

    def diagnostics(self, norms: List[float]) -> NeumannDiagnostics:
        sigma = float(np.sum(self.mesh.weights * np.abs(self.q)))
        scale = abs(self.w) * self.kernel_bound() * sigma
        bounds = [scale ** n / math.factorial(n) for n in range(len(norms))]
        ratios = [obs / bnd for obs, bnd in zip(norms[1:], bounds[1:]) if bnd > 0]

        return NeumannDiagnostics(
            terms_used=len(norms) - 1,
            last_term_norm=norms[-1],
            bound_margin=max(ratios, default=0.0),
            term_norms=norms,
            term_bounds=bounds,
            tail_bound=abs(self.w) * self.kernel_bound() * config.envelope_floor / self.p.a,
        )

    def evaluate(self, psi_nodes: np.ndarray, points: np.ndarray):
        """value, d1, d2 of v_k at points from the converged normalized solution"""
        w, zk = self.w, ZETA[self.k]
        _, at_breaks = self.tail(self.q * psi_nodes)
        index = np.searchsorted(self.mesh.breaks, points)
        integrals = at_breaks[:, index]

        phase = np.exp(w * zk * points)
        value = phase * (1 - w * self.kernel(integrals, 2))
        d1 = phase * (w * zk - w ** 2 * self.kernel(integrals, 1))
        d2 = phase * ((w * zk) ** 2 - w ** 3 * self.kernel(integrals, 0))

        return value, d1, d2


def _ode_v(p: Potential, lam: complex, k: int, points: np.ndarray):
    """Back-integration of y''' = w^3 (1 + q) y from the edge of the perturbation"""
    w = 1j * complex(lam) * p.n_plus
    wz = w * ZETA[k]
    right = max(p.edge('+') + config.tail_margin, float(points.max()))

    def rhs(x, y):
        return [y[1], y[2], w ** 3 * (1 + float(p.deviation(x, '+'))) * y[0]]

    state = np.exp(wz * right) * np.array([1, wz, wz ** 2], dtype=complex)
    # restart at the jump of m so the integrator never steps across it
    bounds = [right, 0.0, float(points.min())] if points.min() < 0 < right else [right, float(points.min())]

    result = np.empty((3, len(points)), dtype=complex)
    for start, stop in zip(bounds[:-1], bounds[1:]):
        inside = (points <= start) & (points >= stop)
        if start <= stop:
            result[:, inside] = state[:, None]
            continue

        sol = solve_ivp(
            rhs, (start, stop), state, method='DOP853', dense_output=True,
            rtol=config.ode_rtol, atol=config.ode_atol * max(1.0, np.max(np.abs(state))),
            max_step=config.panel_length,
        )
        if not sol.success:
            raise JostConvergenceError(f'ODE back-integration failed: {sol.message}')
        if inside.any():
            result[:, inside] = sol.sol(points[inside])
        state = sol.y[:, -1]

    return result


def _right_grid(p: Potential, lam: complex, k: int, points: np.ndarray, backend: str) -> tuple:
    if backend in ('auto', 'neumann'):
        try:
            problem = RightVolterra(p, lam, k, points)
            psi_nodes, norms = problem.neumann()
            value, d1, d2 = problem.evaluate(psi_nodes, points)
            return value, d1, d2, problem.diagnostics(norms)
        except (JostConvergenceError, DomainError) as e:
            if backend == 'neumann' or not config.ode_fallback:
                raise
            logger.debug('falling back to ODE integration: %s', e)

    value, d1, d2 = _ode_v(p, lam, k, points)
    diagnostics = NeumannDiagnostics(terms_used=0, last_term_norm=0.0, bound_margin=0.0, backend='ode')

    return value, d1, d2, diagnostics


def jost_grid(family: str, p: Potential, lam: complex, k: int, xs, backend: str = 'auto') -> JostGrid:
    """All of (value, d1, d2) of v_k or u_k on a grid of x from one solve"""
    if family not in FAMILIES:
        raise DomainError(f'family must be v or u, got {family!r}')
    _check(k, lam)
    if backend not in ('auto', 'neumann', 'ode'):
        raise DomainError(f'unknown backend {backend!r}')

    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if family == 'v':
        value, d1, d2, diag = _right_grid(p, lam, k, xs, backend)
    else:
        value, d1, d2, diag = _right_grid(p.reflected(), -complex(lam), k, -xs, backend)
        d1 = -d1

    return JostGrid(family, k, complex(lam), xs, value, d1, d2, diag)


def solve_v(p: Potential, lam: complex, k: int, x: float, backend: str = 'auto'):
    grid = jost_grid('v', p, lam, k, [x], backend)
    return grid.at(0), grid.diagnostics


def solve_u(p: Potential, lam: complex, k: int, x: float, backend: str = 'auto'):
    grid = jost_grid('u', p, lam, k, [x], backend)
    return grid.at(0), grid.diagnostics


def _normalized(family: str, p: Potential, lam: complex, k: int, x) -> np.ndarray:
    grid = jost_grid(family, p, lam, k, x)
    n = p.n_plus if family == 'v' else p.n_minus
    values = grid.value * np.exp(-1j * complex(lam) * n * ZETA[k] * grid.x)

    if k == 0:
        minus = family == 'u'
        if in_omega(lam, 0, minus=minus):
            side = '+' if family == 'v' else '-'
            bound = 2 * math.exp(abs(lam) * p.n(side) * sigma(p, 0.0, side))
            half_axis = grid.x >= 0 if family == 'v' else grid.x <= 0
            if np.any(np.abs(values[half_axis]) > bound):
                logger.warning('normalized Jost solution exceeds its sector bound %.3g', bound)

    return values


def psi(p: Potential, lam: complex, k: int, x):
    """v_k exp(-i z+ zeta_k x)"""
    values = _normalized('v', p, lam, k, x)
    return complex(values[0]) if np.ndim(x) == 0 else values


def phi(p: Potential, lam: complex, k: int, x):
    """u_k exp(-i z- zeta_k x)"""
    values = _normalized('u', p, lam, k, x)
    return complex(values[0]) if np.ndim(x) == 0 else values


def kernel_bound_check(p: Potential, lam: complex, k: int, n_max: int = 10, x: float = 0.0) -> NeumannDiagnostics:
    """Per-term sup norms of the normalized series against the factorial bound"""
    if n_max > 20:
        raise DomainError(f'n_max must not exceed 20, got {n_max}')
    _check(k, lam)

    problem = RightVolterra(p, lam, k, [x])
    _, norms = problem.neumann(max_terms=n_max, strict=False)
    return problem.diagnostics(norms)
