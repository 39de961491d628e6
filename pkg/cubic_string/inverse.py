"""
Inverse problem: from scattering data back to m(x) on one half-axis.

For fixed x >= 0 the sectional function F equals psi0^+ = v0^+ e^{i z+ x} in
Omega0^-, and e^{i z+ x}(v0^+ - z2 s1(lam z2) v1^+) resp.
e^{i z+ x}(v0^+ - z1 s2(lam z1) v2^+) in the two sectors around il_z0. The
pure step with the same kappa gives F_step in closed form, and

    H(lam) = (F(lam) - F_step(lam)) / lam^3

is bounded at the origin, O(lam^-3) at infinity and jumps only on the three
rays il_zk (oriented outward), so

    H = C0[K0] + C1[K1] + C2[K2] + poles.

On il_z2 and il_z1 the unknowns are the Omega0^- boundary values
X = H(it z2), Y = H(it z1); they carry v1^+(it, x) = a and v2^+(it, x) = b by

    a = (1 + lam^3 X) e^{t n+ z2 x},    b = (1 + lam^3 Y) e^{t n+ z1 x},

and the densities are affine in them:

    K2 = [p1 b - p1_step b_step] / lam^3     on il_z2,
    K1 = [p2 a - p2_step a_step] / lam^3     on il_z1,
    K0 = [p3 a + p4 b - (p3 a + p4 b)_step] / lam^3   on il_z0.

Boundary values on il_z2 (right bank) and il_z1 (left bank) close the system;
each double pole adds one row. The dual problem on R- is the direct problem of
m(-x), whose data are the dual samples of m, so assemble_dual, solve_dual and
reconstruct_Phi are thin mirrors.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence

import numpy as np
from scipy import linalg
from scipy.interpolate import UnivariateSpline

from config import config
from .cauchy import cauchy_matrix, jump_data, pv_matrix
from .errors import DomainError, GridError, SingularSystemError
from .geometry import SectorId, ZETA, in_omega, ray_of
from .jost import jost_grid, psi
from .potential import Potential
from .scattering import ScatteringData


logger = logging.getLogger(__name__)

# ray directions of the three densities: il_z0, il_z1, il_z2
DIRECTIONS = (1j, 1j * ZETA[1], 1j * ZETA[2])
JUMP_RAYS = (SectorId.IL0, SectorId.IL1, SectorId.IL2)


def sector(lam: complex) -> int:
    """0 for Omega0^-, 1 for the sector between il_z2 and il_z0, 2 for the one between il_z0 and il_z1"""
    if in_omega(lam, 0, minus=True):
        return 0
    if in_omega(lam, 2, minus=True):
        return 1
    if in_omega(lam, 1, minus=True):
        return 2
    raise DomainError(f'lam = {lam} lies on a jump ray')


def step_F(lam: complex, x: float, n: float, s_step) -> complex:
    """F of the pure step with step coefficients s_step = (s1, s2)"""
    lam = complex(lam)
    k = sector(lam)
    if k == 0:
        return 1.0
    if k == 1:
        return 1 - ZETA[2] * s_step[0] * np.exp(1j * lam * n * (1 - ZETA[2]) * x)
    return 1 - ZETA[1] * s_step[1] * np.exp(1j * lam * n * (1 - ZETA[1]) * x)


@dataclass
class SingularSystem:
    side: str                   # 'direct' (R+) or 'dual' (R-)
    x: float                    # physical x; the system is built at |x| in its own frame
    frame_x: float
    data: ScatteringData
    matrix: np.ndarray
    rhs: np.ndarray
    # K_k = linear[k] @ unknowns + constant[k], k indexing DIRECTIONS
    linear: List[np.ndarray] = field(default_factory=list)
    constant: List[np.ndarray] = field(default_factory=list)

    @property
    def n_tau(self) -> int:
        return len(self.data.tau)

    @property
    def n_mu(self) -> int:
        return len(self.data.mu)

    @property
    def n_nu(self) -> int:
        return len(self.data.nu)

    @property
    def size(self) -> int:
        return 2 * self.n_tau + self.n_mu + self.n_nu

    def layout(self) -> Dict[str, slice]:
        n, n_mu = self.n_tau, self.n_mu
        return {
            'X': slice(0, n),
            'Y': slice(n, 2 * n),
            'R': slice(2 * n, 2 * n + n_mu),
            'R_hat': slice(2 * n + n_mu, self.size),
        }


def _pole_terms(lam: complex, mu: np.ndarray, nu: np.ndarray, n: float, x: float):
    """Coefficients of R_n and R^_m in H(lam)"""
    lam = complex(lam)
    mu_phase = ZETA[1] * np.exp(1j * (1 - ZETA[2]) * n * mu * x)
    nu_phase = ZETA[2] * np.exp(1j * (1 - ZETA[1]) * n * nu * x)

    for pole in np.concatenate([mu, -mu * ZETA[2], nu, -nu * ZETA[1]]):
        if abs(lam - pole) < 1e-12:
            raise DomainError(f'collocation point {lam} coincides with the pole image {pole}')

    mu_terms = 1 / (lam - mu) ** 2 + mu_phase / (lam + mu * ZETA[2]) ** 2
    nu_terms = 1 / (lam - nu) ** 2 + nu_phase / (lam + nu * ZETA[1]) ** 2

    return mu_terms, nu_terms


def small_tau_quotient(tau: np.ndarray, values: np.ndarray, floor: float = None) -> np.ndarray:
    """
    Replace values at tau < floor by a quadratic through the first nodes above
    it. The quotients (s - s_step)/lam^3 are smooth in tau but lose every digit
    as lam^3 -> 0.
    """
    floor = config.quotient_floor if floor is None else floor
    below = tau < floor
    if not below.any():
        return values

    above = np.flatnonzero(~below)[:4]
    if len(above) == 0:
        logger.warning('every tau node lies below %.3g, small-tau quotients kept as sampled', floor)
        return values

    degree = min(2, len(above) - 1)
    fit = np.polynomial.polynomial
    re = fit.polyfit(tau[above], values[above].real, degree)
    im = fit.polyfit(tau[above], values[above].imag, degree)

    values = values.copy()
    values[below] = fit.polyval(tau[below], re) + 1j * fit.polyval(tau[below], im)
    return values


def assemble_direct(data: ScatteringData, x: float, side: str = 'direct') -> SingularSystem:
    tau, weights = np.asarray(data.tau), np.asarray(data.weights)
    n = len(tau)
    if n < 2:
        raise GridError(f'grid too small: {n} tau node(s)')

    n_plus = data.n_plus
    s_step = data.step_coefficients
    mu, nu = np.asarray(data.mu, dtype=float), np.asarray(data.nu, dtype=float)
    n_mu, n_nu = len(mu), len(nu)
    size = 2 * n + n_mu + n_nu

    lam0, lam1, lam2 = 1j * tau, 1j * tau * ZETA[1], 1j * tau * ZETA[2]
    cube = -1j * tau ** 3

    p1 = np.array([jump_data('p1', l, x, data) for l in lam2])
    p2 = np.array([jump_data('p2', l, x, data) for l in lam1])
    p3 = np.array([jump_data('p3', l, x, data) for l in lam0])
    p4 = np.array([jump_data('p4', l, x, data) for l in lam0])

    def wave(lam):
        return np.exp(1j * lam * n_plus * x)

    p1_step = -ZETA[2] * s_step[0] * wave(lam2)
    p2_step = ZETA[1] * s_step[1] * wave(lam1)
    p3_step = ZETA[2] * s_step[0] * wave(lam0)
    p4_step = -ZETA[1] * s_step[1] * wave(lam0)

    # v1^+(it), v2^+(it) of the pure step
    a_step = np.exp(n_plus * tau * ZETA[2] * x)
    b_step = np.exp(n_plus * tau * ZETA[1] * x)

    X, Y = slice(0, n), slice(n, 2 * n)
    linear = [np.zeros((n, size), dtype=complex) for _ in range(3)]
    linear[0][:, X] = np.diag(p3 * a_step)
    linear[0][:, Y] = np.diag(p4 * b_step)
    linear[1][:, X] = np.diag(p2 * a_step)
    linear[2][:, Y] = np.diag(p1 * b_step)
    constant = [
        ((p3 - p3_step) * a_step + (p4 - p4_step) * b_step) / cube,
        (p2 - p2_step) * a_step / cube,
        (p1 - p1_step) * b_step / cube,
    ]
    constant = [small_tau_quotient(tau, c) for c in constant]

    pv = pv_matrix(tau, weights, data.tau_max)

    def integrals(points: np.ndarray, skip: int = None):
        """H rows at points off the rays, except for the density whose ray carries them"""
        op = np.zeros((len(points), size), dtype=complex)
        const = np.zeros(len(points), dtype=complex)
        for k, direction in enumerate(DIRECTIONS):
            if k == skip:
                continue
            rows = cauchy_matrix(tau, weights, points / direction)
            op += rows @ linear[k]
            const += rows @ constant[k]

        for i, lam in enumerate(points):
            mu_terms, nu_terms = _pole_terms(lam, mu, nu, n_plus, x)
            op[i, 2 * n:2 * n + n_mu] += mu_terms
            op[i, 2 * n + n_mu:] += nu_terms
        return op, const

    matrix = np.zeros((size, size), dtype=complex)
    rhs = np.zeros(size, dtype=complex)
    identity = np.eye(n)

    # X = H(it z2) from the right bank of il_z2
    op, const = integrals(lam2, skip=2)
    op += -0.5 * linear[2] + pv @ linear[2]
    const += -0.5 * constant[2] + pv @ constant[2]
    matrix[X] = -op
    matrix[X, X] += identity
    rhs[X] = const

    # Y = H(it z1) from the left bank of il_z1
    op, const = integrals(lam1, skip=1)
    op += 0.5 * linear[1] + pv @ linear[1]
    const += 0.5 * constant[1] + pv @ constant[1]
    matrix[Y] = -op
    matrix[Y, Y] += identity
    rhs[Y] = const

    # poles: R = e^{i(1 - z_k) n pole x} F(pole z_k), unit norming
    pole_rows = [(2 * n + j, pole * ZETA[2], np.exp(1j * (1 - ZETA[2]) * n_plus * pole * x)) for j, pole in enumerate(mu)]
    pole_rows += [(2 * n + n_mu + j, pole * ZETA[1], np.exp(1j * (1 - ZETA[1]) * n_plus * pole * x)) for j, pole in enumerate(nu)]
    for row, lam, phase in pole_rows:
        op, const = integrals(np.array([lam]))
        matrix[row] = -phase * lam ** 3 * op[0]
        matrix[row, row] += 1
        rhs[row] = phase * (step_F(lam, x, n_plus, s_step) + lam ** 3 * const[0])

    return SingularSystem(
        side=side,
        x=x if side == 'direct' else -x,
        frame_x=x,
        data=data,
        matrix=matrix,
        rhs=rhs,
        linear=linear,
        constant=constant,
    )


@dataclass
class SystemSolution:
    system: SingularSystem
    unknowns: np.ndarray
    residual: float
    condition: float
    flagged: bool = False

    def part(self, name: str) -> np.ndarray:
        return self.unknowns[self.system.layout()[name]]

    def densities(self) -> List[np.ndarray]:
        s = self.system
        return [s.linear[k] @ self.unknowns + s.constant[k] for k in range(3)]

    def v1_plus(self) -> np.ndarray:
        """v1^+(it, x) on the tau nodes"""
        s = self.system
        tau = np.asarray(s.data.tau)
        return (1 - 1j * tau ** 3 * self.part('X')) * np.exp(s.data.n_plus * tau * ZETA[2] * s.frame_x)

    def v2_plus(self) -> np.ndarray:
        """v2^+(it, x) on the tau nodes"""
        s = self.system
        tau = np.asarray(s.data.tau)
        return (1 - 1j * tau ** 3 * self.part('Y')) * np.exp(s.data.n_plus * tau * ZETA[1] * s.frame_x)


def solve_system(system: SingularSystem) -> SystemSolution:
    """Dense LU solve with condition estimate and residual"""
    if not (np.all(np.isfinite(system.matrix)) and np.all(np.isfinite(system.rhs))):
        raise SingularSystemError(f'non-finite entries in the system at x = {system.x:.6g}', math.inf)

    condition = float(np.linalg.cond(system.matrix))
    if not np.isfinite(condition) or condition > 1 / np.finfo(float).eps:
        raise SingularSystemError(f'singular system at x = {system.x:.6g}', condition)

    try:
        unknowns = linalg.solve(system.matrix, system.rhs)
    except (linalg.LinAlgError, ValueError) as e:
        raise SingularSystemError(f'dense solve failed at x = {system.x:.6g}: {e}', condition) from e

    residual = float(np.linalg.norm(system.matrix @ unknowns - system.rhs) / max(np.linalg.norm(system.rhs), 1.0))
    flagged = residual > 1e-8
    if flagged:
        logger.warning('residual %.2e at x = %.6g exceeds 1e-8', residual, system.x)
    logger.debug('x = %.4g: condition %.3g, residual %.2e', system.x, condition, residual)

    return SystemSolution(system, unknowns, residual, condition, flagged)


def reconstruct_H(solution: SystemSolution, lam: complex) -> complex:
    """(F - F_step)/lam^3 from the solved system, lam off the three jump rays"""
    lam = complex(lam)
    if lam == 0 or ray_of(lam) in JUMP_RAYS:
        raise DomainError(f'lam = {lam} lies on a jump ray')

    s = solution.system
    data = s.data
    tau, weights = np.asarray(data.tau), np.asarray(data.weights)

    mu_terms, nu_terms = _pole_terms(lam, np.asarray(data.mu, dtype=float),
                                     np.asarray(data.nu, dtype=float), data.n_plus, s.frame_x)
    value = complex(mu_terms @ solution.part('R')) + complex(nu_terms @ solution.part('R_hat'))

    for direction, density in zip(DIRECTIONS, solution.densities()):
        value += complex(cauchy_matrix(tau, weights, [lam / direction])[0] @ density)

    return value


def reconstruct_F(solution: SystemSolution, lam: complex) -> complex:
    lam = complex(lam)
    s = solution.system
    h = reconstruct_H(solution, lam)
    return complex(step_F(lam, s.frame_x, s.data.n_plus, s.data.step_coefficients)) + lam ** 3 * h


def psi0_plus(solution: SystemSolution, lam: complex) -> complex:
    if not in_omega(lam, 0, minus=True):
        raise DomainError(f'lam = {lam} is outside Omega0^-')
    return reconstruct_F(solution, lam)


def v0_plus(solution: SystemSolution, lam: complex) -> complex:
    s = solution.system
    return psi0_plus(solution, lam) * complex(np.exp(-1j * complex(lam) * s.data.n_plus * s.frame_x))


def assemble_dual(data: ScatteringData, x: float) -> SingularSystem:
    """System on R-: the direct system of m(-x) at -x"""
    if x > 0:
        raise DomainError(f'the dual system lives on x <= 0, got {x}')
    return assemble_direct(data.reflected(), -x, side='dual')


def solve_dual(system: SingularSystem) -> SystemSolution:
    if system.side != 'dual':
        raise DomainError('solve_dual expects a dual system')
    return solve_system(system)


def reconstruct_Phi(solution: SystemSolution, lam: complex) -> complex:
    """Phi(lam), equal to F of m(-x) at -lam"""
    return reconstruct_F(solution, -complex(lam))


@dataclass
class ReconstructedField:
    """
    psi0 of the half-axis problem (for side '-', of m(-x) at -x) over the small-lam
    sweep and v0^+ at one lam in Omega0^-, sampled on the half-axis grid.
    """
    x: np.ndarray
    side: str
    m_limit: float
    eps: np.ndarray
    psi0: np.ndarray            # (len(eps), len(x)) at lam = i eps
    lam_b: complex
    v0_plus: np.ndarray         # (len(x),)
    source: str = 'forward'
    residual: np.ndarray = None
    condition: np.ndarray = None
    singular: np.ndarray = None

    @property
    def frame_x(self) -> np.ndarray:
        return self.x if self.side == '+' else -self.x

    @property
    def n_limit(self) -> float:
        return self.m_limit ** (1 / 3)

    @classmethod
    def from_forward(cls, p: Potential, xs: Sequence[float], side: str = '+') -> 'ReconstructedField':
        """The same field from the Jost solutions of a known string, the reference for the system route"""
        xs = np.asarray(xs, dtype=float)
        _check_half_axis(xs, side)
        frame = p if side == '+' else p.reflected()
        ys = xs if side == '+' else -xs

        eps = np.asarray(config.lambda_sweep, dtype=float)
        psi0 = np.array([psi(frame, 1j * e, 0, ys) for e in eps])
        lam_b = -1j * config.route_b_lambda
        v0 = np.conj(jost_grid('v', frame, np.conj(lam_b), 0, ys).value)

        return cls(xs, side, frame.m_plus, eps, psi0, lam_b, v0, 'forward',
                   residual=np.zeros(len(xs)), condition=np.ones(len(xs)),
                   singular=np.zeros(len(xs), dtype=bool))

    @classmethod
    def from_system(cls, data: ScatteringData, xs: Sequence[float], side: str = '+',
                    mapper: Callable = map) -> 'ReconstructedField':
        xs = np.asarray(xs, dtype=float)
        _check_half_axis(xs, side)
        frame = data if side == '+' else data.reflected()
        ys = xs if side == '+' else -xs

        eps = np.asarray(config.lambda_sweep, dtype=float)
        lam_b = -1j * config.route_b_lambda
        columns = list(mapper(_SystemColumn(frame, eps, lam_b), ys))

        return cls(
            x=xs,
            side=side,
            m_limit=frame.m_plus,
            eps=eps,
            psi0=np.array([c['psi0'] for c in columns]).T,
            lam_b=lam_b,
            v0_plus=np.array([c['v0'] for c in columns]),
            source='system',
            residual=np.array([c['residual'] for c in columns]),
            condition=np.array([c['condition'] for c in columns]),
            singular=np.array([c['singular'] for c in columns]),
        )


@dataclass
class _SystemColumn:
    """One x of the system route; a picklable callable for process pools"""
    data: ScatteringData
    eps: np.ndarray
    lam_b: complex

    def __call__(self, y: float) -> dict:
        try:
            solution = solve_system(assemble_direct(self.data, float(y)))
        except SingularSystemError as e:
            logger.error('%s', e)
            nan = complex('nan')
            return {'psi0': [nan] * len(self.eps), 'v0': nan, 'residual': math.nan,
                    'condition': e.condition, 'singular': True}

        # psi0(i eps) = conj(psi0^+(-i eps))
        psi0 = [np.conj(psi0_plus(solution, -1j * e)) for e in self.eps]
        return {
            'psi0': psi0,
            'v0': v0_plus(solution, self.lam_b),
            'residual': solution.residual,
            'condition': solution.condition,
            'singular': False,
        }


def _check_half_axis(xs: np.ndarray, side: str):
    if side not in ('+', '-'):
        raise DomainError(f"side must be '+' or '-', got {side!r}")
    if len(xs) < 6:
        raise GridError(f'grid too small: {len(xs)} x node(s), six or more are needed')
    if (side == '+' and np.any(xs < 0)) or (side == '-' and np.any(xs > 0)):
        raise DomainError(f'x grid leaves the half-axis {side}')
    if np.any(np.diff(xs) == 0):
        raise GridError('x grid has repeated nodes')


@dataclass
class Recovery:
    x: np.ndarray
    M_profile: np.ndarray
    m_route_a: np.ndarray
    m_route_b: np.ndarray
    residual: np.ndarray
    singular: np.ndarray
    condition: np.ndarray = None

    @property
    def discrepancy(self) -> np.ndarray:
        return np.abs(self.m_route_a - self.m_route_b)

    def rows(self) -> np.ndarray:
        """x, route A, route B, discrepancy, residual, singular flag"""
        return np.column_stack([
            self.x, self.m_route_a, self.m_route_b, self.discrepancy,
            self.residual, self.singular.astype(float),
        ])

    def report_rows(self) -> List[dict]:
        """Per-x conditioning and residual, NaN written as null"""
        def number(v):
            return float(v) if np.isfinite(v) else None

        condition = self.condition if self.condition is not None else np.full(len(self.x), np.nan)
        return [
            {'x': float(x), 'condition': number(c), 'residual': number(r), 'singular': bool(s)}
            for x, c, r, s in zip(self.x, condition, self.residual, self.singular)
        ]


def _smoothing_spline(y: np.ndarray, values: np.ndarray) -> UnivariateSpline:
    """Quintic spline, smoothing factor picked by fitting even nodes and scoring odd ones"""
    if len(y) < 14:
        return UnivariateSpline(y, values, k=5, s=0)

    even, odd = slice(0, None, 2), slice(1, None, 2)
    candidates = [0.0] + [len(y) * 10.0 ** -e for e in range(16, 3, -2)]
    scores = []
    for s in candidates:
        spline = UnivariateSpline(y[even], values[even], k=5, s=s / 2)
        scores.append(float(np.mean((spline(y[odd]) - values[odd]) ** 2)))

    best = candidates[int(np.argmin(scores))]
    logger.debug('smoothing factor %.3g chosen by even/odd validation', best)
    return UnivariateSpline(y, values, k=5, s=best)


def _route_a(recon: ReconstructedField, y: np.ndarray, order: np.ndarray):
    eps = recon.eps
    if len(eps) < 2 or np.any(eps <= 0):
        raise DomainError('the small-lam sweep needs two or more positive values')

    # (psi0 - 1) / (i z)^3 at lam = i eps, with (i z)^3 = -(eps n)^3
    ratio = (recon.psi0 - 1) / (-(eps * recon.n_limit) ** 3)[:, None]
    degree = min(2, len(eps) - 1)
    intercept = np.polynomial.polynomial.polyfit(eps, ratio.real, degree)[0]
    M = -intercept

    spline = _smoothing_spline(y[order], M[order])
    third = spline.derivative(3)(y)
    return M, recon.m_limit * (1 - third)


def _route_b(recon: ReconstructedField, y: np.ndarray, order: np.ndarray) -> np.ndarray:
    v = recon.v0_plus
    if np.any(np.abs(v) < 1e-300):
        raise DomainError('v0^+ vanishes on the grid')

    g = np.log(np.abs(v[order])) + 1j * np.unwrap(np.angle(v[order]))
    splines = [UnivariateSpline(y[order], part, k=5, s=0) for part in (g.real, g.imag)]
    d1, d2, d3 = (
        splines[0].derivative(j)(y) + 1j * splines[1].derivative(j)(y) for j in (1, 2, 3)
    )
    log_third = d3 + 3 * d1 * d2 + d1 ** 3

    return (-1j * log_third / recon.lam_b ** 3).real


def recover_m(recon: ReconstructedField) -> Recovery:
    """m on the half-axis by the small-lam limit of psi0 (A) and by v0^+''' / v0^+ (B)"""
    y = recon.frame_x
    order = np.argsort(y)
    good = ~recon.singular if recon.singular is not None else np.ones(len(y), dtype=bool)

    m_a = np.full(len(y), np.nan)
    m_b = np.full(len(y), np.nan)
    M = np.full(len(y), np.nan)
    if good.sum() >= 6:
        sub = ReconstructedField(recon.x[good], recon.side, recon.m_limit, recon.eps,
                                 recon.psi0[:, good], recon.lam_b, recon.v0_plus[good], recon.source)
        y_good = y[good]
        order_good = np.argsort(y_good)
        M[good], m_a[good] = _route_a(sub, y_good, order_good)
        m_b[good] = _route_b(sub, y_good, order_good)
    else:
        logger.error('too few regular x nodes (%d) to differentiate', good.sum())

    return Recovery(
        x=recon.x,
        M_profile=M,
        m_route_a=m_a,
        m_route_b=m_b,
        residual=recon.residual if recon.residual is not None else np.zeros(len(y)),
        singular=recon.singular if recon.singular is not None else np.zeros(len(y), dtype=bool),
        condition=recon.condition,
    )
