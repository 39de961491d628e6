"""
Transition matrix of the cubic string and everything derived from it.

u_0 = sum_l t_0l v_l; row 0 is found by matching values and two derivatives
at one x (the rows are x-independent), the other rows follow from
v_k(lam zeta_1) = v_{k+1}(lam):

    row 1 = [t02, t00, t01](lam zeta_1),   row 2 = [t01, t02, t00](lam zeta_2).

f^+(lam) denotes conj(f(conj(lam))). T satisfies T J T^+(lam)^T = kappa^2 J,
so the dual matrix is T^{-1} = kappa^-2 J T^+(lam)^T J.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache, partial
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy
from scipy import linalg, optimize
from scipy.interpolate import PchipInterpolator

from config import config
from .errors import BoundStateCandidate, DomainError
from .geometry import SQRT3, ZETA
from .jost import JostEval, jost_grid
from .panels import TauMesh, tau_mesh
from .potential import Potential, sigma


logger = logging.getLogger(__name__)

J_MATRIX = np.array([
    [1, 0, 0],
    [0, 0, ZETA[2]],
    [0, ZETA[1], 0],
], dtype=complex)


@dataclass(frozen=True)
class InvolutionJ:
    # flips the sign of J_12, used to show that the unitarity checks catch it
    mutated: bool = False

    @property
    def matrix(self) -> np.ndarray:
        j = J_MATRIX.copy()
        if self.mutated:
            j[1, 2] = -j[1, 2]
        return j

    def residual(self) -> float:
        """max of |J^H - J| and |J^2 - I|"""
        j = self.matrix
        return float(max(np.max(np.abs(j.conj().T - j)), np.max(np.abs(j @ j - np.eye(3)))))


def wronskian3(a: JostEval, b: JostEval, c: JostEval) -> complex:
    if not (np.isclose(a.lam, b.lam) and np.isclose(a.lam, c.lam)):
        raise DomainError('Wronskian arguments evaluated at different lam')
    if not (np.isclose(a.x, b.x) and np.isclose(a.x, c.x)):
        raise DomainError('Wronskian arguments evaluated at different x')

    matrix = np.array([
        [a.value, b.value, c.value],
        [a.d1, b.d1, c.d1],
        [a.d2, b.d2, c.d2],
    ])
    return complex(np.linalg.det(matrix))


def wronskian_constant(p: Potential, lam: complex, family: str = 'v') -> complex:
    """W(v0, v1, v2) = -3 sqrt(3) m+ lam^3, W(u0, u1, u2) = -3 sqrt(3) m- lam^3"""
    m = p.m_plus if family == 'v' else p.m_minus
    return -3 * SQRT3 * m * complex(lam) ** 3


@dataclass
class PairWronskianReport:
    lam: complex
    x: np.ndarray
    residuals: np.ndarray      # (3, len(x)): W12, W01, W20 relative to their targets

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals))

    @property
    def spread(self) -> float:
        return float(np.max(np.ptp(self.residuals, axis=1)))


def pair_wronskian_identity_check(p: Potential, lam: complex, xs: Sequence[float] = (0.0,)) -> PairWronskianReport:
    """
    W12(v) = sqrt3 z v0^+, W01(v) = sqrt3 z zeta2 v1^+, W20(v) = sqrt3 z zeta1 v2^+
    with W_ab = v_a v_b' - v_b v_a' and z = lam n+.
    """
    lam = complex(lam)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    v = [jost_grid('v', p, lam, k, xs) for k in range(3)]
    plus = [np.conj(jost_grid('v', p, lam.conjugate(), k, xs).value) for k in range(3)]
    z = lam * p.n_plus

    def pair(a, b):
        return v[a].value * v[b].d1 - v[b].value * v[a].d1

    residuals = []
    for (a, b), factor, target in (
        ((1, 2), 1.0, plus[0]),
        ((0, 1), ZETA[2], plus[1]),
        ((2, 0), ZETA[1], plus[2]),
    ):
        expected = SQRT3 * z * factor * target
        scale = np.maximum(np.abs(expected), abs(SQRT3 * z))
        residuals.append(np.abs(pair(a, b) - expected) / scale)

    return PairWronskianReport(lam, xs, np.array(residuals))


def transition_rows(p: Potential, lam: complex, xs: Sequence[float] = (0.0,)) -> np.ndarray:
    """Row 0 of T(lam) matched at each x, shape (len(xs), 3)"""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    v = [jost_grid('v', p, lam, k, xs) for k in range(3)]
    u = jost_grid('u', p, lam, 0, xs)

    rows = np.empty((len(xs), 3), dtype=complex)
    for i in range(len(xs)):
        matrix = np.array([[g.value[i] for g in v], [g.d1[i] for g in v], [g.d2[i] for g in v]])
        rows[i] = linalg.solve(matrix, [u.value[i], u.d1[i], u.d2[i]])

    return rows


def transition_row(p: Potential, lam: complex, x: float = 0.0) -> np.ndarray:
    return transition_rows(p, lam, [x])[0]


def _from_rows(row: np.ndarray, row_z1: np.ndarray, row_z2: np.ndarray) -> np.ndarray:
    return np.array([
        row,
        [row_z1[2], row_z1[0], row_z1[1]],
        [row_z2[1], row_z2[2], row_z2[0]],
    ])


@dataclass
class TransitionMatrix:
    lam: complex
    entries: np.ndarray         # T(lam)
    entries_conj: np.ndarray    # T(conj(lam))
    kappa: float
    dual: bool = False

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.entries))

    def det_residual(self) -> float:
        return abs(self.det - self.kappa ** 3) / self.kappa ** 3

    def j_unitarity_residual(self, j: InvolutionJ = InvolutionJ()) -> float:
        """max |T J T^+(lam)^T - kappa^2 J|"""
        jm = j.matrix
        lhs = self.entries @ jm @ self.entries_conj.conj().T
        return float(np.max(np.abs(lhs - self.kappa ** 2 * jm)))


def transition_matrix(p: Potential, lam: complex, row: Callable[[complex], np.ndarray] = None) -> TransitionMatrix:
    """T(lam) from row 0 at lam, lam zeta_1 and lam zeta_2 (and the same at conj(lam))"""
    lam = complex(lam)
    if lam == 0:
        raise DomainError('the transition matrix is defined for lam != 0')
    row = row or partial(transition_row, p)

    rows = {}

    def cached(mu: complex) -> np.ndarray:
        key = (round(mu.real, 14), round(mu.imag, 14))
        if key not in rows:
            rows[key] = row(mu)
        return rows[key]

    def assemble(mu: complex) -> np.ndarray:
        return _from_rows(cached(mu), cached(mu * ZETA[1]), cached(mu * ZETA[2]))

    return TransitionMatrix(lam, assemble(lam), assemble(lam.conjugate()), p.kappa)


def dual_matrix(t: TransitionMatrix) -> TransitionMatrix:
    scale = t.kappa ** -2
    return TransitionMatrix(
        lam=t.lam,
        entries=scale * J_MATRIX @ t.entries_conj.conj().T @ J_MATRIX,
        entries_conj=scale * J_MATRIX @ t.entries.conj().T @ J_MATRIX,
        kappa=1 / t.kappa,
        dual=not t.dual,
    )


def product_residual(t: TransitionMatrix, t_dual: TransitionMatrix) -> float:
    """max |T~ T - I|"""
    return float(np.max(np.abs(t_dual.entries @ t.entries - np.eye(3))))


@dataclass
class Coefficients:
    """r0, s1, s2 at lam, their ^+ values and the matrices R, S (and R^+, S^+)"""
    lam: complex
    kappa: float
    r0: complex
    s1: complex
    s2: complex
    r0_plus: complex
    s1_plus: complex
    s2_plus: complex
    R: np.ndarray
    S: np.ndarray
    R_plus: np.ndarray
    S_plus: np.ndarray


def _normalized_rows(entries: np.ndarray, lam: complex) -> Tuple[np.ndarray, np.ndarray]:
    diagonal = np.diag(entries)
    for k, t in enumerate(diagonal):
        if abs(t) < config.zero_tol:
            raise BoundStateCandidate(lam * ZETA[k], abs(t))

    R = np.diag(1 / diagonal)
    S = R @ entries - np.eye(3)
    return R, S


def coefficients(t: TransitionMatrix) -> Coefficients:
    R, S = _normalized_rows(t.entries, t.lam)
    R_conj, S_conj = _normalized_rows(t.entries_conj, t.lam.conjugate())

    return Coefficients(
        lam=t.lam,
        kappa=t.kappa,
        r0=complex(R[0, 0]),
        s1=complex(S[0, 1]),
        s2=complex(S[0, 2]),
        r0_plus=complex(np.conj(R_conj[0, 0])),
        s1_plus=complex(np.conj(S_conj[0, 1])),
        s2_plus=complex(np.conj(S_conj[0, 2])),
        R=R,
        S=S,
        R_plus=R_conj.conj(),
        S_plus=S_conj.conj(),
    )


def unitarity_residual(c: Coefficients) -> float:
    """
    |kappa^2 r0 r0^+ - 1 - zeta2 s1 s2^+ - zeta1 s2 s1^+|, the (0, 0) entry of
    the J-unitarity law. For dual coefficients kappa is already inverted.
    """
    lhs = c.kappa ** 2 * c.r0 * c.r0_plus
    rhs = 1 + ZETA[2] * c.s1 * c.s2_plus + ZETA[1] * c.s2 * c.s1_plus
    return abs(lhs - rhs)


def printed_unitarity_residual(c: Coefficients) -> float:
    """Same law with zeta1 and zeta2 exchanged; does not hold in general"""
    lhs = c.kappa ** 2 * c.r0 * c.r0_plus
    rhs = 1 + ZETA[1] * c.s1 * c.s2_plus + ZETA[2] * c.s2 * c.s1_plus
    return abs(lhs - rhs)


@dataclass(frozen=True)
class ReciprocityReport:
    symmetric: float
    printed: float


def reciprocity_check(direct: Coefficients, dual: Coefficients) -> ReciprocityReport:
    symmetric = (
        ZETA[2] * direct.s1 * direct.s2_plus + ZETA[1] * direct.s2 * direct.s1_plus
        - ZETA[2] * dual.s1 * dual.s2_plus - ZETA[1] * dual.s2 * dual.s1_plus
    )
    printed = (
        ZETA[1] * direct.s1 * direct.s2_plus + ZETA[2] * direct.s2 * direct.s1_plus
        - ZETA[1] * dual.s1 * direct.s2_plus - ZETA[2] * dual.s2 * direct.s1_plus
    )
    return ReciprocityReport(abs(symmetric), abs(printed))


def energetic_balance_check(c: Coefficients, j: InvolutionJ = InvolutionJ()) -> float:
    """max |(I + S) J (I + S^+)^T - kappa^2 R J (R^+)^T|"""
    jm = j.matrix
    eye = np.eye(3)
    lhs = (eye + c.S) @ jm @ (eye + c.S_plus).T
    rhs = c.kappa ** 2 * c.R @ jm @ c.R_plus.T
    return float(np.max(np.abs(lhs - rhs)))


def reflection_residual(p: Potential, lam: complex) -> float:
    """T of m(-x) at lam against the dual matrix of m at -lam"""
    mirrored = transition_matrix(p.reflected(), lam)
    dual = dual_matrix(transition_matrix(p, -complex(lam)))
    return float(np.max(np.abs(mirrored.entries - dual.entries)))


@lru_cache(maxsize=32)
def step_transition_row(kappa) -> Tuple[sympy.Expr, sympy.Expr, sympy.Expr]:
    """Exact row 0 for the pure step: sum_l t_0l zeta_l^j = kappa^j, j = 0, 1, 2"""
    kappa = sympy.nsimplify(kappa)
    roots = [sympy.Integer(1), (-1 + sympy.sqrt(3) * sympy.I) / 2, (-1 - sympy.sqrt(3) * sympy.I) / 2]
    vandermonde = sympy.Matrix(3, 3, lambda j, l: roots[l] ** j)
    row = vandermonde.LUsolve(sympy.Matrix([1, kappa, kappa ** 2]))

    return tuple(sympy.nsimplify(sympy.expand(sympy.simplify(e))) for e in row)


def step_transition_matrix(kappa: float) -> np.ndarray:
    row = np.array([complex(e) for e in step_transition_row(kappa)])
    return _from_rows(row, row, row)


@dataclass(frozen=True)
class BoundState:
    lam: complex
    parameter: float            # mu > 0 on lam = mu zeta2, nu < 0 on lam = nu zeta1
    modulus: float
    multiplicity: float


@dataclass
class BoundStates:
    mu: List[BoundState] = field(default_factory=list)
    nu: List[BoundState] = field(default_factory=list)
    off_ray_min: float = float('nan')
    radius: float = 0.0

    @property
    def empty(self) -> bool:
        return not self.mu and not self.nu


def winding_number(f: Callable[[complex], complex], center: complex, radius: float, n_points: int = 128) -> float:
    """Zeros minus poles of f inside the circle, by the argument principle"""
    theta = np.linspace(0.0, 2 * np.pi, n_points + 1)
    values = np.array([f(center + radius * np.exp(1j * t)) for t in theta])
    phase = np.unwrap(np.angle(values))
    return float((phase[-1] - phase[0]) / (2 * np.pi))


def _scan_ray(t00, direction: complex, params: np.ndarray) -> List[BoundState]:
    modulus = np.array([abs(t00(t * direction)) for t in params])
    spacing = abs(params[1] - params[0])
    found = []

    for i in range(1, len(params) - 1):
        if not (modulus[i] <= modulus[i - 1] and modulus[i] <= modulus[i + 1]):
            continue
        # a sampled zero sits below a third of its larger neighbour; flat noise does not
        if modulus[i] > 0.5 * max(modulus[i - 1], modulus[i + 1]):
            continue

        lo, hi = sorted((params[i - 1], params[i + 1]))
        res = optimize.minimize_scalar(
            lambda t: abs(t00(t * direction)),
            bounds=(lo, hi),
            method='bounded',
            options={'xatol': 1e-13},
        )
        lam = complex(res.x * direction)
        # the bracketing stops near sqrt(eps) |lam|; finish with complex secant steps
        try:
            lam = complex(optimize.newton(t00, lam, tol=1e-14, maxiter=50))
        except (RuntimeError, ArithmeticError):
            pass
        value = abs(t00(lam))
        off_ray = abs((lam / direction).imag) > 1e-6 * abs(lam)
        if value >= config.zero_tol or off_ray or abs(lam - res.x * direction) > spacing:
            continue

        multiplicity = winding_number(t00, lam, min(spacing / 2, abs(lam) / 4))
        logger.info('bound state at lam = %s, multiplicity %.3f', lam, multiplicity)
        found.append(BoundState(lam, float((lam / direction).real), float(value), multiplicity))

    return found


def find_bound_states(
    p: Potential,
    radius: float,
    t00: Callable[[complex], complex] = None,
    samples: int = None,
    off_ray: bool = True,
) -> BoundStates:
    """
    Zeros of t00 on lam = mu zeta2 (mu > 0) and lam = nu zeta1 (nu < 0) up to
    |lam| = radius, polished by bounded minimization of |t00|.
    """
    if radius <= 0:
        raise DomainError(f'search radius must be positive, got {radius}')
    samples = samples or config.bound_state_samples
    t00 = t00 or (lambda lam: transition_row(p, lam)[0])

    params = np.linspace(radius / samples, radius, samples)
    result = BoundStates(
        mu=_scan_ray(t00, ZETA[2], params),
        nu=_scan_ray(t00, ZETA[1], -params),
        radius=radius,
    )

    if off_ray:
        radii = np.linspace(radius / 6, radius, 6)
        # half-step offsets keep the grid away from the twelve rays
        angles = (np.arange(24) + 0.5) * (2 * np.pi / 24)
        result.off_ray_min = float(min(abs(t00(r * np.exp(1j * a))) for r in radii for a in angles))

    return result


COEFFICIENTS = ('r0', 's1', 's2')


@dataclass
class ScatteringData:
    """
    Coefficients sampled on the rotated rays: direct values at lam = i tau zeta_k
    and dual values at lam = -i tau zeta_k, row k of each (3, N) array. Only the
    limits m+ and m- of the string travel with the data.
    """
    tau: np.ndarray
    weights: np.ndarray
    tau_max: float
    direct: Dict[str, np.ndarray]
    dual: Dict[str, np.ndarray]
    mu: np.ndarray
    nu: np.ndarray
    m_plus: float
    m_minus: float
    c: float
    _interpolants: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.m_plus <= 0 or self.m_minus <= 0:
            raise DomainError(f'limits must be positive, got m+ = {self.m_plus}, m- = {self.m_minus}')

    @property
    def n_plus(self) -> float:
        return self.m_plus ** (1 / 3)

    @property
    def n_minus(self) -> float:
        return self.m_minus ** (1 / 3)

    @property
    def kappa(self) -> float:
        return self.n_minus / self.n_plus

    @property
    def step_coefficients(self) -> Tuple[complex, complex]:
        """s1, s2 of the pure step with this kappa, the lam -> 0 limits of the data"""
        t00, t01, t02 = (complex(e) for e in step_transition_row(self.kappa))
        return t01 / t00, t02 / t00

    @property
    def mesh(self) -> TauMesh:
        return TauMesh(self.tau, self.weights, self.tau_max)

    def locate(self, lam: complex, dual: bool = False) -> Tuple[int, float]:
        """(k, tau) with lam = +-i tau zeta_k"""
        sign = -1 if dual else 1
        for k in range(3):
            tau = complex(lam) / (sign * 1j * ZETA[k])
            if tau.real > 0 and abs(tau.imag) <= 1e-9 * max(1.0, tau.real):
                return k, tau.real

        raise DomainError(f'lam = {lam} is not on a sampled ray')

    def coefficient(self, name: str, lam: complex, dual: bool = False) -> complex:
        if name not in COEFFICIENTS:
            raise DomainError(f'unknown coefficient {name!r}')
        k, tau = self.locate(lam, dual)

        lo, hi = self.tau[0], self.tau[-1]
        if not lo - 1e-12 <= tau <= hi + 1e-12:
            raise DomainError(f'tau = {tau:.6g} lies outside the sampled range [{lo:.6g}, {hi:.6g}]')

        key = (name, k, dual)
        if key not in self._interpolants:
            values = (self.dual if dual else self.direct)[name][k]
            self._interpolants[key] = (
                PchipInterpolator(self.tau, values.real, extrapolate=False),
                PchipInterpolator(self.tau, values.imag, extrapolate=False),
            )
        re, im = self._interpolants[key]
        tau = min(max(tau, lo), hi)

        return complex(float(re(tau)), float(im(tau)))

    def reflected(self) -> 'ScatteringData':
        """Data of m(-x): its direct samples are the dual samples of m"""
        return ScatteringData(
            tau=self.tau,
            weights=self.weights,
            tau_max=self.tau_max,
            direct=self.dual,
            dual=self.direct,
            mu=-np.asarray(self.nu, dtype=float),
            nu=-np.asarray(self.mu, dtype=float),
            m_plus=self.m_minus,
            m_minus=self.m_plus,
            c=self.c,
        )


def damping_constant(p: Potential) -> float:
    return max(sigma(p, 0.0, '+') + sigma(p, 0.0, '-'), config.q_floor)


def compute_scattering_data(
    p: Potential,
    mesh: TauMesh = None,
    mapper: Callable = map,
    bound_radius: Optional[float] = None,
) -> ScatteringData:
    """
    One row-0 solve per node of each ray i tau zeta_j gives both coefficient
    sets: the dual entries at -i tau zeta_k are conjugates of direct rows at
    i tau zeta_{-k}, i tau zeta_{2-k} and i tau zeta_{1-k}.
    """
    mesh = mesh or tau_mesh()
    n = len(mesh)
    points = [1j * t * ZETA[j] for j in range(3) for t in mesh.nodes]
    rows = np.array(list(mapper(partial(transition_row, p), points))).reshape(3, n, 3)

    small = np.abs(rows[:, :, 0]) < config.zero_tol
    if small.any():
        j, i = np.argwhere(small)[0]
        raise BoundStateCandidate(1j * mesh.nodes[i] * ZETA[j], abs(rows[j, i, 0]))

    direct = {
        'r0': 1 / rows[:, :, 0],
        's1': rows[:, :, 1] / rows[:, :, 0],
        's2': rows[:, :, 2] / rows[:, :, 0],
    }

    scale = p.kappa ** -2
    t00 = np.array([np.conj(rows[(-k) % 3, :, 0]) for k in range(3)]) * scale
    t01 = np.array([ZETA[1] * np.conj(rows[(2 - k) % 3, :, 1]) for k in range(3)]) * scale
    t02 = np.array([ZETA[2] * np.conj(rows[(1 - k) % 3, :, 2]) for k in range(3)]) * scale
    dual = {'r0': 1 / t00, 's1': t01 / t00, 's2': t02 / t00}

    radius = bound_radius if bound_radius is not None else min(p.disk.radius_plus, p.disk.radius_minus)
    states = find_bound_states(p, radius, off_ray=False)
    logger.debug('%d + %d bound states within |lam| <= %.3g', len(states.mu), len(states.nu), radius)

    return ScatteringData(
        tau=mesh.nodes,
        weights=mesh.weights,
        tau_max=mesh.tau_max,
        direct=direct,
        dual=dual,
        mu=np.array([s.parameter for s in states.mu]),
        nu=np.array([s.parameter for s in states.nu]),
        m_plus=p.m_plus,
        m_minus=p.m_minus,
        c=damping_constant(p),
    )
