"""
Step-like coefficient m(x) of the cubic string i y''' = m(x) lam^3 y.

m tends to m_plus at +inf and to m_minus at -inf. Perturbations are relative
to the limit on the side of x, so for a bump list

    m(x) = m_side(x) * (1 + sum_b A_b exp(-(x - c_b)^2 / (2 w_b^2))).

Sampled tables give m directly inside their range and the limits outside it.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import ClassVar, List, Tuple, Union

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator

from config import config
from .errors import DomainError, QuadratureError


logger = logging.getLogger(__name__)

SIDES = ('+', '-')


def _check_side(side: str):
    if side not in SIDES:
        raise DomainError(f"side must be '+' or '-', got {side!r}")


@dataclass(frozen=True)
class NoPerturbation:
    kind: ClassVar[str] = 'none'

    def relative(self, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(x, dtype=float)

    def edge(self, side: str) -> float:
        return 0.0

    def envelope_rate(self, side: str, m_limit: float = 1.0) -> float:
        return math.inf

    def reflected(self) -> 'NoPerturbation':
        return self

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class GaussianBumps:
    kind: ClassVar[str] = 'gaussian'
    # (center, width, amplitude)
    bumps: Tuple[Tuple[float, float, float], ...] = ()

    def __post_init__(self):
        for center, width, amplitude in self.bumps:
            if width <= 0:
                raise DomainError(f'bump width must be positive, got {width}')

    def relative(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for center, width, amplitude in self.bumps:
            total = total + amplitude * np.exp(-(x - center) ** 2 / (2 * width ** 2))
        return total

    def edge(self, side: str) -> float:
        sign = 1.0 if side == '+' else -1.0
        reach = 0.0
        for center, width, amplitude in self.bumps:
            if abs(amplitude) <= config.envelope_floor:
                continue
            spread = width * math.sqrt(2 * math.log(abs(amplitude) / config.envelope_floor))
            reach = max(reach, sign * center + spread)
        return reach

    def envelope_rate(self, side: str, m_limit: float = 1.0) -> float:
        return math.inf

    def reflected(self) -> 'GaussianBumps':
        return GaussianBumps(tuple((-c, w, a) for c, w, a in self.bumps))

    def params(self) -> dict:
        return {'bumps': [list(b) for b in self.bumps]}


@dataclass(frozen=True)
class ExponentialTail:
    kind: ClassVar[str] = 'exponential'
    amplitude: float = 0.0
    rate: float = 1.0
    side: str = '+'  # '+', '-' or 'both'

    def __post_init__(self):
        if self.rate <= 0:
            raise DomainError(f'tail rate must be positive, got {self.rate}')
        if self.side not in ('+', '-', 'both'):
            raise DomainError(f'tail side must be +, - or both, got {self.side!r}')

    def _active(self, side: str) -> bool:
        return self.side in (side, 'both')

    def relative(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        mask = np.zeros_like(x, dtype=bool)
        if self._active('+'):
            mask |= x >= 0
        if self._active('-'):
            mask |= x < 0
        return np.where(mask, self.amplitude * np.exp(-self.rate * np.abs(x)), 0.0)

    def edge(self, side: str) -> float:
        if not self._active(side) or abs(self.amplitude) <= config.envelope_floor:
            return 0.0
        return math.log(abs(self.amplitude) / config.envelope_floor) / self.rate

    def envelope_rate(self, side: str, m_limit: float = 1.0) -> float:
        return self.rate if self._active(side) else math.inf

    def reflected(self) -> 'ExponentialTail':
        side = {'+': '-', '-': '+', 'both': 'both'}[self.side]
        return ExponentialTail(self.amplitude, self.rate, side)

    def params(self) -> dict:
        return {'amplitude': self.amplitude, 'rate': self.rate, 'side': self.side}


@dataclass(frozen=True)
class SampledTable:
    """m given by samples; 'linear' or 'pchip' between them, limits outside"""
    kind: ClassVar[str] = 'table'
    x: Tuple[float, ...] = ()
    m: Tuple[float, ...] = ()
    rule: str = 'pchip'

    def __post_init__(self):
        if len(self.x) != len(self.m) or len(self.x) < 2:
            raise DomainError('a sampled table needs two or more (x, m) pairs of equal length')
        if np.any(np.diff(self.x) <= 0):
            raise DomainError('table abscissae must be strictly increasing')
        if self.rule not in ('linear', 'pchip'):
            raise DomainError(f"table rule must be 'linear' or 'pchip', got {self.rule!r}")

    def values(self, x: np.ndarray) -> np.ndarray:
        if self.rule == 'linear':
            return np.interp(x, self.x, self.m)
        return PchipInterpolator(self.x, self.m, extrapolate=False)(x)

    def inside(self, x: np.ndarray) -> np.ndarray:
        return (x >= self.x[0]) & (x <= self.x[-1])

    def edge(self, side: str) -> float:
        return max(0.0, self.x[-1]) if side == '+' else max(0.0, -self.x[0])

    def envelope_rate(self, side: str, m_limit: float = 1.0) -> float:
        """Decay rate of |m/m_limit - 1| fitted on the samples of one side"""
        x = np.asarray(self.x)
        q = np.abs(np.asarray(self.m) / m_limit - 1)
        mask = (x > 0) if side == '+' else (x < 0)
        mask &= q > config.envelope_floor
        if mask.sum() < 2:
            return math.inf

        slope = np.polyfit(np.abs(x[mask]), np.log(q[mask]), 1)[0]
        return max(-slope, 0.0)

    def reflected(self) -> 'SampledTable':
        return SampledTable(tuple(-v for v in reversed(self.x)), tuple(reversed(self.m)), self.rule)

    def params(self) -> dict:
        return {'x': list(self.x), 'm': list(self.m), 'rule': self.rule}


Perturbation = Union[NoPerturbation, GaussianBumps, ExponentialTail, SampledTable]

PERTURBATIONS = {cls.kind: cls for cls in (NoPerturbation, GaussianBumps, ExponentialTail, SampledTable)}


@dataclass(frozen=True)
class ValidityDisk:
    radius_plus: float
    radius_minus: float


@dataclass(frozen=True)
class Potential:
    m_plus: float
    m_minus: float
    a: float = 1.0
    perturbation: Perturbation = field(default_factory=NoPerturbation)

    def __post_init__(self):
        if self.m_plus <= 0 or self.m_minus <= 0:
            raise DomainError(f'limits must be positive, got m+={self.m_plus}, m-={self.m_minus}')
        if self.a <= 0:
            raise DomainError(f'decay rate a must be positive, got {self.a}')

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
    def disk(self) -> ValidityDisk:
        return ValidityDisk(self.a / (2 * self.n_plus), self.a / (2 * self.n_minus))

    def limit(self, side: str) -> float:
        _check_side(side)
        return self.m_plus if side == '+' else self.m_minus

    def n(self, side: str) -> float:
        return self.limit(side) ** (1 / 3)

    def edge(self, side: str) -> float:
        """|x| beyond which m equals its limit up to the envelope floor"""
        _check_side(side)
        return self.perturbation.edge(side)

    def values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        base = np.where(x >= 0, self.m_plus, self.m_minus)
        if isinstance(self.perturbation, SampledTable):
            table = self.perturbation
            inside = table.inside(x)
            return np.where(inside, table.values(np.where(inside, x, table.x[0])), base)

        return base * (1 + self.perturbation.relative(x))

    def deviation(self, x, side: str) -> np.ndarray:
        """m(x)/m_side - 1"""
        return self.values(x) / self.limit(side) - 1

    def reflected(self) -> 'Potential':
        """m(-x)"""
        return Potential(self.m_minus, self.m_plus, self.a, self.perturbation.reflected())

    @property
    def is_pure_step(self) -> bool:
        return isinstance(self.perturbation, NoPerturbation)


def m_at(p: Potential, x: float) -> float:
    return float(p.values(x))


def _quad(f, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0

    points = [0.0] if lo < 0.0 < hi else None
    try:
        value, error = integrate.quad(f, lo, hi, points=points, limit=400, epsabs=1e-14, epsrel=1e-12)
    except (ValueError, ArithmeticError) as e:
        raise QuadratureError(str(e)) from e
    if not np.isfinite(value):
        raise QuadratureError(f'non-finite integral on [{lo}, {hi}]')

    return value


def sigma(p: Potential, x: float, side: str = '+') -> float:
    """sigma_+(x) = int_x^inf |m/m_+ - 1|, sigma_-(x) = int_-inf^x |m/m_- - 1|"""
    _check_side(side)
    f = lambda t: abs(float(p.deviation(t, side)))

    if side == '+':
        return _quad(f, x, max(p.edge('+'), x))
    return _quad(f, min(-p.edge('-'), x), x)


def M_profile(p: Potential, x: float, side: str = '+') -> float:
    """
    M_+(x) = int_x^inf (x - t)^2 / 2 (m/m_+ - 1) dt, and the mirror
    M_-(x) = int_-inf^x (x - t)^2 / 2 (m/m_- - 1) dt.
    M_+''' = -(m/m_+ - 1), M_-''' = +(m/m_- - 1).
    """
    _check_side(side)
    f = lambda t: (x - t) ** 2 / 2 * float(p.deviation(t, side))

    if side == '+':
        return _quad(f, x, max(p.edge('+'), x))
    return _quad(f, min(-p.edge('-'), x), x)


@dataclass
class ValidationReport:
    positive: bool
    m_min: float
    weighted_norm: dict
    envelope_rate: dict
    disk: ValidityDisk
    truncation: dict
    failures: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _weighted_norm(p: Potential, side: str) -> float:
    sign = 1.0 if side == '+' else -1.0
    f = lambda s: float(p.deviation(sign * s, side)) ** 2 * math.exp(2 * p.a * s)
    return _quad(f, 0.0, p.edge(side))


def _positivity(p: Potential) -> Tuple[float, float]:
    lo, hi = -p.edge('-') - 1.0, p.edge('+') + 1.0
    xs = np.linspace(lo, hi, max(2, int((hi - lo) * 1000)) + 1)
    values = p.values(xs)
    i = int(np.argmin(values))
    # refine next to the sampled minimum
    step = xs[1] - xs[0]
    res = optimize.minimize_scalar(
        lambda t: float(p.values(t)),
        bounds=(max(lo, xs[i] - step), min(hi, xs[i] + step)),
        method='bounded',
        options={'xatol': 1e-12},
    )
    if res.success and res.fun < values[i]:
        return float(res.fun), float(res.x)
    return float(values[i]), float(xs[i])


def validate(p: Potential) -> ValidationReport:
    m_min, x_min = _positivity(p)

    norms, rates, truncation = {}, {}, {}
    failures = []
    for side in SIDES:
        rate = p.perturbation.envelope_rate(side, p.limit(side))
        rates[side] = rate
        norms[side] = _weighted_norm(p, side)
        truncation[side] = {'edge': p.edge(side), 'envelope_floor': config.envelope_floor}
        if rate <= p.a:
            failures.append(
                f'weighted L2 norm on side {side} diverges: envelope rate {rate:.4g} <= a = {p.a}'
            )

    if m_min <= 0:
        failures.append(f'm is not positive: min {m_min:.6g} at x = {x_min:.6g}')

    report = ValidationReport(
        positive=m_min > 0,
        m_min=m_min,
        weighted_norm=norms,
        envelope_rate=rates,
        disk=p.disk,
        truncation=truncation,
        failures=failures,
    )
    for failure in failures:
        logger.warning(failure)

    return report
