"""
Generalized trigonometric functions of y''' = y,

    s_k(z) = 1/3 * sum_j zeta_j^(-k) exp(zeta_j z),   k = 0, 1, 2,

with s_k' = s_{k-1 mod 3} and s_k^(j)(0) = delta_kj.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import integrate

from config import config
from .errors import DomainError, QuadratureError
from .geometry import ZETA


logger = logging.getLogger(__name__)

ZETA_ARRAY = np.array(ZETA)
# row k holds zeta_j^(-k)
_WEIGHTS = np.array([[z ** (-k) for z in ZETA] for k in range(3)]) / 3

Scalar = Union[complex, np.ndarray]


@dataclass(frozen=True)
class TrigTriple:
    s0: Scalar
    s1: Scalar
    s2: Scalar

    def main_identity_residual(self) -> Scalar:
        """|s0^3 + s1^3 + s2^3 - 3 s0 s1 s2 - 1|"""
        s0, s1, s2 = self.s0, self.s1, self.s2
        return np.abs(s0 ** 3 + s1 ** 3 + s2 ** 3 - 3 * s0 * s1 * s2 - 1)

    def euler(self, k: int) -> Scalar:
        """s0 + zeta_k s1 + zeta_k^2 s2, equal to exp(zeta_k z)"""
        zk = ZETA[k]
        return self.s0 + zk * self.s1 + zk ** 2 * self.s2


def _exponentials(z: Scalar) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    exponents = np.multiply.outer(ZETA_ARRAY, z)
    if exponents.size and np.max(np.abs(exponents.real)) > config.overflow_guard:
        raise DomainError(
            f'|Re(zeta_j z)| exceeds the overflow guard {config.overflow_guard}'
        )

    return np.exp(exponents)


def s_eval(k: int, z: Scalar) -> Scalar:
    if k not in (0, 1, 2):
        raise DomainError(f'trig index must be 0, 1 or 2, got {k!r}')

    values = np.tensordot(_WEIGHTS[k], _exponentials(z), axes=1)
    return values[()] if np.ndim(values) == 0 else values


def s_triple(z: Scalar) -> TrigTriple:
    values = np.tensordot(_WEIGHTS, _exponentials(z), axes=1)
    if np.ndim(z) == 0:
        return TrigTriple(complex(values[0]), complex(values[1]), complex(values[2]))

    return TrigTriple(values[0], values[1], values[2])


def complex_quad(f: Callable[[float], complex], a: float, b: float, **kwargs) -> complex:
    options = dict(limit=200, epsabs=1e-13, epsrel=1e-12)
    options.update(kwargs)
    re = integrate.quad(lambda t: f(t).real, a, b, **options)[0]
    im = integrate.quad(lambda t: f(t).imag, a, b, **options)[0]

    return complex(re, im)


def cauchy_solution(
    y0: complex,
    y1: complex,
    y2: complex,
    lam: complex,
    x: float,
    f: Callable[[float], complex] = None,
) -> complex:
    """
    Solution of  i y''' = lam^3 y - f,  y(0) = y0, y'(0) = y1, y''(0) = y2,
    written through s_k(i lam x):

        y = y0 s0 + y1 s1/(i lam) + y2 s2/(i lam)^2
            + i * int_0^x s2(i lam (x - t)) / (i lam)^2 f(t) dt
    """
    if lam == 0:
        raise DomainError('cauchy_solution needs lam != 0')

    w = 1j * lam
    triple = s_triple(w * x)
    y = y0 * triple.s0 + y1 * triple.s1 / w + y2 * triple.s2 / w ** 2

    if f is None or x == 0:
        return complex(y)

    try:
        forced = complex_quad(lambda t: s_eval(2, w * (x - t)) * f(t), 0.0, x)
    except (ValueError, ArithmeticError) as e:
        raise QuadratureError(f'forcing integral failed: {e}') from e

    return complex(y + 1j * forced / w ** 2)
