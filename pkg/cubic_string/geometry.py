"""
Cube roots of unity, the twelve rays through the origin and the sector
decomposition of the spectral plane.

Angles are measured in degrees on [0, 360). Lines L_zk split the plane into
the six sectors S_p = {p*60 < arg < (p+1)*60}; S_p(i) is S_p rotated by 90
degrees. The decay sectors are defined by inequality,

    lam in Omega_k   <=>   |Re(lam*zeta_k)| < sqrt(3) * Im(lam*zeta_k),

and Omega_k^- = -Omega_k. Unions of S_p(i) are not used to define them: the
commonly quoted composition for Omega_1 and Omega_2 overlaps.
"""
import cmath
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from config import config
from .errors import DomainError


SQRT3 = math.sqrt(3.0)

ZETA = (
    complex(1.0, 0.0),
    complex(-0.5, SQRT3 / 2),
    complex(-0.5, -SQRT3 / 2),
)


class SectorId(Enum):
    ORIGIN = 'origin'

    S0 = 'S0'
    S1 = 'S1'
    S2 = 'S2'
    S3 = 'S3'
    S4 = 'S4'
    S5 = 'S5'

    S0_I = 'S0(i)'
    S1_I = 'S1(i)'
    S2_I = 'S2(i)'
    S3_I = 'S3(i)'
    S4_I = 'S4(i)'
    S5_I = 'S5(i)'

    OMEGA0 = 'Omega0'
    OMEGA1 = 'Omega1'
    OMEGA2 = 'Omega2'
    OMEGA0_MINUS = 'Omega0-'
    OMEGA1_MINUS = 'Omega1-'
    OMEGA2_MINUS = 'Omega2-'

    # l_zk: outgoing along zeta_k; lhat_zk: incoming; il_zk, ilhat_zk: rotated by i
    L0 = 'l_z0'
    L1 = 'l_z1'
    L2 = 'l_z2'
    LHAT0 = 'lhat_z0'
    LHAT1 = 'lhat_z1'
    LHAT2 = 'lhat_z2'
    IL0 = 'il_z0'
    IL1 = 'il_z1'
    IL2 = 'il_z2'
    ILHAT0 = 'ilhat_z0'
    ILHAT1 = 'ilhat_z1'
    ILHAT2 = 'ilhat_z2'

    @property
    def is_ray(self) -> bool:
        return self in RAY_DIRECTIONS


RAY_DIRECTIONS = {
    SectorId.L0: ZETA[0],
    SectorId.L1: ZETA[1],
    SectorId.L2: ZETA[2],
    SectorId.LHAT0: -ZETA[0],
    SectorId.LHAT1: -ZETA[1],
    SectorId.LHAT2: -ZETA[2],
    SectorId.IL0: 1j * ZETA[0],
    SectorId.IL1: 1j * ZETA[1],
    SectorId.IL2: 1j * ZETA[2],
    SectorId.ILHAT0: -1j * ZETA[0],
    SectorId.ILHAT1: -1j * ZETA[1],
    SectorId.ILHAT2: -1j * ZETA[2],
}

_S = (SectorId.S0, SectorId.S1, SectorId.S2, SectorId.S3, SectorId.S4, SectorId.S5)
_S_I = (SectorId.S0_I, SectorId.S1_I, SectorId.S2_I, SectorId.S3_I, SectorId.S4_I, SectorId.S5_I)
_OMEGA = (SectorId.OMEGA0, SectorId.OMEGA1, SectorId.OMEGA2)
_OMEGA_MINUS = (SectorId.OMEGA0_MINUS, SectorId.OMEGA1_MINUS, SectorId.OMEGA2_MINUS)

_REFLECTION = {
    SectorId.L0: SectorId.LHAT0, SectorId.L1: SectorId.LHAT1, SectorId.L2: SectorId.LHAT2,
    SectorId.IL0: SectorId.ILHAT0, SectorId.IL1: SectorId.ILHAT1, SectorId.IL2: SectorId.ILHAT2,
}
_REFLECTION.update({v: k for k, v in list(_REFLECTION.items())})
for _k in range(3):
    _REFLECTION[_OMEGA[_k]] = _OMEGA_MINUS[_k]
    _REFLECTION[_OMEGA_MINUS[_k]] = _OMEGA[_k]
for _p in range(6):
    _REFLECTION[_S[_p]] = _S[(_p + 3) % 6]
    _REFLECTION[_S_I[_p]] = _S_I[(_p + 3) % 6]
_REFLECTION[SectorId.ORIGIN] = SectorId.ORIGIN


@dataclass(frozen=True)
class SectorLocation:
    """
    Result of `classify`. `ray` is set for points on one of the twelve rays;
    otherwise `sector` and `rotated` name the S_p and S_p(i) containing the
    point. `omega` / `omega_minus` name the decay sectors, when any contains it.
    """
    tag: SectorId
    ray: Optional[SectorId] = None
    sector: Optional[SectorId] = None
    rotated: Optional[SectorId] = None
    omega: Optional[SectorId] = None
    omega_minus: Optional[SectorId] = None

    def reflected(self) -> 'SectorLocation':
        def flip(s):
            return None if s is None else _REFLECTION[s]

        return SectorLocation(
            tag=flip(self.tag),
            ray=flip(self.ray),
            sector=flip(self.sector),
            rotated=flip(self.rotated),
            omega=flip(self.omega_minus),
            omega_minus=flip(self.omega),
        )


def zeta(k: int) -> complex:
    if k not in (0, 1, 2):
        raise DomainError(f'root index must be 0, 1 or 2, got {k!r}')

    return ZETA[k]


def in_omega(lam: complex, k: int, minus: bool = False) -> bool:
    """Strict membership in Omega_k (or Omega_k^-); bounding rays excluded"""
    w = complex(lam) * zeta(k)
    if minus:
        w = -w

    return abs(w.real) < SQRT3 * w.imag


def _angle(lam: complex) -> float:
    return math.degrees(cmath.phase(lam)) % 360.0


def ray_of(lam: complex) -> Optional[SectorId]:
    """Ray containing lam (within the angular tolerance), None off the rays"""
    if lam == 0:
        return None

    angle = math.radians(_angle(lam))
    for ray, direction in RAY_DIRECTIONS.items():
        delta = abs((angle - cmath.phase(direction) + math.pi) % (2 * math.pi) - math.pi)
        if delta <= config.angular_tol:
            return ray

    return None


def classify(lam: complex) -> SectorLocation:
    lam = complex(lam)
    if lam == 0:
        return SectorLocation(tag=SectorId.ORIGIN)

    omega = next((_OMEGA[k] for k in range(3) if in_omega(lam, k)), None)
    omega_minus = next((_OMEGA_MINUS[k] for k in range(3) if in_omega(lam, k, minus=True)), None)

    ray = ray_of(lam)
    if ray is not None:
        return SectorLocation(tag=ray, ray=ray, omega=omega, omega_minus=omega_minus)

    angle = _angle(lam)
    sector = _S[int(angle // 60) % 6]
    rotated = _S_I[int(((angle - 90.0) % 360.0) // 60) % 6]

    return SectorLocation(
        tag=rotated,
        sector=sector,
        rotated=rotated,
        omega=omega,
        omega_minus=omega_minus,
    )


def ray_points(ray: SectorId, tau: np.ndarray) -> np.ndarray:
    return np.asarray(tau) * RAY_DIRECTIONS[ray]
