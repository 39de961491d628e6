import logging
import math
import time
from dataclasses import asdict, dataclass, replace
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np
from scipy import integrate

from config import config
from cubic_string.cauchy import DampingQ, RayDensity, boundary_value, principal_value, q_eval
from cubic_string.errors import CubicStringError
from cubic_string.geometry import RAY_DIRECTIONS, SectorId, ZETA, classify, in_omega, ray_of
from cubic_string.inverse import ReconstructedField, assemble_direct, reconstruct_F, recover_m, solve_system
from cubic_string.jost import jost_grid, kernel_bound_check, solve_v
from cubic_string.panels import tau_mesh
from cubic_string.potential import GaussianBumps, Potential, validate
from cubic_string.scattering import (
    InvolutionJ, coefficients, compute_scattering_data, dual_matrix, energetic_balance_check,
    find_bound_states, pair_wronskian_identity_check, printed_unitarity_residual, product_residual,
    reciprocity_check, reflection_residual, step_transition_matrix, transition_matrix, transition_row,
    unitarity_residual, wronskian3, wronskian_constant,
)
from cubic_string.trig3 import s_eval, s_triple
from sweep import pmap


logger = logging.getLogger(__name__)

SUITES = ('geometry', 'trig3', 'potential', 'jost', 'scattering', 'cauchy', 'inverse')


@dataclass
class Check:
    suite: str
    name: str
    residual: float
    tolerance: float
    # informational entries are reported but never fail the run
    informational: bool = False
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        if self.error is not None:
            return False
        if self.informational:
            return True
        return bool(np.isfinite(self.residual)) and self.residual <= self.tolerance

    def to_dict(self) -> dict:
        entry = asdict(self)
        entry['passed'] = self.passed
        entry['residual'] = float(self.residual) if np.isfinite(self.residual) else str(self.residual)
        return entry


def spectral_samples(radius: float, count: int) -> np.ndarray:
    """Points on a circle whose angles keep clear of the twelve rays"""
    angles = np.radians(7.0 + np.arange(count) * 360.0 / count)
    return radius * np.exp(1j * angles)


def step_potential(kappa: float = 2.0) -> Potential:
    return Potential(m_plus=1.0, m_minus=kappa ** 3, a=1.0)


def bump_potential() -> Potential:
    return Potential(m_plus=1.0, m_minus=8.0, a=1.0, perturbation=GaussianBumps(((1.0, 0.3, 0.05),)))


# reported, never failed: the printed placements of zeta1 and zeta2 do not hold
INFORMATIONAL = ('printed unitarity', 'printed reciprocity')


def conservation_residuals(p: Potential, lams: Iterable[complex], j: InvolutionJ = InvolutionJ()) -> Dict[str, float]:
    """Worst residual of every conservation law of T over the sample points"""
    matrices = pmap(lambda lam: transition_matrix(p, lam), lams)
    duals = [dual_matrix(t) for t in matrices]
    direct = [coefficients(t) for t in matrices]
    dual = [coefficients(t) for t in duals]
    reciprocity = [reciprocity_check(c, d) for c, d in zip(direct, dual)]

    return {
        'det T': max(t.det_residual() for t in matrices),
        'J-unitarity': max(t.j_unitarity_residual(j) for t in matrices),
        'scalar unitarity': max(map(unitarity_residual, direct)),
        'dual unitarity': max(map(unitarity_residual, dual)),
        'dual product': max(product_residual(t, d) for t, d in zip(matrices, duals)),
        'energetic balance': max(energetic_balance_check(c, j) for c in direct),
        'reciprocity': max(r.symmetric for r in reciprocity),
        'printed unitarity': max(map(printed_unitarity_residual, direct)),
        'printed reciprocity': max(r.printed for r in reciprocity),
    }


def _raise(error: Exception):
    raise error


class Verifier:
    """
    Runs the invariant suites over a small corpus of potentials and collects
    one Check per measured residual.
    """
    suites: List[str]
    j: InvolutionJ
    corpus: Dict[str, Potential]
    checks: List[Check]
    start_time: float = 0

    def __init__(self, only: Iterable[str] = None, mutate_j: bool = False, samples: int = 20):
        only = list(only or SUITES)
        unknown = [s for s in only if s not in SUITES]
        if unknown:
            raise ValueError(f'unknown suite(s) {unknown}, expected some of {list(SUITES)}')

        self.suites = only
        self.j = InvolutionJ(mutated=mutate_j)
        self.samples = samples
        self.checks = []

        self.configure_corpus()

    def configure_corpus(self):
        self.corpus = {
            'step': step_potential(2.0),
            'bump': bump_potential(),
        }

    def record(self, suite: str, name: str, measure: Callable[[], float], tolerance: float,
               informational: bool = False):
        try:
            residual = float(measure())
            check = Check(suite, name, residual, tolerance, informational)
        except CubicStringError as e:
            logger.error('%s/%s: %s', suite, name, e)
            check = Check(suite, name, math.nan, tolerance, informational, error=str(e))

        self.checks.append(check)
        status = 'info' if informational else ('PASS' if check.passed else 'FAIL')
        print(f'[{suite}] {name}: {check.residual:.3e} (tol {tolerance:.0e}) {status}')

    def run(self) -> bool:
        self.start_time = time.time()

        for suite in self.suites:
            getattr(self, f'check_{suite}')()

        failed = [c for c in self.checks if not c.passed]
        print(f'{len(self.checks) - len(failed)}/{len(self.checks)} checks passed '
              f'in {time.time() - self.start_time:.0f} s')
        return not failed

    def report(self) -> dict:
        return {
            'schema_version': config.schema_version,
            'mutated_j': self.j.mutated,
            'passed': all(c.passed for c in self.checks),
            'checks': [c.to_dict() for c in self.checks],
        }

    def check_geometry(self):
        rng = np.random.default_rng(0)
        points = rng.normal(size=500) + 1j * rng.normal(size=500)
        points = [lam for lam in points if ray_of(lam) is None and ray_of(-lam) is None]

        self.record('geometry', 'rotation', lambda: sum(
            in_omega(lam, k) != in_omega(lam * ZETA[k], 0) for lam in points for k in range(3)
        ), 0)
        self.record('geometry', 'reflection', lambda: sum(
            classify(-lam) != classify(lam).reflected() for lam in points
        ), 0)
        self.record('geometry', 'omega cover', lambda: sum(
            sum(in_omega(lam, k) for k in range(3)) != 1 for lam in points
        ), 0)
        self.record('geometry', 'ray points', lambda: sum(
            ray_of(1.7 * direction) is not ray for ray, direction in RAY_DIRECTIONS.items()
        ), 0)

    def check_trig3(self):
        rng = np.random.default_rng(1)
        z = 5 * np.sqrt(rng.uniform(size=1000)) * np.exp(2j * np.pi * rng.uniform(size=1000))
        triple = s_triple(z)
        scale = np.abs(triple.s0) ** 3 + np.abs(triple.s1) ** 3 + np.abs(triple.s2) ** 3 + 1

        self.record('trig3', 'main identity', lambda: np.max(triple.main_identity_residual() / scale), 1e-12)
        self.record('trig3', 'euler formula', lambda: max(
            np.max(np.abs(triple.euler(k) - np.exp(ZETA[k] * z)) / (1 + np.abs(np.exp(ZETA[k] * z))))
            for k in range(3)
        ), 1e-12)

        h = 1e-5
        small = z[np.abs(z) <= 2]

        def derivative_cycle():
            worst = 0.0
            for k in range(3):
                fd = (s_eval(k, small + h) - s_eval(k, small - h)) / (2 * h)
                exact = s_eval((k - 1) % 3, small)
                worst = max(worst, np.max(np.abs(fd - exact) / (1 + np.abs(exact))))
            return worst

        self.record('trig3', 'derivative cycle', derivative_cycle, 1e-8)

    def check_potential(self):
        xs = np.linspace(-3, 3, 60)
        for name, p in self.corpus.items():
            self.record('potential', f'{name}: admissible', lambda: len(validate(p).failures), 0)
            self.record('potential', f'{name}: reflection', lambda: np.max(
                np.abs(p.reflected().values(-xs) - p.values(xs))
            ), 1e-14)

    def check_jost(self):
        p = self.corpus['bump']
        lams = spectral_samples(0.3, self.samples)
        xs = np.array([-1.0, 0.0, 1.5])

        def oracle():
            worst = 0.0
            for lam in lams:
                series = jost_grid('v', p, lam, 0, xs, backend='neumann').value
                ode = jost_grid('v', p, lam, 0, xs, backend='ode').value
                worst = max(worst, np.max(np.abs(series - ode) / np.abs(ode)))
            return worst

        self.record('jost', 'neumann vs ode', oracle, 1e-6)
        self.record('jost', 'kernel bound', lambda: max(
            kernel_bound_check(p, lam, 0, n_max=10).bound_margin for lam in lams[:5]
        ), 1.0)

        def wronskian():
            worst = 0.0
            for lam in lams[:5]:
                v = [solve_v(p, lam, k, 0.4)[0] for k in range(3)]
                worst = max(worst, abs(wronskian3(*v) / wronskian_constant(p, lam) - 1))
            return worst

        self.record('jost', 'wronskian constant', wronskian, 1e-6)

        reports = [pair_wronskian_identity_check(p, lam, xs) for lam in lams[:3]]
        self.record('jost', 'pair wronskians', lambda: max(r.max_residual for r in reports), 1e-6)
        self.record('jost', 'pair wronskian spread', lambda: max(r.spread for r in reports), 1e-6)

    def check_scattering(self):
        step = self.corpus['step']
        oracle = step_transition_matrix(step.kappa)[0]
        self.record('scattering', 'step oracle', lambda: np.max(np.abs(transition_row(step, 0.2 + 0.1j) - oracle)), 1e-8)
        self.record('scattering', 'J involution', self.j.residual, 1e-15)

        for name, p in self.corpus.items():
            lams = spectral_samples(0.3, self.samples)
            try:
                residuals = conservation_residuals(p, lams, self.j)
            except CubicStringError as e:
                self.record('scattering', f'{name}: conservation laws', lambda: _raise(e), 1e-6)
                continue

            for law, value in residuals.items():
                tolerance = 1e-10 if law == 'dual product' and p.is_pure_step else 1e-6
                self.record('scattering', f'{name}: {law}', lambda: value, tolerance,
                            informational=law in INFORMATIONAL)
            self.record('scattering', f'{name}: reflection', lambda: reflection_residual(p, lams[0]), 1e-6)

        def bound_states():
            states = find_bound_states(step, 0.5, samples=50)
            return len(states.mu) + len(states.nu)

        self.record('scattering', 'step: no bound states', bound_states, 0)

    def check_cauchy(self):
        densities = {
            'exp': lambda t: np.exp(-t) * (1 + 1j * t),
            'rational': lambda t: 1 / (1 + t ** 2) + 0j,
        }
        points = (0.3, 1.1, 2.7)
        for name, f in densities.items():
            d = RayDensity.from_function(SectorId.IL0, f, 4.0)

            self.record('cauchy', f'{name}: plemelj jump', lambda: max(
                abs(boundary_value(d, t, 'left') - boundary_value(d, t, 'right') - f(t)) for t in points
            ), 1e-10)

            def weighted_oracle():
                worst = 0.0
                for t in points:
                    re = integrate.quad(lambda s: complex(f(s)).real, 0, 4.0, weight='cauchy', wvar=t)[0]
                    im = integrate.quad(lambda s: complex(f(s)).imag, 0, 4.0, weight='cauchy', wvar=t)[0]
                    worst = max(worst, abs(principal_value(d, t) - complex(re, im)))
                return worst

            self.record('cauchy', f'{name}: principal value', weighted_oracle, 1e-8)

    def check_inverse(self):
        flat = Potential(1.0, 1.0, a=1.0)
        mesh = tau_mesh(n_nodes=32, tau_max=6.0)
        data = compute_scattering_data(flat, mesh, mapper=pmap, bound_radius=0.5)
        n = len(mesh)

        def background():
            solution = solve_system(assemble_direct(data, 0.7))
            a_exact = np.exp(mesh.nodes * ZETA[2] * 0.7)
            b_exact = np.exp(mesh.nodes * ZETA[1] * 0.7)
            return max(np.max(np.abs(solution.v1_plus() - a_exact)), np.max(np.abs(solution.v2_plus() - b_exact)))

        self.record('inverse', 'constant background', background, 1e-8)

        def damped_far_field():
            """|F/Q| at |lam| = 10/sqrt(c) on the three sector bisectors, Q rotated to grow there"""
            step_data = compute_scattering_data(self.corpus['step'], mesh, mapper=pmap, bound_radius=0.5)
            solution = solve_system(assemble_direct(step_data, 0.7))
            q = DampingQ(step_data.c, step_data.n_plus)
            radius = 10 / math.sqrt(step_data.c)
            worst = 0.0
            for angle, theta in ((-90.0, math.pi / 2), (30.0, 0.0), (150.0, 0.0)):
                lam = radius * np.exp(1j * np.radians(angle))
                worst = max(worst, abs(reconstruct_F(solution, lam) / q_eval(q.rotated(theta), lam)))
            return worst

        self.record('inverse', 'damped far field', damped_far_field, 1e-6)

        def manufactured():
            injected = replace(data, mu=np.array([0.3]), nu=np.array([-0.25]))
            system = assemble_direct(injected, 0.5)
            rng = np.random.default_rng(7)
            exact = rng.normal(size=system.size) + 1j * rng.normal(size=system.size)
            system.rhs = system.matrix @ exact
            solution = solve_system(system)
            tail = slice(2 * n, system.size)
            return np.max(np.abs(solution.unknowns[tail] - exact[tail]) / np.abs(exact[tail]))

        self.record('inverse', 'manufactured residues', manufactured, 1e-6)

        step = self.corpus['step']
        for side, xs in (('+', np.linspace(0, 3, 60)), ('-', np.linspace(-3, 0, 60))):
            recovery = recover_m(ReconstructedField.from_forward(step, xs, side))
            limit = step.limit(side)
            interior = (np.abs(xs) >= 0.2) & (np.abs(xs) <= 2.8)
            self.record('inverse', f'step round trip {side}: route A',
                        lambda: np.max(np.abs(recovery.m_route_a[interior] / limit - 1)), 1e-3)
            self.record('inverse', f'step round trip {side}: route B',
                        lambda: np.max(np.abs(recovery.m_route_b[interior] / limit - 1)), 1e-3)

        forward = compute_scattering_data(step, tau_mesh(n_nodes=64), mapper=pmap)
        for side, xs in (('+', np.linspace(0, 3, 60)), ('-', np.linspace(-3, 0, 60))):
            def system_round_trip():
                recon = ReconstructedField.from_system(forward, xs, side, mapper=pmap)
                if recon.singular.any():
                    return math.inf
                recovery = recover_m(recon)
                logger.info('system route %s: max condition %.3g', side, np.max(recon.condition))
                interior = (np.abs(xs) >= 0.2) & (np.abs(xs) <= 2.8)
                limit = step.limit(side)
                return max(np.max(np.abs(route[interior] / limit - 1))
                           for route in (recovery.m_route_a, recovery.m_route_b))

            self.record('inverse', f'step round trip via system {side}', system_round_trip, 1e-3)
