import argparse
import json
import logging
import math
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import List, Sequence

import numpy as np

from config import config
from cubic_string import io
from cubic_string.errors import CubicStringError, GridError, SchemaError
from cubic_string.inverse import ReconstructedField, Recovery, recover_m
from cubic_string.panels import tau_mesh
from cubic_string.potential import Potential, validate
from cubic_string.scattering import ScatteringData, compute_scattering_data
from sweep import close_pool, pmap
from verify import Verifier, conservation_residuals, spectral_samples, step_potential


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FORWARD = 2
EXIT_INVERSE = 3


@contextmanager
def timer():
    """Helper for measuring runtime"""

    time0 = time.perf_counter()
    yield
    logger.info('[elapsed time: %.2f s]', time.perf_counter() - time0)


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with code 1, like schema errors"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f'{self.prog}: error: {message}\n')


def positive(kind):
    def parse(text: str):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f'must be positive, got {text}')
        return value
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = ArgumentParser(prog='cubic-string', description='Forward and inverse scattering for the cubic string')
    parser.add_argument('--verbose', '-v', action='store_true', help='log at DEBUG level')
    parser.add_argument('--workers', type=int, default=None, help='worker processes, 0 for all cpus but one')
    parser.add_argument('--zero-tol', type=positive(float), default=None, help='bound-state tolerance on |t00|')
    parser.add_argument('--neumann-tol', type=positive(float), default=None, help='stopping tolerance of the Neumann series')
    commands = parser.add_subparsers(dest='command', required=True)

    forward = commands.add_parser('forward', help='potential JSON -> scattering data JSON')
    forward.add_argument('--potential', type=Path, required=True)
    forward.add_argument('--tau-max', type=positive(float), default=None)
    forward.add_argument('--tau-nodes', type=int, default=None)
    forward.add_argument('--out', type=Path, required=True)
    forward.add_argument('--report', type=Path, default=None, help='conservation-law residuals as JSON')

    invert = commands.add_parser('invert', help='scattering data JSON -> reconstruction CSV')
    invert.add_argument('--data', type=Path, required=True)
    invert.add_argument('--x-min', type=float, default=-3.0)
    invert.add_argument('--x-max', type=float, default=3.0)
    invert.add_argument('--x-nodes', type=int, default=None)
    invert.add_argument('--out', type=Path, required=True)
    invert.add_argument('--report', type=Path, default=None, help='conditioning and residuals per x as JSON')

    verify = commands.add_parser('verify', help='run the invariant suites')
    verify.add_argument('--only', action='append', default=None, help='suite name, may be repeated')
    verify.add_argument('--report', type=Path, default=None)
    verify.add_argument('--mutate-j', action='store_true', help='flip the sign of J_12 to see the checks fail')
    verify.add_argument('--samples', type=int, default=20, help='spectral sample points per law')

    commands.add_parser('selftest', help='step round trip through forward and both inverse systems')

    return parser


def configure_logging(verbose: bool = False):
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, config.log_level),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )


def configure_config(args: argparse.Namespace):
    """CLI overrides are written into the config singleton before any work"""
    if args.workers is not None:
        config.n_workers = args.workers
        config.use_pool = args.workers != 1
    if args.zero_tol is not None:
        config.zero_tol = args.zero_tol
    if args.neumann_tol is not None:
        config.neumann_tol = args.neumann_tol

    if getattr(args, 'tau_max', None) is not None:
        config.tau_max = args.tau_max
    if getattr(args, 'tau_nodes', None) is not None:
        if args.tau_nodes < 2:
            raise GridError(f'grid too small: {args.tau_nodes} tau node(s)')
        config.tau_nodes = args.tau_nodes
    if getattr(args, 'x_nodes', None) is not None:
        if args.x_nodes < 6:
            raise GridError(f'grid too small: {args.x_nodes} x node(s), six or more are needed')
        config.x_nodes = args.x_nodes


def half_axis_grids(x_min: float, x_max: float, n_nodes: int) -> List[tuple]:
    """(side, grid) for each half-axis the interval [x_min, x_max] reaches into"""
    if x_max <= x_min:
        raise GridError(f'empty x interval [{x_min}, {x_max}]')

    grids = []
    if x_min < 0:
        grids.append(('-', np.linspace(x_min, min(x_max, 0.0), n_nodes)))
    if x_max > 0:
        grids.append(('+', np.linspace(max(x_min, 0.0), x_max, n_nodes)))
    return grids


def forward_report(p: Potential, data: ScatteringData) -> dict:
    radius = 0.6 * min(p.disk.radius_plus, p.disk.radius_minus)
    residuals = conservation_residuals(p, spectral_samples(radius, 8))
    return {
        'schema_version': config.schema_version,
        'kappa': p.kappa,
        'tau_nodes': len(data.tau),
        'tau_max': data.tau_max,
        'bound_states': {'mu': list(map(float, data.mu)), 'nu': list(map(float, data.nu))},
        'residuals': residuals,
    }


def cmd_forward(args: argparse.Namespace) -> int:
    p = io.load_potential(args.potential)
    mesh = tau_mesh()
    logger.info('forward: kappa = %.6g, %d nodes per ray up to tau = %.3g', p.kappa, len(mesh), mesh.tau_max)
    try:
        validation = validate(p)
        if not validation.ok:
            logger.warning('potential fails admissibility: %s', '; '.join(validation.failures))

        with timer():
            data = compute_scattering_data(p, mesh, mapper=pmap)
            report = forward_report(p, data)
    except (GridError, SchemaError):
        raise
    except CubicStringError as e:
        logger.error('forward problem failed: %s', e)
        return EXIT_FORWARD

    io.save_scattering(data, args.out)
    for law, value in report['residuals'].items():
        print(f'{law:>20}: {value:.3e}')
    if args.report:
        io.write_report(report, args.report)

    return EXIT_OK


def reconstruct(data: ScatteringData, grids: Sequence[tuple]) -> List[Recovery]:
    recoveries = []
    for side, xs in grids:
        recon = ReconstructedField.from_system(data, xs, side, mapper=pmap)
        recoveries.append(recover_m(recon))

        for x, condition, residual in zip(xs, recon.condition, recon.residual):
            logger.debug('x = %8.4f  condition %.3e  residual %.3e', x, condition, residual)
        logger.info('side %s: max condition %.3e, max residual %.3e',
                    side, np.nanmax(recon.condition), np.nanmax(recon.residual))

    return recoveries


def cmd_invert(args: argparse.Namespace) -> int:
    data = io.load_scattering(args.data)
    grids = half_axis_grids(args.x_min, args.x_max, config.x_nodes)

    try:
        with timer():
            recoveries = reconstruct(data, grids)
    except (GridError, SchemaError):
        raise
    except CubicStringError as e:
        logger.error('inverse problem failed: %s', e)
        return EXIT_INVERSE

    io.write_reconstruction(recoveries, args.out)
    if args.report:
        io.write_report({
            'schema_version': config.schema_version,
            'rows': [row for r in recoveries for row in r.report_rows()],
        }, args.report)

    singular = sum(int(r.singular.sum()) for r in recoveries)
    if singular:
        logger.error('%d x node(s) hit a singular system, rows flagged in %s', singular, args.out)
        return EXIT_INVERSE

    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    verifier = Verifier(only=args.only, mutate_j=args.mutate_j, samples=args.samples)
    with timer():
        passed = verifier.run()

    if args.report:
        io.write_report(verifier.report(), args.report)

    # any failed invariant is reported with the forward-failure code
    return EXIT_OK if passed else EXIT_FORWARD


def cmd_selftest(args: argparse.Namespace) -> int:
    p = step_potential(2.0)
    with timer():
        try:
            data = compute_scattering_data(p, tau_mesh(), mapper=pmap)
        except CubicStringError as e:
            logger.error('selftest forward step failed: %s', e)
            return EXIT_FORWARD
        try:
            recoveries = reconstruct(data, half_axis_grids(-3.0, 3.0, config.x_nodes))
        except CubicStringError as e:
            logger.error('selftest inverse step failed: %s', e)
            return EXIT_INVERSE

    return selftest_verdict(p, recoveries)


def selftest_verdict(p: Potential, recoveries: Sequence[Recovery], tolerance: float = 1e-3) -> int:
    """Worst relative error of both routes; a singular or non-finite row fails the run"""
    worst = 0.0
    singular = 0
    for recovery in recoveries:
        singular += int(np.sum(recovery.singular))
        limit = np.where(recovery.x >= 0, p.m_plus, p.m_minus)
        for route in (recovery.m_route_a, recovery.m_route_b):
            error = np.abs(route / limit - 1)
            worst = max(worst, float(np.max(error)) if np.all(np.isfinite(error)) else math.inf)
    print(json.dumps({'kappa': p.kappa, 'max_relative_error': worst, 'singular_rows': singular, 'tolerance': tolerance}))

    if singular:
        logger.error('selftest: %d singular row(s)', singular)
        return EXIT_INVERSE
    return EXIT_OK if worst <= tolerance else EXIT_INVERSE


COMMANDS = {
    'forward': cmd_forward,
    'invert': cmd_invert,
    'verify': cmd_verify,
    'selftest': cmd_selftest,
}


def main(argv: Sequence[str] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    try:
        configure_config(args)
        return COMMANDS[args.command](args)
    except (SchemaError, GridError, FileNotFoundError, ValueError) as e:
        logger.error('%s', e)
        print(f'error: {e}', file=sys.stderr)
        return EXIT_USAGE
    finally:
        close_pool()


if __name__ == '__main__':
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        exit(0)
