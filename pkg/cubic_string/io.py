"""
File formats: potential and scattering-data JSON documents, reconstruction CSV.

Every JSON document carries "schema_version"; complex numbers are [re, im]
pairs. The CSV is written with 17 significant digits so that outputs of two
runs can be diffed byte for byte.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Sequence, Union

import numpy as np

from config import config
from .errors import DomainError, GridError, SchemaError
from .potential import PERTURBATIONS, Potential
from .scattering import COEFFICIENTS, ScatteringData
from .inverse import Recovery


logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CSV_COLUMNS = ('x', 'm_estimate_routeA', 'm_estimate_routeB', 'discrepancy', 'residual', 'flag')


def _parse(text: str) -> Dict[str, Any]:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f'malformed JSON: {e.msg}', e.lineno, e.colno) from e

    if not isinstance(document, dict):
        raise SchemaError('top level of the document must be an object')

    version = document.get('schema_version')
    if version != config.schema_version:
        raise SchemaError(f'unsupported schema_version {version!r}, expected {config.schema_version}')

    return document


def _require(document: dict, key: str, where: str = 'document'):
    if key not in document:
        raise SchemaError(f'{where} is missing the field {key!r}')
    return document[key]


def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f'{name} must be a number, got {value!r}')
    return float(value)


def encode_complex(values: np.ndarray) -> list:
    values = np.asarray(values, dtype=complex)
    return np.stack([values.real, values.imag], axis=-1).tolist()


def decode_complex(pairs, name: str) -> np.ndarray:
    try:
        array = np.asarray(pairs, dtype=float)
    except (TypeError, ValueError) as e:
        raise SchemaError(f'{name} is not a numeric array: {e}') from e
    if array.ndim < 1 or array.shape[-1] != 2:
        raise SchemaError(f'{name} must hold [re, im] pairs')
    return array[..., 0] + 1j * array[..., 1]


def _freeze(value):
    """JSON lists to the nested tuples the frozen perturbations expect"""
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def potential_to_dict(p: Potential) -> dict:
    return {
        'schema_version': config.schema_version,
        'm_plus': p.m_plus,
        'm_minus': p.m_minus,
        'a': p.a,
        'perturbation': {'kind': p.perturbation.kind, 'params': p.perturbation.params()},
    }


def potential_from_dict(document: dict) -> Potential:
    perturbation = document.get('perturbation', {'kind': 'none', 'params': {}})
    if not isinstance(perturbation, dict):
        raise SchemaError('perturbation must be an object with kind and params')

    kind = _require(perturbation, 'kind', 'perturbation')
    if kind not in PERTURBATIONS:
        raise SchemaError(f'unknown perturbation kind {kind!r}, expected one of {sorted(PERTURBATIONS)}')
    params = perturbation.get('params', {})
    if not isinstance(params, dict):
        raise SchemaError('perturbation params must be an object')

    try:
        return Potential(
            m_plus=_number(_require(document, 'm_plus'), 'm_plus'),
            m_minus=_number(_require(document, 'm_minus'), 'm_minus'),
            a=_number(document.get('a', 1.0), 'a'),
            perturbation=PERTURBATIONS[kind](**{k: _freeze(v) for k, v in params.items()}),
        )
    except TypeError as e:
        raise SchemaError(f'bad parameters for perturbation {kind!r}: {e}') from e
    except DomainError as e:
        raise SchemaError(str(e)) from e


def load_potential(path: PathLike) -> Potential:
    return potential_from_dict(_parse(Path(path).read_text()))


def save_potential(p: Potential, path: PathLike):
    Path(path).write_text(json.dumps(potential_to_dict(p), indent=2))


def scattering_to_dict(data: ScatteringData) -> dict:
    return {
        'schema_version': config.schema_version,
        'limits': {'m_plus': data.m_plus, 'm_minus': data.m_minus},
        'tau': np.asarray(data.tau).tolist(),
        'weights': np.asarray(data.weights).tolist(),
        'tau_max': data.tau_max,
        'damping': data.c,
        'direct': {name: encode_complex(data.direct[name]) for name in COEFFICIENTS},
        'dual': {name: encode_complex(data.dual[name]) for name in COEFFICIENTS},
        'bound_states': {
            'mu': np.asarray(data.mu, dtype=float).tolist(),
            'nu': np.asarray(data.nu, dtype=float).tolist(),
        },
    }


def scattering_from_dict(document: dict) -> ScatteringData:
    limits = _require(document, 'limits')
    if not isinstance(limits, dict):
        raise SchemaError('limits must be an object')
    m_plus = _number(_require(limits, 'm_plus', 'limits'), 'm_plus')
    m_minus = _number(_require(limits, 'm_minus', 'limits'), 'm_minus')
    if m_plus <= 0 or m_minus <= 0:
        raise SchemaError(f'limits must be positive, got m_plus = {m_plus}, m_minus = {m_minus}')

    try:
        tau = np.asarray(_require(document, 'tau'), dtype=float)
        weights = np.asarray(_require(document, 'weights'), dtype=float)
    except (TypeError, ValueError) as e:
        if isinstance(e, SchemaError):
            raise
        raise SchemaError(f'tau and weights must be numeric arrays: {e}') from e
    if tau.ndim != 1 or len(tau) < 2:
        raise GridError(f'grid too small: {tau.size} tau node(s)')
    if weights.shape != tau.shape:
        raise SchemaError('tau and weights must have the same length')

    coefficients = {}
    for family in ('direct', 'dual'):
        block = _require(document, family)
        coefficients[family] = {}
        for name in COEFFICIENTS:
            values = decode_complex(_require(block, name, family), f'{family}.{name}')
            if values.shape != (3, len(tau)):
                raise SchemaError(f'{family}.{name} must have shape (3, {len(tau)}), got {values.shape}')
            coefficients[family][name] = values

    bound = document.get('bound_states', {})
    return ScatteringData(
        tau=tau,
        weights=weights,
        tau_max=_number(_require(document, 'tau_max'), 'tau_max'),
        direct=coefficients['direct'],
        dual=coefficients['dual'],
        mu=np.asarray(bound.get('mu', []), dtype=float),
        nu=np.asarray(bound.get('nu', []), dtype=float),
        m_plus=m_plus,
        m_minus=m_minus,
        c=_number(_require(document, 'damping'), 'damping'),
    )


def load_scattering(path: PathLike) -> ScatteringData:
    return scattering_from_dict(_parse(Path(path).read_text()))


def save_scattering(data: ScatteringData, path: PathLike):
    Path(path).write_text(json.dumps(scattering_to_dict(data), indent=2))
    logger.info('scattering data written to %s', path)


def write_report(report: dict, path: PathLike):
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True))


def write_reconstruction(recoveries: Sequence[Recovery], path: PathLike):
    """One CSV for one or both half-axes, rows ordered by x"""
    rows = np.vstack([r.rows() for r in recoveries])
    order = np.argsort(rows[:, 0], kind='stable')
    np.savetxt(
        path,
        rows[order],
        fmt=f'%.{config.csv_digits}g',
        delimiter=',',
        header=','.join(CSV_COLUMNS),
        comments='',
    )
    logger.info('%d reconstruction rows written to %s', len(rows), path)


def read_reconstruction(path: PathLike) -> np.ndarray:
    return np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
