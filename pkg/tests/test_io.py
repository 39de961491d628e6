import json

import numpy as np
import pytest

from cubic_string import io
from cubic_string.errors import GridError, SchemaError
from cubic_string.inverse import Recovery
from cubic_string.potential import ExponentialTail, GaussianBumps, Potential, SampledTable


@pytest.mark.parametrize('p', [
    Potential(1.0, 8.0),
    Potential(1.0, 8.0, a=1.0, perturbation=GaussianBumps(((1.0, 0.3, 0.05), (-0.5, 0.2, -0.02)))),
    Potential(2.0, 1.5, a=0.5, perturbation=ExponentialTail(0.1, 2.0, 'both')),
    Potential(1.0, 1.0, perturbation=SampledTable((-1.0, 0.0, 1.0), (1.0, 1.2, 1.0), 'linear')),
])
def test_potential_round_trip(tmp_path, p):
    path = tmp_path / 'potential.json'
    io.save_potential(p, path)
    assert io.load_potential(path) == p


class TestPotentialSchema:
    def write(self, tmp_path, text):
        path = tmp_path / 'potential.json'
        path.write_text(text)
        return path

    def test_malformed_json_reports_the_line(self, tmp_path):
        path = self.write(tmp_path, '{\n  "schema_version": 1,\n  "m_plus": ,\n}')
        with pytest.raises(SchemaError, match='line 3') as info:
            io.load_potential(path)
        assert info.value.line == 3

    def test_schema_version(self, tmp_path):
        path = self.write(tmp_path, json.dumps({'schema_version': 2, 'm_plus': 1, 'm_minus': 1}))
        with pytest.raises(SchemaError, match='schema_version'):
            io.load_potential(path)

    def test_not_an_object(self, tmp_path):
        with pytest.raises(SchemaError):
            io.load_potential(self.write(tmp_path, '[1, 2]'))

    def test_missing_field(self):
        with pytest.raises(SchemaError, match='m_minus'):
            io.potential_from_dict({'schema_version': 1, 'm_plus': 1.0})

    def test_unknown_kind(self):
        document = {'m_plus': 1, 'm_minus': 1, 'perturbation': {'kind': 'sawtooth', 'params': {}}}
        with pytest.raises(SchemaError, match='sawtooth'):
            io.potential_from_dict(document)

    def test_bad_params(self):
        document = {'m_plus': 1, 'm_minus': 1, 'perturbation': {'kind': 'exponential', 'params': {'slope': 1}}}
        with pytest.raises(SchemaError, match='exponential'):
            io.potential_from_dict(document)

    def test_invalid_values(self):
        with pytest.raises(SchemaError, match='positive'):
            io.potential_from_dict({'m_plus': -1.0, 'm_minus': 1.0})
        with pytest.raises(SchemaError):
            io.potential_from_dict({'m_plus': 'one', 'm_minus': 1.0})


class TestScatteringDocument:
    def test_round_trip_is_exact(self, tmp_path, step_data):
        path = tmp_path / 'data.json'
        io.save_scattering(step_data, path)
        loaded = io.load_scattering(path)

        np.testing.assert_array_equal(loaded.tau, step_data.tau)
        np.testing.assert_array_equal(loaded.weights, step_data.weights)
        for name in ('r0', 's1', 's2'):
            np.testing.assert_array_equal(loaded.direct[name], step_data.direct[name])
            np.testing.assert_array_equal(loaded.dual[name], step_data.dual[name])
        assert (loaded.m_plus, loaded.m_minus) == (step_data.m_plus, step_data.m_minus)
        assert loaded.c == step_data.c and loaded.tau_max == step_data.tau_max

    def test_only_the_limits_are_stored(self, bump, small_mesh, make_data):
        document = io.scattering_to_dict(make_data(bump, small_mesh, s1=0.1))
        assert document['limits'] == {'m_plus': 1.0, 'm_minus': 8.0}
        assert 'potential' not in document
        assert 'perturbation' not in json.dumps(document) and 'bumps' not in json.dumps(document)

    def test_missing_limits(self, step_data):
        document = io.scattering_to_dict(step_data)
        del document['limits']['m_minus']
        with pytest.raises(SchemaError, match='m_minus'):
            io.scattering_from_dict(document)
        document['limits'] = {'m_plus': 1.0, 'm_minus': -8.0}
        with pytest.raises(SchemaError, match='positive'):
            io.scattering_from_dict(document)

    def test_one_node_grid(self, step_data):
        document = io.scattering_to_dict(step_data)
        document['tau'], document['weights'] = [1.0], [1.0]
        with pytest.raises(GridError, match='grid too small'):
            io.scattering_from_dict(document)

    def test_coefficient_shape(self, step_data):
        document = io.scattering_to_dict(step_data)
        document['dual']['s1'] = document['dual']['s1'][:2]
        with pytest.raises(SchemaError, match='dual.s1'):
            io.scattering_from_dict(document)

    def test_complex_pairs(self):
        with pytest.raises(SchemaError):
            io.decode_complex([[1.0, 2.0, 3.0]], 'r0')
        with pytest.raises(SchemaError):
            io.decode_complex([['a', 'b']], 'r0')


class TestReconstructionCsv:
    def recovery(self, x):
        x = np.asarray(x, dtype=float)
        return Recovery(
            x=x,
            M_profile=np.zeros(len(x)),
            m_route_a=1 + x / 3,
            m_route_b=1 + x / 7,
            residual=np.full(len(x), 1e-13),
            singular=np.zeros(len(x), dtype=bool),
        )

    def test_rows_are_sorted_and_exact(self, tmp_path):
        path = tmp_path / 'out.csv'
        negative, positive = self.recovery([-1.0, -0.5, 0.0]), self.recovery([0.0, 0.5, 1.0])
        io.write_reconstruction([positive, negative], path)

        assert path.read_text().splitlines()[0] == ','.join(io.CSV_COLUMNS)
        rows = io.read_reconstruction(path)
        assert rows.shape == (6, 6)
        assert np.all(np.diff(rows[:, 0]) >= 0)
        np.testing.assert_array_equal(rows[:, 1], 1 + rows[:, 0] / 3)

    def test_report(self, tmp_path):
        path = tmp_path / 'report.json'
        io.write_report({'b': 1, 'a': [None, 2.5]}, path)
        assert json.loads(path.read_text()) == {'a': [None, 2.5], 'b': 1}
