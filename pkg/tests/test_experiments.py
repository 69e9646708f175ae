"""
Tests for experiment files, result output and the command-line entry point.
"""

import json

import jsonschema
import pytest

from experiment_runner import ExperimentRunner
from experiment_spec import ExperimentSpec
from hamiltonian import Hamiltonian
from main import main
from ods_reader import ODSReader
from ods_writer import ODSWriter
from pauli_algebra import BinaryMatrix, ConfigError, ParseError
from report_generator import ReportGenerator
from result_writer import ResultWriter, evaluate_expectations
from tests.conftest import ROOT

CONFIGS = sorted((ROOT / 'configs').glob('*.json'))

QUIET_SETTINGS = {
    'logging': {'level': 'WARNING', 'console_output': False},
    'numerics': {'dense_limit': 14},
    'dynamics': {'default_steps': 50, 'max_steps': 400, 'quadrature_samples': 0, 'workers': 1},
    'output': {'write_ods': False, 'write_report': False},
}


@pytest.fixture
def settings_file(tmp_path):
    path = tmp_path / 'settings.json'
    path.write_text(json.dumps(QUIET_SETTINGS), encoding='utf-8')
    return str(path)


@pytest.fixture
def runner():
    return ExperimentRunner(QUIET_SETTINGS)


def write_json(path, data):
    path.write_text(json.dumps(data), encoding='utf-8')
    return str(path)


class TestExperimentSpec:
    """Schema validation and cross-field checks."""

    @pytest.mark.parametrize('path', CONFIGS, ids=lambda p: p.stem)
    def test_shipped_configs_validate(self, path):
        spec = ExperimentSpec.from_file(str(path))
        assert spec.kind in ExperimentRunner().commands

    def test_unknown_field_rejected(self):
        with pytest.raises(jsonschema.ValidationError):
            ExperimentSpec.from_dict({'kind': 'code-inspect', 'colour': 'blue'})

    def test_expectation_needs_provenance(self):
        with pytest.raises(jsonschema.ValidationError):
            ExperimentSpec.from_dict({'kind': 'code-inspect', 'code': {'builtin': '412'},
                                      'expectations': [{'metric': 'n', 'target': 4}]})

    def test_several_code_sources(self):
        with pytest.raises(ConfigError):
            ExperimentSpec.from_dict({'kind': 'code-inspect', 'code': {'builtin': '412', 'a_matrix': ['11', '11']}})

    def test_chain_needs_num_logical(self):
        with pytest.raises(ConfigError):
            ExperimentSpec.from_dict({'kind': 'chain', 'code': {'builtin': 'chain'}})

    def test_gap_scan_range(self):
        with pytest.raises(ConfigError):
            ExperimentSpec.from_dict({'kind': 'gap-scan', 'gap_scan': {'n_min': 5, 'n_max': 3}})

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{"kind": ', encoding='utf-8')
        with pytest.raises(ConfigError):
            ExperimentSpec.from_file(str(path))

    def test_overrides(self):
        spec = ExperimentSpec.from_dict({'kind': 'spectrum', 'seed': 3, 'code': {'builtin': '412'}})
        changed = spec.with_overrides(out='elsewhere', seed=11)
        assert changed.seed == 11
        assert changed.section('output')['directory'] == 'elsewhere'
        assert spec.seed == 3
        assert spec.prefix == 'spectrum'

    def test_relative_matrix_file_resolves_next_to_config(self):
        spec = ExperimentSpec.from_file(str(ROOT / 'configs' / 'code_inspect_832_file.json'))
        path = spec.resolve_path(spec.section('code')['a_matrix_file'])
        assert path.exists()


class TestResultWriter:
    """CSV and JSON output."""

    def test_csv_format(self, tmp_path):
        writer = ResultWriter(str(tmp_path), 'run')
        path = writer.write_csv('table', [{'a': 0.1, 'b': True}, {'a': 2, 'c': None}])
        assert path.name == 'run_table.csv'
        raw = path.read_bytes().decode('utf-8')
        assert raw == 'a,b,c\r\n0.1,true,\r\n2,,\r\n'

    def test_json_sorted_with_infinities(self, tmp_path):
        writer = ResultWriter(str(tmp_path), 'run')
        path = writer.write_json('results', {'zeta': float('inf'), 'alpha': [1.5, float('-inf')]})
        data = json.loads(path.read_text(encoding='utf-8'))
        assert data == {'alpha': [1.5, '-inf'], 'zeta': 'inf'}
        text = path.read_text(encoding='utf-8')
        assert text.index('alpha') < text.index('zeta')

    def test_no_temporary_files_left(self, tmp_path):
        writer = ResultWriter(str(tmp_path / 'nested'), 'run')
        writer.write_csv('empty', [])
        assert [p.name for p in (tmp_path / 'nested').iterdir()] == ['run_empty.csv']


class TestExpectations:
    """Golden expectation evaluation."""

    def test_target_with_tolerance(self):
        outcomes = evaluate_expectations({'gap': 0.251}, [
            {'metric': 'gap', 'target': 0.25, 'tolerance': 0.01, 'provenance': 'p'},
            {'metric': 'gap', 'target': 0.25, 'tolerance': 1e-6, 'provenance': 'p'},
        ])
        assert [o['passed'] for o in outcomes] == [True, False]

    def test_min_and_max(self):
        outcomes = evaluate_expectations({'ratio': 5.0}, [
            {'metric': 'ratio', 'min': 4.0, 'max': 6.0, 'provenance': 'p'},
            {'metric': 'ratio', 'max': 1.0},
        ])
        assert [o['passed'] for o in outcomes] == [True, False]

    def test_booleans_count_as_numbers(self):
        outcome, = evaluate_expectations({'ok': True}, [{'metric': 'ok', 'target': 1, 'tolerance': 0}])
        assert outcome['passed']
        assert outcome['value'] == 1.0

    def test_missing_metric_fails(self):
        outcome, = evaluate_expectations({}, [{'metric': 'gap', 'min': 0.0, 'provenance': 'p'}])
        assert not outcome['passed']
        assert outcome['reason'] == 'metric not produced'


class TestODS:
    """Result workbooks."""

    def test_results_workbook(self, tmp_path):
        path = tmp_path / 'results.ods'
        ODSWriter(str(path)).write_results({'gap_scan': [{'N': 3, 'gap': 0.5}, {'N': 4, 'gap': 0.4}]},
                                           {'min_gap': 0.4, 'ok': True})
        reader = ODSReader(str(path))
        summary = reader.read_table('Summary')
        assert [row['Metric'] for row in summary] == ['min_gap', 'ok']
        rows = reader.read_table('gap_scan')
        assert [row['N'] for row in rows] == ['3', '4']

    def test_missing_sheet(self, tmp_path):
        path = tmp_path / 'results.ods'
        ODSWriter(str(path)).write_results({}, {'n': 4})
        with pytest.raises(ParseError):
            ODSReader(str(path)).read_table('gap_scan')

    def test_not_a_workbook(self, tmp_path):
        path = tmp_path / 'fake.ods'
        path.write_text('plain text', encoding='utf-8')
        with pytest.raises(ParseError):
            ODSReader(str(path)).read_file()


class TestReport:
    """Markdown run reports."""

    def test_gap_scan_report_has_figure(self, tmp_path):
        result = {
            'kind': 'gap-scan',
            'spec': {'kind': 'gap-scan', 'description': 'chain gaps'},
            'metrics': {'min_gap': 0.2},
            'expectations': [{'metric': 'min_gap', 'min': 0.0, 'value': 0.2, 'passed': True,
                              'provenance': 'gapped'}],
            'tables': {'gap_scan': [{'N': 3, 'gap_times_n_plus_1': 1.0}, {'N': 4, 'gap_times_n_plus_1': 1.01}]},
            'passed': True,
        }
        path = ReportGenerator(str(tmp_path), 'scan').generate_report(result)
        text = open(path, encoding='utf-8').read()
        assert 'chain gaps' in text
        assert 'figures/scan_gap_scan.png' in text
        assert (tmp_path / 'figures' / 'scan_gap_scan.png').exists()


class TestRunner:
    """Experiment commands on small instances."""

    def test_code_inspect(self, runner):
        result = runner.run(ExperimentSpec.from_dict({'kind': 'code-inspect', 'code': {'builtin': '412'}}))
        assert (result.metrics['n'], result.metrics['k'], result.metrics['d']) == (4, 1, 2)
        assert result.metrics['all_single_detectable']
        assert result.metrics['distance_matches']
        assert len(result.tables['detectability']) == 12 + 4 + 2
        assert result.passed

    def test_a_matrix_code(self, runner):
        result = runner.run(ExperimentSpec.from_dict({'kind': 'code-inspect', 'code': {'a_matrix': ['111', '111']}}))
        assert (result.metrics['n'], result.metrics['k']) == (6, 1)

    def test_check_conditions(self, runner):
        spec = ExperimentSpec.from_dict({'kind': 'check-conditions', 'code': {'builtin': '412'},
                                         'penalty': {'type': 'gauge_sum'}, 'bath': {'num_qubits': 1}})
        result = runner.run(spec)
        assert result.metrics['num_errors'] == 12
        assert result.metrics['all_satisfied']
        assert result.metrics['theorem1_constant'] == pytest.approx(0.0, abs=1e-9)
        assert result.exit_code == 0

    def test_check_conditions_without_noise(self, runner):
        spec = ExperimentSpec.from_dict({'kind': 'check-conditions', 'code': {'builtin': '412'},
                                         'noise': {'strength': 0.0}})
        result = runner.run(spec)
        assert result.metrics['num_errors'] == 0
        assert result.metrics['all_satisfied']

    def test_spectrum(self, runner):
        result = runner.run(ExperimentSpec.from_dict({'kind': 'spectrum', 'code': {'builtin': '412'},
                                                      'penalty': {'type': 'gauge_sum'}}))
        assert result.metrics['codespace_ground_energy'] == pytest.approx(-2 * 2 ** 0.5)
        assert result.metrics['codespace_ground_rank'] == 2
        assert result.metrics['all_spectra_disjoint']
        assert result.metrics['num_sectors'] == 5

    def test_single_point_gap_scan(self, runner):
        spec = ExperimentSpec.from_dict({'kind': 'gap-scan', 'gap_scan': {'n_min': 3, 'n_max': 3}})
        result = runner.run(spec)
        assert result.metrics['num_points'] == 1
        assert len(result.tables['gap_scan']) == 1
        assert result.metrics['sector_dense_max_diff'] < 1e-8

    def test_chain(self, runner):
        spec = ExperimentSpec.from_dict({'kind': 'chain', 'code': {'builtin': 'chain', 'num_logical': 3},
                                         'penalty': {'type': 'chain'}, 'system': {'type': 'chain_ising'}})
        result = runner.run(spec)
        assert (result.metrics['n'], result.metrics['k'], result.metrics['d']) == (8, 3, 2)
        assert result.metrics['ground_in_codespace_satisfied']
        assert result.metrics['commutation_satisfied']
        assert (result.metrics['ground_sector_sx'], result.metrics['ground_sector_sz']) == (1, 1)

    def test_chain_outputs_carry_matrix_and_hamiltonians(self, runner, tmp_path):
        spec = ExperimentSpec.from_dict({'kind': 'chain', 'code': {'builtin': 'chain', 'num_logical': 3},
                                         'penalty': {'type': 'chain'}, 'system': {'type': 'chain_ising'}})
        result = runner.run(spec)
        paths = runner.write_outputs(result, str(tmp_path), 'chain')
        names = {p.name for p in paths}
        assert {'chain_a_matrix.txt', 'chain_encoded_ising_hamiltonian.json', 'chain_penalty_hamiltonian.json'} <= names
        saved = BinaryMatrix.from_text((tmp_path / 'chain_a_matrix.txt').read_text(encoding='utf-8'))
        assert saved == runner.factory.builder.chain_a_matrix(3)
        encoded = Hamiltonian.from_file(str(tmp_path / 'chain_encoded_ising_hamiltonian.json'), 8)
        assert encoded.to_records() == result.hamiltonians['encoded_ising'].to_records()

    def test_outputs_written(self, runner, tmp_path):
        result = runner.run(ExperimentSpec.from_dict({'kind': 'code-inspect', 'code': {'builtin': '412'}}))
        paths = runner.write_outputs(result, str(tmp_path), 'inspect')
        names = sorted(p.name for p in paths)
        assert names == ['inspect_detectability.csv', 'inspect_generators.csv', 'inspect_results.json']
        bundle = json.loads((tmp_path / 'inspect_results.json').read_text(encoding='utf-8'))
        assert bundle['passed'] is True

    @pytest.mark.slow
    @pytest.mark.parametrize('name', ['simulate_412.json', 'sweep_412_memory.json', 'swap_gate_832.json'])
    def test_dynamics_configs_pass(self, runner, name):
        result = runner.run(ExperimentSpec.from_file(str(ROOT / 'configs' / name)))
        failed = [item['metric'] for item in result.expectations if not item['passed']]
        assert not failed
        assert result.passed


class TestMain:
    """Command-line exit codes."""

    def invoke(self, command, config, settings, out):
        return main([command, '--config', str(config), '--settings', settings, '--out', str(out)])

    def test_passing_run(self, settings_file, tmp_path):
        code = self.invoke('code-inspect', ROOT / 'configs' / 'code_inspect_412.json', settings_file, tmp_path)
        assert code == 0
        assert list(tmp_path.glob('*_results.json'))
        assert list(tmp_path.glob('*_run.log'))

    def test_failing_condition(self, settings_file, tmp_path):
        code = self.invoke('check-conditions', ROOT / 'configs' / 'check_412_logical_noise.json',
                           settings_file, tmp_path)
        assert code == 1

    def test_missing_config(self, settings_file, tmp_path):
        assert self.invoke('code-inspect', tmp_path / 'absent.json', settings_file, tmp_path) == 2

    def test_schema_violation(self, settings_file, tmp_path):
        config = write_json(tmp_path / 'bad.json', {'kind': 'code-inspect', 'code': {'builtin': '999'}})
        assert self.invoke('code-inspect', config, settings_file, tmp_path) == 2

    def test_kind_mismatch(self, settings_file, tmp_path):
        assert self.invoke('spectrum', ROOT / 'configs' / 'code_inspect_412.json', settings_file, tmp_path) == 2

    def test_unknown_subcommand(self, settings_file, tmp_path):
        assert main(['transmogrify', '--config', 'x.json']) == 2

    def test_failed_expectation(self, settings_file, tmp_path):
        config = write_json(tmp_path / 'wrong.json', {
            'kind': 'code-inspect',
            'code': {'builtin': '412'},
            'expectations': [{'metric': 'd', 'target': 3, 'tolerance': 0, 'provenance': 'deliberately wrong'}],
        })
        assert self.invoke('code-inspect', config, settings_file, tmp_path) == 1

    def test_deterministic_tables(self, settings_file, tmp_path):
        config = ROOT / 'configs' / 'spectrum_412.json'
        first, second = tmp_path / 'first', tmp_path / 'second'
        assert self.invoke('spectrum', config, settings_file, first) == self.invoke('spectrum', config,
                                                                                   settings_file, second)
        tables = sorted(p.name for p in first.glob('*.csv'))
        assert tables
        for name in tables:
            assert (first / name).read_bytes() == (second / name).read_bytes()
