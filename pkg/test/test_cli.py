import importlib.util
import json
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from peierls_lab.classical.couplings import CouplingField, DistributionSpec, sample_couplings
from peierls_lab.cli.config import (
    ENV_KEYS, ExperimentConfig, load_experiment_config, parse_value, resolve_key, validate_file,
)
from peierls_lab.cli.experiments import EXPERIMENTS, experiment_names, hamiltonian_from, lattice_from
from peierls_lab.cli.main import main, parse_overrides, run
from peierls_lab.errors import ConfigValidationError, LatticeError, UnknownExperimentError
from peierls_lab.lattice.torus import build_torus

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for var in list(ENV_KEYS) + ['PEIERLS_LAB_CONFIG', 'PEIERLS_LAB_LOG_LEVEL']:
        monkeypatch.delenv(var, raising=False)


def load_script(name, attr):
    spec = importlib.util.spec_from_file_location(name, ROOT / 'scripts' / f'{name}.py')
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return getattr(module, attr)


def load_inspector():
    return load_script('inspect_run', 'RunInspector')


def write_config(path, data):
    path.write_text(json.dumps(data), encoding='utf-8')
    return str(path)


class TestOverrides:
    def test_parse(self):
        tokens = ['--eps', '0.1', '--model.J=2', '--order_parameter']
        assert parse_overrides(tokens) == {'eps': '0.1', 'model.J': '2', 'order_parameter': 'true'}

    def test_stray_value(self):
        with pytest.raises(ConfigValidationError):
            parse_overrides(['eps', '0.1'])

    def test_keys_and_values(self):
        assert resolve_key('L0') == 'lattice.L0'
        assert resolve_key('--h') == 'model.h_long'
        assert resolve_key('betas') == 'params.betas'
        assert resolve_key('model.eps') == 'model.eps'
        assert parse_value('0.1') == 0.1
        assert parse_value('[1, 2]') == [1, 2]
        assert parse_value('runs/a') == 'runs/a'


class TestConfig:
    def test_defaults(self):
        config = load_experiment_config('pc-certify')
        assert config.lattice['L0'] == 4
        assert config.model['eps'] == 0.1
        assert config.validate(experiment_names()) == []

    def test_precedence(self, tmp_path, monkeypatch):
        path = write_config(tmp_path / 'c.json', {'model': {'eps': 0.2, 'J': 2.0}, 'seed': 3})
        monkeypatch.setenv('PEIERLS_LAB_SEED', '5')
        config = load_experiment_config('gibbs-bottleneck', path, {'eps': '0.4'},
                                        experiment_defaults=EXPERIMENTS['gibbs-bottleneck'].defaults)
        assert config.model['eps'] == 0.4
        assert config.model['J'] == 2.0
        assert config.seed == 5
        assert config.params['betas'] == [2.0, 4.0, 8.0, 16.0]

    def test_square_size_replaces_rectangle(self):
        config = load_experiment_config('ed-ssb', None, {'L0': '6'},
                                        experiment_defaults={'lattice': {'Lx': 4, 'Ly': 3}})
        assert config.lattice == {'L0': 6, 'Lx': None, 'Ly': None}

    def test_hash_ignores_placement(self):
        a = ExperimentConfig.from_dict({'experiment': 'pc-certify', 'output_dir': 'a', 'jobs': 1})
        b = ExperimentConfig.from_dict({'experiment': 'pc-certify', 'output_dir': 'b', 'jobs': 8})
        c = ExperimentConfig.from_dict({'experiment': 'pc-certify', 'seed': 1})
        assert a.hash == b.hash
        assert a.hash != c.hash
        assert len(a.hash) == 64

    def test_validation_names_fields(self):
        config = ExperimentConfig.from_dict({'experiment': 'pc-certify', 'lattice': {'L0': 5},
                                             'model': {'eps': -0.1}})
        errors = config.validate(experiment_names())
        assert any(e.startswith('lattice.L0') for e in errors)
        assert any(e.startswith('model.eps') for e in errors)

    def test_unknown_experiment_in_file(self, tmp_path):
        path = write_config(tmp_path / 'c.json', {'experiment': 'nope', 'colour': 'red'})
        errors = validate_file(path, experiment_names())
        assert any(e.startswith('experiment:') for e in errors)
        assert any(e.startswith('colour') for e in errors)

    def test_unreadable_file(self, tmp_path):
        assert validate_file(str(tmp_path / 'missing.json'))


class TestRun:
    def test_pc_certify(self, tmp_path):
        config = load_experiment_config('pc-certify', None, {'out': str(tmp_path)},
                                        experiment_defaults=EXPERIMENTS['pc-certify'].defaults)
        manifest = run(config)
        assert manifest.passed
        run_dir = Path(manifest.run_dir)
        assert run_dir.name == f"pc-certify-{config.hash[:12]}"
        for name in ('results.csv', 'report.json', 'manifest.json', 'certificates.jsonl'):
            assert (run_dir / name).exists()
        frame = pd.read_csv(run_dir / 'results.csv')
        assert (frame['config_hash'] == config.hash).all()
        report = json.loads((run_dir / 'report.json').read_text())
        assert report['passed'] is True
        assert report['report']['oracle_checked'] > 0
        assert report['report']['oracle_mismatches'] == 0
        assert set(manifest.stages) == {'experiment', 'write'}
        assert load_inspector()(str(run_dir)).run()

    def test_inspector_catches_tampering(self, tmp_path):
        config = load_experiment_config('pc-certify', None, {'out': str(tmp_path)})
        manifest = run(config)
        results = Path(manifest.run_dir) / 'results.csv'
        frame = pd.read_csv(results)
        frame['config_hash'] = 'x' * 64
        frame.to_csv(results, index=False)
        assert not load_inspector()(manifest.run_dir).run()

    def test_unknown_experiment(self):
        with pytest.raises(UnknownExperimentError):
            run(ExperimentConfig.from_dict({'experiment': 'nope'}))

    def test_invalid_config(self, tmp_path):
        config = load_experiment_config('pc-certify', None, {'out': str(tmp_path), 'R': '0'})
        with pytest.raises(ConfigValidationError):
            run(config)


class TestCouplingFiles:
    def make(self, tmp_path, monkeypatch, *extra):
        path = tmp_path / 'couplings.json'
        monkeypatch.setattr(sys, 'argv', ['make_couplings.py', '--L0', '4', '--kind', 'two_point', '--params',
                                          '{"J_good": 1.0, "J_bad": 0.1, "p": 0.3}', '--seed', '3',
                                          '--out', str(path), *extra])
        return load_script('make_couplings', 'main')(), path

    def test_script_writes_loadable_field(self, tmp_path, monkeypatch):
        rc, path = self.make(tmp_path, monkeypatch)
        assert rc == 0
        field = CouplingField.load(str(path))
        assert field.lattice == build_torus(4)
        assert set(np.unique(field.J)) <= {0.1, 1.0}
        assert field.spec.kind == 'two_point'
        again = sample_couplings(DistributionSpec.from_dict(field.spec.to_dict()), build_torus(4), seed=3)
        np.testing.assert_array_equal(again.J, field.J)

    def test_script_rejects_bad_distribution(self, tmp_path, monkeypatch):
        rc, path = self.make(tmp_path, monkeypatch, '--params', '{"J_good": 1.0}')
        assert rc == 1
        assert not path.exists()

    def test_run_reads_coupling_file(self, tmp_path, monkeypatch):
        _, path = self.make(tmp_path, monkeypatch)
        config = load_experiment_config('pc-certify', None, {'out': str(tmp_path), 'couplings': str(path)})
        assert config.validate(experiment_names()) == []
        H = hamiltonian_from(config, lattice_from(config))
        np.testing.assert_array_equal(H.J, CouplingField.load(str(path)).J)

    def test_coupling_file_for_other_lattice(self, tmp_path, monkeypatch):
        _, path = self.make(tmp_path, monkeypatch)
        config = load_experiment_config('pc-certify', None, {'L0': '6', 'couplings': str(path)})
        with pytest.raises(LatticeError):
            hamiltonian_from(config, lattice_from(config))


class TestMain:
    def test_list(self, capsys):
        assert main(['list']) == 0
        out = capsys.readouterr().out
        assert all(name in out for name in EXPERIMENTS)

    def test_validate(self, tmp_path):
        good = write_config(tmp_path / 'good.json', {'experiment': 'pc-certify', 'lattice': {'L0': 6}})
        bad = write_config(tmp_path / 'bad.json', {'lattice': {'L0': 5}})
        assert main(['validate', good]) == 0
        assert main(['validate', bad]) == 1

    def test_unknown_command(self):
        assert main(['nope']) == 1

    def test_run_exit_code(self, tmp_path):
        assert main(['pc-certify', '--out', str(tmp_path)]) == 0
        assert len(os.listdir(tmp_path)) == 1

    def test_failing_checks_exit_code(self, tmp_path):
        # Delta above what the uniform family can certify at occupancy 4/5
        assert main(['pc-certify', '--out', str(tmp_path), '--Delta', '0.9']) == 2
