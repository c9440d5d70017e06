import json
import os

import pytest
import yaml

from config.config_loader import (
    COMMANDS,
    ExperimentManifest,
    get_default_manifest,
    load_manifest,
    validate_manifest,
)
from config.env_config import Settings, load_settings_from_env
from utils.errors import ManifestError


def manifest(**params):
    return {'command': 'bounds-table', 'seed': 1, 'params': params}


def test_load_json_and_yaml(tmp_path):
    data = manifest(model='rem', regime='high', ns=[8, 16], beta=0.3)
    json_path = tmp_path / 'm.json'
    json_path.write_text(json.dumps(data))
    yaml_path = tmp_path / 'm.yaml'
    yaml_path.write_text(yaml.safe_dump(data))
    assert load_manifest(json_path) == data
    assert load_manifest(yaml_path) == data


def test_load_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_manifest(tmp_path / 'missing.json')
    broken = tmp_path / 'broken.yaml'
    broken.write_text('command: [unclosed')
    with pytest.raises(ManifestError) as e:
        load_manifest(broken)
    assert e.value.path == '<root>'
    empty = tmp_path / 'empty.yaml'
    empty.write_text('')
    with pytest.raises(ManifestError) as e:
        load_manifest(empty)
    assert e.value.path == 'command'


@pytest.mark.parametrize('data, path', [
    ({'seed': 1}, 'command'),
    ({'command': 'nope', 'seed': 1}, 'command'),
    ({'command': 'ic-check'}, 'seed'),
    ({'command': 'ic-check', 'seed': -1}, 'seed'),
    ({'command': 'ic-check', 'seed': True}, 'seed'),
    (manifest(beta=-0.5), 'params.beta'),
    (manifest(ns=[8, 0]), 'params.ns[1]'),
    (manifest(ns=[]), 'params.ns'),
    (manifest(model='sk', regime='chatterjee'), 'params.regime'),
    (manifest(regime='logn'), 'params.regime'),
    (manifest(model='sk', n=30), 'params.n'),
    (manifest(T=-1.0), 'params.T'),
    (manifest(kind='L'), 'params.kind'),
    ({'command': 'ic-check', 'seed': 1, 'params': {'beta': 'sqrt_log_n'}}, 'params.beta'),
    ({'command': 'ic-check', 'seed': 1, 'grid': {'kind': 'explicit', 'points': [0.0, 2.0, 1.0]}}, 'grid.points'),
    ({'command': 'ic-check', 'seed': 1, 'grid': {'kind': 'spiral'}}, 'grid.kind'),
    ({'command': 'ic-check', 'seed': 1, 'estimator': {'draws': 10}}, 'estimator.draws'),
    ({'command': 'ic-check', 'seed': 1, 'mehler': {'antithetic': 'yes'}}, 'mehler.antithetic'),
    ({'command': 'ic-check', 'seed': 1, 'output': {'dir': 'x', 'format': 'xml'}}, 'output'),
])
def test_validation_names_the_offending_entry(data, path):
    with pytest.raises(ManifestError) as e:
        validate_manifest(data)
    assert e.value.path == path


def test_sqrt_log_n_beta_is_accepted_for_bounds_tables():
    validate_manifest(manifest(model='rem', regime='low', ns=[16, 64], beta='sqrt_log_n'))


@pytest.mark.parametrize('command', COMMANDS)
def test_default_manifests_validate(command):
    data = get_default_manifest(command, seed=3)
    m = ExperimentManifest.from_dict(data)
    assert m.command == command and m.seed == 3
    assert 'output_dir' not in m.to_dict()


def test_manifest_keeps_output_dir_out_of_the_report():
    data = dict(get_default_manifest('simplex-lemma'), output={'dir': '/tmp/out'})
    m = ExperimentManifest.from_dict(data)
    assert m.output_dir == '/tmp/out'
    assert set(m.to_dict()) == {'command', 'seed', 'params', 'grid', 'estimator', 'mehler', 'version'}


def test_settings_from_environment(clean_env, mocker):
    assert load_settings_from_env() == Settings()
    mocker.patch.dict(os.environ, {'LAB_SEED': '42', 'LAB_THREADS': '3', 'LAB_OUTPUT_DIR': 'out',
                                   'LOG_LEVEL': 'DEBUG', 'LAB_METRICS_FILE': 'm.prom'})
    settings = load_settings_from_env()
    assert (settings.seed, settings.threads, settings.output_dir) == (42, 3, 'out')
    assert settings.logging_config()['level'] == 'DEBUG'
    assert settings.metrics_file == 'm.prom'


@pytest.mark.parametrize('env', [{'LAB_SEED': 'abc'}, {'LAB_THREADS': '0'}, {'LAB_SEED': str(2 ** 64)}])
def test_bad_environment(clean_env, mocker, env):
    mocker.patch.dict(os.environ, env)
    with pytest.raises(ValueError):
        load_settings_from_env()
