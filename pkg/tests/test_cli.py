import json
import math

import numpy as np
import pytest

from cli import commands
from cli.commands import CommandResult, grid_with
from cli.reports import render_body, to_jsonable, write_csv_report, write_json_report
from cli.runner import EXIT_ERROR, EXIT_OK, EXIT_VIOLATED, build_parser, run
from criteria.report import InequalityReport
from semigroup.grid import TimeGrid
from stats.estimate import EstimateWithCI


@pytest.fixture(autouse=True)
def quiet_logging(mocker, clean_env):
    # run() reconfigures the root logger; keep pytest's capture handlers in place
    return mocker.patch('cli.runner.setup_logging')


def read_report(path):
    with open(path, encoding='utf-8') as f:
        return json.load(f)


def test_simplex_lemma_writes_both_reports(tmp_path):
    status = run(['simplex-lemma', '--trials', '40', '--seed', '7', '--out', str(tmp_path)])
    assert status == EXIT_OK
    doc = read_report(tmp_path / 'simplex_lemma.json')
    assert set(doc) == {'header', 'manifest', 'body'}
    assert doc['manifest']['seed'] == 7
    assert doc['manifest']['params']['trials'] == 40
    assert doc['header']['generator'].startswith('superconcentration-lab v')
    raw = (tmp_path / 'simplex_lemma.csv').read_bytes()
    assert raw.startswith(b'name,t,lhs,lhs_se,rhs,rhs_se,verdict\r\n')
    assert raw.count(b'\r\n') == 41


def test_reports_are_reproducible(tmp_path):
    args = ['bounds-table', '--model', 'rem', '--regime', 'high', '--n', '8,16', '--beta', '0.3',
            '--samples', '512', '--batches', '8']
    first = run(args + ['--out', str(tmp_path / 'a'), '--threads', '1'])
    second = run(args + ['--out', str(tmp_path / 'b'), '--threads', '4'])
    assert first == second
    a = read_report(tmp_path / 'a' / 'bounds_table.json')
    b = read_report(tmp_path / 'b' / 'bounds_table.json')
    errMsg = "same manifest and seed must give the same body whatever the thread count"
    assert render_body(a['manifest'], a['body']) == render_body(b['manifest'], b['body']), errMsg
    assert (tmp_path / 'a' / 'bounds_table.csv').read_bytes() == (tmp_path / 'b' / 'bounds_table.csv').read_bytes()
    assert [row['n'] for row in a['body']['rows']] == [8, 16]


def test_manifest_run(tmp_path):
    path = tmp_path / 'exp.yaml'
    path.write_text('command: simplex-lemma\nseed: 3\nparams:\n  trials: 10\n')
    assert run(['run', '--manifest', str(path), '--out', str(tmp_path)]) == EXIT_OK
    assert read_report(tmp_path / 'simplex_lemma.json')['manifest']['params'] == {'trials': 10}
    # a flag overrides the manifest
    assert run(['run', '--manifest', str(path), '--trials', '5', '--out', str(tmp_path)]) == EXIT_OK
    assert read_report(tmp_path / 'simplex_lemma.json')['manifest']['params']['trials'] == 5


@pytest.mark.parametrize('argv', [
    ['run'],
    ['bounds-table', '--beta', '-1'],
    ['ic-check', '--n', '4,8'],
    ['bounds-table', '--model', 'rem', '--regime', 'high', '--n', '8', '--beta', '0.9'],
    ['no-such-command'],
])
def test_usage_errors_exit_with_one(tmp_path, argv):
    assert run(argv + ['--out', str(tmp_path)]) == EXIT_ERROR


def test_manifest_for_another_command_is_rejected(tmp_path):
    path = tmp_path / 'gs.json'
    path.write_text(json.dumps({'command': 'ground-state', 'seed': 1}))
    assert run(['simplex-lemma', '--manifest', str(path), '--out', str(tmp_path)]) == EXIT_ERROR


def test_violation_exits_with_two(tmp_path, mocker):
    def broken(manifest, ctx):
        """Always violated."""
        report = InequalityReport.build('broken', [0.0], [EstimateWithCI.exact(2.0)], [EstimateWithCI.exact(1.0)])
        return CommandResult({'reports': [report]}, report.csv_rows(), reports=[report])

    mocker.patch.dict(commands.COMMAND_HANDLERS, {'simplex-lemma': broken})
    assert run(['simplex-lemma', '--out', str(tmp_path)]) == EXIT_VIOLATED
    assert b'violated' in (tmp_path / 'simplex_lemma.csv').read_bytes()


def test_partial_bound_from_given_values(tmp_path):
    status = run(['partial-bound', '--i0', '1.0', '--it', repr(math.exp(-2.0)), '--T', '1.0',
                  '--out', str(tmp_path)])
    assert status == EXIT_OK
    body = read_report(tmp_path / 'partial_bound.json')['body']
    assert body['bound']['value'] == pytest.approx(1.0, rel=1e-12)


def test_metrics_file_is_written(tmp_path):
    metrics = tmp_path / 'lab.prom'
    run(['simplex-lemma', '--trials', '5', '--out', str(tmp_path), '--metrics-file', str(metrics)])
    text = metrics.read_text()
    assert 'superconcentration_last_exit_status' in text
    assert 'superconcentration_verdicts_total' in text


def test_cd_check_small_run(tmp_path):
    status = run(['cd-check', '--n', '3', '--beta', '0.8', '--inner-samples', '8', '--outer-samples', '64',
                  '--batches', '8', '--grid-points', '5', '--t-max', '2', '--out', str(tmp_path)])
    assert status in (EXIT_OK, EXIT_VIOLATED)
    rows = (tmp_path / 'cd_check.csv').read_text().splitlines()
    assert len(rows) == 1 + 5


def test_version_flag(capsys):
    assert run(['--version']) == EXIT_OK
    assert 'superconcentration-lab' in capsys.readouterr().out


def test_parser_lists_every_command():
    parser = build_parser()
    for command in commands.COMMAND_HANDLERS:
        assert parser.parse_args([command]).command == command


def test_grid_with_adds_times():
    grid = grid_with(TimeGrid.uniform(2.0, 3), [0.7, 3.0])
    assert grid.points == (0.0, 0.7, 1.0, 2.0, 3.0)
    assert grid.tail_T == 3.0


def test_jsonable_and_csv_cells(tmp_path):
    data = to_jsonable({'a': np.float64(np.nan), 'b': np.arange(3), 'c': (np.bool_(True), np.int64(4)),
                        'd': EstimateWithCI.exact(1.5)})
    assert data == {'a': None, 'b': [0, 1, 2], 'c': [True, 4],
                    'd': {'value': 1.5, 'stderr': 0.0, 'n_samples': 0, 'n_batches': 0,
                          'seed_fingerprint': 0, 'flags': []}}
    path = write_csv_report(tmp_path / 'x.csv', [{'x': 0.1, 'y': float('inf'), 'z': 'a,b'}], ('x', 'y', 'z'))
    assert path.read_bytes() == b'x,y,z\r\n0.1,,"a,b"\r\n'
    out = write_json_report(tmp_path / 'r.json', {'command': 'x'}, {'v': float('nan')})
    assert read_report(out)['body'] == {'v': None}


def test_ground_state_reports_both_sides_of_the_sandwich(tmp_path):
    status = run(['ground-state', '--n', '5', '--beta', '0.5', '--samples', '64', '--batches', '8',
                  '--out', str(tmp_path)])
    assert status == EXIT_OK
    body = read_report(tmp_path / 'ground_state.json')['body']
    names = [r['name'] for r in body['reports']]
    assert names == ['ground_state', 'sandwich_lower', 'sandwich_upper']
    assert 0.0 < body['min_gap'] <= body['max_gap'] <= body['gap_bound']
    lower = body['reports'][1]['points'][0]
    assert lower['margin'] >= 0 and lower['verdict'] == 'holds'
