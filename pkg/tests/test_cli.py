import json

import pytest

from pid.builtin_systems import JOINMEET_K3, JOINMEET_K4
from pid.channels import Channel
from pid.cli import EXIT_FALSIFIED, EXIT_INPUT, EXIT_OK, EXIT_UNKNOWN, main, resolve_seed
from pid.distfile import format_channels


@pytest.fixture
def joinmeet_file(tmp_path):
    path = tmp_path / "joinmeet.txt"
    channels = {'K3': Channel.from_rows(JOINMEET_K3), 'K4': Channel.from_rows(JOINMEET_K4)}
    path.write_text(format_channels(channels), encoding='utf-8')
    return str(path)


def test_examples_prints_distribution(capsys):
    assert main(['examples', 'and']) == EXIT_OK
    out = capsys.readouterr().out
    assert "@vars\tT\tY1\tY2" in out
    assert "1\t1\t1\t0.25" in out


def test_examples_writes_file(tmp_path):
    path = tmp_path / "sum.txt"
    assert main(['examples', 'sum', '--out', str(path)]) == EXIT_OK
    assert main(['decompose', str(path), '--measure', 'mmi']) == EXIT_OK


def test_unknown_example_is_an_input_error():
    assert main(['examples', 'xor']) == EXIT_INPUT


def test_decompose_json(capsys, monkeypatch):
    monkeypatch.delenv('PID_SEED', raising=False)
    assert main(['decompose', '--example', 'and', '--measure', 'mmi', '--json']) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    row = payload['rows'][0]
    assert row['measure'] == 'mmi'
    assert row['R'] == pytest.approx(0.311, abs=1e-3)
    assert row['published'] == 0.311
    assert payload['flags'] == {'mmi': 'exact'}
    assert payload['metadata']['seed'] == 0


def test_decompose_is_deterministic(capsys):
    argv = ['decompose', '--example', 'cex1', '--measure', 'mc', '--json', '--starts', '2', '--grid', '5',
            '--seed', '4']
    assert main(argv) == EXIT_OK
    first = capsys.readouterr().out
    assert main(argv) == EXIT_OK
    assert capsys.readouterr().out == first


def test_decompose_single_source_file(tmp_path, capsys):
    path = tmp_path / "single.txt"
    path.write_text("@vars\tT\tY\n0\t0\t0.5\n1\t1\t0.5\n", encoding='utf-8')
    assert main(['decompose', str(path), '--measure', 'mmi', '--json']) == EXIT_OK
    row = json.loads(capsys.readouterr().out)['rows'][0]
    assert row['R'] == pytest.approx(1.0)
    assert row['U1'] is None and row['S'] is None


def test_decompose_needs_an_input():
    assert main(['decompose']) == EXIT_INPUT


def test_decompose_malformed_file(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("@vars T Y\n0 0 0.3\n", encoding='utf-8')
    assert main(['decompose', str(path)]) == EXIT_INPUT


def test_decompose_to_excel(tmp_path):
    path = tmp_path / "out.xlsx"
    assert main(['decompose', '--example', 'unq', '--measure', 'gh', '--xlsx', str(path)]) == EXIT_OK
    assert path.exists()


@pytest.mark.parametrize('relation, expected', [
    ('ds', EXIT_OK),
    ('s', EXIT_OK),
    ('d', EXIT_FALSIFIED),
    ('mc', EXIT_UNKNOWN),
])
def test_preorder_exit_codes(joinmeet_file, relation, expected):
    assert main(['preorder', joinmeet_file, '--relation', relation, '--a', 'K4', '--b', 'K3']) == expected


def test_preorder_json_witness(joinmeet_file, capsys):
    assert main(['preorder', joinmeet_file, '--relation', 's', '--a', 'K4', '--b', 'K3', '--json']) == EXIT_OK
    row = json.loads(capsys.readouterr().out)['rows'][0]
    assert row['status'] == 'Holds'
    assert row['witness'] == [[1, 2]]


def test_preorder_json_counterexample(joinmeet_file, capsys):
    assert main(['preorder', joinmeet_file, '--relation', 'mc', '--a', 'K3', '--b', 'K4', '--json']) == EXIT_FALSIFIED
    counterexample = json.loads(capsys.readouterr().out)['rows'][0]['counterexample']
    assert counterexample['I_W'] > counterexample['I_V']


def test_preorder_unknown_channel(joinmeet_file):
    assert main(['preorder', joinmeet_file, '--a', 'K9']) == EXIT_INPUT


def test_preorder_missing_file(tmp_path):
    assert main(['preorder', str(tmp_path / "none.txt")]) == EXIT_INPUT


def test_axioms_command(capsys):
    assert main(['axioms', '--measure', 'mmi', '--trials', '5', '--json']) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload['metadata']['violations'] == 0


def test_bad_option_value():
    assert main(['axioms', '--trials', '0']) == EXIT_INPUT
    with pytest.raises(SystemExit):
        main(['decompose', '--measure', 'xyz'])


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv('PID_SEED', '5')
    assert resolve_seed(None) == 5
    assert resolve_seed(2) == 2
    monkeypatch.setenv('PID_SEED', 'abc')
    assert resolve_seed(None) == 0


def test_decompose_reports_lowered_sampling_resolution(capsys):
    argv = ['decompose', '--example', 'copy-target', '--measure', 'ln', '--json', '--starts', '1']
    assert main(argv) == EXIT_OK
    metadata = json.loads(capsys.readouterr().out)['metadata']
    assert metadata['grid_resolution'] == 10
    assert metadata['sampling']['ln']['grid_resolution'] == 9
