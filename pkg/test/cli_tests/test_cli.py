"""
Tests for the synth/train/eval/cost command line
"""
import json

import pytest
import yaml

from src.flexfas.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from src.flexfas.core.records import read_score_file
from src.flexfas.metrics import ThresholdRule, build_report

PROTOCOL_NAMES = ['P1', 'P2', 'P3', 'P4']


def _options(mode='unified', **sections):
    options = {
        'seed': 0,
        'output_dir': 'run',
        'mode': mode,
        'model': {'arch': 'toy_cnn', 'feature_channels': 8, 'image_size': [8, 8]},
        'trainer': {'epochs': 2, 'lr_halving_epoch': 2, 'batch_size': 8},
        'synth': {'n_subjects': 10, 'frames_per_subject': 4, 'image_size': [8, 8]},
    }
    for section, values in sections.items():
        options.setdefault(section, {}).update(values)
    return options


def _write_config(directory, options=None, name='run.yaml'):
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / name
    path.write_text(yaml.safe_dump(options if options is not None else _options()))
    return str(path)


def _pipeline(directory, options=None):
    config = _write_config(directory, options)
    for command in ('synth', 'train', 'eval'):
        assert main([command, '--config', config]) == EXIT_OK
    return config


@pytest.fixture(scope='module')
def unified_run(tmp_path_factory):
    directory = tmp_path_factory.mktemp('unified')
    return directory, _pipeline(directory)


def test_synth_outputs(unified_run):
    directory, _ = unified_run
    data = directory / 'run' / 'data'
    assert (data / 'manifest.csv').is_file()
    assert any((data / 'train').iterdir())
    stamp = json.loads((data / 'synth.json').read_text())
    assert stamp['n_samples'] == 40


def test_synth_rerun_is_identical(tmp_path):
    config = _write_config(tmp_path)
    assert main(['synth', '--config', config]) == EXIT_OK
    first = json.loads((tmp_path / 'run' / 'data' / 'synth.json').read_text())
    assert main(['synth', '--config', config]) == EXIT_OK
    second = json.loads((tmp_path / 'run' / 'data' / 'synth.json').read_text())
    assert first == second


def test_unified_writes_one_checkpoint(unified_run):
    directory, _ = unified_run
    checkpoints = sorted(p.name for p in (directory / 'run' / 'checkpoints').iterdir())
    assert checkpoints == ['unified.ckpt']
    log = (directory / 'run' / 'logs' / 'unified_loss.tsv').read_text().splitlines()
    assert log[0].startswith('# config_hash=')
    assert len(log) == 3


def test_separate_writes_four_checkpoints(tmp_path):
    config = _write_config(tmp_path, _options('separate'))
    assert main(['synth', '--config', config]) == EXIT_OK
    assert main(['train', '--config', config]) == EXIT_OK
    checkpoints = sorted(p.name for p in (tmp_path / 'run' / 'checkpoints').iterdir())
    assert checkpoints == [f'{name}.ckpt' for name in PROTOCOL_NAMES]


def test_reports(unified_run):
    directory, _ = unified_run
    reports = directory / 'run' / 'reports'
    summary = json.loads((reports / 'summary.json').read_text())
    assert sorted(summary['reports']) == PROTOCOL_NAMES
    assert summary['cross_dataset'] is False
    for name in PROTOCOL_NAMES:
        report = json.loads((reports / f'{name}.json').read_text())
        assert report['acer'] == (report['apcer'] + report['bpcer']) / 2
        for key in ('eer', 'threshold', 'tpr_at_fpr_0.001', 'tpr_at_fpr_0.01'):
            assert key in report
        assert report['protocol'] == name
        assert report['config_hash'] == summary['config_hash']


def test_reports_match_score_files(unified_run):
    directory, _ = unified_run
    for name in PROTOCOL_NAMES:
        val = read_score_file(directory / 'run' / 'scores' / f'{name}_val.tsv')
        test = read_score_file(directory / 'run' / 'scores' / f'{name}_test.tsv')
        report = json.loads((directory / 'run' / 'reports' / f'{name}.json').read_text())
        recomputed = build_report(val, test, ThresholdRule.parse(report['threshold_rule'])).to_json()
        for key, value in recomputed.items():
            assert report[key] == value, key


def test_eval_twice_is_identical(unified_run):
    directory, config = unified_run
    path = directory / 'run' / 'reports' / 'P2.json'
    before = path.read_bytes()
    checkpoint = directory / 'run' / 'checkpoints' / 'unified.ckpt'
    assert main(['eval', '--config', config, '--checkpoint', str(checkpoint)]) == EXIT_OK
    assert path.read_bytes() == before


def test_end_to_end_determinism(unified_run, tmp_path):
    directory, _ = unified_run
    _pipeline(tmp_path)
    for name in PROTOCOL_NAMES + ['summary']:
        first = (directory / 'run' / 'reports' / f'{name}.json').read_bytes()
        assert (tmp_path / 'run' / 'reports' / f'{name}.json').read_bytes() == first


def test_cost(tmp_path, capsys):
    shared = _write_config(tmp_path, _options(), 'shared.yaml')
    unshared = _write_config(tmp_path, _options(model={'shared': False, 'feature_channels': 8}), 'unshared.yaml')
    assert main(['cost', '--config', shared]) == EXIT_OK
    out = capsys.readouterr().out
    assert 'params=' in out
    assert 'unified: total_params=' in out and 'total_flops=' in out
    shared_cost = json.loads((tmp_path / 'run' / 'cost.json').read_text())
    assert main(['cost', '--config', unshared]) == EXIT_OK
    unshared_cost = json.loads((tmp_path / 'run' / 'cost.json').read_text())

    for cost in (shared_cost, unshared_cost):
        assert cost['params'] == sum(part['params'] for part in cost['breakdown'].values())
        assert cost['flops'] == sum(part['flops'] for part in cost['breakdown'].values())
    assert shared_cost['flops'] == unshared_cost['flops']
    assert shared_cost['params'] < unshared_cost['params']
    plans = shared_cost['plans']
    assert plans['unified']['total_params'] < 0.5 * plans['separate']['total_params']
    assert plans['unified']['total_flops'] > plans['separate']['total_flops']
    assert set(plans['separate']['flops_per_protocol']) == set(PROTOCOL_NAMES)


def test_cost_params_ignore_seed(tmp_path):
    config = _write_config(tmp_path)
    assert main(['cost', '--config', config, '--seed', '1']) == EXIT_OK
    first = json.loads((tmp_path / 'run' / 'cost.json').read_text())['params']
    assert main(['cost', '--config', config, '--seed', '2']) == EXIT_OK
    assert json.loads((tmp_path / 'run' / 'cost.json').read_text())['params'] == first


def test_bad_key_is_a_usage_error(tmp_path, capsys):
    config = _write_config(tmp_path, _options(trainer={'epoch': 3}))
    assert main(['synth', '--config', config]) == EXIT_USAGE
    err = capsys.readouterr().err
    assert 'CONFIG_INVALID' in err
    assert 'trainer.epoch' in err
    assert not (tmp_path / 'run').exists()


def test_missing_config(tmp_path):
    assert main(['train', '--config', str(tmp_path / 'missing.yaml')]) == EXIT_USAGE


def test_missing_manifest(tmp_path, capsys):
    config = _write_config(tmp_path)
    assert main(['train', '--config', config]) == EXIT_RUNTIME
    assert 'FILE_NOT_FOUND' in capsys.readouterr().err


@pytest.mark.parametrize('argv', [[], ['train'], ['fit', '--config', 'x.yaml'], ['eval', '--config']])
def test_usage(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert 'error[USAGE]' in capsys.readouterr().err


def test_incompatible_checkpoint(unified_run, tmp_path, capsys):
    directory, _ = unified_run
    options = _options(model={'fusion': 'se'})
    options['manifests'] = {'train': str(directory / 'run' / 'data' / 'manifest.csv')}
    config = _write_config(tmp_path, options)
    checkpoint = directory / 'run' / 'checkpoints' / 'unified.ckpt'
    assert main(['eval', '--config', config, '--checkpoint', str(checkpoint)]) == EXIT_RUNTIME
    assert 'CHECKPOINT_INCOMPATIBLE' in capsys.readouterr().err
