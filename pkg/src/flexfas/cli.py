import argparse
import sys
from pathlib import Path
from typing import Dict, List, Sequence

from . import _logger
from ._logger import LOGGER
from ._utils.file_utils import atomic_write_json, atomic_write_text, sha256_of_file
from .config import RunConfig, load_config
from .core.records import write_score_file
from .efficiency import cost_report, plan_cost
from .exceptions import FlexFasException, ErrorCode
from .models.flex_model import FlexModel, build_model
from .protocols.manifest import load_manifest
from .protocols.protocol import RunMode
from .protocols.runner import RunPlan, evaluate_phase, train_phase
from .synthgen import generate, write_dataset
from .trainer.checkpoint import CHECKPOINT_SUFFIX, load_checkpoint, save_checkpoint

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

_USAGE_CODES = {ErrorCode.CONFIG_INVALID}


class _UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f'{self.prog}: {message}')


def _plan(cfg: RunConfig, with_test: bool) -> RunPlan:
    test_path = cfg.test_manifest_path if with_test else None
    return RunPlan(
        mode=cfg.mode,
        protocols=tuple(cfg.protocols()),
        model_config=cfg.model_config(),
        train_config=cfg.train_config(),
        train_manifest=load_manifest(cfg.train_manifest_path),
        test_manifest=load_manifest(test_path) if test_path is not None else None,
        eval_batch_size=cfg['eval']['batch_size'],
    )


def cmd_synth(config_path: str | Path, seed: int | None = None) -> Path:
    cfg = load_config(config_path, seed)
    samples, manifest = generate(cfg.synth_config())
    manifest_path = write_dataset(samples, manifest, cfg.synth_dir)
    atomic_write_json(cfg.synth_dir / 'synth.json', {
        'config_hash': cfg.config_hash,
        'n_samples': len(samples),
        'manifest_sha256': sha256_of_file(manifest_path),
    })
    return manifest_path


def cmd_train(config_path: str | Path, seed: int | None = None) -> List[Path]:
    cfg = load_config(config_path, seed)
    plan = _plan(cfg, with_test=False)
    trained = train_phase(plan)

    written = []
    for key, result in trained.items():
        path = cfg.output_dir / 'checkpoints' / f'{key}{CHECKPOINT_SUFFIX}'
        save_checkpoint(path, result, plan.train_config, cfg.config_hash,
                        None if plan.mode is RunMode.UNIFIED else key)
        atomic_write_text(cfg.output_dir / 'logs' / f'{key}_loss.tsv',
                          f'# config_hash={cfg.config_hash}\n' + result.loss_log())
        written.append(path)
        LOGGER.info(f'Saved {path}.')
    return written


def _load_models(cfg: RunConfig, plan: RunPlan, checkpoint: str | Path | None) -> Dict[str, FlexModel]:
    """A checkpoint file serves every protocol; a directory holds the files `train` wrote."""
    location = Path(checkpoint) if checkpoint is not None else cfg.output_dir / 'checkpoints'
    expected = plan.model_config
    if location.is_dir():
        return {key: load_checkpoint(location / f'{key}{CHECKPOINT_SUFFIX}', expected).model
                for key in plan.model_keys()}
    model = load_checkpoint(location, expected).model
    return {key: model for key in plan.model_keys()}


def cmd_eval(config_path: str | Path, checkpoint: str | Path | None = None, seed: int | None = None) -> Path:
    cfg = load_config(config_path, seed)
    plan = _plan(cfg, with_test=True)
    result = evaluate_phase(plan, _load_models(cfg, plan, checkpoint))

    reports_dir = cfg.output_dir / 'reports'
    scores_dir = cfg.output_dir / 'scores'
    summary = {}
    for protocol in plan.effective_protocols():
        report = result.reports[protocol.id]
        payload = report.to_json()
        payload.update({
            'protocol': protocol.id.value,
            'eval_modalities': sorted(m.value for m in protocol.eval_modalities),
            'mode': plan.mode.value,
            'config_hash': cfg.config_hash,
        })
        atomic_write_json(reports_dir / f'{protocol.id.value}.json', payload)
        val, test = result.scores[protocol.id]
        write_score_file(scores_dir / f'{protocol.id.value}_val.tsv', val)
        write_score_file(scores_dir / f'{protocol.id.value}_test.tsv', test)
        summary[protocol.id.value] = payload

    summary_path = reports_dir / 'summary.json'
    atomic_write_json(summary_path, {
        'config_hash': cfg.config_hash,
        'mode': plan.mode.value,
        'cross_dataset': plan.is_cross_dataset,
        'reports': summary,
    })
    return summary_path


def cmd_cost(config_path: str | Path, seed: int | None = None) -> dict:
    cfg = load_config(config_path, seed)
    model_config = cfg.model_config()
    report = cost_report(build_model(model_config, cfg.seed))
    protocols = cfg.protocols()
    payload = report.to_json()
    payload.update({
        'config_hash': cfg.config_hash,
        'input_size': list(model_config.branch.image_size),
        'plans': {mode.value: plan_cost(model_config, mode, protocols).to_json() for mode in RunMode},
    })
    atomic_write_json(cfg.output_dir / 'cost.json', payload)
    return payload


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument('--config', required=True, help='run configuration (YAML)')
    common.add_argument('--seed', type=int, default=None, help='replace the top-level seed')
    common.add_argument('-v', '--verbose', action='store_true', help='log progress to stderr')

    parser = _ArgumentParser(prog='flexfas', description='Flexible-modal face anti-spoofing toolkit.')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=_ArgumentParser)
    sub.add_parser('synth', parents=[common], help='generate a synthetic dataset')
    sub.add_parser('train', parents=[common], help='train per the run mode')
    eval_parser = sub.add_parser('eval', parents=[common], help='evaluate checkpoints under every protocol')
    eval_parser.add_argument('--checkpoint', default=None, help='checkpoint file or directory')
    sub.add_parser('cost', parents=[common], help='count parameters and FLOPs')
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as e:
        print(f'error[USAGE]: {e}', file=sys.stderr)
        return EXIT_USAGE

    if args.verbose:
        _logger.set_verbose(True)
        LOGGER.attach_stderr_handler()

    try:
        if args.command == 'synth':
            print(cmd_synth(args.config, args.seed))
        elif args.command == 'train':
            for path in cmd_train(args.config, args.seed):
                print(path)
        elif args.command == 'eval':
            print(cmd_eval(args.config, args.checkpoint, args.seed))
        else:
            payload = cmd_cost(args.config, args.seed)
            print(f'params={payload["params"]} flops={payload["flops"]}')
            for mode, plan in payload['plans'].items():
                print(f'{mode}: total_params={plan["total_params"]} total_flops={plan["total_flops"]}')
    except FlexFasException as e:
        print(f'error{e}', file=sys.stderr)
        config_missing = e.code is ErrorCode.FILE_NOT_FOUND and not Path(args.config).is_file()
        return EXIT_USAGE if e.code in _USAGE_CODES or config_missing else EXIT_RUNTIME
    except OSError as e:
        print(f'error[{ErrorCode.FILE_NOT_FOUND.value}]: {e}', file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK
