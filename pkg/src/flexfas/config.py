"""
Run configuration files.

A run is described by one YAML file whose keys are published in `SCHEMA`. Loading validates every
key before any work starts, fills in defaults and resolves the seeds: per-component seeds left
null inherit the top-level `seed`, which `--seed` or the FLEXFAS_SEED variable can replace.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Tuple

import yaml

from ._global_settings import SETTINGS
from ._logger import LOGGER
from ._utils.dict_utils import options_with_default, deep_copy
from ._utils.file_utils import read_and_close_file, sha256_of_obj
from ._utils.str_utils import did_you_mean
from ._utils.typing_utils import isinstance_, type_name
from .augment import DropModalConfig
from .exceptions import ConfigException, ErrorCode, FlexFasException
from .metrics import ThresholdRule
from .models._model_info import DEFAULT_OPTIMIZER
from .models.flex_model import BranchConfig, ModelConfig
from .models.fusion import FusionKind
from .models.heads import HeadConfig, HeadKind
from .models.model_registry import canonical_arch, encoder_list
from .protocols.protocol import ProtocolId, ProtocolSpec, RunMode, get_protocols
from .synthgen import SynthConfig, MANIFEST_NAME
from .trainer.config import TrainConfig, DTYPES


@dataclass(frozen=True)
class Option:
    type: Any
    default: Any
    choices: Tuple[Any, ...] | None = None


SCHEMA: Dict[str, Any] = {
    'seed': Option(int, 0),
    'output_dir': Option(str, 'runs/default'),
    'mode': Option(str, 'unified', tuple(m.value for m in RunMode)),
    'protocols': Option(List[str], [p.value for p in ProtocolId]),
    'manifests': {
        'train': Option(str | None, None),
        'test': Option(str | None, None),
    },
    'model': {
        'arch': Option(str, 'toy_cnn'),
        'shared': Option(bool, True),
        'feature_channels': Option(int, 32),
        'image_size': Option(Tuple[int, int], [32, 32]),
        'fusion': Option(str, 'concat', tuple(k.value for k in FusionKind)),
        'se_reduction': Option(int, 8),
        'head': Option(str, 'binary_logit', tuple(k.value for k in HeadKind)),
        'map_size': Option(Tuple[int, int] | None, None),
    },
    'trainer': {
        'optimizer': Option(str | None, None, ('adam', 'adamw', None)),
        'learning_rate': Option(float | None, None),
        'epochs': Option(int, 10),
        'lr_halving_epoch': Option(int, 7),
        'batch_size': Option(int, 32),
        'grad_clip_norm': Option(float | None, None),
        'dtype': Option(str, 'float32', tuple(DTYPES)),
        'seed': Option(int | None, None),
    },
    'dropmodal': {
        'enabled': Option(bool, True),
        'p_depth': Option(float, 0.3),
        'p_ir': Option(float, 0.3),
        'seed': Option(int | None, None),
    },
    'synth': {
        'n_subjects': Option(int, 200),
        'frames_per_subject': Option(int, 4),
        'image_size': Option(Tuple[int, int], [32, 32]),
        'separability': {
            'rgb': Option(float, 1.5),
            'depth': Option(float, 3.0),
            'ir': Option(float, 0.5),
        },
        'noise_sigma': Option(float, 1.0),
        'attack_ratio': Option(float, 0.5),
        'pai_types': Option(List[str], ['print', 'replay']),
        'dataset_id': Option(str, 'synth'),
        'seed': Option(int | None, None),
        'output_dir': Option(str | None, None),
    },
    'eval': {
        'batch_size': Option(int, 64),
        'threshold_rule': Option(str | None, None, (None,) + tuple(r.value for r in ThresholdRule)),
    },
}


def schema_defaults(schema: Dict[str, Any] = SCHEMA) -> Dict[str, Any]:
    return {key: schema_defaults(value) if isinstance(value, dict) else _copy_value(value.default)
            for key, value in schema.items()}


def _copy_value(value):
    return list(value) if isinstance(value, list) else value


def validate_options(options: Dict[str, Any], schema: Dict[str, Any] = SCHEMA, prefix: str = ''):
    """Reject unknown keys, wrong types and values outside the allowed choices."""
    for key, value in options.items():
        dotted = f'{prefix}{key}'
        if key not in schema:
            raise ConfigException(dotted, 'unknown key', did_you_mean(str(key), schema.keys()))
        entry = schema[key]
        if isinstance(entry, dict):
            if not isinstance(value, dict):
                raise ConfigException(dotted, f'expected a section, got {type(value).__name__}')
            validate_options(value, entry, f'{dotted}.')
            continue
        if not isinstance_(value, entry.type):
            raise ConfigException(dotted, f'expected {type_name(entry.type)}, got {value!r}')
        if entry.choices is not None and value not in entry.choices:
            suggestion = did_you_mean(str(value), [c for c in entry.choices if c is not None])
            raise ConfigException(dotted, f'must be one of {[c for c in entry.choices]}, got {value!r}', suggestion)


def resolve_seed(config_seed: int, seed_override: int | None = None) -> int:
    """`--seed` beats FLEXFAS_SEED, which beats the file."""
    if seed_override is not None:
        return seed_override
    SETTINGS.reload_env()
    env_seed = SETTINGS.get('SEED_OVERRIDE')
    return env_seed if env_seed is not None else config_seed


class RunConfig:
    def __init__(self, options: Dict[str, Any], base_dir: str | Path = '.'):
        self.options = options
        self.base_dir = Path(base_dir)
        self.config_hash = sha256_of_obj(options)

    def __getitem__(self, key: str):
        return self.options[key]

    def path(self, raw: str) -> Path:
        path = Path(raw)
        return path if path.is_absolute() else self.base_dir / path

    @property
    def output_dir(self) -> Path:
        return self.path(self.options['output_dir'])

    @property
    def seed(self) -> int:
        return self.options['seed']

    @property
    def mode(self) -> RunMode:
        return RunMode.parse(self.options['mode'])

    @property
    def synth_dir(self) -> Path:
        return self.path(self.options['synth']['output_dir'])

    @property
    def train_manifest_path(self) -> Path:
        raw = self.options['manifests']['train']
        return self.path(raw) if raw is not None else self.synth_dir / MANIFEST_NAME

    @property
    def test_manifest_path(self) -> Path | None:
        raw = self.options['manifests']['test']
        return self.path(raw) if raw is not None else None

    def protocols(self) -> List[ProtocolSpec]:
        ids = []
        for raw in self.options['protocols']:
            try:
                ids.append(ProtocolId.parse(raw))
            except ValueError:
                raise ConfigException('protocols', f'unknown protocol {raw!r}',
                                      did_you_mean(raw.strip().upper(), [p.value for p in ProtocolId]))
        rule = self.options['eval']['threshold_rule']
        try:
            return get_protocols(ids, ThresholdRule.parse(rule) if rule else None)
        except FlexFasException as e:
            raise ConfigException('protocols', str(e))

    def model_config(self) -> ModelConfig:
        m = self.options['model']
        return ModelConfig(
            branch=BranchConfig(m['arch'], m['shared'], m['feature_channels'], tuple(m['image_size'])),
            fusion=FusionKind.parse(m['fusion']),
            se_reduction=m['se_reduction'],
            head=HeadConfig(HeadKind.parse(m['head']), tuple(m['map_size']) if m['map_size'] else None),
        )

    def dropmodal_config(self) -> DropModalConfig | None:
        d = self.options['dropmodal']
        if not d['enabled']:
            return None
        return DropModalConfig(d['p_depth'], d['p_ir'], d['seed'])

    def train_config(self) -> TrainConfig:
        t = self.options['trainer']
        return TrainConfig(
            optimizer=t['optimizer'],
            learning_rate=t['learning_rate'],
            epochs=t['epochs'],
            lr_halving_epoch=t['lr_halving_epoch'],
            batch_size=t['batch_size'],
            seed=t['seed'],
            dropmodal=self.dropmodal_config(),
            grad_clip_norm=t['grad_clip_norm'],
            dtype=t['dtype'],
        )

    def synth_config(self) -> SynthConfig:
        s = self.options['synth']
        return SynthConfig(
            n_subjects=s['n_subjects'],
            frames_per_subject=s['frames_per_subject'],
            image_size=tuple(s['image_size']),
            separability=dict(s['separability']),
            noise_sigma=s['noise_sigma'],
            attack_ratio=s['attack_ratio'],
            pai_types=tuple(s['pai_types']),
            seed=s['seed'],
            dataset_id=s['dataset_id'],
        )


def _resolve(options: Dict[str, Any], seed_override: int | None) -> Dict[str, Any]:
    options['seed'] = resolve_seed(options['seed'], seed_override)
    if options['seed'] < 0:
        raise ConfigException('seed', f'must be >= 0, got {options["seed"]}')
    for section in ('trainer', 'dropmodal', 'synth'):
        if options[section]['seed'] is None:
            options[section]['seed'] = options['seed']

    try:
        arch = canonical_arch(options['model']['arch'])
    except ValueError as e:
        raise ConfigException('model.arch', f'{e} Known: {encoder_list()}')
    options['model']['arch'] = arch
    optimizer, lr = DEFAULT_OPTIMIZER[arch]
    if options['trainer']['optimizer'] is None:
        options['trainer']['optimizer'] = optimizer
    if options['trainer']['learning_rate'] is None:
        options['trainer']['learning_rate'] = lr
    if options['synth']['output_dir'] is None:
        options['synth']['output_dir'] = str(Path(options['output_dir']) / 'data')
    return options


def build_run_config(raw: Dict[str, Any] | None, base_dir: str | Path = '.',
                     seed_override: int | None = None) -> RunConfig:
    raw = raw if raw is not None else {}
    if not isinstance(raw, dict):
        raise ConfigException('<root>', f'expected a mapping of sections, got {type(raw).__name__}')
    validate_options(raw)
    options = _resolve(options_with_default(deep_copy(raw), schema_defaults()), seed_override)
    config = RunConfig(options, base_dir)
    # Build every typed config once so value errors surface before any work starts.
    for section, build in (('model', config.model_config), ('trainer', config.train_config),
                           ('synth', config.synth_config), ('protocols', config.protocols)):
        try:
            build()
        except ValueError as e:
            raise ConfigException(section, str(e))
    LOGGER.debug(f'Resolved config {config.config_hash[:12]}.')
    return config


def load_config(path: str | Path, seed_override: int | None = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise FlexFasException(ErrorCode.FILE_NOT_FOUND, f'Config file {path} not found.')
    try:
        raw = yaml.safe_load(read_and_close_file(path))
    except yaml.YAMLError as e:
        raise ConfigException('<root>', f'not valid YAML ({e})')
    return build_run_config(raw, path.parent, seed_override)
