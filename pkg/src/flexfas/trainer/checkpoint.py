from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List

import torch

from .._utils.file_utils import atomic_write
from ..exceptions import CheckpointException, ConfigException, ErrorCode
from ..models.flex_model import FlexModel, ModelConfig, build_model
from .config import TrainConfig, DTYPES
from .loop import TrainResult

CHECKPOINT_FORMAT = 'flexfas-checkpoint'
CHECKPOINT_VERSION = 1
CHECKPOINT_SUFFIX = '.ckpt'


@dataclass
class Checkpoint:
    model: FlexModel
    model_config: ModelConfig
    train_config: TrainConfig
    config_hash: str = ''
    protocol: str | None = None
    loss_trace: List[float] = field(default_factory=list)
    lr_trace: List[float] = field(default_factory=list)
    rng_state: dict | None = None
    torch_rng_state: torch.Tensor | None = None


def save_checkpoint(path: str | Path, result: TrainResult, train_config: TrainConfig,
                    config_hash: str = '', protocol: str | None = None):
    payload: Dict[str, Any] = {
        'format': CHECKPOINT_FORMAT,
        'version': CHECKPOINT_VERSION,
        'model_config': result.model.config.to_dict(),
        'train_config': train_config.to_dict(),
        'state_dict': {k: v.detach().cpu() for k, v in result.model.state_dict().items()},
        'rng_state': result.rng_state,
        'torch_rng_state': result.torch_rng_state,
        'config_hash': config_hash,
        'protocol': protocol,
        'loss_trace': list(result.loss_trace),
        'lr_trace': list(result.lr_trace),
    }
    atomic_write(path, lambda tmp: torch.save(payload, tmp))


def load_checkpoint(path: str | Path, expected_model_config: ModelConfig | None = None) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointException('file not found', str(path), ErrorCode.FILE_NOT_FOUND)
    try:
        payload = torch.load(path, map_location='cpu', weights_only=True)
    except Exception as e:
        raise CheckpointException(f'unreadable container ({e})', str(path))

    if not isinstance(payload, dict) or payload.get('format') != CHECKPOINT_FORMAT:
        raise CheckpointException('not a flexfas checkpoint', str(path))
    if payload.get('version') != CHECKPOINT_VERSION:
        raise CheckpointException(f'version {payload.get("version")} is not supported '
                                  f'(expected {CHECKPOINT_VERSION})', str(path))
    try:
        model_config = ModelConfig.from_dict(payload['model_config'])
        train_config = TrainConfig.from_dict(payload['train_config'])
    except (KeyError, TypeError, ValueError, ConfigException) as e:
        raise CheckpointException(f'config echo is invalid ({e})', str(path))

    if expected_model_config is not None and model_config != expected_model_config:
        raise CheckpointException(f'model config {model_config.to_dict()} does not match the run config '
                                  f'{expected_model_config.to_dict()}', str(path))

    model = build_model(model_config, dtype=DTYPES[train_config.dtype])
    try:
        model.load_state_dict(payload['state_dict'])
    except (KeyError, RuntimeError) as e:
        raise CheckpointException(f'parameters do not fit the model ({e})', str(path))
    model.eval()

    return Checkpoint(
        model=model,
        model_config=model_config,
        train_config=train_config,
        config_hash=payload.get('config_hash', ''),
        protocol=payload.get('protocol'),
        loss_trace=list(payload.get('loss_trace', [])),
        lr_trace=list(payload.get('lr_trace', [])),
        rng_state=payload.get('rng_state'),
        torch_rng_state=payload.get('torch_rng_state'),
    )
