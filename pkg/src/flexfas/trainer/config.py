from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Mapping

import torch

from ..augment import DropModalConfig
from ..exceptions import ConfigException

DTYPES = {
    'float32': torch.float32,
    'float64': torch.float64,
}


class OptimizerKind(Enum):
    ADAM = 'adam'
    ADAMW = 'adamw'

    @classmethod
    def parse(cls, raw: 'str | OptimizerKind') -> 'OptimizerKind':
        if isinstance(raw, OptimizerKind):
            return raw
        return cls(raw.strip().lower())


@dataclass(frozen=True)
class TrainConfig:
    optimizer: OptimizerKind = OptimizerKind.ADAM
    learning_rate: float = 1e-3
    epochs: int = 10
    lr_halving_epoch: int = 7
    batch_size: int = 32
    seed: int = 0
    dropmodal: DropModalConfig | None = None
    grad_clip_norm: float | None = None
    dtype: str = 'float32'

    def __post_init__(self):
        object.__setattr__(self, 'optimizer', OptimizerKind.parse(self.optimizer))
        if self.epochs < 1:
            raise ConfigException('trainer.epochs', f'must be >= 1, got {self.epochs}')
        if not 1 <= self.lr_halving_epoch <= self.epochs:
            raise ConfigException('trainer.lr_halving_epoch',
                                  f'must lie in [1, {self.epochs}], got {self.lr_halving_epoch}')
        # Zero is accepted: it freezes the parameters, which makes a useful control run.
        if self.learning_rate < 0:
            raise ConfigException('trainer.learning_rate', f'must be >= 0, got {self.learning_rate}')
        # Batch norm needs two samples per training batch.
        if self.batch_size < 2:
            raise ConfigException('trainer.batch_size', f'must be >= 2, got {self.batch_size}')
        if self.grad_clip_norm is not None and self.grad_clip_norm <= 0:
            raise ConfigException('trainer.grad_clip_norm', f'must be > 0, got {self.grad_clip_norm}')
        if self.dtype not in DTYPES:
            raise ConfigException('trainer.dtype', f'must be one of {sorted(DTYPES)}, got {self.dtype}')

    @property
    def torch_dtype(self) -> torch.dtype:
        return DTYPES[self.dtype]

    def to_dict(self) -> Dict[str, Any]:
        dropmodal = None
        if self.dropmodal is not None:
            dropmodal = {'p_depth': self.dropmodal.p_depth, 'p_ir': self.dropmodal.p_ir, 'seed': self.dropmodal.seed}
        return {
            'optimizer': self.optimizer.value,
            'learning_rate': self.learning_rate,
            'epochs': self.epochs,
            'lr_halving_epoch': self.lr_halving_epoch,
            'batch_size': self.batch_size,
            'seed': self.seed,
            'dropmodal': dropmodal,
            'grad_clip_norm': self.grad_clip_norm,
            'dtype': self.dtype,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> 'TrainConfig':
        d = dict(d)
        if d.get('dropmodal') is not None:
            d['dropmodal'] = DropModalConfig(**d['dropmodal'])
        return cls(**d)
