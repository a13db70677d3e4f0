from dataclasses import dataclass, field
from typing import Iterable, List, Sequence

import numpy as np
import torch
from torch.optim.lr_scheduler import LambdaLR

from .._logger import LOGGER
from ..augment import DropModal
from ..core.modality import ModalityId, FULL_MODALITY_SET, Label, modality_set
from ..core.sample import ModalitySample
from ..exceptions import TrainingException, ErrorCode
from ..models.flex_model import FlexModel, loss
from ..protocols.manifest import DatasetManifest, load_samples
from ..protocols.protocol import Split
from .config import TrainConfig, OptimizerKind

LR_DECAY = 0.5


@dataclass
class TrainResult:
    model: FlexModel
    loss_trace: List[float] = field(default_factory=list)
    lr_trace: List[float] = field(default_factory=list)
    rng_state: dict | None = None
    torch_rng_state: torch.Tensor | None = None

    def loss_log(self) -> str:
        lines = [f'{epoch}\t{lr!r}\t{value!r}'
                 for epoch, (lr, value) in enumerate(zip(self.lr_trace, self.loss_trace), start=1)]
        return '\n'.join(lines) + '\n'


def make_optimizer(kind: OptimizerKind, params: Iterable[torch.nn.Parameter], lr: float) -> torch.optim.Optimizer:
    if kind is OptimizerKind.ADAMW:
        return torch.optim.AdamW(params, lr=lr)
    return torch.optim.Adam(params, lr=lr)


def halving_schedule(optimizer: torch.optim.Optimizer, lr_halving_epoch: int) -> LambdaLR:
    """Learning rate multiplied by 0.5 from the (1-based) epoch `lr_halving_epoch` on."""
    return LambdaLR(optimizer, lambda e: LR_DECAY if e >= lr_halving_epoch - 1 else 1.0)


def _batches(order: np.ndarray, batch_size: int) -> List[np.ndarray]:
    batches = [order[i:i + batch_size] for i in range(0, len(order), batch_size)]
    # Batch norm cannot train on a lone sample; fold it into the previous batch.
    if len(batches) > 1 and len(batches[-1]) == 1:
        batches[-2] = np.concatenate([batches[-2], batches.pop()])
    return batches


def _check_classes(samples: Sequence[ModalitySample]):
    labels = {s.label for s in samples}
    if labels != {Label.BONAFIDE, Label.ATTACK}:
        raise TrainingException(ErrorCode.ONE_CLASS_ONLY,
                                f'Training split needs both classes, got {sorted(l.value for l in labels)}.')


def train(model: FlexModel, data: DatasetManifest | Sequence[ModalitySample], tcfg: TrainConfig,
          train_modalities: Iterable[ModalityId] = FULL_MODALITY_SET) -> TrainResult:
    """
    Minibatch training on the TRAIN split of a manifest (or on an already loaded sample list).
    Modalities outside `train_modalities` are zeroed for every sample; DropModal, when configured,
    drops Depth and IR on top of that, per sample.
    """
    samples = load_samples(data, Split.TRAIN) if isinstance(data, DatasetManifest) else list(data)
    _check_classes(samples)
    train_modalities = modality_set(train_modalities)

    torch.manual_seed(tcfg.seed)
    rng = np.random.default_rng(tcfg.seed)
    dropper = DropModal(tcfg.dropmodal) if tcfg.dropmodal is not None else None

    model.to(tcfg.torch_dtype)
    model.train()
    optimizer = make_optimizer(tcfg.optimizer, model.parameters(), tcfg.learning_rate)
    scheduler = halving_schedule(optimizer, tcfg.lr_halving_epoch)
    result = TrainResult(model)

    for epoch in range(1, tcfg.epochs + 1):
        lr = optimizer.param_groups[0]['lr']
        total, seen = 0.0, 0
        for batch_idx, idx in enumerate(_batches(rng.permutation(len(samples)), tcfg.batch_size)):
            batch = [samples[i] for i in idx]
            if dropper is not None:
                actives = [train_modalities & dropper.draw() for _ in batch]
            else:
                actives = [train_modalities] * len(batch)

            batch_loss = loss(model, batch, actives)
            if not torch.isfinite(batch_loss):
                raise TrainingException(ErrorCode.NONFINITE_LOSS, f'Loss became {batch_loss.item()}',
                                        epoch, batch_idx)
            optimizer.zero_grad()
            batch_loss.backward()
            if tcfg.grad_clip_norm is not None:
                torch.nn.utils.clip_grad_norm_(model.parameters(), tcfg.grad_clip_norm)
            optimizer.step()

            total += batch_loss.item() * len(batch)
            seen += len(batch)

        mean_loss = total / seen
        result.loss_trace.append(mean_loss)
        result.lr_trace.append(lr)
        LOGGER.info(f'epoch {epoch}/{tcfg.epochs}', lr=lr, loss=mean_loss)
        scheduler.step()

    result.rng_state = rng.bit_generator.state
    result.torch_rng_state = torch.get_rng_state()
    return result
