from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from ..core.features import FeatureBundle
from ..core.modality import ModalityId, ALL_MODALITIES, FULL_MODALITY_SET, modality_set
from ..core.sample import ModalitySample
from ..exceptions import InvalidSampleException, TrainingException, ErrorCode
from .encoders import BranchEncoder, ENCODER_IN_CHANNELS
from .fusion import FusionKind, FusionConfig, FusionModule, build_fusion
from .heads import HeadConfig, HeadKind, build_head
from .model_registry import get_encoder_factory, canonical_arch

ActiveSet = Iterable[ModalityId]


@dataclass(frozen=True)
class BranchConfig:
    arch: str = 'toy_cnn'
    shared: bool = True
    feature_channels: int = 32
    image_size: Tuple[int, int] = (32, 32)

    def __post_init__(self):
        object.__setattr__(self, 'arch', canonical_arch(self.arch))
        object.__setattr__(self, 'image_size', tuple(int(s) for s in self.image_size))
        if self.feature_channels < 1:
            raise ValueError('feature_channels must be >= 1.')


@dataclass(frozen=True)
class ModelConfig:
    branch: BranchConfig = field(default_factory=BranchConfig)
    fusion: FusionKind = FusionKind.CONCAT
    se_reduction: int = 8
    head: HeadConfig = field(default_factory=HeadConfig)

    def __post_init__(self):
        object.__setattr__(self, 'fusion', FusionKind.parse(self.fusion))
        if self.se_reduction < 1:
            raise ValueError(f'se_reduction must be >= 1, got {self.se_reduction}.')

    def to_dict(self) -> Dict[str, Any]:
        return {
            'arch': self.branch.arch,
            'shared': self.branch.shared,
            'feature_channels': self.branch.feature_channels,
            'image_size': list(self.branch.image_size),
            'fusion': self.fusion.value,
            'se_reduction': self.se_reduction,
            'head': self.head.kind.value,
            'map_size': list(self.head.map_size) if self.head.map_size is not None else None,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> 'ModelConfig':
        return cls(
            branch=BranchConfig(d['arch'], bool(d['shared']), int(d['feature_channels']),
                                tuple(d['image_size'])),
            fusion=FusionKind.parse(d['fusion']),
            se_reduction=int(d['se_reduction']),
            head=HeadConfig(HeadKind.parse(d['head']), tuple(d['map_size']) if d.get('map_size') else None),
        )


SHARED_KEY = 'shared'


class ModalityBranches(nn.Module):
    """One encoder reused for every modality (shared) or one encoder per modality (unshared)."""

    def __init__(self, config: BranchConfig):
        super().__init__()
        self.config = config
        factory = get_encoder_factory(config.arch)
        if config.shared:
            self.encoders = nn.ModuleDict({SHARED_KEY: factory(config.feature_channels, config.image_size)})
        else:
            self.encoders = nn.ModuleDict({m.value: factory(config.feature_channels, config.image_size)
                                           for m in ALL_MODALITIES})

    def encoder_for(self, modality: ModalityId) -> BranchEncoder:
        return self.encoders[SHARED_KEY if self.config.shared else modality.value]

    def forward(self, inputs: Mapping[ModalityId, torch.Tensor]) -> FeatureBundle:
        """
        A modality missing from `inputs` is not encoded at all and enters fusion as zero features
        (a branch-pruned deployment). `batch_inputs` always supplies all three modalities.
        """
        if ModalityId.RGB not in inputs:
            raise InvalidSampleException(ErrorCode.MISSING_RGB, '<batch>', 'the RGB branch input is required')
        features = {}
        for modality in ALL_MODALITIES:
            if modality not in inputs:
                continue
            x = inputs[modality]
            if x.shape[1] != ENCODER_IN_CHANNELS:
                x = x.expand(-1, ENCODER_IN_CHANNELS, -1, -1)
            features[modality] = self.encoder_for(modality)(x)
        rgb = features[ModalityId.RGB]
        return FeatureBundle({m: features[m] if m in features else torch.zeros_like(rgb)
                              for m in ALL_MODALITIES})


class FlexModel(nn.Module):
    """Branch encoders -> feature fusion -> prediction head."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        channels = config.branch.feature_channels
        self.encoder = ModalityBranches(config.branch)
        self.fusion: FusionModule = build_fusion(FusionConfig(config.fusion, channels, channels,
                                                              config.se_reduction))
        self.head = build_head(config.head, channels)

    @property
    def head_kind(self) -> HeadKind:
        return self.config.head.kind

    def encode_inputs(self, inputs: Mapping[ModalityId, torch.Tensor]) -> FeatureBundle:
        return self.encoder(inputs)

    def forward(self, inputs: Mapping[ModalityId, torch.Tensor]) -> torch.Tensor:
        return self.head(self.fusion(self.encode_inputs(inputs)))

    def scores(self, inputs: Mapping[ModalityId, torch.Tensor]) -> torch.Tensor:
        return self.head.to_score(self(inputs))


def build_model(config: ModelConfig, seed: int | None = None, dtype: torch.dtype = torch.float32) -> FlexModel:
    if seed is not None:
        torch.manual_seed(seed)
    return FlexModel(config).to(dtype)


def _active_list(samples: Sequence[ModalitySample],
                 active: ActiveSet | Sequence[ActiveSet] | None) -> List[frozenset]:
    if active is None:
        return [FULL_MODALITY_SET] * len(samples)
    active = list(active)
    if all(isinstance(a, (ModalityId, str)) for a in active):
        return [modality_set(active)] * len(samples)
    if len(active) != len(samples):
        raise ValueError(f'Got {len(active)} active sets for {len(samples)} samples.')
    return [modality_set(a) for a in active]


def batch_inputs(samples: Sequence[ModalitySample],
                 active: ActiveSet | Sequence[ActiveSet] | None = None,
                 dtype: torch.dtype = torch.float32) -> Dict[ModalityId, torch.Tensor]:
    """
    Stack samples into per-modality tensors. A modality outside a sample's active set, or absent
    from the sample, enters the encoder as an all-zero array.
    """
    actives = _active_list(samples, active)
    stacked = {}
    for modality in ALL_MODALITIES:
        arrays = []
        for sample, active_set in zip(samples, actives):
            if ModalityId.RGB not in active_set or not sample.has(ModalityId.RGB):
                raise InvalidSampleException(ErrorCode.MISSING_RGB, sample.sample_id,
                                             'RGB must be present and active')
            image = sample.image_or_zeros(modality)
            arrays.append(image if modality in active_set else np.zeros_like(image))
        stacked[modality] = torch.from_numpy(np.stack(arrays)).to(dtype)
    return stacked


def _model_dtype(model: nn.Module) -> torch.dtype:
    return next(model.parameters()).dtype


def encode(model: FlexModel, sample: ModalitySample, active: ActiveSet) -> FeatureBundle:
    """Features of one sample (batch dimension of 1)."""
    return model.encode_inputs(batch_inputs([sample], active, _model_dtype(model)))


@torch.no_grad()
def predict_scores(model: FlexModel, samples: Sequence[ModalitySample],
                   active: ActiveSet | Sequence[ActiveSet] | None = None,
                   batch_size: int = 64) -> np.ndarray:
    """Inference-mode liveness scores in [0, 1]; the model's train/eval mode is restored afterwards."""
    was_training = model.training
    model.eval()
    try:
        actives = _active_list(samples, active)
        dtype = _model_dtype(model)
        chunks = []
        for start in range(0, len(samples), batch_size):
            inputs = batch_inputs(samples[start:start + batch_size], actives[start:start + batch_size], dtype)
            chunks.append(model.scores(inputs).double().cpu().numpy())
        return np.concatenate(chunks) if chunks else np.zeros((0,), dtype=np.float64)
    finally:
        model.train(was_training)


def predict(model: FlexModel, sample: ModalitySample, active: ActiveSet) -> float:
    return float(predict_scores(model, [sample], active)[0])


def _targets(samples: Sequence[ModalitySample], dtype: torch.dtype) -> torch.Tensor:
    return torch.tensor([s.label.target for s in samples], dtype=dtype)


def loss_from_output(output: torch.Tensor, targets: torch.Tensor, head_kind: HeadKind) -> torch.Tensor:
    if head_kind is HeadKind.BINARY_MAP:
        target_maps = targets[:, None, None].expand_as(output)
        return F.binary_cross_entropy_with_logits(output, target_maps)
    return F.binary_cross_entropy_with_logits(output, targets)


def loss(model: FlexModel, samples: Sequence[ModalitySample],
         active: ActiveSet | Sequence[ActiveSet] | None = None) -> torch.Tensor:
    """Mean binary cross-entropy: bonafide -> 1, attack -> 0 (per pixel for the map head)."""
    if not samples:
        raise TrainingException(ErrorCode.EMPTY_BATCH, 'Cannot compute a loss on an empty batch.')
    dtype = _model_dtype(model)
    output = model(batch_inputs(samples, active, dtype))
    return loss_from_output(output, _targets(samples, dtype), model.head_kind)


def scores_bce(scores: torch.Tensor, targets: torch.Tensor, eps: float = 1e-7) -> torch.Tensor:
    """BCE on probabilities, clamped to [eps, 1 - eps]."""
    clamped = scores.clamp(eps, 1.0 - eps)
    return -(targets * torch.log(clamped) + (1.0 - targets) * torch.log1p(-clamped)).mean()


