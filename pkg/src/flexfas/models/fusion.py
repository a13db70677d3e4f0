from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Tuple

import torch
from torch import nn

from ..core.features import FeatureBundle
from ..core.modality import ModalityId, ALL_MODALITIES
from ..exceptions import FusionInputException, ErrorCode
from .ops import ChannelScale, ElementwiseSum


class FusionKind(Enum):
    CONCAT = 'concat'
    SE = 'se'
    CROSS_ATTENTION = 'cross_attention'

    @classmethod
    def parse(cls, raw: 'str | FusionKind') -> 'FusionKind':
        if isinstance(raw, FusionKind):
            return raw
        aliases = {'ca': 'cross_attention', 'cross-attention': 'cross_attention', 'concatenation': 'concat'}
        raw = raw.strip().lower()
        return cls(aliases.get(raw, raw))


@dataclass(frozen=True)
class FusionConfig:
    kind: FusionKind
    in_channels: int
    out_channels: int | None = None
    se_reduction: int = 8

    def __post_init__(self):
        object.__setattr__(self, 'kind', FusionKind.parse(self.kind))
        if self.out_channels is None:
            object.__setattr__(self, 'out_channels', self.in_channels)
        if self.in_channels < 1 or self.out_channels < 1:
            raise FusionInputException('Fusion channels must be >= 1.', ErrorCode.INVALID_ARGUMENT)
        if self.se_reduction < 1:
            raise FusionInputException('se_reduction must be >= 1.', ErrorCode.INVALID_ARGUMENT)

    @property
    def se_hidden(self) -> int:
        return max(1, self.in_channels // self.se_reduction)


class ConvBnRelu(nn.Sequential):
    """ReLU(BN(Conv1x1(x)))."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, out_channels, kernel_size=1, bias=True)
        self.bn = nn.BatchNorm2d(out_channels)
        self.relu = nn.ReLU()


class FusionModule(nn.Module, ABC):
    kind: FusionKind

    def __init__(self, config: FusionConfig, aggregate_in_channels: int):
        super().__init__()
        if config.kind is not self.kind:
            raise FusionInputException(f'{type(self).__name__} needs kind {self.kind.value}, '
                                       f'got {config.kind.value}.', ErrorCode.INVALID_ARGUMENT)
        self.config = config
        self.aggregate = ConvBnRelu(aggregate_in_channels, config.out_channels)

    def _check(self, bundle: FeatureBundle) -> FeatureBundle:
        bundle.check()
        if bundle.channels != self.config.in_channels:
            raise FusionInputException(f'Fusion expects {self.config.in_channels} channels, '
                                       f'got {bundle.channels}.')
        return bundle

    @abstractmethod
    def pre_aggregate(self, bundle: FeatureBundle) -> torch.Tensor:
        """The map entering the 1x1 convolution."""
        pass

    def forward(self, bundle: FeatureBundle) -> torch.Tensor:
        return self.aggregate(self.pre_aggregate(self._check(bundle)))


class ConcatFusion(FusionModule):
    kind = FusionKind.CONCAT

    def __init__(self, config: FusionConfig):
        super().__init__(config, config.in_channels * len(ALL_MODALITIES))

    def pre_aggregate(self, bundle: FeatureBundle) -> torch.Tensor:
        return torch.cat([bundle[m] for m in ALL_MODALITIES], dim=1)


class SEGate(nn.Module):
    """sigmoid(FC(ReLU(FC(AvgPool(F))))), one gate value per channel."""

    def __init__(self, channels: int, hidden: int):
        super().__init__()
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.fc1 = nn.Linear(channels, hidden)
        self.relu = nn.ReLU()
        self.fc2 = nn.Linear(hidden, channels)
        self.sigmoid = nn.Sigmoid()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        squeezed = self.pool(x).flatten(1)
        return self.sigmoid(self.fc2(self.relu(self.fc1(squeezed))))


class SEFusion(FusionModule):
    kind = FusionKind.SE

    def __init__(self, config: FusionConfig):
        super().__init__(config, config.in_channels * len(ALL_MODALITIES))
        self.gates = nn.ModuleDict({m.value: SEGate(config.in_channels, config.se_hidden)
                                    for m in ALL_MODALITIES})
        self.scale = ChannelScale()

    def gate_values(self, bundle: FeatureBundle) -> Dict[ModalityId, torch.Tensor]:
        return {m: self.gates[m.value](bundle[m]) for m in ALL_MODALITIES}

    def recalibrated(self, bundle: FeatureBundle) -> Dict[ModalityId, torch.Tensor]:
        gates = self.gate_values(bundle)
        return {m: self.scale(bundle[m], gates[m]) for m in ALL_MODALITIES}

    def pre_aggregate(self, bundle: FeatureBundle) -> torch.Tensor:
        refined = self.recalibrated(bundle)
        return torch.cat([refined[m] for m in ALL_MODALITIES], dim=1)


class CrossAttentionMap(nn.Module):
    """
    Parameter-free attention of a query modality over RGB:
    A = row_softmax(Fq_bar @ Frgb_bar^T), out_bar = A @ Frgb_bar, with F_bar the [N, C] token view.
    No temperature or 1/sqrt(d) scaling.
    """

    def forward(self, query: torch.Tensor, rgb: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        b, c, h, w = rgb.shape
        q_bar = query.flatten(2).transpose(1, 2)
        rgb_bar = rgb.flatten(2).transpose(1, 2)
        attention = torch.softmax(torch.bmm(q_bar, rgb_bar.transpose(1, 2)), dim=-1)
        attended = torch.bmm(attention, rgb_bar)
        return attended.transpose(1, 2).reshape(b, c, h, w), attention


class CrossAttentionFusion(FusionModule):
    kind = FusionKind.CROSS_ATTENTION

    def __init__(self, config: FusionConfig):
        super().__init__(config, config.in_channels)
        self.attend = CrossAttentionMap()
        self.add = ElementwiseSum()

    def attention_maps(self, bundle: FeatureBundle) -> Dict[ModalityId, torch.Tensor]:
        rgb = bundle[ModalityId.RGB]
        return {m: self.attend(bundle[m], rgb)[1] for m in (ModalityId.DEPTH, ModalityId.IR)}

    def pre_aggregate(self, bundle: FeatureBundle) -> torch.Tensor:
        rgb = bundle[ModalityId.RGB]
        depth_ca, _ = self.attend(bundle[ModalityId.DEPTH], rgb)
        ir_ca, _ = self.attend(bundle[ModalityId.IR], rgb)
        return self.add(rgb, depth_ca, ir_ca)


_FUSION_CLASSES = {
    FusionKind.CONCAT: ConcatFusion,
    FusionKind.SE: SEFusion,
    FusionKind.CROSS_ATTENTION: CrossAttentionFusion,
}


def build_fusion(config: FusionConfig) -> FusionModule:
    return _FUSION_CLASSES[config.kind](config)


def _fuse_as(kind: FusionKind, bundle: FeatureBundle, fusion: FusionModule) -> torch.Tensor:
    if fusion.kind is not kind:
        raise FusionInputException(f'Expected a {kind.value} fusion module, got {fusion.kind.value}.',
                                   ErrorCode.INVALID_ARGUMENT)
    return fusion(bundle)


def fuse(bundle: FeatureBundle, fusion: FusionModule) -> torch.Tensor:
    return fusion(bundle)


def fuse_concat(bundle: FeatureBundle, fusion: FusionModule) -> torch.Tensor:
    return _fuse_as(FusionKind.CONCAT, bundle, fusion)


def fuse_se(bundle: FeatureBundle, fusion: FusionModule) -> torch.Tensor:
    return _fuse_as(FusionKind.SE, bundle, fusion)


def fuse_cross_attention(bundle: FeatureBundle, fusion: FusionModule) -> torch.Tensor:
    return _fuse_as(FusionKind.CROSS_ATTENTION, bundle, fusion)


@dataclass(frozen=True, eq=False)
class FusionGradients:
    parameters: Dict[str, torch.Tensor]
    inputs: Dict[ModalityId, torch.Tensor]


def fusion_backward(fusion: FusionModule, bundle: FeatureBundle, upstream: torch.Tensor) -> FusionGradients:
    """
    Re-run the forward pass on detached leaf inputs and pull `upstream` back through it. The pass runs
    in inference mode, so batch norm uses (and leaves untouched) its running statistics; the module's
    train/eval mode is restored afterwards.
    """
    inputs = {m: bundle[m].detach().clone().requires_grad_(True) for m in ALL_MODALITIES}
    was_training = fusion.training
    fusion.eval()
    try:
        output = fusion(FeatureBundle(inputs))
    finally:
        fusion.train(was_training)
    if output.shape != upstream.shape:
        raise FusionInputException(f'Upstream gradient is {list(upstream.shape)}, '
                                   f'fused output is {list(output.shape)}.')

    named = [(name, p) for name, p in fusion.named_parameters() if p.requires_grad]
    targets = [p for _, p in named] + [inputs[m] for m in ALL_MODALITIES]
    grads = torch.autograd.grad(output, targets, grad_outputs=upstream, allow_unused=True)

    def _or_zeros(g, ref):
        return torch.zeros_like(ref) if g is None else g

    n = len(named)
    return FusionGradients(
        parameters={name: _or_zeros(g, p) for (name, p), g in zip(named, grads[:n])},
        inputs={m: _or_zeros(g, inputs[m]) for m, g in zip(ALL_MODALITIES, grads[n:])},
    )
