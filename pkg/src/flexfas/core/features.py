from dataclasses import dataclass
from typing import Mapping, Tuple

import torch

from ..exceptions import FusionInputException, ErrorCode
from .modality import ModalityId, ALL_MODALITIES


@dataclass(frozen=True, eq=False)
class FeatureBundle:
    """
    Per-modality branch outputs F_RGB, F_Depth, F_IR, each a batched [B, C', H', W'] tensor.
    Token backbones fold their N = H' * W' tokens back onto the patch grid, so flattening the
    spatial dims recovers the token sequence in patch order.
    """
    features: Mapping[ModalityId, torch.Tensor]

    def __getitem__(self, modality: ModalityId) -> torch.Tensor:
        return self.features[modality]

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.features[ModalityId.RGB].shape)

    @property
    def channels(self) -> int:
        return self.shape[1]

    @property
    def grid(self) -> Tuple[int, int]:
        return self.shape[2], self.shape[3]

    def check(self) -> 'FeatureBundle':
        missing = [m.name for m in ALL_MODALITIES if m not in self.features]
        if missing:
            raise FusionInputException(f'Feature bundle lacks {", ".join(missing)}; '
                                       f'absent modalities must be zero-filled before fusion.',
                                       ErrorCode.MISSING_RGB if 'RGB' in missing else ErrorCode.SHAPE_MISMATCH)
        shapes = {m: tuple(self.features[m].shape) for m in ALL_MODALITIES}
        if len(set(shapes.values())) != 1:
            described = ', '.join(f'{m.name}={list(s)}' for m, s in shapes.items())
            raise FusionInputException(f'Feature shapes differ: {described}.')
        if len(self.shape) != 4:
            raise FusionInputException(f'Features must be [B, C, H, W], got {list(self.shape)}.')
        return self

    def map(self, fn) -> 'FeatureBundle':
        return FeatureBundle({m: fn(t) for m, t in self.features.items()})
