from dataclasses import dataclass, replace
from types import MappingProxyType
from typing import Mapping

import numpy as np

from ..exceptions import InvalidSampleException, ErrorCode
from .modality import ModalityId, Label, ALL_MODALITIES, MODALITY_CHANNELS


def _freeze(array) -> np.ndarray:
    frozen = np.array(array, dtype=np.float32, copy=True)
    frozen.setflags(write=False)
    return frozen


@dataclass(frozen=True, eq=False)
class ModalitySample:
    """
    One pre-cropped capture. `images` maps each present modality to a [C, H, W] array in [0, 1];
    RGB has three channels, Depth and IR one. An absent modality reads as zeros downstream.
    """
    sample_id: str
    images: Mapping[ModalityId, np.ndarray]
    label: Label
    pai: str | None = None
    subject_id: str = ''
    dataset_id: str = ''

    def __post_init__(self):
        frozen = {ModalityId.parse(m): _freeze(a) for m, a in self.images.items()}
        object.__setattr__(self, 'images', MappingProxyType(frozen))
        object.__setattr__(self, 'label', Label.parse(self.label))

    @property
    def spatial_size(self) -> tuple[int, int]:
        anchor = self.images.get(ModalityId.RGB)
        if anchor is None:
            anchor = next(iter(self.images.values()))
        return int(anchor.shape[-2]), int(anchor.shape[-1])

    def has(self, modality: ModalityId) -> bool:
        return modality in self.images

    def image_or_zeros(self, modality: ModalityId) -> np.ndarray:
        if modality in self.images:
            return self.images[modality]
        h, w = self.spatial_size
        return np.zeros((MODALITY_CHANNELS[modality], h, w), dtype=np.float32)

    def with_images(self, images: Mapping[ModalityId, np.ndarray]) -> 'ModalitySample':
        return replace(self, images=images)


def validate_sample(sample: ModalitySample):
    """Raise `InvalidSampleException` naming the first violated invariant."""
    if ModalityId.RGB not in sample.images:
        raise InvalidSampleException(ErrorCode.MISSING_RGB, sample.sample_id, 'RGB image is required')

    rgb_hw = sample.images[ModalityId.RGB].shape[1:]
    for modality in ALL_MODALITIES:
        if modality not in sample.images:
            continue
        array = sample.images[modality]
        if array.ndim != 3 or array.shape[0] != MODALITY_CHANNELS[modality]:
            raise InvalidSampleException(
                ErrorCode.SHAPE_MISMATCH, sample.sample_id,
                f'{modality.name} must be [{MODALITY_CHANNELS[modality]}, H, W], got {list(array.shape)}')
        if array.shape[1:] != rgb_hw:
            raise InvalidSampleException(
                ErrorCode.SHAPE_MISMATCH, sample.sample_id,
                f'{modality.name} is {array.shape[1]}x{array.shape[2]} but RGB is {rgb_hw[0]}x{rgb_hw[1]}')

    for modality, array in sample.images.items():
        if not np.all(np.isfinite(array)):
            raise InvalidSampleException(ErrorCode.VALUE_RANGE, sample.sample_id,
                                         f'{modality.name} has non-finite values')
        if array.size and (array.min() < 0.0 or array.max() > 1.0):
            raise InvalidSampleException(ErrorCode.VALUE_RANGE, sample.sample_id,
                                         f'{modality.name} values leave [0, 1]')
