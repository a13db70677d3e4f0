from dataclasses import dataclass
from typing import FrozenSet, Iterable

import numpy as np

from .core.modality import ModalityId, FULL_MODALITY_SET, modality_set
from .core.sample import ModalitySample
from .exceptions import ConfigException, InvalidSampleException, ErrorCode

# Draw order is fixed so a seed reproduces the same pattern.
DROPPABLE = (ModalityId.DEPTH, ModalityId.IR)


@dataclass(frozen=True)
class DropModalConfig:
    p_depth: float = 0.3
    p_ir: float = 0.3
    seed: int = 0

    def __post_init__(self):
        for key in ('p_depth', 'p_ir'):
            p = getattr(self, key)
            if not 0.0 <= p <= 1.0:
                raise ConfigException(f'dropmodal.{key}', f'probability must lie in [0, 1], got {p}')

    def probability(self, modality: ModalityId) -> float:
        return self.p_depth if modality is ModalityId.DEPTH else self.p_ir


def make_rng(seed: int, worker: int = 0) -> np.random.Generator:
    """Each data worker owns the stream seeded with `seed + worker`."""
    return np.random.default_rng(seed + worker)


def draw_active(cfg: DropModalConfig, rng: np.random.Generator) -> FrozenSet[ModalityId]:
    """One DropModal draw: Depth and IR are kept or dropped independently, RGB is always kept."""
    draws = rng.random(len(DROPPABLE))
    dropped = {m for m, u in zip(DROPPABLE, draws) if u < cfg.probability(m)}
    return FULL_MODALITY_SET - dropped


def _zeroed(sample: ModalitySample, active: FrozenSet[ModalityId]) -> ModalitySample:
    images = {m: (a if m in active else np.zeros_like(a)) for m, a in sample.images.items()}
    return sample.with_images(images)


def drop_modal(sample: ModalitySample, cfg: DropModalConfig, rng: np.random.Generator) -> ModalitySample:
    return _zeroed(sample, draw_active(cfg, rng))


def mask_modalities(sample: ModalitySample, active: Iterable[ModalityId]) -> ModalitySample:
    active = modality_set(active)
    if ModalityId.RGB not in active:
        raise InvalidSampleException(ErrorCode.MISSING_RGB, sample.sample_id, 'RGB must stay active')
    return _zeroed(sample, active)


class DropModal:
    """Stateful DropModal applied sample by sample, as the training loop sees it."""

    def __init__(self, cfg: DropModalConfig, worker: int = 0):
        self.cfg = cfg
        self.rng = make_rng(cfg.seed, worker)

    def draw(self) -> FrozenSet[ModalityId]:
        return draw_active(self.cfg, self.rng)

    def __call__(self, sample: ModalitySample) -> ModalitySample:
        return drop_modal(sample, self.cfg, self.rng)
