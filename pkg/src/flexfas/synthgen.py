"""
Synthetic RGB/Depth/IR face-like captures with a tunable class gap per modality.

Every modality image is

    clip(0.5 + u * (+-sep/2 * pattern + sigma * z + pixel_noise * eps + texture), 0, 1)

with the sign + for bonafide and - for attack, `pattern` a fixed low-frequency map whose mean is
exactly 1, `z` one standard normal draw per image, `eps` per-pixel noise and `texture` a zero-mean
subject-specific grating. The mean intensity of an image is therefore Gaussian with a class gap of
`sep / sigma` standard deviations, so thresholding it reaches an AUC of Phi(sep / (sigma * sqrt(2))).
"""
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from types import MappingProxyType
from typing import Dict, List, Mapping, Tuple

import numpy as np

from ._logger import LOGGER
from .core.modality import ModalityId, Label, ALL_MODALITIES, MODALITY_CHANNELS
from .core.sample import ModalitySample
from .exceptions import ConfigException
from .multi_modal.image import write_modality_image
from .protocols.manifest import DatasetManifest, ManifestRow, write_manifest
from .protocols.protocol import Split

MANIFEST_NAME = 'manifest.csv'

# Stream ids keep the split and label draws apart from the per-subject streams.
_SPLIT_STREAM = 7_000_001
_LABEL_STREAM = 7_000_003

_SPLIT_ORDER = (Split.TRAIN, Split.VAL, Split.TEST)


def _default_separability() -> Dict[ModalityId, float]:
    return {ModalityId.RGB: 1.5, ModalityId.DEPTH: 3.0, ModalityId.IR: 0.5}


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 200
    frames_per_subject: int = 4
    image_size: Tuple[int, int] = (32, 32)
    separability: Mapping[ModalityId, float] = field(default_factory=_default_separability)
    noise_sigma: float = 1.0
    attack_ratio: float = 0.5
    pai_types: Tuple[str, ...] = ('print', 'replay')
    seed: int = 0
    dataset_id: str = 'synth'
    split_fractions: Tuple[float, float, float] = (0.6, 0.2, 0.2)
    pixel_noise: float = 0.5
    texture_amplitude: float = 0.5
    intensity_scale: float = 0.04

    def __post_init__(self):
        separability = {ModalityId.parse(m): float(v) for m, v in self.separability.items()}
        for m in ALL_MODALITIES:
            separability.setdefault(m, 0.0)
        object.__setattr__(self, 'separability', MappingProxyType(separability))
        object.__setattr__(self, 'image_size', tuple(int(s) for s in self.image_size))
        object.__setattr__(self, 'pai_types', tuple(self.pai_types))
        object.__setattr__(self, 'split_fractions', tuple(float(f) for f in self.split_fractions))

        if self.n_subjects < 1:
            raise ConfigException('synth.n_subjects', f'must be >= 1, got {self.n_subjects}')
        if self.frames_per_subject < 1:
            raise ConfigException('synth.frames_per_subject', f'must be >= 1, got {self.frames_per_subject}')
        if len(self.image_size) != 2 or min(self.image_size) < 1:
            raise ConfigException('synth.image_size', f'must be two sizes >= 1, got {self.image_size}')
        for m, v in separability.items():
            if not math.isfinite(v) or v < 0:
                raise ConfigException(f'synth.separability.{m.value}', f'must be finite and >= 0, got {v}')
        if not self.noise_sigma > 0:
            raise ConfigException('synth.noise_sigma', f'must be > 0, got {self.noise_sigma}')
        if not 0.0 < self.attack_ratio < 1.0:
            raise ConfigException('synth.attack_ratio', f'must lie in (0, 1), got {self.attack_ratio}')
        if not self.pai_types:
            raise ConfigException('synth.pai_types', 'needs at least one attack type')
        if len(self.split_fractions) != 3 or min(self.split_fractions) < 0 or sum(self.split_fractions) <= 0:
            raise ConfigException('synth.split_fractions', f'must be three non-negative weights, '
                                                           f'got {self.split_fractions}')


def sample_id_of(dataset_id: str, subject: int, frame: int) -> str:
    return f'{dataset_id}_s{subject:04d}_f{frame:02d}'


def image_path_of(split: Split, sample_id: str, modality: ModalityId) -> Path:
    return Path(split.value) / f'{sample_id}_{modality.value}.png'


def class_pattern(h: int, w: int) -> np.ndarray:
    """Low-frequency map with mean exactly 1."""
    y = np.arange(h, dtype=np.float64)[:, None]
    x = np.arange(w, dtype=np.float64)[None, :]
    return 1.0 + 0.5 * np.sin(2 * np.pi * x / w) * np.sin(2 * np.pi * y / h)


def assign_splits(cfg: SynthConfig) -> Dict[int, Split]:
    """Subject-disjoint split: every subject lands in exactly one split."""
    rng = np.random.default_rng([cfg.seed, _SPLIT_STREAM])
    order = rng.permutation(cfg.n_subjects)
    weights = np.array(cfg.split_fractions) / sum(cfg.split_fractions)
    n_train = int(round(weights[0] * cfg.n_subjects))
    n_val = min(int(round(weights[1] * cfg.n_subjects)), cfg.n_subjects - n_train)
    splits = {}
    for rank, subject in enumerate(order):
        if rank < n_train:
            splits[int(subject)] = Split.TRAIN
        elif rank < n_train + n_val:
            splits[int(subject)] = Split.VAL
        else:
            splits[int(subject)] = Split.TEST
    return splits


def assign_labels(cfg: SynthConfig, splits: Mapping[int, Split]) -> Dict[str, Tuple[Label, str | None]]:
    """Within each split exactly round(attack_ratio * n) samples are attacks."""
    rng = np.random.default_rng([cfg.seed, _LABEL_STREAM])
    labels = {}
    for split in _SPLIT_ORDER:
        ids = [sample_id_of(cfg.dataset_id, subject, frame)
               for subject in sorted(s for s, sp in splits.items() if sp is split)
               for frame in range(cfg.frames_per_subject)]
        n_attack = int(round(cfg.attack_ratio * len(ids)))
        order = rng.permutation(len(ids))
        pais = rng.integers(0, len(cfg.pai_types), size=len(ids))
        for rank, idx in enumerate(order):
            if rank < n_attack:
                labels[ids[idx]] = (Label.ATTACK, cfg.pai_types[pais[idx]])
            else:
                labels[ids[idx]] = (Label.BONAFIDE, None)
    return labels


def _texture(rng: np.random.Generator, h: int, w: int, amplitude: float) -> np.ndarray:
    kx, ky = rng.integers(1, 4, size=2)
    phase_x, phase_y = rng.uniform(0.0, 2 * np.pi, size=2)
    y = np.arange(h, dtype=np.float64)[:, None]
    x = np.arange(w, dtype=np.float64)[None, :]
    return amplitude * np.sin(2 * np.pi * kx * x / w + phase_x) * np.sin(2 * np.pi * ky * y / h + phase_y)


def generate_subject(cfg: SynthConfig, subject: int, split: Split,
                     labels: Mapping[str, Tuple[Label, str | None]]) -> List[ModalitySample]:
    """All frames of one subject, drawn from that subject's own random stream."""
    rng = np.random.default_rng([cfg.seed, subject])
    h, w = cfg.image_size
    pattern = class_pattern(h, w)
    textures = {m: _texture(rng, h, w, cfg.texture_amplitude) for m in ALL_MODALITIES}

    samples = []
    for frame in range(cfg.frames_per_subject):
        sample_id = sample_id_of(cfg.dataset_id, subject, frame)
        label, pai = labels[sample_id]
        sign = 1.0 if label is Label.BONAFIDE else -1.0
        images = {}
        for m in ALL_MODALITIES:
            z = rng.standard_normal()
            eps = rng.standard_normal((MODALITY_CHANNELS[m], h, w))
            signal = (sign * cfg.separability[m] / 2 * pattern + cfg.noise_sigma * z
                      + cfg.pixel_noise * eps + textures[m])
            images[m] = np.clip(0.5 + cfg.intensity_scale * signal, 0.0, 1.0).astype(np.float32)
        samples.append(ModalitySample(sample_id, images, label, pai, f'{cfg.dataset_id}_s{subject:04d}',
                                      cfg.dataset_id))
    return samples


def generate(cfg: SynthConfig) -> Tuple[List[ModalitySample], DatasetManifest]:
    splits = assign_splits(cfg)
    labels = assign_labels(cfg, splits)

    samples: List[ModalitySample] = []
    rows: List[ManifestRow] = []
    for subject in range(cfg.n_subjects):
        split = splits[subject]
        for sample in generate_subject(cfg, subject, split, labels):
            samples.append(sample)
            paths = {m: image_path_of(split, sample.sample_id, m) for m in ALL_MODALITIES}
            rows.append(ManifestRow(sample.sample_id, split, sample.dataset_id, sample.label, sample.pai,
                                    MappingProxyType(paths), sample.subject_id))

    LOGGER.info(f'Generated {len(samples)} synthetic samples from {cfg.n_subjects} subjects.')
    return samples, DatasetManifest(tuple(rows))


def write_dataset(samples: List[ModalitySample], manifest: DatasetManifest, out_dir: str | Path) -> Path:
    """Write every image as PNG under `out_dir` and the manifest last; returns the manifest path."""
    out_dir = Path(out_dir)
    by_id = {s.sample_id: s for s in samples}
    rooted = []
    for row in manifest.rows:
        sample = by_id[row.sample_id]
        paths = {}
        for m, rel in row.paths.items():
            path = rel if rel.is_absolute() else out_dir / rel
            write_modality_image(path, sample.images[m], m)
            paths[m] = path
        rooted.append(replace(row, paths=MappingProxyType(paths)))

    manifest_path = out_dir / MANIFEST_NAME
    write_manifest(DatasetManifest(tuple(rooted), manifest_path), manifest_path)
    LOGGER.info(f'Wrote {len(rooted)} samples to {out_dir}.')
    return manifest_path
