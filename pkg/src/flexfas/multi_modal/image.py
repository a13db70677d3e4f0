from pathlib import Path

import numpy as np
from PIL import Image as PilImage

from .._utils.file_utils import atomic_write
from ..core.modality import ModalityId, MODALITY_CHANNELS
from ..exceptions import InvalidSampleException, ErrorCode

_PIL_MODES = {3: 'RGB', 1: 'L'}


def read_modality_image(path: str | Path, modality: ModalityId) -> np.ndarray:
    """Decode an 8-bit image file to a [C, H, W] float32 array in [0, 1]."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f'File {path} not found')
    channels = MODALITY_CHANNELS[modality]
    with PilImage.open(path) as img:
        pixels = np.asarray(img.convert(_PIL_MODES[channels]), dtype=np.float32) / 255.0
    if channels == 1:
        return pixels[None, :, :]
    return np.transpose(pixels, (2, 0, 1)).copy()


def quantize(array: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(array, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_modality_image(path: str | Path, array: np.ndarray, modality: ModalityId):
    """Write a [C, H, W] array in [0, 1] as a lossless 8-bit PNG."""
    channels = MODALITY_CHANNELS[modality]
    if array.ndim != 3 or array.shape[0] != channels:
        raise InvalidSampleException(ErrorCode.SHAPE_MISMATCH, str(path),
                                     f'{modality.name} must be [{channels}, H, W], got {list(array.shape)}')
    pixels = quantize(array)
    pixels = pixels[0] if channels == 1 else np.transpose(pixels, (1, 2, 0))
    img = PilImage.fromarray(np.ascontiguousarray(pixels))
    atomic_write(path, lambda tmp: img.save(tmp, format='PNG'))
