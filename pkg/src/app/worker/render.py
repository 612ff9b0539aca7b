"""Grayscale PPM rendering of saved feature and heatmap tensors."""
import logging
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
from PIL import Image

from app.tensor import Tensor

logger = logging.getLogger(__name__)

DUMP_SUFFIX = ".npy"


class RenderError(ValueError):
    """A tensor that cannot be shown as a 2-D map."""


def to_map(array: np.ndarray, channel: Optional[int] = None) -> np.ndarray:
    """
    Reduce a saved tensor to (H, W).

    A leading batch axis of 1 is dropped. Multi-channel maps show ``channel`` when given,
    otherwise the per-position L2 norm over channels.
    """
    array = np.asarray(array, dtype=np.float64)
    if array.ndim == 4:
        if array.shape[0] != 1:
            raise RenderError(f"cannot render a batch of {array.shape[0]} maps")
        array = array[0]
    if array.ndim == 3:
        if channel is not None:
            if not 0 <= channel < array.shape[2]:
                raise RenderError(f"channel {channel} out of range for {array.shape[2]} channels")
            array = array[:, :, channel]
        else:
            array = np.linalg.norm(array, axis=2)
    if array.ndim != 2:
        raise RenderError(f"expected a 2-D, (H, W, C) or (1, H, W, C) tensor, got shape {array.shape}")
    return array


def to_gray(values: np.ndarray) -> np.ndarray:
    """Min-max scale to uint8; a constant map renders black."""
    low, high = float(values.min()), float(values.max())
    if high - low <= 0:
        return np.zeros(values.shape, dtype=np.uint8)
    return np.round(255.0 * (values - low) / (high - low)).astype(np.uint8)


def render_ppm(
    array: np.ndarray,
    output_path: Union[str, Path],
    channel: Optional[int] = None,
    scale: int = 1,
) -> Path:
    """Write a map as a binary (P6) PPM, each cell ``scale`` pixels wide."""
    if scale < 1:
        raise RenderError(f"scale must be >= 1, got {scale}")
    gray = to_gray(to_map(array, channel))
    if scale > 1:
        gray = np.repeat(np.repeat(gray, scale, axis=0), scale, axis=1)
    image = Image.fromarray(gray)
    if image.mode != "RGB":
        image = image.convert("RGB")
    output_path = Path(output_path)
    image.save(str(output_path), "PPM")
    logger.info(f"Rendered {gray.shape[1]}x{gray.shape[0]} map to {output_path}")
    return output_path


def render_tensor_file(tensor_path: Union[str, Path], output_path: Union[str, Path], **kwargs) -> Path:
    tensor_path = Path(tensor_path)
    if not tensor_path.is_file():
        raise FileNotFoundError(f"no tensor dump at {tensor_path}")
    return render_ppm(np.load(tensor_path), output_path, **kwargs)


def dump_maps(dump_dir: Union[str, Path], frame: int, maps: Dict[str, Union[Tensor, np.ndarray]]) -> Dict[str, Path]:
    """Save named maps as ``<frame:06d>_<name>.npy``."""
    dump_dir = Path(dump_dir)
    dump_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, value in maps.items():
        data = value.data if isinstance(value, Tensor) else np.asarray(value)
        path = dump_dir / f"{frame:06d}_{name}{DUMP_SUFFIX}"
        np.save(path, data)
        written[name] = path
    logger.debug(f"dumped {sorted(written)} for frame {frame}")
    return written
