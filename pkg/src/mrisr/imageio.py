"""Grayscale PNG I/O for [0,1] float arrays, 16-bit on the way out.

16-bit depth keeps the quantization step (1/65535) far below the float32
slice precision actually present in the data; 8-bit PNGs are still accepted
on input for convenience.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import IngestionError, NumericsError, ShapeError


def save_png16(path, image: np.ndarray) -> None:
    """Write a 2-D [0,1] float array as a 16-bit grayscale PNG."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D image, got shape {arr.shape}")
    if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
        raise NumericsError("image values must be finite and in [0,1]")
    quantized = np.round(arr * 65535.0).astype(np.uint16)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(quantized).save(path)


def load_gray(path) -> np.ndarray:
    """Read an 8- or 16-bit grayscale image file as a float32 [0,1] array."""
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"image file not found: {path}")
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:
        raise IngestionError(f"cannot read image {path}: {exc}") from exc
    if img.mode in ("I;16", "I;16B", "I;16L"):
        arr = np.asarray(img, dtype=np.float64) / 65535.0
    elif img.mode == "I":
        arr = np.asarray(img, dtype=np.float64) / 65535.0
    elif img.mode == "L":
        arr = np.asarray(img, dtype=np.float64) / 255.0
    else:
        arr = np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    return np.clip(arr, 0.0, 1.0).astype(np.float32)
