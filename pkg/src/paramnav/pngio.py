"""Deterministic 8-bit grayscale PNG writing for strips, frames, and heatmaps."""

import io

import numpy as np
from PIL import Image


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Map a float image in [0, 1] to uint8 with round-half-up."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale image, got shape {arr.shape}")
    return np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def png_bytes(img: np.ndarray) -> bytes:
    """Encode to PNG bytes; identical pixels give identical bytes."""
    data = img if img.dtype == np.uint8 else to_uint8(img)
    buf = io.BytesIO()
    Image.fromarray(data, mode="L").save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def write_png(path, img: np.ndarray):
    with open(path, "wb") as f:
        f.write(png_bytes(img))


def normalize_for_display(img: np.ndarray) -> np.ndarray:
    """Scale an arbitrary non-negative array to [0, 1] for visualization."""
    arr = np.asarray(img, dtype=np.float64)
    peak = arr.max()
    return arr / peak if peak > 0 else arr
