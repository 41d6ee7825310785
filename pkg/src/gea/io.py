"""PNG/JPEG decode and encode.

Decoded samples are divided by the dtype maximum (255 or 65535).  Encoding
clamps to [0, 1] and quantizes to 8 bits with round-half-up.  ``.npy`` files
hold float64 arrays and pass through unquantized.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

from .errors import InvalidInputError
from .imgcore import as_image

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".npy")


class ImageDecodeError(InvalidInputError):
    pass


def load_image(path, rgb: bool = True) -> np.ndarray:
    """Read an image file into float64 [0, 1].

    With ``rgb=True`` grayscale files are replicated to three channels and an
    alpha channel is dropped.
    """
    path = Path(path)
    if path.suffix.lower() == ".npy":
        try:
            img = as_image(np.load(path, allow_pickle=False), str(path))
        except (OSError, ValueError) as exc:
            raise ImageDecodeError(f"cannot read array image {path}: {exc}") from None
        if rgb and img.ndim == 2:
            img = np.repeat(img[:, :, None], 3, axis=2)
        return img
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageDecodeError(f"cannot decode image: {path}")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ImageDecodeError(f"unsupported sample type {raw.dtype} in {path}")

    if raw.ndim == 3:
        if raw.shape[2] == 4:
            raw = raw[:, :, :3]
        raw = raw[:, :, ::-1]  # BGR -> RGB
    img = raw.astype(np.float64) / scale
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if rgb and img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    return np.ascontiguousarray(img)


def quantize8(img) -> np.ndarray:
    """Clamp to [0, 1] and quantize to uint8 with round-half-up."""
    arr = np.clip(as_image(img), 0.0, 1.0)
    return np.floor(arr * 255.0 + 0.5).astype(np.uint8)


def save_image(path, img) -> None:
    path = Path(path)
    q = quantize8(img)
    if q.ndim == 3:
        q = q[:, :, ::-1]
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), np.ascontiguousarray(q)):
        raise OSError(f"cannot write image: {path}")
