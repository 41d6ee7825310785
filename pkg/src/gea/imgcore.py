"""Pixel containers, color conversions and the grayscale/Laplacian operators.

Images are plain ``numpy`` arrays of ``float64`` with nominal range [0, 1]:
``(H, W, 3)`` for RGB and ``(H, W)`` for single-channel planes.  A trailing
singleton channel axis is accepted and dropped.

The YUV convention is BT.601 full range::

    Y = 0.299 R + 0.587 G + 0.114 B
    U = 0.5 (B - Y) / (1 - 0.114)
    V = 0.5 (R - Y) / (1 - 0.299)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError

COLOR_CONVENTION = "BT.601 full-range YUV"

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

RGB_TO_YUV = np.array(
    [
        LUMA_WEIGHTS,
        0.5 * (np.array([0.0, 0.0, 1.0]) - LUMA_WEIGHTS) / (1.0 - 0.114),
        0.5 * (np.array([1.0, 0.0, 0.0]) - LUMA_WEIGHTS) / (1.0 - 0.299),
    ]
)
YUV_TO_RGB = np.linalg.inv(RGB_TO_YUV)

LAPLACIAN_KERNEL = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])


def as_image(img, name: str = "image") -> np.ndarray:
    """Validate an image and return it as a float64 array (2-D or H x W x 3)."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim == 2:
        pass
    elif arr.ndim == 3 and arr.shape[2] == 3:
        pass
    else:
        raise InvalidInputError(f"{name}: expected H x W or H x W x 3, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"{name}: empty image of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name}: contains NaN or Inf samples")
    return arr


def as_rgb(img, name: str = "image") -> np.ndarray:
    arr = as_image(img, name)
    if arr.ndim != 3:
        raise InvalidInputError(f"{name}: expected 3 channels, got a single-channel image")
    return arr


def as_plane(img, name: str = "image") -> np.ndarray:
    arr = as_image(img, name)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name}: expected a single-channel image, got shape {arr.shape}")
    return arr


def channels(img: np.ndarray) -> int:
    return 1 if img.ndim == 2 else img.shape[2]


def check_same_shape(*arrays: np.ndarray, names=None) -> None:
    shapes = [a.shape for a in arrays]
    if any(s != shapes[0] for s in shapes[1:]):
        label = ", ".join(names) if names else "inputs"
        raise InvalidInputError(f"dimension mismatch between {label}: {shapes}")


@dataclass(frozen=True)
class YuvImage:
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        for plane in ("y", "u", "v"):
            object.__setattr__(self, plane, as_plane(getattr(self, plane), plane))
        check_same_shape(self.y, self.u, self.v, names=("y", "u", "v"))

    @property
    def shape(self) -> tuple[int, int]:
        return self.y.shape


def rgb_to_yuv(img) -> YuvImage:
    rgb = as_rgb(img)
    yuv = rgb @ RGB_TO_YUV.T
    return YuvImage(yuv[..., 0], yuv[..., 1], yuv[..., 2])


def yuv_to_rgb(img: YuvImage) -> np.ndarray:
    """Inverse of :func:`rgb_to_yuv`. The result is not clamped."""
    y, u, v = (as_plane(p, n) for p, n in ((img.y, "y"), (img.u, "u"), (img.v, "v")))
    check_same_shape(y, u, v, names=("y", "u", "v"))
    return np.stack([y, u, v], axis=-1) @ YUV_TO_RGB.T


def to_grayscale(img) -> np.ndarray:
    arr = as_image(img)
    if arr.ndim == 2:
        return arr
    return arr @ LUMA_WEIGHTS


def laplacian(img) -> np.ndarray:
    """4-neighbour Laplacian with reflect-101 borders; same size as the input."""
    plane = as_plane(img)
    # scipy's "mirror" mode is reflect-101 (edge sample not repeated)
    return ndimage.correlate(plane, LAPLACIAN_KERNEL, mode="mirror")


def clamp01(img) -> np.ndarray:
    return np.clip(as_image(img), 0.0, 1.0)
