"""Full-reference metrics (PSNR, SSIM) and the image-level loss evaluators.

Both PSNR and SSIM clamp their inputs to [0, 1] and work on RGB with peak 1.0.
SSIM is computed per channel and averaged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError
from .imgcore import as_image, as_rgb, check_same_shape, rgb_to_yuv

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
METRIC_CONVENTION = "RGB, peak 1.0, inputs clamped to [0,1]; SSIM averaged over channels"


def _pair(a, b):
    a = as_image(a, "a")
    b = as_image(b, "b")
    check_same_shape(a, b, names=("a", "b"))
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    d = a - b
    return float(np.mean(d * d))


def psnr(a, b) -> float:
    """PSNR in dB with peak 1.0; ``inf`` for identical inputs."""
    a, b = _pair(a, b)
    err = mse(np.clip(a, 0.0, 1.0), np.clip(b, 0.0, 1.0))
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / err)


def _gaussian_taps() -> np.ndarray:
    r = SSIM_WINDOW // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * SSIM_SIGMA**2))
    return g / g.sum()


def _filter_valid(plane: np.ndarray, taps: np.ndarray) -> np.ndarray:
    out = ndimage.correlate1d(plane, taps, axis=0, mode="constant")
    out = ndimage.correlate1d(out, taps, axis=1, mode="constant")
    r = len(taps) // 2
    return out[r:-r, r:-r]


def _ssim_plane(x: np.ndarray, y: np.ndarray) -> float:
    taps = _gaussian_taps()
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    mx = _filter_valid(x, taps)
    my = _filter_valid(y, taps)
    sxx = _filter_valid(x * x, taps) - mx * mx
    syy = _filter_valid(y * y, taps) - my * my
    sxy = _filter_valid(x * y, taps) - mx * my
    mxy = mx * my
    # written so that x == y gives numerator == denominator bit for bit
    num = (mxy + mxy + c1) * (sxy + sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def ssim(a, b) -> float:
    a, b = _pair(a, b)
    if min(a.shape[0], a.shape[1]) < SSIM_WINDOW:
        raise InvalidInputError(
            f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape[:2]}"
        )
    a = np.clip(a, 0.0, 1.0)
    b = np.clip(b, 0.0, 1.0)
    if a.ndim == 2:
        return _ssim_plane(a, b)
    return float(np.mean([_ssim_plane(a[..., c], b[..., c]) for c in range(a.shape[2])]))


def l_rec(pred, gt) -> float:
    """Mean absolute RGB difference."""
    pred, gt = _pair(pred, gt)
    return float(np.mean(np.abs(pred - gt)))


def l_color(pred, gt) -> float:
    """Mean absolute U difference plus mean absolute V difference."""
    p = rgb_to_yuv(as_rgb(pred, "pred"))
    g = rgb_to_yuv(as_rgb(gt, "gt"))
    check_same_shape(p.y, g.y, names=("pred", "gt"))
    return float(np.mean(np.abs(p.u - g.u)) + np.mean(np.abs(p.v - g.v)))


@dataclass(frozen=True)
class PairScore:
    psnr_db: float
    ssim: float
    l_rec: float
    l_color: float

    def to_dict(self) -> dict:
        return {"psnr_db": self.psnr_db, "ssim": self.ssim, "l_rec": self.l_rec,
                "l_color": self.l_color}


def pair_score(pred, gt) -> PairScore:
    pred = as_rgb(pred, "pred")
    gt = as_rgb(gt, "gt")
    check_same_shape(pred, gt, names=("pred", "gt"))
    return PairScore(psnr(pred, gt), ssim(pred, gt), l_rec(pred, gt), l_color(pred, gt))
