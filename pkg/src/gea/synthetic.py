"""Seeded synthetic images and degradation pairs for tests and demos."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .anchoring import AnchorMatrix, apply_anchor


def textured_image(shape=(128, 128), seed=0, channels: int = 3, smoothness: float = 3.0,
                   ) -> np.ndarray:
    """Smooth random texture in [0, 1] with per-channel variation.

    A sum of Gaussian-filtered noise at two scales, rescaled to [0.05, 0.95].
    """
    rng = np.random.default_rng(seed)
    h, w = shape
    planes = []
    base = ndimage.gaussian_filter(rng.standard_normal((h, w)), 4 * smoothness, mode="wrap")
    for _ in range(channels):
        fine = ndimage.gaussian_filter(rng.standard_normal((h, w)), smoothness, mode="wrap")
        coarse = ndimage.gaussian_filter(rng.standard_normal((h, w)), 4 * smoothness, mode="wrap")
        p = (base / (base.std() + 1e-12) + 0.6 * coarse / (coarse.std() + 1e-12)
             + 0.8 * fine / (fine.std() + 1e-12))
        p = (p - p.min()) / (p.max() - p.min())
        planes.append(0.05 + 0.9 * p)
    img = np.stack(planes, axis=-1)
    return img[..., 0] if channels == 1 else img


def random_anchor(rng: np.random.Generator, gain=(2.0, 8.0), mix: float = 0.15,
                  bias: float = 0.1, cast: float = 0.1) -> AnchorMatrix:
    """A well-conditioned, diagonal-dominant affine matrix.

    ``gain`` may be a ``(lo, hi)`` range or a single value; ``cast`` is the
    relative spread of the per-channel gains.
    """
    g = rng.uniform(*gain) if np.ndim(gain) else float(gain)
    a = g * (np.eye(3) + rng.uniform(-mix, mix, (3, 3)) * (1 - np.eye(3)))
    a += np.diag(rng.uniform(-cast, cast, 3)) * g
    return AnchorMatrix(a, rng.uniform(-bias, bias, 3))


def degraded_pair(shape=(64, 64), seed=0, noise: float = 0.0, darkness: float = 0.12):
    """Return ``(low, gt, matrix)`` with ``gt = A low + b + noise``.

    ``low`` is a dark texture (scaled by ``darkness``) and the matrix brings
    it to roughly normal exposure.
    """
    rng = np.random.default_rng(seed)
    low = darkness * textured_image(shape, seed=int(rng.integers(2**31)))
    m = random_anchor(rng)
    gt = apply_anchor(m, low)
    if noise > 0:
        gt = gt + rng.normal(0.0, noise, gt.shape)
    return low, gt, m


def lowlight_pair(shape=(96, 96), seed=0, noise: float = 0.01, exposure=(0.35, 0.55),
                  darkness=(0.05, 0.15), mix: float = 0.05, cast: float = 0.05,
                  bias: float = 0.03):
    """Return ``(low, gt, matrix)`` for an exposure-dominated degradation.

    The gain is chosen so that ``gt`` has a mean level drawn from
    ``exposure``; the colour cast (``mix``, ``cast``, ``bias``) is mild.
    """
    rng = np.random.default_rng(seed)
    low = rng.uniform(*darkness) * textured_image(shape, seed=int(rng.integers(2**31)))
    gain = rng.uniform(*exposure) / float(low.mean())
    m = random_anchor(rng, gain=gain, mix=mix, bias=bias, cast=cast)
    gt = apply_anchor(m, low)
    if noise > 0:
        gt = gt + rng.normal(0.0, noise, gt.shape)
    return low, gt, m


def rigid_warp(shape, angle_deg: float, tx: float, ty: float) -> np.ndarray:
    """2 x 3 matrix: rotation about the image centre followed by a shift."""
    th = np.deg2rad(angle_deg)
    c, s = np.cos(th), np.sin(th)
    rot = np.array([[c, -s], [s, c]])
    centre = np.array([(shape[1] - 1) / 2.0, (shape[0] - 1) / 2.0])
    t = np.array([tx, ty]) + centre - rot @ centre
    return np.hstack([rot, t[:, None]])


def misaligned_pair(shape=(256, 256), p=None, seed=0, pad: int = 48, channels: int = 1):
    """Return ``(input, reference)`` with ``input(x) = reference(p x)``.

    Both are cut from one larger texture so the input has no empty border;
    ``p`` maps input coordinates to reference coordinates (a GeoWarp matrix).
    """
    h, w = shape
    canvas = textured_image((h + 2 * pad, w + 2 * pad), seed=seed, channels=channels)
    if channels == 1:
        canvas = canvas[..., None]
    ref = canvas[pad:pad + h, pad:pad + w]
    p = np.eye(2, 3) if p is None else np.asarray(p, dtype=float)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    sx = p[0, 0] * xs + p[0, 1] * ys + p[0, 2] + pad
    sy = p[1, 0] * xs + p[1, 1] * ys + p[1, 2] + pad
    inp = np.stack([ndimage.map_coordinates(canvas[..., c], [sy, sx], order=3, mode="reflect")
                    for c in range(canvas.shape[2])], axis=-1)
    if channels == 1:
        return inp[..., 0], ref[..., 0].copy()
    return inp, ref.copy()
