"""Single-level orthonormal Haar DWT of a luminance plane and related evaluators.

For a 2 x 2 block ``[[a, b], [c, d]]`` the four coefficients are::

    ll = (a + b + c + d) / 2      lh = (a - b + c - d) / 2
    hl = (a + b - c - d) / 2      hh = (a - b - c + d) / 2

``lh`` responds to horizontal change (vertical edges), ``hl`` to vertical
change.  Odd dimensions are padded symmetrically to even size and the
reconstruction is cropped back.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .imgcore import as_plane, check_same_shape

DEFAULT_GAMMA_L = 0.1


@dataclass(frozen=True)
class WaveletBands:
    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray
    original_height: int
    original_width: int

    def __post_init__(self):
        shapes = {b.shape for b in (self.ll, self.lh, self.hl, self.hh)}
        if len(shapes) != 1:
            raise InvalidInputError(f"wavelet bands have inconsistent sizes: {sorted(shapes)}")
        (shape,) = shapes
        expect = ((self.original_height + 1) // 2, (self.original_width + 1) // 2)
        if shape != expect:
            raise InvalidInputError(
                f"band size {shape} does not match original size "
                f"{self.original_height}x{self.original_width}"
            )

    @property
    def high(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.lh, self.hl, self.hh

    def energy(self) -> float:
        return float(sum(np.sum(b * b) for b in (self.ll, self.lh, self.hl, self.hh)))


def dwt_haar(y) -> WaveletBands:
    plane = as_plane(y)
    h, w = plane.shape
    padded = np.pad(plane, ((0, h % 2), (0, w % 2)), mode="symmetric")
    a = padded[0::2, 0::2]
    b = padded[0::2, 1::2]
    c = padded[1::2, 0::2]
    d = padded[1::2, 1::2]
    # separable: rows first, then columns, each with 1/sqrt(2) taps
    s = 1.0 / np.sqrt(2.0)
    top_lo, top_hi = (a + b) * s, (a - b) * s
    bot_lo, bot_hi = (c + d) * s, (c - d) * s
    return WaveletBands(
        ll=(top_lo + bot_lo) * s,
        lh=(top_hi + bot_hi) * s,
        hl=(top_lo - bot_lo) * s,
        hh=(top_hi - bot_hi) * s,
        original_height=h,
        original_width=w,
    )


def idwt_haar(bands: WaveletBands) -> np.ndarray:
    ll, lh, hl, hh = (as_plane(x, n) for x, n in zip(
        (bands.ll, bands.lh, bands.hl, bands.hh), ("ll", "lh", "hl", "hh")))
    check_same_shape(ll, lh, hl, hh, names=("ll", "lh", "hl", "hh"))
    s = 1.0 / np.sqrt(2.0)
    top_lo, bot_lo = (ll + hl) * s, (ll - hl) * s
    top_hi, bot_hi = (lh + hh) * s, (lh - hh) * s
    bh, bw = ll.shape
    out = np.empty((2 * bh, 2 * bw))
    out[0::2, 0::2] = (top_lo + top_hi) * s
    out[0::2, 1::2] = (top_lo - top_hi) * s
    out[1::2, 0::2] = (bot_lo + bot_hi) * s
    out[1::2, 1::2] = (bot_lo - bot_hi) * s
    return out[: bands.original_height, : bands.original_width]


def clu_apply(ll, residual, gamma_l: float = DEFAULT_GAMMA_L) -> np.ndarray:
    """Constrained luminance update ``ll + gamma_l * tanh(residual)``.

    The result never moves a sample further than ``gamma_l`` from ``ll``; where
    float rounding of the sum would overshoot, the sample is stepped back
    toward ``ll`` by one ulp at a time.
    """
    ll = as_plane(ll, "ll")
    residual = as_plane(residual, "residual")
    check_same_shape(ll, residual, names=("ll", "residual"))
    if not (np.isfinite(gamma_l) and gamma_l >= 0):
        raise InvalidInputError(f"gamma_l must be a finite non-negative number, got {gamma_l}")
    step = gamma_l * np.tanh(residual)
    out = np.where(step == 0, ll, ll + step)
    over = np.abs(out - ll) > gamma_l
    while np.any(over):
        out[over] = np.nextafter(out[over], ll[over])
        over = np.abs(out - ll) > gamma_l
    return out


def lum_preservation_loss(out_ll, in_ll) -> float:
    out_ll = as_plane(out_ll, "out_ll")
    in_ll = as_plane(in_ll, "in_ll")
    check_same_shape(out_ll, in_ll, names=("out_ll", "in_ll"))
    return float(np.mean(np.abs(out_ll - in_ll)))


def hf_freq_loss(y_hat, y_gt) -> float:
    """Mean absolute difference over the LH, HL and HH bands of the two planes."""
    y_hat = as_plane(y_hat, "y_hat")
    y_gt = as_plane(y_gt, "y_gt")
    check_same_shape(y_hat, y_gt, names=("y_hat", "y_gt"))
    bh, bg = dwt_haar(y_hat), dwt_haar(y_gt)
    diffs = np.concatenate([np.abs(p - q).ravel() for p, q in zip(bh.high, bg.high)])
    return float(np.mean(diffs))


def export_bands(bands: WaveletBands, out_dir, stem: str = "y") -> dict[str, Path]:
    """Write the four bands as 8-bit PNGs for inspection.

    LL is stored as ``value / 2`` and the signed bands as ``0.5 + value / 2``,
    both clamped.  The files are lossy; use the in-memory bands for exact work.
    """
    from .io import save_image

    out_dir = Path(out_dir)
    paths = {}
    for name, band in (("ll", bands.ll), ("lh", bands.lh), ("hl", bands.hl), ("hh", bands.hh)):
        encoded = band / 2.0 if name == "ll" else 0.5 + band / 2.0
        path = out_dir / f"{stem}_{name}.png"
        save_image(path, encoded)
        paths[name] = path
    return paths
