"""Residual energy decomposition into luminance, chrominance and texture shares.

All energies are per-pixel means of squared residuals:

* ``e_lum``: Y residual,
* ``e_chr``: U residual plus V residual,
* ``e_tex``: residual of the Laplacian of the grayscale image, with the
  grayscale plane kept in [0, 1].

The three terms are different kinds of quantity; the fractions are relative
shares of their sum, not a physical energy split.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .imgcore import as_image, as_rgb, check_same_shape, laplacian, rgb_to_yuv, to_grayscale

DEFAULT_BINS = 201
DEFAULT_RANGE = (-1.0, 1.0)
TEXTURE_INPUT_RANGE = "[0,1]"


@dataclass(frozen=True)
class EnergyReport:
    e_lum: float
    e_chr: float
    e_tex: float
    n_pixels: int

    @property
    def total(self) -> float:
        return self.e_lum + self.e_chr + self.e_tex

    def _fraction(self, e: float) -> float:
        total = self.total
        return e / total if total > 0 else 0.0

    @property
    def f_lum(self) -> float:
        return self._fraction(self.e_lum)

    @property
    def f_chr(self) -> float:
        return self._fraction(self.e_chr)

    @property
    def f_tex(self) -> float:
        return self._fraction(self.e_tex)

    def to_dict(self) -> dict:
        return {
            "e_lum": self.e_lum,
            "e_chr": self.e_chr,
            "e_tex": self.e_tex,
            "f_lum": self.f_lum,
            "f_chr": self.f_chr,
            "f_tex": self.f_tex,
            "n_pixels": self.n_pixels,
        }


class Channel(str, enum.Enum):
    Y = "Y"
    U = "U"
    V = "V"
    R = "R"
    G = "G"
    B = "B"
    GRAY = "Gray"

    @classmethod
    def parse(cls, name) -> "Channel":
        if isinstance(name, cls):
            return name
        for ch in cls:
            if ch.value.lower() == str(name).lower():
                return ch
        raise InvalidInputError(f"unknown channel {name!r}")


@dataclass(frozen=True)
class ResidualHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    mean: float
    std: float
    channel: Channel

    @property
    def n_pixels(self) -> int:
        return int(np.sum(self.counts))

    def merge(self, other: "ResidualHistogram") -> "ResidualHistogram":
        """Combine the counts of two histograms with identical binning.

        ``mean`` and ``std`` of the result are pooled over both sources.
        """
        if self.channel != other.channel or not np.array_equal(self.bin_edges, other.bin_edges):
            raise InvalidInputError("cannot merge histograms with different binning or channel")
        n1, n2 = self.n_pixels, other.n_pixels
        n = n1 + n2
        mean = (n1 * self.mean + n2 * other.mean) / n
        second = (n1 * (self.std**2 + self.mean**2) + n2 * (other.std**2 + other.mean**2)) / n
        std = math.sqrt(max(second - mean * mean, 0.0))
        return ResidualHistogram(self.bin_edges, self.counts + other.counts, mean, std, self.channel)

    def to_dict(self) -> dict:
        return {
            "channel": self.channel.value,
            "bin_edges": [float(e) for e in self.bin_edges],
            "counts": [int(c) for c in self.counts],
            "mean": self.mean,
            "std": self.std,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(["edge_lo", "edge_hi", "count"])
        for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
            writer.writerow([format(float(lo), ".17g"), format(float(hi), ".17g"), int(c)])
        return buf.getvalue()


def _texture(rgb: np.ndarray) -> np.ndarray:
    return laplacian(to_grayscale(rgb))


def decompose_energy(img, gt) -> EnergyReport:
    img = as_rgb(img, "img")
    gt = as_rgb(gt, "gt")
    check_same_shape(img, gt, names=("img", "gt"))
    yi, yg = rgb_to_yuv(img), rgb_to_yuv(gt)
    e_lum = float(np.mean((yi.y - yg.y) ** 2))
    e_chr = float(np.mean((yi.u - yg.u) ** 2) + np.mean((yi.v - yg.v) ** 2))
    e_tex = float(np.mean((_texture(img) - _texture(gt)) ** 2))
    return EnergyReport(e_lum, e_chr, e_tex, img.shape[0] * img.shape[1])


def _select(img: np.ndarray, channel: Channel) -> np.ndarray:
    if channel is Channel.GRAY:
        return to_grayscale(img)
    if img.ndim == 2:
        raise InvalidInputError(f"channel {channel.value} needs a 3-channel image")
    if channel in (Channel.R, Channel.G, Channel.B):
        return img[..., "RGB".index(channel.value)]
    yuv = rgb_to_yuv(img)
    return {Channel.Y: yuv.y, Channel.U: yuv.u, Channel.V: yuv.v}[channel]


def residual_histogram(img, gt, channel="Y", bins: int = DEFAULT_BINS,
                       range: tuple[float, float] = DEFAULT_RANGE) -> ResidualHistogram:
    """Histogram of ``img - gt`` on one channel.

    Residuals outside ``range`` are counted in the end bins; ``mean`` and
    ``std`` use the unclipped residuals.
    """
    img = as_image(img, "img")
    gt = as_image(gt, "gt")
    check_same_shape(img, gt, names=("img", "gt"))
    channel = Channel.parse(channel)
    lo, hi = float(range[0]), float(range[1])
    if int(bins) < 1:
        raise InvalidInputError(f"bins must be >= 1, got {bins}")
    if not lo < hi:
        raise InvalidInputError(f"empty histogram range ({lo}, {hi})")
    bins = int(bins)
    res = (_select(img, channel) - _select(gt, channel)).ravel()
    edges = np.linspace(lo, hi, bins + 1)
    idx = np.searchsorted(edges, res, side="right") - 1
    # right edge of the last bin is closed, as in numpy.histogram
    idx[res == hi] = bins - 1
    idx = np.clip(idx, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(np.int64)
    return ResidualHistogram(edges, counts, float(np.mean(res)), float(np.std(res)), channel)


def luminance_error_ratio(low, aligned, gt) -> float:
    """``e_lum(low, gt) / e_lum(aligned, gt)``.

    Returns ``inf`` when only the denominator vanishes and 1.0 when both do.
    """
    low = as_rgb(low, "low")
    aligned = as_rgb(aligned, "aligned")
    gt = as_rgb(gt, "gt")
    check_same_shape(low, aligned, gt, names=("low", "aligned", "gt"))
    y_gt = rgb_to_yuv(gt).y
    num = float(np.mean((rgb_to_yuv(low).y - y_gt) ** 2))
    den = float(np.mean((rgb_to_yuv(aligned).y - y_gt) ** 2))
    if den == 0.0:
        return 1.0 if num == 0.0 else math.inf
    return num / den
