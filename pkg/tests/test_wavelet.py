from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gea.errors import InvalidInputError
from gea.io import load_image
from gea.wavelet import (WaveletBands, clu_apply, dwt_haar, export_bands, hf_freq_loss,
                         idwt_haar, lum_preservation_loss)


def test_constant_image_bands():
    b = dwt_haar(np.full((4, 4), 0.3))
    assert b.ll.shape == (2, 2)
    assert np.allclose(b.ll, 0.6, atol=1e-15)
    for band in b.high:
        assert np.allclose(band, 0, atol=1e-15)


def test_single_block_hand_values():
    a, b_, c, d = 0.9, 0.2, 0.5, 0.1
    bands = dwt_haar(np.array([[a, b_], [c, d]]))
    assert bands.ll[0, 0] == pytest.approx((a + b_ + c + d) / 2, abs=1e-15)
    assert bands.lh[0, 0] == pytest.approx((a - b_ + c - d) / 2, abs=1e-15)
    assert bands.hl[0, 0] == pytest.approx((a + b_ - c - d) / 2, abs=1e-15)
    assert bands.hh[0, 0] == pytest.approx((a - b_ - c + d) / 2, abs=1e-15)


@pytest.mark.parametrize("shape", [(8, 8), (16, 6), (30, 44)])
def test_parseval_even(shape, rng):
    x = rng.random(shape)
    assert dwt_haar(x).energy() == pytest.approx(np.sum(x * x), rel=1e-10)


@pytest.mark.parametrize("shape", [(31, 45), (1, 1), (1, 6), (7, 2), (600, 401)])
def test_perfect_reconstruction_any_size(shape, rng):
    x = rng.random(shape)
    b = dwt_haar(x)
    assert b.ll.shape == ((shape[0] + 1) // 2, (shape[1] + 1) // 2)
    assert np.max(np.abs(idwt_haar(b) - x)) <= 1e-12


def test_zero_and_ll_only_bands():
    z = np.zeros((3, 4))
    assert np.array_equal(idwt_haar(WaveletBands(z, z, z, z, 6, 8)), np.zeros((6, 8)))
    const = dwt_haar(np.full((6, 8), 0.7))
    rebuilt = idwt_haar(WaveletBands(const.ll, z, z, z, 6, 8))
    assert np.allclose(rebuilt, 0.7, atol=1e-15)


def test_inconsistent_bands_rejected():
    z = np.zeros((3, 4))
    with pytest.raises(InvalidInputError):
        WaveletBands(z, z, np.zeros((3, 3)), z, 6, 8)
    with pytest.raises(InvalidInputError):
        WaveletBands(z, z, z, z, 10, 8)
    with pytest.raises(InvalidInputError):
        dwt_haar(np.zeros((4, 4, 3)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    x, y = rng.random((9, 10)), rng.random((9, 10))
    lhs = dwt_haar(alpha * x + beta * y)
    bx, by = dwt_haar(x), dwt_haar(y)
    for name in ("ll", "lh", "hl", "hh"):
        expect = alpha * getattr(bx, name) + beta * getattr(by, name)
        assert np.max(np.abs(getattr(lhs, name) - expect)) <= 1e-12


# --- CLU -----------------------------------------------------------------

def test_clu_zero_gamma_and_zero_residual(rng):
    ll = rng.random((5, 5))
    assert np.array_equal(clu_apply(ll, rng.standard_normal((5, 5)), 0.0), ll)
    assert np.array_equal(clu_apply(ll, np.zeros((5, 5)), 0.3), ll)


def test_clu_saturation(rng):
    ll = rng.random((6, 6))
    out = clu_apply(ll, np.full((6, 6), 1000.0), 0.1)
    dev = out - ll
    assert np.all(dev >= 0) and np.all(dev <= 0.1)
    assert dev.max() == pytest.approx(0.1, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0, 5))
def test_clu_bound(seed, gamma):
    rng = np.random.default_rng(seed)
    ll = rng.uniform(-3, 3, (4, 4))
    res = rng.standard_normal((4, 4)) * 10 ** rng.uniform(-2, 3)
    assert np.max(np.abs(clu_apply(ll, res, gamma) - ll)) <= gamma


def test_clu_errors():
    with pytest.raises(InvalidInputError):
        clu_apply(np.zeros((2, 2)), np.zeros((2, 3)), 0.1)
    with pytest.raises(InvalidInputError):
        clu_apply(np.zeros((2, 2)), np.zeros((2, 2)), -0.1)


def test_lum_preservation_loss(rng):
    ll = rng.random((4, 4))
    assert lum_preservation_loss(ll, ll) == 0
    assert lum_preservation_loss(ll + 0.2, ll) == pytest.approx(0.2, abs=1e-15)
    g = 0.07
    out = clu_apply(ll, rng.standard_normal((4, 4)) * 5, g)
    assert lum_preservation_loss(out, ll) <= g
    with pytest.raises(InvalidInputError):
        lum_preservation_loss(ll, ll[:3])


# --- high-frequency loss ---------------------------------------------------

def test_hf_loss_identity_and_constant(rng):
    y = rng.random((8, 8))
    assert hf_freq_loss(y, y) == 0
    assert hf_freq_loss(y + 0.25, y) == pytest.approx(0, abs=1e-15)


def test_hf_loss_single_pixel_change(rng):
    y = rng.random((4, 4))
    delta = 0.6
    y2 = y.copy()
    y2[1, 2] += delta
    # one 2x2 block changes; each of its 3 HF coefficients moves by |delta|/2,
    # averaged over 3 bands x 4 coefficients
    expect = 3 * (delta / 2) / 12
    assert hf_freq_loss(y2, y) == pytest.approx(expect, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-1, 1))
def test_hf_loss_constant_invariance(seed, c):
    rng = np.random.default_rng(seed)
    a, b = rng.random((6, 7)), rng.random((6, 7))
    assert hf_freq_loss(a + c, b + c) == pytest.approx(hf_freq_loss(a, b), abs=1e-12)


def test_hf_loss_mismatch():
    with pytest.raises(InvalidInputError):
        hf_freq_loss(np.zeros((4, 4)), np.zeros((4, 6)))


def test_export_bands(tmp_path: Path, rng):
    bands = dwt_haar(rng.random((10, 12)))
    paths = export_bands(bands, tmp_path, "y")
    assert sorted(paths) == ["hh", "hl", "lh", "ll"]
    lh = load_image(paths["lh"], rgb=False)
    assert lh.shape == (5, 6)
    assert np.allclose(lh, np.clip(0.5 + bands.lh / 2, 0, 1), atol=0.5 / 255 + 1e-12)
