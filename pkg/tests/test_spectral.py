from __future__ import annotations

import numpy as np
import pytest

from narrate.spectral import STFTParams, cwt, default_scales, mother_wavelet, spectral_l1, stft

from oracles import cwt_naive, stft_naive


def test_constant_signal_rectangular_window():
    s = stft(np.ones(4), 4, 4, "rectangular")
    assert s.shape == (3, 1)
    assert np.allclose(np.abs(s[:, 0]), [4.0, 0.0, 0.0], atol=1e-12)


def test_zero_signal_gives_zero_transforms():
    assert not np.any(stft(np.zeros(32), 8, 4))
    assert not np.any(cwt(np.zeros(32), [1.0, 2.0]))


@pytest.mark.parametrize("window_fn", ["rectangular", "hamming", "hann"])
def test_stft_matches_direct_sum(window_fn):
    rng = np.random.default_rng(1)
    x = rng.normal(size=40)
    got = stft(x, 12, 5, window_fn)
    ref = stft_naive(x, 12, 5, window_fn)
    assert np.allclose(got, ref, rtol=1e-9, atol=1e-12)


def test_stft_errors():
    with pytest.raises(ValueError):
        stft(np.ones(4), 5, 1)
    with pytest.raises(ValueError):
        stft(np.ones(4), 4, 0)
    with pytest.raises(ValueError):
        stft(np.ones(8), 4, 2, "triangle")


def test_stft_is_linear():
    rng = np.random.default_rng(2)
    x = rng.normal(size=64)
    assert np.allclose(stft(-2.5 * x, 16, 8), -2.5 * stft(x, 16, 8))


def test_bin_aligned_exponential_concentrates_in_one_bin():
    L, k0 = 16, 3
    x = np.exp(2j * np.pi * k0 * np.arange(L) / L)
    s = stft(x.real, L, L, "rectangular") + 1j * stft(x.imag, L, L, "rectangular")
    mags = np.abs(s[:, 0])
    assert mags[k0] == pytest.approx(L)
    assert np.all(np.delete(mags, k0) <= 1e-9)


def test_stft_batches_over_leading_axes():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(4, 3, 30))
    got = stft(X, 10, 5)
    assert got.shape == (4, 3, 6, 5)
    assert np.allclose(got[2, 1], stft(X[2, 1], 10, 5))


@pytest.mark.parametrize("wavelet", ["morlet", "ricker"])
def test_cwt_matches_direct_sum(wavelet):
    rng = np.random.default_rng(4)
    x = rng.normal(size=48)
    scales = [1.0, 2.5, 6.0]
    assert np.allclose(cwt(x, scales, wavelet), cwt_naive(x, scales, wavelet), rtol=1e-9, atol=1e-12)


def test_ricker_impulse_profile():
    T, t0, a = 64, 30, 3.0
    x = np.zeros(T)
    x[t0] = 1.0
    got = cwt(x, [a], "ricker")[0]
    b = np.arange(T)
    expect = np.abs(mother_wavelet("ricker", (t0 - b) / a)) / np.sqrt(a)
    expect[np.abs(t0 - b) > 5 * a] = 0.0
    assert np.allclose(got, expect, atol=1e-12)


def test_ricker_symmetric_signal_symmetric_magnitude():
    T = 41
    t = np.arange(T) - T // 2
    x = np.exp(-(t / 6.0) ** 2) * np.cos(t / 2.0)
    c = cwt(x, [1.5, 3.0], "ricker")
    assert np.allclose(c, c[:, ::-1], atol=1e-12)


def test_cwt_errors():
    with pytest.raises(ValueError):
        cwt(np.ones(8), [])
    with pytest.raises(ValueError):
        cwt(np.ones(8), [0.0])
    with pytest.raises(ValueError):
        cwt(np.ones(8), [1.0], "haar")


def test_default_scales_span_band():
    s = default_scales(30.0)
    assert len(s) == 8
    f = 6.0 * 30.0 / (2 * np.pi * np.array(s))
    assert f[0] == pytest.approx(8.0) and f[-1] == pytest.approx(0.5)


def test_spectral_l1_examples():
    p = STFTParams(4, 4, "rectangular")
    x = np.ones((8, 2))
    assert spectral_l1(x, x, p) == 0.0
    expect = np.mean(np.abs(stft(x.T, 4, 4, "rectangular")))
    assert spectral_l1(x, np.zeros_like(x), p) == pytest.approx(expect)
    assert expect == pytest.approx(4.0 / 3.0)
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=(2, 20, 3))
    assert spectral_l1(a, b, p) == spectral_l1(b, a, p)
    with pytest.raises(ValueError):
        spectral_l1(a, b[:10], p)
