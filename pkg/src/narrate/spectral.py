"""Short-time Fourier and continuous wavelet transforms.

Both operate on the last axis, so a C x T block of channels transforms in one
call. No magnitude normalization is applied to either transform.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

WINDOWS = ("rectangular", "hamming", "hann")
WAVELETS = ("morlet", "ricker")
MORLET_W0 = 6.0
# support radius, in units of the scale, beyond which the wavelet is treated as zero
SUPPORT_RADIUS = {"morlet": 4.0, "ricker": 5.0}


def window(name: str, length: int) -> np.ndarray:
    if name == "rectangular":
        return np.ones(length)
    if name == "hamming":
        return np.hamming(length)
    if name == "hann":
        return np.hanning(length)
    raise ValueError(f"unknown window {name!r}; expected one of {WINDOWS}")


def n_frames(n_samples: int, window_len: int, hop: int) -> int:
    return (n_samples - window_len) // hop + 1


def stft(x: np.ndarray, window_len: int, hop: int, window_fn: str = "hamming") -> np.ndarray:
    """Complex STFT over the last axis: ``(..., T) -> (..., L//2 + 1, T')``.

    Frame ``tau`` starts at sample ``tau * hop``; bins are the nonnegative
    frequencies of an L-point DFT.
    """
    x = np.asarray(x, dtype=np.float64)
    T = x.shape[-1]
    if hop < 1:
        raise ValueError(f"hop must be >= 1, got {hop}")
    if not 1 <= window_len <= T:
        raise ValueError(f"window length {window_len} outside [1, {T}]")
    frames = sliding_window_view(x, window_len, axis=-1)[..., ::hop, :]
    spec = np.fft.rfft(frames * window(window_fn, window_len), axis=-1)
    return np.swapaxes(spec, -1, -2)


def _morlet(u: np.ndarray) -> np.ndarray:
    return np.pi ** -0.25 * np.exp(1j * MORLET_W0 * u) * np.exp(-0.5 * u * u)


def _ricker(u: np.ndarray) -> np.ndarray:
    return 2.0 / (np.sqrt(3.0) * np.pi**0.25) * (1.0 - u * u) * np.exp(-0.5 * u * u)


def mother_wavelet(name: str, u: np.ndarray) -> np.ndarray:
    if name == "morlet":
        return _morlet(u)
    if name == "ricker":
        return _ricker(u)
    raise ValueError(f"unknown wavelet {name!r}; expected one of {WAVELETS}")


@lru_cache(maxsize=256)
def _cwt_kernel(T: int, scales: tuple[float, ...], wavelet: str) -> np.ndarray:
    """T x (S*T) matrix whose column block s maps a signal to its scale-s coefficients."""
    t = np.arange(T)
    diff = t[:, None] - t[None, :]  # (t, b)
    blocks = []
    for a in scales:
        u = diff / a
        psi = np.conj(mother_wavelet(wavelet, u)) / np.sqrt(a)
        psi = np.where(np.abs(diff) <= SUPPORT_RADIUS[wavelet] * a, psi, 0.0)
        blocks.append(psi)
    k = np.concatenate(blocks, axis=1)
    if wavelet == "ricker":
        k = k.real
    k.setflags(write=False)
    return k


def cwt(x: np.ndarray, scales, wavelet: str = "morlet") -> np.ndarray:
    """CWT coefficient magnitudes over the last axis: ``(..., T) -> (..., S, T)``."""
    scales = tuple(float(a) for a in np.atleast_1d(scales))
    if not scales:
        raise ValueError("empty scale list")
    if any(not a > 0 for a in scales):
        raise ValueError("scales must be positive")
    if wavelet not in WAVELETS:
        raise ValueError(f"unknown wavelet {wavelet!r}; expected one of {WAVELETS}")
    x = np.asarray(x, dtype=np.float64)
    T = x.shape[-1]
    coeffs = x @ _cwt_kernel(T, scales, wavelet)
    return np.abs(coeffs).reshape(x.shape[:-1] + (len(scales), T))


def default_scales(
    sample_rate_hz: float,
    wavelet: str = "morlet",
    n: int = 8,
    f_min: float = 0.5,
    f_max: float = 8.0,
) -> tuple[float, ...]:
    """Scales (in samples) whose centre frequencies are log-spaced over [f_min, f_max] Hz."""
    freqs = np.geomspace(f_max, f_min, n)
    if wavelet == "morlet":
        k = MORLET_W0
    elif wavelet == "ricker":
        k = np.sqrt(2.0)
    else:
        raise ValueError(f"unknown wavelet {wavelet!r}")
    return tuple(float(s) for s in k * sample_rate_hz / (2 * np.pi * freqs))


@dataclass(frozen=True)
class STFTParams:
    window_len: int
    hop: int
    window_fn: str = "hamming"

    @classmethod
    def for_chunk(cls, chunk_len: int, window_fn: str = "hamming") -> "STFTParams":
        return cls(chunk_len, max(1, chunk_len // 2), window_fn)


@dataclass(frozen=True)
class CWTParams:
    scales: tuple[float, ...]
    wavelet: str = "morlet"


def spectral_l1(x: np.ndarray, x_hat: np.ndarray, params: STFTParams) -> float:
    """Mean absolute difference of STFT magnitudes over (channel, bin, frame).

    Inputs are T x C (or length-T); time runs along the first axis.
    """
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_hat.shape}")
    a = np.abs(stft(x.T, params.window_len, params.hop, params.window_fn))
    b = np.abs(stft(x_hat.T, params.window_len, params.hop, params.window_fn))
    return float(np.mean(np.abs(a - b)))
