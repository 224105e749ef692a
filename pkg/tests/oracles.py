"""Naive reference implementations used as test oracles."""

from __future__ import annotations

import math

import numpy as np

from narrate.spectral import SUPPORT_RADIUS, mother_wavelet, window


def stft_naive(x, L, H, window_fn):
    x = np.asarray(x, dtype=float)
    w = window(window_fn, L)
    n_frames = (len(x) - L) // H + 1
    F = L // 2 + 1
    out = np.zeros((F, n_frames), dtype=complex)
    for tau in range(n_frames):
        for k in range(F):
            omega = 2 * math.pi * k / L
            s = 0j
            for t in range(L):
                s += x[t + tau * H] * w[t] * complex(math.cos(omega * t), -math.sin(omega * t))
            out[k, tau] = s
    return out


def cwt_naive(x, scales, wavelet):
    """Direct sum per (scale, shift), vectorized only over the summation index t."""
    x = np.asarray(x, dtype=float)
    T = len(x)
    t = np.arange(T)
    out = np.zeros((len(scales), T))
    for i, a in enumerate(scales):
        for b in range(T):
            inside = np.abs(t - b) <= SUPPORT_RADIUS[wavelet] * a
            psi = np.conj(mother_wavelet(wavelet, (t[inside] - b) / a))
            out[i, b] = abs(np.sum(x[inside] * psi)) / math.sqrt(a)
    return out


def recall_naive(first_ranks, k):
    return sum(1 for r in first_ranks if r is not None and r <= k) / len(first_ranks)


def mrr_naive(first_ranks):
    vals = [1.0 / r for r in first_ranks if r is not None]
    return sum(vals) / len(vals)


def ndcg_naive(ranking, grades, k):
    dcg = 0.0
    for i in range(min(k, len(ranking))):
        dcg += (2 ** grades.get(ranking[i], 0) - 1) / math.log2(i + 2)
    ideal = sorted(grades.values(), reverse=True)
    idcg = 0.0
    for i in range(min(k, len(ideal))):
        idcg += (2 ** ideal[i] - 1) / math.log2(i + 2)
    return dcg / idcg


def macro_f1_naive(preds, golds):
    classes = sorted(set(preds) | set(golds))
    total = 0.0
    for c in classes:
        tp = fp = fn = 0
        for p, g in zip(preds, golds):
            if p == c and g == c:
                tp += 1
            elif p == c:
                fp += 1
            elif g == c:
                fn += 1
        total += 2 * tp / (2 * tp + fp + fn)
    return total / len(classes)


def time_l1_naive(x, xh):
    s, n = 0.0, 0
    for t in range(x.shape[0]):
        for c in range(x.shape[1]):
            if not math.isnan(x[t, c]):
                s += abs(x[t, c] - xh[t, c])
                n += 1
    return s / n


def js_naive(P, Q):
    total = 0.0
    for p, q in zip(P, Q):
        m = (p + q) / 2
        if p > 0:
            total += 0.5 * p * math.log2(p / m)
        if q > 0:
            total += 0.5 * q * math.log2(q / m)
    return total


def argmin_naive(h, E):
    best, best_d = 0, None
    for k in range(E.shape[0]):
        d = sum((h[j] - E[k, j]) ** 2 for j in range(len(h)))
        if best_d is None or d < best_d:
            best, best_d = k, d
    return best + 1
