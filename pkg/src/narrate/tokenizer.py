"""Chunking, multi-view featurization, fused projection and codebook quantization.

A fitted ``Tokenizer`` turns a stream interval into token ids 1..K:

    chunk -> [standardized time | STFT log-magnitude | CWT magnitude | missing fraction]
          -> principal-subspace projection -> nearest codeword

and decodes token ids back to the time domain by overlap-adding per-codeword
mean chunks.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import eigh

from .dataset import N_CHANNELS, SensorStream
from .spectral import CWTParams, STFTParams, cwt, default_scales, n_frames, stft

log = logging.getLogger(__name__)

VIEWS = ("time", "stft", "cwt")
LOG_FLOOR = 1e-8


class CodebookError(ValueError):
    pass


# ----------------------------------------------------------------------- chunking


@dataclass(frozen=True, eq=False)
class ChunkGrid:
    chunk_len: int
    hop: int
    starts: np.ndarray
    missing_fraction: np.ndarray
    n_samples: int
    sample_rate_hz: float = 30.0
    offset: int = 0

    @property
    def n_chunks(self) -> int:
        return len(self.starts)

    def start_times(self, t0: float = 0.0) -> np.ndarray:
        return t0 + self.starts / self.sample_rate_hz

    def coverage(self) -> np.ndarray:
        """Boolean length-T vector: sample lies inside at least one chunk."""
        cov = np.zeros(self.n_samples, dtype=bool)
        for s in self.starts:
            cov[s : s + self.chunk_len] = True
        return cov


def chunk_geometry(window_s: float, overlap: float, sample_rate_hz: float) -> tuple[int, int]:
    if not 0 <= overlap < 1:
        raise ValueError(f"overlap must lie in [0, 1), got {overlap}")
    chunk_len = int(round(window_s * sample_rate_hz))
    if chunk_len < 2:
        raise ValueError(f"window of {window_s}s at {sample_rate_hz}Hz is shorter than 2 samples")
    hop = max(1, int(round(chunk_len * (1.0 - overlap))))
    return chunk_len, hop


def chunk_array(
    values: np.ndarray,
    mask: np.ndarray,
    chunk_len: int,
    hop: int,
    sample_rate_hz: float = 30.0,
    offset: int = 0,
) -> tuple[ChunkGrid, np.ndarray, np.ndarray]:
    """Split a T x C block into M x chunk_len x C chunks (M = 0 if T < chunk_len)."""
    T = values.shape[0]
    M = (T - chunk_len) // hop + 1 if T >= chunk_len else 0
    starts = np.arange(M, dtype=np.int64) * hop
    idx = starts[:, None] + np.arange(chunk_len)[None, :]
    chunks = values[idx] if M else np.zeros((0, chunk_len, values.shape[1]))
    masks = mask[idx] if M else np.zeros((0, chunk_len, values.shape[1]), dtype=bool)
    missing = masks.mean(axis=(1, 2)) if M else np.zeros(0)
    grid = ChunkGrid(chunk_len, hop, starts, missing, T, sample_rate_hz, offset)
    return grid, chunks, masks


def chunk(
    stream: SensorStream, interval: tuple[float, float], window_s: float, overlap: float
) -> tuple[ChunkGrid, np.ndarray, np.ndarray]:
    """Chunk ``stream`` over ``interval`` = (start_s, end_s).

    Returns the grid plus chunk values (NaN where missing) and their masks.
    """
    chunk_len, hop = chunk_geometry(window_s, overlap, stream.sample_rate_hz)
    i0, i1 = stream.index_range(*interval)
    return chunk_array(
        stream.channels[i0:i1], stream.mask[i0:i1], chunk_len, hop, stream.sample_rate_hz, i0
    )


# ------------------------------------------------------------------ featurization


@dataclass(frozen=True)
class ChannelStats:
    mean: tuple[float, ...] = (0.0,) * N_CHANNELS
    std: tuple[float, ...] = (1.0,) * N_CHANNELS

    @classmethod
    def fit(cls, chunks: np.ndarray, masks: np.ndarray) -> "ChannelStats":
        flat = np.where(masks, np.nan, chunks).reshape(-1, chunks.shape[-1])
        if flat.shape[0] == 0 or np.all(np.isnan(flat)):
            return cls()
        mean = np.nanmean(flat, axis=0)
        std = np.nanstd(flat, axis=0)
        mean = np.where(np.isnan(mean), 0.0, mean)
        std = np.where(~(std > 1e-12), 1.0, std)
        return cls(tuple(map(float, mean)), tuple(map(float, std)))


@dataclass(frozen=True)
class FeatureSpec:
    chunk_len: int
    stft: STFTParams
    cwt: CWTParams
    views: tuple[str, ...] = VIEWS
    n_channels: int = N_CHANNELS

    def __post_init__(self) -> None:
        bad = set(self.views) - set(VIEWS)
        if bad or not self.views:
            raise ValueError(f"views must be a non-empty subset of {VIEWS}, got {self.views}")

    @classmethod
    def default(
        cls,
        chunk_len: int,
        sample_rate_hz: float = 30.0,
        views: Sequence[str] = VIEWS,
        wavelet: str = "morlet",
        n_scales: int = 8,
        stft_window: str = "hamming",
    ) -> "FeatureSpec":
        return cls(
            chunk_len,
            STFTParams.for_chunk(chunk_len, stft_window),
            CWTParams(default_scales(sample_rate_hz, wavelet, n_scales), wavelet),
            tuple(v for v in VIEWS if v in views),
        )

    @property
    def n_bins(self) -> int:
        return self.stft.window_len // 2 + 1

    @property
    def n_stft_frames(self) -> int:
        return n_frames(self.chunk_len, self.stft.window_len, self.stft.hop)

    @property
    def dim(self) -> int:
        C, L = self.n_channels, self.chunk_len
        d = 1
        if "time" in self.views:
            d += C * L
        if "stft" in self.views:
            d += C * self.n_bins * self.n_stft_frames
        if "cwt" in self.views:
            d += C * len(self.cwt.scales) * L
        return d


def spectral_features(chunks: np.ndarray, masks: np.ndarray, spec: FeatureSpec) -> np.ndarray:
    """STFT and CWT views of M chunks (zero-filled where masked), M x D_spec."""
    M = chunks.shape[0]
    filled = np.where(masks, 0.0, chunks).transpose(0, 2, 1)  # M x C x L
    parts = []
    if "stft" in spec.views:
        s = stft(filled, spec.stft.window_len, spec.stft.hop, spec.stft.window_fn)
        parts.append(np.log(np.maximum(np.abs(s), LOG_FLOOR)).reshape(M, -1))
    if "cwt" in spec.views:
        parts.append(cwt(filled, spec.cwt.scales, spec.cwt.wavelet).reshape(M, -1))
    return np.concatenate(parts, axis=1) if parts else np.zeros((M, 0))


def time_features(chunks: np.ndarray, masks: np.ndarray, stats: ChannelStats) -> np.ndarray:
    M = chunks.shape[0]
    z = (chunks - np.asarray(stats.mean)) / np.asarray(stats.std)
    z = np.where(masks, 0.0, z)
    return z.transpose(0, 2, 1).reshape(M, -1)


def assemble_features(
    chunks: np.ndarray,
    masks: np.ndarray,
    stats: ChannelStats,
    spec: FeatureSpec,
    spectral: np.ndarray | None = None,
) -> np.ndarray:
    """Full M x D feature matrix; ``spectral`` may be passed in precomputed."""
    M = chunks.shape[0]
    parts = []
    if "time" in spec.views:
        parts.append(time_features(chunks, masks, stats))
    if spec.views != ("time",):
        parts.append(spectral if spectral is not None else spectral_features(chunks, masks, spec))
    parts.append(masks.mean(axis=(1, 2)).reshape(M, 1))
    return np.concatenate(parts, axis=1)


def featurize(
    chunk_values: np.ndarray,
    spec: FeatureSpec,
    mask: np.ndarray | None = None,
    stats: ChannelStats | None = None,
) -> np.ndarray:
    """Raw concatenated feature vector of one chunk_len x C chunk."""
    x = np.asarray(chunk_values, dtype=np.float64)
    m = np.isnan(x) if mask is None else np.asarray(mask, dtype=bool)
    return assemble_features(x[None], m[None], stats or ChannelStats(), spec)[0]


# --------------------------------------------------------------------- projection


@dataclass(frozen=True, eq=False)
class Projection:
    mean: np.ndarray
    basis: np.ndarray  # D x d, orthonormal columns (zero columns past the rank)
    variances: np.ndarray
    rank: int
    rank_deficient: bool = False
    zero_variance: bool = False
    n_fit: int = 0

    @property
    def d(self) -> int:
        return self.basis.shape[1]

    def project(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X) - self.mean) @ self.basis

    def lift(self, Y: np.ndarray) -> np.ndarray:
        return np.asarray(Y) @ self.basis.T + self.mean


def _fix_signs(V: np.ndarray) -> np.ndarray:
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def fit_projection(features: np.ndarray, d: int, max_rows: int | None = None) -> Projection:
    """Top-``d`` principal directions of ``features`` plus their mean.

    ``max_rows`` caps the number of rows used (evenly strided, deterministic).
    Directions past the numerical rank are zero columns and flagged.
    """
    X = np.asarray(features, dtype=np.float64)
    N, D = X.shape
    if d < 1:
        raise ValueError("d must be >= 1")
    if N <= d:
        raise ValueError(f"need more than d={d} feature vectors, got {N}")
    if max_rows is not None and N > max_rows:
        X = X[np.linspace(0, N - 1, max_rows).round().astype(int)]
        N = X.shape[0]
    mean = X.mean(axis=0)
    Xc = X - mean
    k = min(d, D, N)
    if D <= N:
        evals, V = eigh(Xc.T @ Xc, subset_by_index=[D - k, D - 1])
    else:
        evals, U = eigh(Xc @ Xc.T, subset_by_index=[N - k, N - 1])
        evals = np.maximum(evals, 0.0)
        V = Xc.T @ U
        norms = np.linalg.norm(V, axis=0)
        V = V / np.where(norms > 0, norms, 1.0)
    evals, V = evals[::-1], V[:, ::-1]
    top = evals[0] if len(evals) else 0.0
    keep = evals > max(top, 0.0) * 1e-12 if top > 0 else np.zeros(len(evals), dtype=bool)
    rank = int(keep.sum())
    V = V[:, :rank]
    if rank:
        Q, R = np.linalg.qr(V)
        V = _fix_signs(Q * np.sign(np.diag(R)))
    basis = np.zeros((D, d))
    basis[:, :rank] = V
    variances = np.zeros(d)
    variances[:rank] = evals[:rank] / N
    mean.setflags(write=False)
    basis.setflags(write=False)
    return Projection(
        mean=mean,
        basis=basis,
        variances=variances,
        rank=rank,
        rank_deficient=rank < d,
        zero_variance=rank == 0,
        n_fit=N,
    )


# ----------------------------------------------------------------------- codebook


@dataclass(frozen=True, eq=False)
class Codebook:
    codewords: np.ndarray  # K x d
    templates: np.ndarray  # K x chunk_len x C
    usage: np.ndarray
    distortion_history: tuple[float, ...] = ()
    iterations: int = 0
    seed: int = 0
    reseeds: int = 0

    @property
    def K(self) -> int:
        return self.codewords.shape[0]

    @property
    def final_distortion(self) -> float:
        return self.distortion_history[-1] if self.distortion_history else float("nan")


def _sq_dists(X: np.ndarray, E: np.ndarray) -> np.ndarray:
    """Squared distances via the dot-product expansion (fast, used inside k-means)."""
    d2 = (X * X).sum(1)[:, None] - 2.0 * X @ E.T + (E * E).sum(1)[None, :]
    return np.maximum(d2, 0.0)


def _kmeans_pp(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    N = X.shape[0]
    chosen = [int(rng.integers(N))]
    best = ((X - X[chosen[0]]) ** 2).sum(1)
    for _ in range(1, K):
        total = best.sum()
        if not total > 0:
            raise CodebookError(f"only {len(chosen)} distinct feature vectors for K={K}")
        i = int(rng.choice(N, p=best / total))
        chosen.append(i)
        best = np.minimum(best, ((X - X[i]) ** 2).sum(1))
    return X[chosen].copy()


def _means(X: np.ndarray, labels: np.ndarray, K: int) -> tuple[np.ndarray, np.ndarray]:
    counts = np.bincount(labels, minlength=K)
    sums = np.zeros((K, X.shape[1]))
    np.add.at(sums, labels, X)
    return sums, counts


def kmeans_templates(
    labels: np.ndarray, chunks: np.ndarray, masks: np.ndarray, K: int
) -> np.ndarray:
    """Per-codeword mean of assigned raw chunks, ignoring masked samples."""
    M, L, C = chunks.shape
    vals = np.where(masks, 0.0, chunks).reshape(M, L * C)
    obs = (~masks).reshape(M, L * C).astype(np.float64)
    onehot = np.zeros((K, M))
    onehot[labels, np.arange(M)] = 1.0
    sums = onehot @ vals
    cnt = onehot @ obs
    tmpl = np.where(cnt > 0, sums / np.where(cnt > 0, cnt, 1.0), 0.0)
    return tmpl.reshape(K, L, C)


def fit_codebook(
    features: np.ndarray,
    K: int,
    max_iters: int = 50,
    seed: int = 0,
    chunks: np.ndarray | None = None,
    masks: np.ndarray | None = None,
) -> Codebook:
    """Alternating distortion minimization (k-means++ seeding, Lloyd updates).

    Empty codewords are re-seeded at the point currently farthest from its
    codeword. The recorded distortion sequence is non-increasing: an update
    that would raise it (floating-point noise near a fixpoint) is rolled back
    and the fit stops.
    """
    X = np.asarray(features, dtype=np.float64)
    N = X.shape[0]
    if K < 1:
        raise ValueError("K must be >= 1")
    if K > N:
        raise CodebookError(f"K={K} exceeds the number of feature vectors ({N})")
    rng = np.random.default_rng(seed)
    E = _kmeans_pp(X, K, rng)
    history: list[float] = []
    labels = None
    reseeds = 0
    it = 0
    for it in range(1, max_iters + 1):
        new_labels = np.argmin(_sq_dists(X, E), axis=1)
        point_d = ((X - E[new_labels]) ** 2).sum(1)
        dist = float(point_d.sum())
        if history and dist > history[-1]:
            log.debug("k-means: distortion rose by %g at iter %d; stopping", dist - history[-1], it)
            it -= 1
            break
        history.append(dist)
        prev_E = E
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=K)
        for k in np.flatnonzero(counts == 0):
            far = int(np.argmax(point_d))
            counts[labels[far]] -= 1
            labels[far] = k
            point_d[far] = 0.0
            reseeds += 1
        sums, counts = _means(X, labels, K)
        E = np.where(counts[:, None] > 0, sums / np.maximum(counts, 1)[:, None], prev_E)
    final = np.argmin(_sq_dists(X, E), axis=1)
    final_d = float(((X - E[final]) ** 2).sum())
    if final_d <= history[-1]:
        labels = final
        if final_d < history[-1]:
            history.append(final_d)
    else:
        E = prev_E
        labels = np.argmin(_sq_dists(X, E), axis=1)
    usage = np.bincount(labels, minlength=K)
    if chunks is not None:
        templates = kmeans_templates(labels, chunks, masks if masks is not None else np.isnan(chunks), K)
    else:
        templates = np.zeros((K, 0, 0))
    E = np.array(E)
    for a in (E, templates, usage):
        a.setflags(write=False)
    return Codebook(E, templates, usage, tuple(history), it, seed, reseeds)


def quantize(h: np.ndarray, cb: Codebook) -> int:
    """1-based index of the nearest codeword; ties go to the lowest index."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (cb.codewords.shape[1],):
        raise ValueError(f"feature dimension {h.shape} does not match codebook d={cb.codewords.shape[1]}")
    return int(np.argmin(((cb.codewords - h) ** 2).sum(axis=1))) + 1


def quantize_many(H: np.ndarray, cb: Codebook, block: int = 512) -> np.ndarray:
    """Vectorized ``quantize`` over the rows of ``H`` (exact differences)."""
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[1] != cb.codewords.shape[1]:
        raise ValueError(f"feature shape {H.shape} does not match codebook d={cb.codewords.shape[1]}")
    out = np.empty(H.shape[0], dtype=np.int64)
    E = cb.codewords
    for i in range(0, H.shape[0], block):
        blk = H[i : i + block]
        d2 = ((blk[:, None, :] - E[None, :, :]) ** 2).sum(axis=2)
        out[i : i + block] = np.argmin(d2, axis=1) + 1
    return out


def decode(tokens: Sequence[int], cb: Codebook, grid: ChunkGrid) -> np.ndarray:
    """Overlap-add codeword templates; overlaps are averaged, uncovered samples are zero."""
    tokens = np.asarray(tokens, dtype=np.int64)
    if len(tokens) != grid.n_chunks:
        raise ValueError(f"{len(tokens)} tokens for a grid of {grid.n_chunks} chunks")
    if len(tokens) and (tokens.min() < 1 or tokens.max() > cb.K):
        raise ValueError(f"token id outside [1, {cb.K}]")
    C = cb.templates.shape[2] if cb.templates.ndim == 3 and cb.templates.size else N_CHANNELS
    out = np.zeros((grid.n_samples, C))
    cover = np.zeros(grid.n_samples)
    for tok, s in zip(tokens, grid.starts):
        out[s : s + grid.chunk_len] += cb.templates[tok - 1]
        cover[s : s + grid.chunk_len] += 1.0
    hit = cover > 0
    out[hit] /= cover[hit][:, None]
    return out


# ------------------------------------------------------------ representation metrics


def time_l1(x: np.ndarray, x_hat: np.ndarray, exclude: np.ndarray | None = None) -> float:
    """Mean absolute error over entries not excluded (``exclude`` True = skip).

    NaN entries of ``x`` are always excluded.
    """
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_hat.shape}")
    skip = np.isnan(x)
    if exclude is not None:
        skip = skip | np.broadcast_to(np.asarray(exclude, dtype=bool), x.shape)
    keep = ~skip
    if not keep.any():
        raise ValueError("every sample is masked")
    return float(np.abs(x[keep] - x_hat[keep]).mean())


def token_histogram(tokens: Sequence[int], K: int) -> np.ndarray:
    t = np.asarray(tokens, dtype=np.int64).ravel()
    if t.size == 0:
        raise ValueError("empty token set")
    if t.min() < 1 or t.max() > K:
        raise ValueError(f"token id outside [1, {K}]")
    return np.bincount(t - 1, minlength=K) / t.size


def _kl2(p: np.ndarray, m: np.ndarray) -> float:
    nz = p > 0
    return float(np.sum(p[nz] * np.log2(p[nz] / m[nz])))


def js_divergence(P: Sequence[float], Q: Sequence[float]) -> float:
    """Jensen-Shannon divergence in bits (so it lies in [0, 1])."""
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if P.shape != Q.shape or P.ndim != 1:
        raise ValueError(f"P and Q must be equal-length vectors, got {P.shape} and {Q.shape}")
    for name, v in (("P", P), ("Q", Q)):
        if np.any(v < 0):
            raise ValueError(f"{name} has negative entries")
        if abs(v.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} sums to {v.sum()}, not 1")
    M = 0.5 * (P + Q)
    js = 0.5 * _kl2(P, M) + 0.5 * _kl2(Q, M)
    return min(max(js, 0.0), 1.0)


# ---------------------------------------------------------------- fitted pipeline


@dataclass(frozen=True)
class TokenizerParams:
    K: int = 128
    window_s: float = 2.0
    overlap: float = 0.5
    d: int = 64
    views: tuple[str, ...] = VIEWS
    max_iters: int = 50
    wavelet: str = "morlet"
    n_scales: int = 8
    stft_window: str = "hamming"
    max_missing: float = 0.5
    projection_rows: int | None = 2000

    @classmethod
    def from_json(cls, rec: dict) -> "TokenizerParams":
        rec = dict(rec)
        if "views" in rec:
            rec["views"] = tuple(rec["views"])
        unknown = set(rec) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown tokenizer parameters: {sorted(unknown)}")
        return cls(**rec)

    def to_json(self) -> dict:
        out = asdict(self)
        out["views"] = list(self.views)
        return out


@dataclass(frozen=True)
class TokenSequence:
    position_id: str
    tokens: tuple[int, ...]
    chunk_starts_s: tuple[float, ...]
    segment_id: str | None = None

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True, eq=False)
class Tokenizer:
    params: TokenizerParams
    sample_rate_hz: float
    spec: FeatureSpec
    stats: ChannelStats
    projection: Projection
    codebook: Codebook
    fingerprint: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.codebook.K

    def features(self, chunks: np.ndarray, masks: np.ndarray, spectral: np.ndarray | None = None) -> np.ndarray:
        raw = assemble_features(chunks, masks, self.stats, self.spec, spectral)
        return self.projection.project(raw)

    def encode_chunks(self, chunks: np.ndarray, masks: np.ndarray, spectral: np.ndarray | None = None) -> np.ndarray:
        if chunks.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        return quantize_many(self.features(chunks, masks, spectral), self.codebook)

    def tokenize(
        self, stream: SensorStream, interval: tuple[float, float], segment_id: str | None = None
    ) -> tuple[TokenSequence, ChunkGrid]:
        grid, chunks, masks = chunk(stream, interval, self.params.window_s, self.params.overlap)
        toks = self.encode_chunks(chunks, masks)
        t0 = float(stream.timestamps[grid.offset]) if grid.n_chunks else interval[0]
        seq = TokenSequence(
            stream.position_id,
            tuple(int(t) for t in toks),
            tuple(float(t) for t in grid.start_times(t0)),
            segment_id,
        )
        return seq, grid

    def to_json(self) -> dict:
        cb, pr = self.codebook, self.projection
        return {
            "format": "narrate-codebook",
            "version": 1,
            "params": self.params.to_json(),
            "sample_rate_hz": self.sample_rate_hz,
            "chunk_len": self.spec.chunk_len,
            "stft": asdict(self.spec.stft),
            "cwt": {"scales": list(self.spec.cwt.scales), "wavelet": self.spec.cwt.wavelet},
            "channel_stats": {"mean": list(self.stats.mean), "std": list(self.stats.std)},
            "projection": {
                "mean": _sig9(pr.mean),
                "basis": _sig9(pr.basis),
                "shape": list(pr.basis.shape),
                "variances": _sig9(pr.variances),
                "rank": pr.rank,
                "rank_deficient": pr.rank_deficient,
                "zero_variance": pr.zero_variance,
            },
            "codewords": _sig9(cb.codewords),
            "templates": _sig9(cb.templates),
            "template_shape": list(cb.templates.shape),
            "usage": [int(u) for u in cb.usage],
            "fit": {
                "iterations": cb.iterations,
                "distortion_history": [float(x) for x in cb.distortion_history],
                "final_distortion": cb.final_distortion,
                "seed": cb.seed,
                "reseeds": cb.reseeds,
            },
            "fingerprint": self.fingerprint,
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "Tokenizer":
        params = TokenizerParams.from_json(rec["params"])
        spec = FeatureSpec(
            rec["chunk_len"],
            STFTParams(**rec["stft"]),
            CWTParams(tuple(rec["cwt"]["scales"]), rec["cwt"]["wavelet"]),
            params.views,
        )
        pr = rec["projection"]
        D, d = pr["shape"]
        projection = Projection(
            mean=np.array(pr["mean"]),
            basis=np.array(pr["basis"]).reshape(D, d),
            variances=np.array(pr["variances"]),
            rank=pr["rank"],
            rank_deficient=pr["rank_deficient"],
            zero_variance=pr["zero_variance"],
        )
        fit = rec["fit"]
        codebook = Codebook(
            codewords=np.array(rec["codewords"]).reshape(len(rec["usage"]), d),
            templates=np.array(rec["templates"]).reshape(rec["template_shape"]),
            usage=np.array(rec["usage"]),
            distortion_history=tuple(fit["distortion_history"]),
            iterations=fit["iterations"],
            seed=fit["seed"],
            reseeds=fit["reseeds"],
        )
        stats = ChannelStats(tuple(rec["channel_stats"]["mean"]), tuple(rec["channel_stats"]["std"]))
        return cls(params, rec["sample_rate_hz"], spec, stats, projection, codebook,
                   rec.get("fingerprint", ""), rec.get("meta", {}))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Tokenizer":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _sig9(a: np.ndarray) -> list[float]:
    """Row-major flat list rounded to 9 significant digits."""
    return [float(format(v, ".9g")) for v in np.asarray(a, dtype=np.float64).ravel().tolist()]


def fit_tokenizer(
    chunks: np.ndarray,
    masks: np.ndarray,
    params: TokenizerParams,
    seed: int,
    sample_rate_hz: float = 30.0,
    fingerprint: str = "",
    spectral: np.ndarray | None = None,
    projection: Projection | None = None,
    stats: ChannelStats | None = None,
) -> Tokenizer:
    """Fit standardization, projection and codebook on pooled training chunks.

    Chunks whose missing fraction exceeds ``params.max_missing`` are left out.
    ``spectral``/``projection``/``stats`` may be supplied precomputed (the
    projection and stats must come from the same training chunks).
    """
    chunk_len, _ = chunk_geometry(params.window_s, params.overlap, sample_rate_hz)
    spec = FeatureSpec.default(
        chunk_len, sample_rate_hz, params.views, params.wavelet, params.n_scales, params.stft_window
    )
    keep = masks.mean(axis=(1, 2)) <= params.max_missing
    chunks, masks = chunks[keep], masks[keep]
    if spectral is not None:
        spectral = spectral[keep]
    if stats is None:
        stats = ChannelStats.fit(chunks, masks)
    raw = assemble_features(chunks, masks, stats, spec, spectral)
    if projection is None:
        projection = fit_projection(raw, params.d, params.projection_rows)
    H = projection.project(raw)
    cb = fit_codebook(H, params.K, params.max_iters, seed, chunks, masks)
    meta = {"n_fit_chunks": int(keep.sum()), "n_excluded_missing": int((~keep).sum())}
    return Tokenizer(params, sample_rate_hz, spec, stats, projection, cb, fingerprint, meta)
