"""Sensor-text alignment by ridge regression, plus retrieval over candidate texts.

Texts are embedded as hashed character n-gram bags; segments as per-position
token tf-idf blocks plus placement and duration features. A linear map W takes
segment embeddings into text space, and candidates are ranked by cosine.
"""

from __future__ import annotations

import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset import POSITIONS, positions_vector

TEXT_DIM = 512
NGRAM_SIZES = (3, 4, 5)
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class AlignmentError(ValueError):
    pass


class EmptyTextWarning(UserWarning):
    pass


class ZeroVectorWarning(UserWarning):
    pass


# -- text side ---------------------------------------------------------------


def normalize_text(text: str) -> str:
    return " ".join(text.casefold().split())


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _MASK64
    return h


def char_ngrams(text: str, sizes: Sequence[int] = NGRAM_SIZES) -> list[str]:
    """Character n-grams of the normalized text padded with one space each side."""
    s = f" {normalize_text(text)} "
    return [s[i : i + n] for n in sizes for i in range(len(s) - n + 1)]


@lru_cache(maxsize=65536)
def _embed_normalized(norm: str, dim: int) -> np.ndarray:
    v = np.zeros(dim)
    for g in char_ngrams(norm):
        v[fnv1a64(g.encode("utf-8")) % dim] += 1.0
    n = np.linalg.norm(v)
    if n > 0:
        v /= n
    v.setflags(write=False)
    return v


def embed_text(text: str, dim: int = TEXT_DIM) -> np.ndarray:
    """Unit-norm hashed n-gram bag; empty text gives the zero vector (with a warning)."""
    norm = normalize_text(text)
    if not norm:
        warnings.warn("empty text embedded as the zero vector", EmptyTextWarning, stacklevel=2)
    return _embed_normalized(norm, dim)


def embed_texts(texts: Sequence[str], dim: int = TEXT_DIM) -> np.ndarray:
    if not texts:
        return np.zeros((0, dim))
    return np.stack([embed_text(t, dim) for t in texts])


# -- segment side ------------------------------------------------------------


@dataclass(frozen=True)
class IdfStats:
    """Token vocabulary and inverse document frequencies fitted on training sequences.

    The vocabulary holds every unigram 1..K plus the bigrams observed in
    training; bigrams never seen in training are dropped at embedding time.
    """

    K: int
    positions: tuple[str, ...]
    bigrams: tuple[tuple[int, int], ...]
    idf: np.ndarray
    n_docs: int
    pooled: bool = True
    fingerprint: str = ""
    _bigram_index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self._bigram_index:
            self._bigram_index.update({b: self.K + i for i, b in enumerate(self.bigrams)})

    @property
    def n_terms(self) -> int:
        return self.K + len(self.bigrams)

    @property
    def n_blocks(self) -> int:
        return len(self.positions) + int(self.pooled)

    @property
    def dim(self) -> int:
        return self.n_blocks * self.n_terms + len(POSITIONS) + 1

    def term_counts(self, tokens: Sequence[int]) -> Counter:
        c: Counter = Counter()
        toks = list(tokens)
        for t in toks:
            if not 1 <= t <= self.K:
                raise AlignmentError(f"token {t} outside 1..{self.K}")
            c[t - 1] += 1
        for a, b in zip(toks, toks[1:]):
            j = self._bigram_index.get((a, b))
            if j is not None:
                c[j] += 1
        return c

    def block(self, counts: Counter) -> np.ndarray:
        v = np.zeros(self.n_terms)
        if not counts:
            return v
        idx = np.fromiter(counts.keys(), dtype=np.int64)
        cnt = np.fromiter(counts.values(), dtype=np.float64)
        v[idx] = cnt / cnt.sum() * self.idf[idx]
        n = np.linalg.norm(v)
        return v / n if n > 0 else v

    def to_json(self) -> dict:
        return {
            "K": self.K,
            "positions": list(self.positions),
            "bigrams": [list(b) for b in self.bigrams],
            "idf": [float(f"{x:.9g}") for x in self.idf],
            "n_docs": self.n_docs,
            "pooled": self.pooled,
            "fingerprint": self.fingerprint,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "IdfStats":
        return cls(
            K=int(rec["K"]),
            positions=tuple(rec["positions"]),
            bigrams=tuple(tuple(b) for b in rec["bigrams"]),
            idf=np.asarray(rec["idf"], dtype=float),
            n_docs=int(rec["n_docs"]),
            pooled=bool(rec.get("pooled", True)),
            fingerprint=rec.get("fingerprint", ""),
        )


def fit_idf(
    docs: Sequence[Sequence[int]],
    K: int,
    positions: Sequence[str],
    pooled: bool = True,
    fingerprint: str = "",
) -> IdfStats:
    """Smoothed idf ``log((1 + N) / (1 + df)) + 1`` over training token sequences."""
    if K < 1:
        raise AlignmentError("K must be >= 1")
    unknown = set(positions) - set(POSITIONS)
    if unknown:
        raise AlignmentError(f"unknown positions {sorted(unknown)}")
    order = tuple(p for p in POSITIONS if p in set(positions))
    uni_df = np.zeros(K)
    bi_df: Counter = Counter()
    for doc in docs:
        toks = list(doc)
        for t in set(toks):
            uni_df[t - 1] += 1
        bi_df.update(set(zip(toks, toks[1:])))
    bigrams = tuple(sorted(bi_df))
    df = np.concatenate([uni_df, np.array([bi_df[b] for b in bigrams], dtype=float)])
    n = len(docs)
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
    return IdfStats(K, order, bigrams, idf, n, pooled, fingerprint)


def embed_segment(
    tokens: Mapping[str, Sequence[int]],
    duration_s: float,
    idf: IdfStats,
    positions: Sequence[str] | None = None,
) -> np.ndarray:
    """Per-position tf-idf blocks, an optional pooled block, presence vector, log duration.

    ``positions`` defaults to the keys of ``tokens`` with a nonempty sequence;
    it sets the presence indicator. Positions outside the fitted layout
    raise.
    """
    present = {p: list(t) for p, t in tokens.items() if len(t) > 0}
    if not present:
        raise AlignmentError("all positions empty")
    if not duration_s > 0:
        raise AlignmentError(f"duration must be positive, got {duration_s}")
    stray = set(present) - set(idf.positions)
    if stray:
        raise AlignmentError(f"positions {sorted(stray)} not in the fitted layout")
    blocks = []
    pooled: Counter = Counter()
    for p in idf.positions:
        if p in present:
            c = idf.term_counts(present[p])
            pooled.update(c)
            blocks.append(idf.block(c))
        else:
            blocks.append(np.zeros(idf.n_terms))
    if idf.pooled:
        blocks.append(idf.block(pooled))
    pres = positions_vector(sorted(present) if positions is None else positions)
    return np.concatenate(blocks + [pres, [math.log(duration_s)]])


# -- alignment map -----------------------------------------------------------


@dataclass(frozen=True)
class AlignmentMap:
    W: np.ndarray  # D_t x D_u
    lam: float
    fingerprint: str = ""
    min_norm: bool = False
    residual: float = 0.0

    @property
    def dim_in(self) -> int:
        return self.W.shape[1]

    @property
    def dim_out(self) -> int:
        return self.W.shape[0]

    def apply(self, U: np.ndarray) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        if U.shape[-1] != self.dim_in:
            raise AlignmentError(f"segment embedding has dim {U.shape[-1]}, map expects {self.dim_in}")
        return U @ self.W.T

    def to_json(self) -> dict:
        return {
            "dim_in": self.dim_in,
            "dim_out": self.dim_out,
            "lambda": self.lam,
            "fingerprint": self.fingerprint,
            "min_norm": self.min_norm,
            "W": [float(f"{x:.9g}") for x in self.W.ravel()],
        }

    @classmethod
    def from_json(cls, rec: dict) -> "AlignmentMap":
        W = np.asarray(rec["W"], dtype=float).reshape(rec["dim_out"], rec["dim_in"])
        return cls(W, float(rec["lambda"]), rec.get("fingerprint", ""), bool(rec.get("min_norm", False)))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path: str | Path) -> "AlignmentMap":
        return cls.from_json(json.loads(Path(path).read_text()))


def normal_equation_residual(W: np.ndarray, U: np.ndarray, V: np.ndarray, lam: float) -> float:
    """Relative residual of ``W (U^T U + lam I) = V^T U``."""
    rhs = V.T @ U
    lhs = (W @ U.T) @ U + lam * W
    denom = max(np.linalg.norm(rhs), np.finfo(float).tiny)
    return float(np.linalg.norm(lhs - rhs) / denom)


def fit_alignment(U: np.ndarray, V: np.ndarray, lam: float = 1.0, fingerprint: str = "") -> AlignmentMap:
    """Ridge map ``argmin_W sum ||W u_i - v_i||^2 + lam ||W||_F^2``.

    Rows of ``U`` are segment embeddings, rows of ``V`` text embeddings. With
    ``lam == 0`` the minimum-norm least-squares solution is returned and
    ``min_norm`` records whether the design was rank deficient.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if U.shape[0] < 1:
        raise AlignmentError("need at least one training pair")
    if U.shape[0] != V.shape[0]:
        raise AlignmentError(f"{U.shape[0]} segment rows vs {V.shape[0]} text rows")
    if lam < 0 or not math.isfinite(lam):
        raise AlignmentError(f"ridge parameter must be finite and >= 0, got {lam}")
    if not (np.all(np.isfinite(U)) and np.all(np.isfinite(V))):
        raise AlignmentError("non-finite training embeddings")
    N, D = U.shape
    min_norm = False
    if lam == 0:
        X, _, rank, _ = np.linalg.lstsq(U, V, rcond=None)
        W = X.T
        min_norm = bool(rank < D)
        if min_norm:
            warnings.warn(f"rank-deficient design (rank {rank} < {D}); minimum-norm solution", stacklevel=2)
    elif N <= D:
        # dual form: W = V^T (U U^T + lam I)^-1 U
        A = U @ U.T + lam * np.eye(N)
        W = np.linalg.solve(A, V).T @ U
    else:
        A = U.T @ U + lam * np.eye(D)
        W = np.linalg.solve(A, U.T @ V).T
    res = normal_equation_residual(W, U, V, lam)
    if res > 1e-6:
        warnings.warn(f"normal-equation residual {res:.3g} exceeds 1e-6", stacklevel=2)
    return AlignmentMap(W, float(lam), fingerprint, min_norm, res)


# -- scoring and retrieval ---------------------------------------------------


def _unit_rows(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = np.linalg.norm(X, axis=-1, keepdims=True)
    zero = n[..., 0] == 0
    return np.divide(X, n, out=np.zeros_like(X), where=n > 0), zero


def score(x_emb: np.ndarray, t_emb: np.ndarray, amap: AlignmentMap) -> float:
    """Cosine between ``W x_emb`` and ``t_emb``; 0 (with a warning) if either is zero."""
    t = np.asarray(t_emb, dtype=float)
    if t.shape != (amap.dim_out,):
        raise AlignmentError(f"text embedding has shape {t.shape}, map expects ({amap.dim_out},)")
    return float(score_matrix(np.asarray(x_emb, dtype=float)[None], t[None], amap)[0, 0])


def score_matrix(X: np.ndarray, T: np.ndarray, amap: AlignmentMap) -> np.ndarray:
    """Cosine scores of every query row of ``X`` against every candidate row of ``T``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    T = np.atleast_2d(np.asarray(T, dtype=float))
    if T.shape[-1] != amap.dim_out:
        raise AlignmentError(f"text embeddings have dim {T.shape[-1]}, map expects {amap.dim_out}")
    q, qz = _unit_rows(amap.apply(X))
    c, cz = _unit_rows(T)
    if qz.any() or cz.any():
        warnings.warn("zero-vector operand scored as 0", ZeroVectorWarning, stacklevel=2)
    return q @ c.T


def rank_scores(scores: Sequence[float]) -> np.ndarray:
    """Candidate indices by descending score; ties keep the lower index first."""
    s = np.asarray(scores, dtype=float)
    return np.argsort(-s, kind="stable")


@dataclass(frozen=True)
class Ranking:
    order: np.ndarray  # 0-based candidate indices, best first
    scores: np.ndarray  # score of each candidate, in candidate order

    def top(self) -> int:
        return int(self.order[0])


def retrieve(x_emb: np.ndarray, candidates: np.ndarray, amap: AlignmentMap) -> Ranking:
    cands = np.atleast_2d(np.asarray(candidates, dtype=float))
    if cands.shape[0] == 0 or np.asarray(candidates).size == 0:
        raise AlignmentError("empty candidate pool")
    s = score_matrix(np.asarray(x_emb, dtype=float)[None], cands, amap)[0]
    return Ranking(rank_scores(s), s)


def classify_closed_set(
    x_emb: np.ndarray,
    class_names: Sequence[str],
    amap: AlignmentMap,
    class_embs: np.ndarray | None = None,
) -> str:
    """Retrieval restricted to class-name texts; returns the top-ranked name."""
    if not class_names:
        raise AlignmentError("empty class list")
    embs = embed_texts(class_names, amap.dim_out) if class_embs is None else class_embs
    return class_names[retrieve(x_emb, embs, amap).top()]
