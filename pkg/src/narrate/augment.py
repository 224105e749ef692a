"""Token-space augmentations used while fitting the alignment map.

Applied in the fixed order collapse -> insert -> swap, each with its own seed
derived from the configured one. None of them touches annotations.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .seeding import derive_seed

INSERT_POLICIES = ("neighbor", "uniform")


@dataclass(frozen=True)
class AugmentConfig:
    enabled: bool = False
    p_collapse: float = 0.3
    p_insert: float = 0.1
    p_swap: float = 0.2
    max_swap_len: int = 3
    insert_policy: str = "neighbor"
    copies: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("p_collapse", "p_insert", "p_swap"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.max_swap_len < 1:
            raise ValueError("max_swap_len must be >= 1")
        if self.insert_policy not in INSERT_POLICIES:
            raise ValueError(f"insert_policy must be one of {INSERT_POLICIES}")
        if self.copies < 0:
            raise ValueError("copies must be >= 0")

    @classmethod
    def from_json(cls, rec: dict) -> "AugmentConfig":
        return cls(**rec)

    def to_json(self) -> dict:
        return asdict(self)


def collapse_repeats(tokens: Sequence[int], p: float, seed: int) -> list[int]:
    """Shorten each run of repeated tokens to length 1 with probability ``p``."""
    toks = list(tokens)
    if p <= 0 or not toks:
        return toks
    rng = np.random.default_rng(seed)
    out: list[int] = []
    i = 0
    while i < len(toks):
        j = i
        while j + 1 < len(toks) and toks[j + 1] == toks[i]:
            j += 1
        run = j - i + 1
        if run > 1 and rng.random() < p:
            out.append(toks[i])
        else:
            out.extend(toks[i : j + 1])
        i = j + 1
    return out


def insert_tokens(
    tokens: Sequence[int], p: float, policy: str, K: int, seed: int
) -> tuple[list[int], bool]:
    """After each token, insert one extra token with probability ``p``.

    ``neighbor`` copies one of the two adjacent tokens (the one just before
    the slot, or the one just after it when that exists); ``uniform`` draws
    from 1..K. An empty input has a single slot filled uniformly (the
    returned flag reports that fallback).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if policy not in INSERT_POLICIES:
        raise ValueError(f"unknown insert policy {policy!r}")
    toks = list(tokens)
    if p <= 0:
        return toks, False
    rng = np.random.default_rng(seed)
    if not toks:
        fallback = policy == "neighbor"
        return ([int(rng.integers(1, K + 1))] if rng.random() < p else []), fallback
    out: list[int] = []
    for i, tok in enumerate(toks):
        out.append(tok)
        if rng.random() < p:
            if policy == "uniform":
                out.append(int(rng.integers(1, K + 1)))
            elif i + 1 < len(toks) and rng.random() < 0.5:
                out.append(toks[i + 1])
            else:
                out.append(tok)
    return out, False


def swap_at(tokens: Sequence[int], i: int, j: int, length: int) -> list[int]:
    """Exchange ``tokens[i:i+length]`` and ``tokens[j:j+length]`` (i + length <= j)."""
    toks = list(tokens)
    if not (0 <= i and i + length <= j and j + length <= len(toks)):
        raise ValueError(f"runs [{i},{i + length}) and [{j},{j + length}) overlap or overflow")
    a, b = toks[i : i + length], toks[j : j + length]
    toks[i : i + length], toks[j : j + length] = b, a
    return toks


def swap_segments(tokens: Sequence[int], max_swap_len: int, p: float, seed: int) -> list[int]:
    """With probability ``p`` swap two non-overlapping equal-length runs."""
    toks = list(tokens)
    if p <= 0:
        return toks
    rng = np.random.default_rng(seed)
    if rng.random() >= p:
        return toks
    max_len = min(max_swap_len, len(toks) // 2)
    if max_len < 1:
        return toks
    length = int(rng.integers(1, max_len + 1))
    i = int(rng.integers(0, len(toks) - 2 * length + 1))
    j = int(rng.integers(i + length, len(toks) - length + 1))
    return swap_at(toks, i, j, length)


def augment(tokens: Sequence[int], cfg: AugmentConfig, K: int, seed: int | None = None) -> list[int]:
    """Apply collapse, insert and swap in that order."""
    base = cfg.seed if seed is None else seed
    out = collapse_repeats(tokens, cfg.p_collapse, derive_seed(base, "augment", 0))
    out, _ = insert_tokens(out, cfg.p_insert, cfg.insert_policy, K, derive_seed(base, "augment", 1))
    return swap_segments(out, cfg.max_swap_len, cfg.p_swap, derive_seed(base, "augment", 2))
