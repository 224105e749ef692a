"""Stable seed derivation and content fingerprints."""

from __future__ import annotations

import hashlib
from typing import Iterable


def derive_seed(base: int, *keys: object) -> int:
    """Derive a 63-bit seed from ``base`` and a path of keys.

    Uses BLAKE2b over the repr of the key path, so the result does not depend
    on ``PYTHONHASHSEED`` or on the order in which seeds are requested.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(repr((int(base),) + tuple(keys)).encode("utf-8"))
    return int.from_bytes(h.digest(), "big") >> 1


def fingerprint(ids: Iterable[str]) -> str:
    """SHA-256 hex digest of the sorted, newline-joined ids."""
    joined = "\n".join(sorted(ids))
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()
