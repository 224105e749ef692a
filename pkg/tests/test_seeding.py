from __future__ import annotations

import hashlib

from narrate.seeding import derive_seed, fingerprint


def test_derive_seed_stable_and_distinct():
    a = derive_seed(0, "repetition", 1)
    assert a == derive_seed(0, "repetition", 1)
    assert a != derive_seed(0, "repetition", 2)
    assert a != derive_seed(1, "repetition", 1)
    assert 0 <= a < 2**63


def test_fingerprint_order_independent():
    assert fingerprint(["b", "a"]) == fingerprint(["a", "b"])
    assert fingerprint(["a", "b"]) == hashlib.sha256(b"a\nb").hexdigest()
    assert fingerprint(["a"]) != fingerprint(["a", "b"])
