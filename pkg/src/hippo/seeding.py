"""Stable seed derivation shared by every stochastic component."""

import hashlib


def derive_seed(seed: int, *labels: str) -> int:
    """Derive a child seed from a parent seed and a label path.

    Uses SHA-256 so the result is stable across processes and platforms
    (unlike the builtin ``hash``). Any stage seeded through here is fully
    reproducible from one global seed.
    """
    material = ":".join([str(int(seed)), *labels]).encode("utf-8")
    digest = hashlib.sha256(material).digest()
    return int.from_bytes(digest[:8], "big") % (2**31 - 1)
