"""Stable per-task seed derivation."""

from __future__ import annotations

import hashlib


def derive_seed(master: int, task: str, *index: object) -> int:
    """64-bit seed from (master seed, task name, indices).

    Hash based, so adding a task never shifts the stream of another.
    """
    key = "\x1f".join([str(int(master)), task, *map(str, index)])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")
