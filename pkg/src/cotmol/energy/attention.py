"""Attention logit records and step token spans.

Binary ``CATT`` layout (little-endian): magic ``b"CATT"``, u32 heads,
u32 tokens, then heads x tokens x tokens float32 logits row-major, indexed
``[head, query, key]``. The sparse alternative is JSONL with one
``{"h", "i", "j", "s"}`` record per logit (``i`` query, ``j`` key).
"""

from __future__ import annotations

import json
import math
import os
import struct
from typing import Sequence

import numpy as np

from ..errors import MissingAttention, ParseError, ShapeError

MAGIC = b"CATT"
_HEADER = struct.Struct("<4sII")


class AttentionRecord:
    """Final-layer pre-softmax logits ``s[h][query][key]``, dense or sparse."""

    def __init__(self, dense: np.ndarray | None = None, sparse: dict | None = None,
                 heads: int | None = None, tokens: int | None = None):
        if dense is not None:
            dense = np.asarray(dense, dtype=float)
            if dense.ndim != 3 or dense.shape[1] != dense.shape[2]:
                raise ShapeError(f"dense logits must be (heads, tokens, tokens), got {dense.shape}")
            heads, tokens = dense.shape[0], dense.shape[1]
        elif sparse is None:
            raise ShapeError("attention record needs dense or sparse logits")
        self.dense = dense
        self.sparse = sparse
        self.heads = int(heads)
        self.tokens = int(tokens)

    @classmethod
    def from_dense(cls, logits) -> "AttentionRecord":
        return cls(dense=logits)

    def logit(self, head: int, query: int, key: int) -> float:
        if self.dense is not None:
            if not (0 <= query < self.tokens and 0 <= key < self.tokens):
                raise MissingAttention(f"token pair ({query}, {key}) outside {self.tokens} tokens")
            v = float(self.dense[head, query, key])
        else:
            try:
                v = self.sparse[(head, query, key)]
            except KeyError:
                raise MissingAttention(f"no logit for head {head}, pair ({query}, {key})") from None
        if not math.isfinite(v):
            raise MissingAttention(f"logit for head {head}, pair ({query}, {key}) is not finite")
        return v

    def mean_logit(self, query: int, key: int) -> float:
        """Head-wise mean of the logit from ``query`` to ``key``."""
        return sum(self.logit(h, query, key) for h in range(self.heads)) / self.heads

    def as_dense(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        arr = np.full((self.heads, self.tokens, self.tokens), np.nan)
        for (h, i, j), s in self.sparse.items():
            arr[h, i, j] = s
        return arr


def write_catt(logits, path: str | os.PathLike) -> None:
    arr = np.ascontiguousarray(np.asarray(logits, dtype="<f4"))
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ShapeError("CATT payload must be (heads, tokens, tokens)")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def read_catt(path: str | os.PathLike) -> AttentionRecord:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ParseError("CATT file shorter than its header")
    magic, heads, tokens = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}, expected {MAGIC!r}")
    expected = _HEADER.size + 4 * heads * tokens * tokens
    if len(raw) != expected:
        raise ParseError(f"CATT payload is {len(raw)} bytes, header implies {expected}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(heads, tokens, tokens)
    return AttentionRecord(dense=data.astype(float))


def read_sparse_attention(path: str | os.PathLike) -> AttentionRecord:
    entries: dict[tuple[int, int, int], float] = {}
    heads = tokens = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                key = (int(rec["h"]), int(rec["i"]), int(rec["j"]))
                entries[key] = float(rec["s"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(str(exc), line=lineno) from None
            heads = max(heads, key[0] + 1)
            tokens = max(tokens, key[1] + 1, key[2] + 1)
    return AttentionRecord(sparse=entries, heads=heads, tokens=tokens)


def read_attention(path: str | os.PathLike) -> AttentionRecord:
    with open(path, "rb") as fh:
        head = fh.read(4)
    return read_catt(path) if head == MAGIC else read_sparse_attention(path)


def validate_spans(spans: Sequence[Sequence[int]], n_steps: int, tokens: int | None = None) -> list[tuple[int, int]]:
    """Check ``[start, end)`` token ranges: one per step, non-empty, ordered, disjoint.

    Gaps between spans (separator tokens) are allowed.
    """
    out = [(int(s), int(e)) for s, e in spans]
    if len(out) != n_steps:
        raise ShapeError(f"{len(out)} token spans for {n_steps} steps")
    prev_end = 0
    for k, (s, e) in enumerate(out):
        if s < 0 or e <= s:
            raise ShapeError(f"span {k} [{s}, {e}) is empty or negative")
        if s < prev_end:
            raise ShapeError(f"span {k} overlaps or precedes span {k - 1}")
        if tokens is not None and e > tokens:
            raise ShapeError(f"span {k} ends at {e}, beyond {tokens} tokens")
        prev_end = e
    return out


def read_spans(path: str | os.PathLike) -> list[tuple[int, int]]:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno) from None
    try:
        return [(int(s), int(e)) for s, e in data]
    except (TypeError, ValueError):
        raise ParseError("spans must be a list of [start, end) pairs") from None
