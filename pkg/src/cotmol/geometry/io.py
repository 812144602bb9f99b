"""Embedding files: JSONL records or the packed ``CMEB`` binary format.

Binary layout (little-endian): magic ``b"CMEB"``, u32 count, u32 dim, then
count x dim float32 values row-major. A binary file holds one sequence.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from ..errors import ParseError, ShapeError
from .folding import EmbeddingSequence

MAGIC = b"CMEB"
_HEADER = struct.Struct("<4sII")


def write_cmeb(vectors, path: str | os.PathLike) -> None:
    arr = np.ascontiguousarray(np.asarray(vectors, dtype="<f4"))
    if arr.ndim != 2:
        raise ShapeError("CMEB payload must be 2-D")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def read_cmeb(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ParseError("CMEB file shorter than its header")
    magic, count, dim = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}, expected {MAGIC!r}")
    expected = _HEADER.size + 4 * count * dim
    if len(raw) != expected:
        raise ParseError(f"CMEB payload is {len(raw)} bytes, header implies {expected}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(count, dim)
    return data.astype(float)


def read_embeddings(path: str | os.PathLike) -> dict[str, EmbeddingSequence]:
    """Load embeddings keyed by trace id.

    A ``.bin``/``.cmeb`` file yields a single sequence named after the file stem.
    """
    path = os.fspath(path)
    if path.endswith((".bin", ".cmeb")):
        stem = os.path.splitext(os.path.basename(path))[0]
        return {stem: EmbeddingSequence(stem, read_cmeb(path))}
    out: dict[str, EmbeddingSequence] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                seq = EmbeddingSequence(str(rec["trace_id"]), np.asarray(rec["vectors"], dtype=float))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(str(exc), line=lineno) from None
            out[seq.trace_id] = seq
    return out


def write_embeddings(seqs, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seq in seqs:
            fh.write(json.dumps({"trace_id": seq.trace_id, "vectors": seq.vectors.tolist()}) + "\n")
