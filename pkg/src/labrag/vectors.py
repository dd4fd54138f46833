"""Intermediate vector file ("LRVC") written by `labrag embed` and consumed by
`labrag index`: doc_id-aligned float64 vectors plus the provider tag."""

from __future__ import annotations

import struct

import numpy as np

from .embedding import EmbeddingVector
from .index import CorruptIndex, IoError

MAGIC = b"LRVC"
_HEADER = struct.Struct("<4sHI")  # magic, dim... packed below


def save_vectors(path, pairs: list[tuple[str, EmbeddingVector]]) -> None:
    if not pairs:
        raise ValueError("no vectors to save")
    dim = pairs[0][1].dim
    tag = pairs[0][1].provider_tag.encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<III", dim, len(pairs), len(tag)))
            fh.write(tag)
            for doc_id, vec in pairs:
                if vec.dim != dim:
                    raise ValueError(f"mixed dims: {vec.dim} vs {dim}")
                raw_id = doc_id.encode("utf-8")
                fh.write(struct.pack("<I", len(raw_id)))
                fh.write(raw_id)
                fh.write(vec.as_array().tobytes())
    except OSError as exc:
        raise IoError(str(exc)) from exc


def load_vectors(path) -> tuple[int, str, dict[str, np.ndarray]]:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if blob[:4] != MAGIC:
        raise CorruptIndex("not a vector file")
    dim, count, tag_len = struct.unpack_from("<III", blob, 4)
    off = 16
    tag = blob[off:off + tag_len].decode("utf-8")
    off += tag_len
    out: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<I", blob, off)
            off += 4
            doc_id = blob[off:off + n].decode("utf-8")
            off += n
            vec = np.frombuffer(blob[off:off + dim * 8], dtype=np.float64)
            if vec.size != dim:
                raise CorruptIndex("truncated vector block")
            off += dim * 8
            out[doc_id] = vec.copy()
    except struct.error as exc:
        raise CorruptIndex("truncated vector file") from exc
    return dim, tag, out
