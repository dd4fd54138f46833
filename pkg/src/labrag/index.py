"""Exact top-k cosine retrieval over an embedded document set, with a compact
single-file on-disk format ("LRIX")."""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .embedding import EmbeddingVector

MAGIC = b"LRIX"
VERSION = 1
_HEADER = struct.Struct("<4sHIII")  # magic, version, dim, count, checksum


class DimMismatch(Exception):
    pass


class DuplicateDocId(Exception):
    pass


class EmptyIndex(Exception):
    pass


class CorruptIndex(Exception):
    pass


class IoError(Exception):
    pass


@dataclass(frozen=True)
class IndexEntry:
    doc_id: str
    vector: EmbeddingVector
    text: str
    url: str


@dataclass(frozen=True)
class RetrievalHit:
    doc_id: str
    score: float
    text: str
    url: str
    rank: int


class Index:
    """Immutable after construction; searches are read-only and thread-safe."""

    def __init__(self, doc_ids: list[str], matrix: np.ndarray,
                 texts: list[str], urls: list[str]):
        self._doc_ids = list(doc_ids)
        self._matrix = np.ascontiguousarray(matrix, dtype=np.float64)
        self._texts = list(texts)
        self._urls = list(urls)
        self._matrix.setflags(write=False)

    @property
    def dim(self) -> int:
        return int(self._matrix.shape[1])

    def __len__(self) -> int:
        return len(self._doc_ids)

    @property
    def doc_ids(self) -> list[str]:
        return list(self._doc_ids)

    @property
    def vectors(self) -> np.ndarray:
        # write-protected view; rows align with doc_ids
        return self._matrix

    def entry_text(self, doc_id: str) -> str:
        return self._texts[self._doc_ids.index(doc_id)]


def build_index(entries: list[IndexEntry]) -> Index:
    if not entries:
        raise EmptyIndex("cannot build an index from zero entries")
    dim = entries[0].vector.dim
    for e in entries:
        if e.vector.dim != dim:
            raise DimMismatch(f"entry {e.doc_id!r} has dim {e.vector.dim}, index dim {dim}")
    ids = [e.doc_id for e in entries]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise DuplicateDocId(f"duplicate doc_ids: {dupes}")
    matrix = np.stack([e.vector.as_array() for e in entries])
    return Index(ids, matrix, [e.text for e in entries], [e.url for e in entries])


def search(index: Index, query: EmbeddingVector, k: int = 2) -> list[RetrievalHit]:
    """Exact brute-force top-k by cosine (dot product on unit vectors).

    Ties broken by doc_id ascending; ranks contiguous from 1.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(index) == 0:
        raise EmptyIndex("search on empty index")
    if query.dim != index.dim:
        raise DimMismatch(f"query dim {query.dim} != index dim {index.dim}")
    scores = index._matrix @ query.as_array()
    order = sorted(range(len(index)), key=lambda i: (-scores[i], index._doc_ids[i]))
    return [
        RetrievalHit(doc_id=index._doc_ids[i], score=float(scores[i]),
                     text=index._texts[i], url=index._urls[i], rank=rank)
        for rank, i in enumerate(order[:k], start=1)
    ]


def save(index: Index, path) -> None:
    payload = bytearray()
    payload += index._matrix.tobytes()
    for i in range(len(index)):
        for s in (index._doc_ids[i], index._texts[i], index._urls[i]):
            raw = s.encode("utf-8")
            payload += struct.pack("<I", len(raw)) + raw
    header = _HEADER.pack(MAGIC, VERSION, index.dim, len(index),
                          zlib.crc32(bytes(payload)))
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise IoError(str(exc)) from exc


def load(path) -> Index:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if len(blob) < _HEADER.size:
        raise CorruptIndex("file shorter than header")
    magic, version, dim, count, checksum = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CorruptIndex(f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptIndex(f"unsupported version {version}")
    payload = blob[_HEADER.size:]
    if zlib.crc32(payload) != checksum:
        raise CorruptIndex("checksum mismatch")

    vec_bytes = count * dim * 8
    if len(payload) < vec_bytes:
        raise CorruptIndex("truncated vector block")
    matrix = np.frombuffer(payload[:vec_bytes], dtype=np.float64).reshape(count, dim)

    ids, texts, urls = [], [], []
    off = vec_bytes
    try:
        for _ in range(count):
            fields = []
            for _ in range(3):
                (n,) = struct.unpack_from("<I", payload, off)
                off += 4
                fields.append(payload[off:off + n].decode("utf-8"))
                if off + n > len(payload):
                    raise CorruptIndex("truncated string block")
                off += n
            ids.append(fields[0])
            texts.append(fields[1])
            urls.append(fields[2])
    except struct.error as exc:
        raise CorruptIndex("truncated string block") from exc
    return Index(ids, matrix.copy(), texts, urls)
