"""Text embedding providers: a remote HTTP API client and a deterministic
hashed-3-gram fallback for offline use. All vectors are unit-norm so cosine
similarity reduces to a dot product."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import httpx
import numpy as np

logger = logging.getLogger(__name__)

LOCAL_DEFAULT_DIM = 512
REMOTE_DEFAULT_DIM = 3072
DEFAULT_MODEL = "text-embedding-3-large"
DEFAULT_KEY_ENV = "EMBEDDING_API_KEY"

_RETRY_DELAYS = (0.5, 1.0, 2.0)


class EmptyInput(Exception):
    """Cannot embed an empty string."""


class AuthError(Exception):
    """API key missing from the environment or rejected by the endpoint."""


class RemoteError(Exception):
    """Embedding endpoint failed after retries."""

    def __init__(self, message: str, status: Optional[int] = None, retries: int = 0):
        self.status = status
        self.retries = retries
        super().__init__(f"{message} (status={status}, retries={retries})")


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    dim: int
    provider_tag: str

    def __post_init__(self):
        if len(self.values) != self.dim:
            raise ValueError(f"expected {self.dim} values, got {len(self.values)}")
        norm = float(np.linalg.norm(self.values))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"vector not unit-norm: |v| = {norm}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


@dataclass(frozen=True)
class EmbeddingProviderConfig:
    kind: str = "local-hash"  # "local-hash" | "remote"
    model_name: str = DEFAULT_MODEL
    endpoint_url: str = ""
    api_key_env: str = DEFAULT_KEY_ENV
    dim: int = 0

    def __post_init__(self):
        if self.kind not in ("local-hash", "remote"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.dim <= 0:
            default = REMOTE_DEFAULT_DIM if self.kind == "remote" else LOCAL_DEFAULT_DIM
            object.__setattr__(self, "dim", default)
        if self.kind == "remote" and not self.endpoint_url:
            raise ValueError("remote provider requires endpoint_url")


def _fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def _local_hash_vector(text: str, dim: int) -> np.ndarray:
    """L2-normalized term-frequency histogram of hashed character 3-grams."""
    t = text.lower()
    counts = np.zeros(dim, dtype=np.float64)
    if len(t) < 3:
        counts[_fnv1a64(t.encode("utf-8")) % dim] += 1.0
    else:
        for i in range(len(t) - 2):
            counts[_fnv1a64(t[i:i + 3].encode("utf-8")) % dim] += 1.0
    norm = np.linalg.norm(counts)
    return counts / norm


def _remote_embed(texts: list[str], cfg: EmbeddingProviderConfig,
                  client: Optional[httpx.Client] = None) -> list[list[float]]:
    key = os.environ.get(cfg.api_key_env, "")
    if not key:
        raise AuthError(f"no API key in ${cfg.api_key_env}")
    own_client = client is None
    cli = client or httpx.Client(timeout=30.0)
    try:
        last_status = None
        for attempt, delay in enumerate((0.0,) + _RETRY_DELAYS):
            if delay:
                time.sleep(delay)
            try:
                resp = cli.post(
                    cfg.endpoint_url,
                    headers={"Authorization": f"Bearer {key}"},
                    json={"model": cfg.model_name, "input": texts},
                )
            except httpx.HTTPError as exc:
                last_status = None
                logger.warning("embedding request failed (attempt %d): %s",
                               attempt + 1, type(exc).__name__)
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"endpoint rejected key from ${cfg.api_key_env}")
            if resp.status_code == 429 or resp.status_code >= 500:
                last_status = resp.status_code
                logger.warning("embedding endpoint returned %d (attempt %d)",
                               resp.status_code, attempt + 1)
                continue
            if resp.status_code != 200:
                raise RemoteError("unexpected response", status=resp.status_code,
                                  retries=attempt)
            body = resp.json()
            return [item["embedding"] for item in body["data"]]
        raise RemoteError("retries exhausted", status=last_status,
                          retries=len(_RETRY_DELAYS))
    finally:
        if own_client:
            cli.close()


def _finish(raw: np.ndarray, cfg: EmbeddingProviderConfig) -> EmbeddingVector:
    norm = np.linalg.norm(raw)
    if norm == 0:
        raise ValueError("zero vector from provider")
    unit = raw / norm
    tag = f"{cfg.kind}:{cfg.model_name}" if cfg.kind == "remote" else f"local-hash:d{cfg.dim}"
    return EmbeddingVector(values=tuple(float(x) for x in unit), dim=cfg.dim, provider_tag=tag)


def embed(text: str, cfg: EmbeddingProviderConfig,
          client: Optional[httpx.Client] = None) -> EmbeddingVector:
    if not text:
        raise EmptyInput("cannot embed empty text")
    if cfg.kind == "local-hash":
        return _finish(_local_hash_vector(text, cfg.dim), cfg)
    rows = _remote_embed([text], cfg, client=client)
    return _finish(np.asarray(rows[0], dtype=np.float64), cfg)


def embed_batch(texts: list[str], cfg: EmbeddingProviderConfig,
                client: Optional[httpx.Client] = None) -> list[EmbeddingVector]:
    for i, t in enumerate(texts):
        if not t:
            raise EmptyInput(f"empty text at index {i}")
    if not texts:
        return []
    if cfg.kind == "local-hash":
        return [_finish(_local_hash_vector(t, cfg.dim), cfg) for t in texts]
    try:
        rows = _remote_embed(texts, cfg, client=client)
    except (RemoteError, AuthError) as exc:
        exc.args = (f"{exc.args[0]} (batch of {len(texts)})",) + exc.args[1:]
        raise
    return [_finish(np.asarray(r, dtype=np.float64), cfg) for r in rows]
