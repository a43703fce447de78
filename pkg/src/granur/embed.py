"""Query embeddings for the router: a deterministic built-in hashed
embedder and a client for the remote encoder service.

Both produce L2-normalized float64 vectors of a fixed configured
dimension, so the router never needs to know which one is behind it.
"""

from __future__ import annotations

import hashlib
import threading
from collections import Counter
from dataclasses import dataclass

import numpy as np
import requests

from .corpus import tokenize
from .errors import DimMismatch, EmptyText, RemoteUnavailable

HASHED = "hashed_tfidf"
REMOTE = "remote"

Embedding = np.ndarray


@dataclass(frozen=True)
class EmbedderConfig:
    kind: str = HASHED
    dim: int = 256
    endpoint: str = ""
    timeout_ms: int = 10_000
    max_inflight: int = 4

    def __post_init__(self):
        if self.kind not in (HASHED, REMOTE):
            raise ValueError(f"unknown embedder kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.kind == REMOTE and not self.endpoint:
            raise ValueError("remote embedder needs an endpoint")


def remote_config(endpoint: str, dim: int = 768, timeout_ms: int = 10_000) -> EmbedderConfig:
    """Config for a remote encoder service (RoBERTa-class default dim 768)."""
    return EmbedderConfig(kind=REMOTE, dim=dim, endpoint=endpoint, timeout_ms=timeout_ms)


def _hash_token(token: str, dim: int) -> tuple[int, float]:
    """Stable (bucket, sign) for a token; independent of interpreter hashing."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    value = int.from_bytes(digest, "little")
    sign = 1.0 if value & (1 << 63) else -1.0
    return value % dim, sign


def _hashed_embedding(text: str, dim: int) -> Embedding:
    vec = np.zeros(dim)
    for token, count in Counter(tokenize(text)).items():
        bucket, sign = _hash_token(token, dim)
        vec[bucket] += sign * count
    return _l2_normalize(vec)


def _l2_normalize(vec: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0.0 else vec


# One HTTP session + in-flight bound per endpoint, shared across threads.
_clients: dict[tuple[str, int], tuple[requests.Session, threading.BoundedSemaphore]] = {}
_clients_lock = threading.Lock()


def _client_for(config: EmbedderConfig) -> tuple[requests.Session, threading.BoundedSemaphore]:
    key = (config.endpoint, config.max_inflight)
    with _clients_lock:
        if key not in _clients:
            _clients[key] = (requests.Session(), threading.BoundedSemaphore(config.max_inflight))
        return _clients[key]


def _remote_embeddings(config: EmbedderConfig, texts: list[str]) -> list[Embedding]:
    session, gate = _client_for(config)
    url = config.endpoint.rstrip("/") + "/embed"
    with gate:
        try:
            resp = session.post(url, json={"texts": texts}, timeout=config.timeout_ms / 1000.0)
        except requests.RequestException as exc:
            raise RemoteUnavailable(f"POST {url} failed: {exc}") from exc
    if resp.status_code != 200:
        raise RemoteUnavailable(f"POST {url} returned status {resp.status_code}")
    try:
        body = resp.json()
        vectors = body["vectors"]
    except (ValueError, KeyError) as exc:
        raise RemoteUnavailable(f"POST {url} returned an unparsable body") from exc
    if len(vectors) != len(texts):
        raise DimMismatch(f"service returned {len(vectors)} vectors for {len(texts)} texts")
    out = []
    for vec in vectors:
        if len(vec) != config.dim:
            raise DimMismatch(f"service returned dim {len(vec)}, expected {config.dim}")
        out.append(_l2_normalize(np.asarray(vec, dtype=float)))
    return out


def embed_query(config: EmbedderConfig, text: str) -> Embedding:
    """Embed one query; deterministic for the hashed embedder."""
    if not text.strip():
        raise EmptyText("cannot embed empty text")
    if config.kind == HASHED:
        return _hashed_embedding(text, config.dim)
    return _remote_embeddings(config, [text])[0]


def embed_batch(config: EmbedderConfig, texts: list[str]) -> list[Embedding]:
    """Embed many queries; element i equals embed_query(texts[i]) exactly."""
    if not texts:
        raise ValueError("texts must be a non-empty list")
    for text in texts:
        if not text.strip():
            raise EmptyText("cannot embed empty text")
    if config.kind == HASHED:
        return [_hashed_embedding(text, config.dim) for text in texts]
    return _remote_embeddings(config, texts)
