"""Unit-norm text embeddings: deterministic offline hasher plus a service client.

The deterministic mode hashes lowercase word tokens into a fixed number of
buckets and L2-normalizes the counts. It is a bag-of-words scheme: crude
semantics, but byte-reproducible everywhere, which is what the graph-dynamics
tests need. Similarity relationships in tests are constructed from controlled
token overlap, never from embedding quality.

External-service mode speaks one-request-one-response JSON lines over a TCP
socket (see README for the wire format) and caches results with an LRU policy.
"""

from __future__ import annotations

import hashlib
import json
import re
import socket
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .errors import TransportError, ValidationError

_TOKEN_RE = re.compile(r"[a-z0-9]+")

DEFAULT_HASH_SEED = 0x5EED_C0DE


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric word tokens.

    This is the single tokenization contract shared by the embedder and the
    lexical index.
    """
    return _TOKEN_RE.findall(text.lower())


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two unit vectors, clamped to [-1, 1].

    Raises:
        ValidationError: if the dimensions differ.
    """
    if a.shape != b.shape:
        raise ValidationError(
            f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(min(1.0, max(-1.0, float(np.dot(a, b)))))


def ensure_unit(vec: np.ndarray, dim: int, tol: float = 1e-6) -> np.ndarray:
    """Validate an embedding: right dimension, finite, unit norm."""
    arr = np.asarray(vec, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise ValidationError(
            f"embedding must have dimension {dim} (got shape {arr.shape})")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("embedding contains non-finite components")
    norm = float(np.linalg.norm(arr))
    if abs(norm - 1.0) > tol:
        raise ValidationError(f"embedding norm {norm} is not within "
                              f"{tol} of 1")
    return arr


DETERMINISTIC_HASH = "deterministic-hash"
EXTERNAL_SERVICE = "external-service"


@dataclass(frozen=True)
class EmbedderConfig:
    dimension: int = 384
    mode: str = DETERMINISTIC_HASH
    endpoint: str | None = None       # "host:port", external-service only
    cache_capacity: int = 4096

    def __post_init__(self):
        if self.dimension < 8:
            raise ValueError(
                f"dimension must be >= 8 (got {self.dimension!r})")
        if self.mode not in (DETERMINISTIC_HASH, EXTERNAL_SERVICE):
            raise ValueError(f"unknown embedder mode {self.mode!r}")
        if (self.mode == EXTERNAL_SERVICE) != (self.endpoint is not None):
            raise ValueError(
                "endpoint is required iff mode is external-service")
        if self.cache_capacity < 1:
            raise ValueError("cache_capacity must be >= 1")


class _LRUCache:
    """Bounded text -> vector cache; concurrent reads, serialized inserts."""

    def __init__(self, capacity: int):
        self._capacity = capacity
        self._data: OrderedDict[str, np.ndarray] = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key: str) -> np.ndarray | None:
        with self._lock:
            vec = self._data.get(key)
            if vec is not None:
                self._data.move_to_end(key)
            return vec

    def put(self, key: str, vec: np.ndarray) -> None:
        with self._lock:
            self._data[key] = vec
            self._data.move_to_end(key)
            while len(self._data) > self._capacity:
                self._data.popitem(last=False)

    def __len__(self) -> int:
        return len(self._data)


class HashingEmbedder:
    """Deterministic bag-of-hashed-tokens embedder.

    Each token is hashed with a keyed blake2b into one of ``dimension``
    buckets; bucket counts are accumulated and L2-normalized. Identical text
    always yields bit-identical vectors, and token order does not matter.
    """

    def __init__(self, config: EmbedderConfig | None = None,
                 seed: int = DEFAULT_HASH_SEED):
        self.config = config or EmbedderConfig()
        self._key = seed.to_bytes(8, "little", signed=False)

    @property
    def dimension(self) -> int:
        return self.config.dimension

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), key=self._key,
                                 digest_size=8).digest()
        return int.from_bytes(digest, "little") % self.config.dimension

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise ValidationError("cannot embed empty text")
        counts = np.zeros(self.config.dimension, dtype=np.float64)
        for token in tokenize(text):
            counts[self._bucket(token)] += 1.0
        norm = float(np.linalg.norm(counts))
        if norm == 0.0:
            # No alphanumeric tokens at all; fall back to hashing the raw
            # text so the result is still a valid unit vector.
            counts[self._bucket(text.strip().lower())] = 1.0
            norm = 1.0
        return counts / norm


class ServiceEmbedder:
    """Client for an external embedding service.

    Protocol: connect to ``host:port``, send one line
    ``{"text": "..."}\\n``, read one line ``{"embedding": [..d floats..]}``.
    Responses are normalized and cached (LRU, ``cache_capacity`` entries).
    """

    def __init__(self, config: EmbedderConfig, timeout: float = 10.0):
        if config.mode != EXTERNAL_SERVICE:
            raise ValueError("ServiceEmbedder requires external-service mode")
        self.config = config
        self._timeout = timeout
        self._cache = _LRUCache(config.cache_capacity)
        host, _, port = config.endpoint.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"endpoint must be host:port "
                             f"(got {config.endpoint!r})")
        self._address = (host, int(port))

    @property
    def dimension(self) -> int:
        return self.config.dimension

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise ValidationError("cannot embed empty text")
        cached = self._cache.get(text)
        if cached is not None:
            return cached
        vec = self._fetch(text)
        self._cache.put(text, vec)
        return vec

    def _fetch(self, text: str) -> np.ndarray:
        request = json.dumps({"text": text}) + "\n"
        try:
            with socket.create_connection(self._address,
                                          timeout=self._timeout) as conn:
                conn.sendall(request.encode("utf-8"))
                reader = conn.makefile("r", encoding="utf-8")
                line = reader.readline()
        except OSError as exc:
            raise TransportError(
                f"embedding service {self.config.endpoint} unreachable: "
                f"{exc}") from exc
        if not line:
            raise TransportError(
                f"embedding service {self.config.endpoint} closed the "
                f"connection without responding")
        try:
            payload = json.loads(line)
            components = payload["embedding"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise TransportError(
                f"malformed embedding service response: {line[:200]!r}"
            ) from exc
        arr = np.asarray(components, dtype=np.float64)
        if arr.shape != (self.config.dimension,):
            raise TransportError(
                f"service returned {arr.shape[0] if arr.ndim == 1 else arr.shape} "
                f"components, expected {self.config.dimension}")
        if not np.all(np.isfinite(arr)):
            raise TransportError("service returned non-finite components")
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise TransportError("service returned a zero vector")
        return arr / norm


def make_embedder(config: EmbedderConfig,
                  seed: int = DEFAULT_HASH_SEED):
    """Instantiate the embedder matching the config's mode."""
    if config.mode == DETERMINISTIC_HASH:
        return HashingEmbedder(config, seed=seed)
    return ServiceEmbedder(config)
