"""Embedding providers, cosine similarity and the on-disk embedding cache.

Two providers sit behind :func:`embed_batch`:

* ``deterministic_test``: hashes lowercased words to pseudo-random unit
  vectors and averages them, so lexical overlap drives cosine similarity.
  Words in the same synonym group share one vector.
* ``remote``: any server speaking the common ``/embeddings`` JSON shape.

All returned vectors are rounded to float32 precision so that a cache hit
and a fresh computation are bit-identical.
"""

from __future__ import annotations

import base64
import hashlib
import logging
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import (
    CacheConflict,
    CacheCorrupt,
    ConfigError,
    InvalidInput,
    ProviderContractViolation,
    ProviderUnavailable,
)
from .segmentation import tokenize_words

log = logging.getLogger(__name__)

API_KEY_ENV = "EDITLENS_EMBED_API_KEY"
PROVIDER_KINDS = ("deterministic_test", "remote")

# weight of the word-order component in the test provider; keeps distinct
# token sequences distinct (1 - cos ~ 1e-4) without moving bag-of-words geometry
ORDER_WEIGHT = 1e-2


class EmbeddingVector:
    """Immutable real vector. Equality is bitwise."""

    __slots__ = ("_data",)

    def __init__(self, components: Iterable[float]):
        data = np.array(components, dtype=np.float64).ravel()
        if data.size < 1:
            raise InvalidInput("embedding must have at least one component")
        if not np.all(np.isfinite(data)):
            raise InvalidInput("embedding has non-finite components")
        data.setflags(write=False)
        self._data = data

    @property
    def components(self) -> np.ndarray:
        return self._data

    @property
    def dim(self) -> int:
        return int(self._data.size)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self._data))

    def normalized(self) -> "EmbeddingVector":
        n = self.norm
        if n == 0.0:
            raise InvalidInput("cannot normalize a zero vector")
        return EmbeddingVector(self._data / n)

    def __len__(self) -> int:
        return self.dim

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return self._data.tobytes() == other._data.tobytes()

    def __hash__(self) -> int:
        return hash(self._data.tobytes())

    def __repr__(self) -> str:
        return f"EmbeddingVector(dim={self.dim})"


@dataclass(frozen=True)
class EmbedderConfig:
    provider_kind: str = "deterministic_test"
    model_id: str = "hash-embed-v1"
    dim: int = 256
    endpoint_url: Optional[str] = None
    batch_size: int = 64
    cache_path: Optional[str] = None
    seed: int = 0
    use_synonyms: bool = False
    timeout: float = 30.0

    def __post_init__(self):
        if self.provider_kind not in PROVIDER_KINDS:
            raise ConfigError(f"unknown provider_kind {self.provider_kind!r}")
        if self.dim < 1:
            raise ConfigError("dim must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.provider_kind == "remote" and not self.endpoint_url:
            raise ConfigError("remote provider requires endpoint_url")


def content_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def hash64(*parts: object) -> int:
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(str(p).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def cosine_similarity(u: EmbeddingVector, v: EmbeddingVector) -> float:
    if u.dim != v.dim:
        raise InvalidInput(f"dimension mismatch: {u.dim} vs {v.dim}")
    a, b = u.components, v.components
    uu, vv = float(np.dot(a, a)), float(np.dot(b, b))
    if uu == 0.0 or vv == 0.0:
        raise InvalidInput("cosine similarity undefined for a zero vector")
    # sqrt(uu * uu) == uu exactly, so cos(u, u) is exactly 1
    value = float(np.dot(a, b)) / math.sqrt(uu * vv)
    return min(1.0, max(-1.0, value))


# --------------------------------------------------------------------------
# synonym table


def _read_data_lines(name: str) -> list[str]:
    text = resources.files("editmag").joinpath("data", name).read_text("utf-8")
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


@lru_cache(maxsize=None)
def synonym_groups() -> tuple[tuple[str, ...], ...]:
    """Shipped synonym groups; the first member of each group is the plain form."""
    return tuple(
        tuple(w.strip().lower() for w in line.split(",") if w.strip())
        for line in _read_data_lines("synonyms.txt")
    )


@lru_cache(maxsize=None)
def synonym_canon() -> dict[str, str]:
    return {w: group[0] for group in synonym_groups() for w in group}


# --------------------------------------------------------------------------
# providers


class DeterministicEmbedder:
    def __init__(self, config: EmbedderConfig):
        self.config = config
        self._canon = synonym_canon() if config.use_synonyms else {}
        self._word_vec = lru_cache(maxsize=200_000)(self._make_vector)

    def _make_vector(self, key: str) -> np.ndarray:
        rng = np.random.default_rng(hash64(self.config.seed, self.config.model_id, key))
        v = rng.standard_normal(self.config.dim)
        return v / np.linalg.norm(v)

    def embed_one(self, text: str) -> np.ndarray:
        words = tokenize_words(text) or [text.strip().lower()]
        total = np.zeros(self.config.dim)
        for w in words:
            total += self._word_vec("w:" + self._canon.get(w, w))
        total /= np.linalg.norm(total)
        total += ORDER_WEIGHT * self._word_vec("s:" + " ".join(words))
        return total / np.linalg.norm(total)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self.embed_one(t) for t in texts]


class RemoteEmbedder:
    """Client for ``POST {endpoint}`` with ``{"model", "input"}`` bodies."""

    retries = 3
    backoff = 0.25

    def __init__(self, config: EmbedderConfig, transport=None, sleep: Optional[Callable[[float], None]] = None):
        import httpx

        headers = {"Content-Type": "application/json"}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self.config = config
        self._sleep = sleep or time.sleep
        self._client = httpx.Client(headers=headers, timeout=config.timeout, transport=transport)
        self._httpx = httpx

    def _post(self, texts: Sequence[str]) -> dict:
        body = {"model": self.config.model_id, "input": list(texts)}
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._client.post(self.config.endpoint_url, json=body)
                if resp.status_code >= 500 or resp.status_code == 429:
                    raise self._httpx.HTTPStatusError(
                        f"server returned {resp.status_code}", request=resp.request, response=resp
                    )
                resp.raise_for_status()
                return resp.json()
            except (self._httpx.TransportError, self._httpx.HTTPStatusError) as exc:
                last_exc = exc
                status = getattr(getattr(exc, "response", None), "status_code", 500)
                if isinstance(exc, self._httpx.HTTPStatusError) and status < 500 and status != 429:
                    break
                if attempt < self.retries:
                    self._sleep(self.backoff * 2**attempt)
            except ValueError as exc:
                raise ProviderContractViolation(f"response is not JSON: {exc}") from exc
        raise ProviderUnavailable(f"embedding endpoint failed: {last_exc}") from last_exc

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        payload = self._post(texts)
        try:
            items = sorted(payload["data"], key=lambda d: d["index"])
            vectors = [np.asarray(d["embedding"], dtype=np.float64) for d in items]
            indices = [d["index"] for d in items]
        except (KeyError, TypeError) as exc:
            raise ProviderContractViolation(f"malformed response: {exc}") from exc
        if indices != list(range(len(texts))):
            raise ProviderContractViolation(
                f"expected indices 0..{len(texts) - 1}, got {indices}"
            )
        return vectors

    def close(self):
        self._client.close()


# --------------------------------------------------------------------------
# cache


@dataclass
class _Entry:
    vector: Optional[EmbeddingVector] = None
    corrupt: bool = False


class EmbeddingCache:
    """Append-only embedding log keyed by (model_id, content digest).

    Each line is ``digest<TAB>model_id<TAB>dim<TAB>base64(float32 LE)``.
    Records are immutable: a conflicting second put raises
    :class:`CacheConflict`. Records that fail to decode raise
    :class:`CacheCorrupt` on ``get`` until a valid record replaces them.
    """

    def __init__(self, path: Optional[str | os.PathLike] = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[tuple[str, str], _Entry] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self):
        with open(self.path, "r", encoding="utf-8", newline="\n") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) < 2:
                    log.warning("cache %s: unreadable line %d skipped", self.path, lineno)
                    continue
                key = (parts[1], parts[0])
                entry = self._entries.setdefault(key, _Entry())
                try:
                    vec = _decode_record(parts)
                except (ValueError, IndexError):
                    if entry.vector is None:
                        entry.corrupt = True
                    continue
                if entry.vector is not None and entry.vector != vec:
                    entry.corrupt = True
                else:
                    entry.vector = vec
                    entry.corrupt = False

    def get(self, model_id: str, digest: str) -> Optional[EmbeddingVector]:
        entry = self._entries.get((model_id, digest))
        if entry is None:
            return None
        if entry.corrupt:
            raise CacheCorrupt(f"corrupt cache record for {model_id}/{digest[:12]}")
        return entry.vector

    def put(self, model_id: str, digest: str, vector: EmbeddingVector) -> None:
        f32 = vector.components.astype("<f4")
        if not np.array_equal(f32.astype(np.float64), vector.components):
            raise InvalidInput("cache stores float32 values; vector is not float32-representable")
        with self._lock:
            entry = self._entries.get((model_id, digest))
            if entry is not None and not entry.corrupt and entry.vector is not None:
                if entry.vector == vector:
                    return
                raise CacheConflict(f"different vector already cached for {model_id}/{digest[:12]}")
            if self.path is not None:
                record = "\t".join(
                    [digest, model_id, str(vector.dim), base64.b64encode(f32.tobytes()).decode("ascii")]
                )
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                    fh.write(record + "\n")
            self._entries[(model_id, digest)] = _Entry(vector=vector)

    def __len__(self) -> int:
        return sum(1 for e in self._entries.values() if e.vector is not None and not e.corrupt)


def _decode_record(parts: list[str]) -> EmbeddingVector:
    if len(parts) != 4:
        raise ValueError("wrong field count")
    dim = int(parts[2])
    raw = base64.b64decode(parts[3], validate=True)
    if len(raw) != 4 * dim or dim < 1:
        raise ValueError("payload length does not match dim")
    arr = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite payload")
    return EmbeddingVector(arr)


# --------------------------------------------------------------------------
# batch entry point

_registry_lock = threading.Lock()
_providers: dict[EmbedderConfig, object] = {}
_caches: dict[str, EmbeddingCache] = {}


def get_provider(config: EmbedderConfig):
    with _registry_lock:
        prov = _providers.get(config)
        if prov is None:
            if config.provider_kind == "deterministic_test":
                prov = DeterministicEmbedder(config)
            else:
                prov = RemoteEmbedder(config)
            _providers[config] = prov
        return prov


def get_cache(config: EmbedderConfig) -> Optional[EmbeddingCache]:
    if config.cache_path is None:
        return None
    key = os.path.abspath(config.cache_path)
    with _registry_lock:
        cache = _caches.get(key)
        if cache is None:
            cache = _caches[key] = EmbeddingCache(key)
        return cache


def _quantize(vec: np.ndarray) -> np.ndarray:
    return np.asarray(vec, dtype=np.float64).astype(np.float32).astype(np.float64)


def embed_matrix(texts: Sequence[str], config: EmbedderConfig, provider=None) -> np.ndarray:
    """Embed ``texts`` into a ``(len(texts), dim)`` float64 array, row order preserved."""
    for i, t in enumerate(texts):
        if not isinstance(t, str) or not t.strip():
            raise InvalidInput(f"text {i} is empty")
    provider = provider or get_provider(config)
    cache = get_cache(config)
    out = np.empty((len(texts), config.dim))
    todo: dict[str, list[int]] = {}
    for i, t in enumerate(texts):
        if cache is not None:
            try:
                hit = cache.get(config.model_id, content_digest(t))
            except CacheCorrupt:
                log.warning("recomputing corrupt cache entry for text %d", i)
                hit = None
            if hit is not None:
                if hit.dim != config.dim:
                    raise ProviderContractViolation(f"cached vector has dim {hit.dim}, expected {config.dim}")
                out[i] = hit.components
                continue
        todo.setdefault(t, []).append(i)

    unique = list(todo)
    bs = config.batch_size
    chunks = [unique[k : k + bs] for k in range(0, len(unique), bs)]
    if len(chunks) > 1 and isinstance(provider, RemoteEmbedder):
        with ThreadPoolExecutor(max_workers=4) as pool:
            results = list(pool.map(provider.embed, chunks))
    else:
        results = [provider.embed(c) for c in chunks]

    for chunk, vecs in zip(chunks, results):
        if len(vecs) != len(chunk):
            raise ProviderContractViolation(f"asked for {len(chunk)} vectors, got {len(vecs)}")
        for t, v in zip(chunk, vecs):
            if v.shape != (config.dim,):
                raise ProviderContractViolation(f"expected dim {config.dim}, got shape {v.shape}")
            if not np.all(np.isfinite(v)):
                raise ProviderContractViolation("provider returned non-finite values")
            q = _quantize(v)
            if cache is not None:
                cache.put(config.model_id, content_digest(t), EmbeddingVector(q))
            for i in todo[t]:
                out[i] = q
    return out


def embed_batch(texts: Sequence[str], config: EmbedderConfig, provider=None) -> list[EmbeddingVector]:
    return [EmbeddingVector(row) for row in embed_matrix(texts, config, provider)]
