"""Supervision metrics and the score/bucket algebra built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .embedding import EmbedderConfig, cosine_similarity, embed_batch, embed_matrix
from .errors import ConfigError, InvalidInput
from .segmentation import enumerate_phrases, tokenize_words

# slack for "similarity >= tau" so that identical vectors match at tau=1
MATCH_EPS = 1e-9


class MetricKind(str, Enum):
    COSINE_DISTANCE = "cosine_distance"
    SOFT_NGRAMS = "soft_ngrams"

    @classmethod
    def parse(cls, value) -> "MetricKind":
        if isinstance(value, MetricKind):
            return value
        aliases = {"cosine": cls.COSINE_DISTANCE, "soft-ngrams": cls.SOFT_NGRAMS, "soft_ngrams": cls.SOFT_NGRAMS}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise ConfigError(f"unknown metric kind {value!r}") from None


@dataclass(frozen=True)
class SoftNgramParams:
    a: int = 3
    b: int = 5
    tau: float = 0.85
    phrase_embedder: EmbedderConfig = field(default_factory=lambda: EmbedderConfig(use_synonyms=True))

    def __post_init__(self):
        if not 1 <= self.a <= self.b:
            raise ConfigError(f"need 1 <= a <= b, got a={self.a}, b={self.b}")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tau must lie in (0, 1], got {self.tau}")


@dataclass(frozen=True)
class ScaleSpec:
    tau_low: float
    tau_high: float

    def __post_init__(self):
        if not 0.0 <= self.tau_low < self.tau_high:
            raise ConfigError(f"need 0 <= tau_low < tau_high, got {self.tau_low}, {self.tau_high}")


@dataclass(frozen=True)
class BucketSpec:
    n: int
    tau_min: float
    tau_max: float

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"need at least 2 buckets, got {self.n}")
        if not self.tau_min < self.tau_max:
            raise ConfigError(f"need tau_min < tau_max, got {self.tau_min}, {self.tau_max}")

    @property
    def width(self) -> float:
        return self.tau_max - self.tau_min

    def midpoints(self) -> np.ndarray:
        return np.array([bucket_midpoint(j, self) for j in range(self.n)])

    def scale(self) -> ScaleSpec:
        return ScaleSpec(self.tau_min, self.tau_max)


# threshold pairs in distance orientation
COSINE_THRESHOLDS = ScaleSpec(0.03, 0.15)
SOFT_NGRAM_THRESHOLDS = ScaleSpec(0.06, 0.72)


def default_scale(kind: MetricKind) -> ScaleSpec:
    return COSINE_THRESHOLDS if MetricKind.parse(kind) is MetricKind.COSINE_DISTANCE else SOFT_NGRAM_THRESHOLDS


def cosine_distance_score(source: str, edited: str, doc_embedder: EmbedderConfig) -> float:
    u, v = embed_batch([source, edited], doc_embedder)
    return 1.0 - cosine_similarity(u, v)


def _unit_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise InvalidInput("zero phrase embedding")
    return mat / norms


def soft_ngrams_precision(source: str, edited: str, params: SoftNgramParams) -> float:
    """Share of edited-text phrases whose best cosine match in the source is >= tau.

    When the edited text is shorter than ``a`` words, both sides are
    enumerated from its length so a pure excerpt still scores 1.
    """
    src_words = tokenize_words(source)
    edit_words = tokenize_words(edited)
    if not edit_words:
        raise InvalidInput("edited text has no phrases")
    if not src_words:
        return 0.0
    a = min(params.a, len(edit_words))
    b = max(params.b, a)
    src = [p.text for p in enumerate_phrases(src_words, a, b)]
    tgt = [p.text for p in enumerate_phrases(edit_words, a, b)]

    # embed each distinct surface form once
    uniq = list(dict.fromkeys(src + tgt))
    pos = {t: i for i, t in enumerate(uniq)}
    vecs = _unit_rows(embed_matrix(uniq, params.phrase_embedder))
    S = vecs[[pos[t] for t in dict.fromkeys(src)]]
    T = vecs[[pos[t] for t in tgt]]
    best = np.max(T @ S.T, axis=1)
    matched = int(np.count_nonzero(best >= params.tau - MATCH_EPS))
    return matched / len(tgt)


def edit_magnitude(raw: float, kind: MetricKind) -> float:
    kind = MetricKind.parse(kind)
    if kind is MetricKind.COSINE_DISTANCE:
        return raw
    return 1.0 - raw


def raw_distance(source: str, edited: str, kind: MetricKind, doc_embedder: EmbedderConfig,
                 soft: SoftNgramParams) -> float:
    """Distance-oriented raw score for either metric."""
    kind = MetricKind.parse(kind)
    if kind is MetricKind.COSINE_DISTANCE:
        return cosine_distance_score(source, edited, doc_embedder)
    return edit_magnitude(soft_ngrams_precision(source, edited, soft), kind)


def scale_target(s: float, spec: ScaleSpec) -> float:
    if not math.isfinite(s):
        raise InvalidInput(f"score must be finite, got {s}")
    if s <= spec.tau_low:
        return 0.0
    if s >= spec.tau_high:
        return 1.0
    return (s - spec.tau_low) / (spec.tau_high - spec.tau_low)


def bucket_of(s: float, spec: BucketSpec) -> int:
    if not math.isfinite(s):
        raise InvalidInput(f"score must be finite, got {s}")
    j = math.floor((s - spec.tau_min) / spec.width * spec.n)
    return max(0, min(spec.n - 1, j))


def bucket_midpoint(j: int, spec: BucketSpec) -> float:
    if not 0 <= j < spec.n:
        raise InvalidInput(f"bucket {j} out of range for n={spec.n}")
    return spec.tau_min + (j + 0.5) * spec.width / spec.n


def _check_probs(probs: Sequence[float]) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise InvalidInput("probability vector must be a non-empty 1-d sequence")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise InvalidInput("probabilities must be finite and non-negative")
    total = p.sum()
    if abs(total - 1.0) > 1e-6:
        raise InvalidInput(f"probabilities sum to {total}, not 1")
    return p / total


def decode_weighted(probs: Sequence[float], spec: BucketSpec) -> float:
    p = _check_probs(probs)
    if p.size != spec.n:
        raise InvalidInput(f"expected {spec.n} probabilities, got {p.size}")
    mids = spec.midpoints()
    value = float(np.dot(p, mids))
    return min(mids[-1], max(mids[0], value))


def decode_argmax(probs: Sequence[float]) -> int:
    p = np.asarray(probs, dtype=np.float64)
    if p.size == 0:
        raise InvalidInput("empty probability vector")
    # np.argmax returns the first maximal index
    return int(np.argmax(p))


def normalize_score(s_raw: float, spec: BucketSpec) -> float:
    return scale_target(s_raw, spec.scale())


def decode_normalized(probs: np.ndarray) -> np.ndarray:
    """Row-wise ``normalize_score(decode_weighted(p))`` computed directly in [0, 1].

    Offsets are centred on 0.5 and bucket j is summed with bucket n-1-j first,
    so symmetric distributions (uniform in particular) land on 0.5 exactly.
    """
    P = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    n = P.shape[1]
    c = (2.0 * np.arange(n) + 1.0 - n) / (2.0 * n)
    h = n // 2
    paired = P[:, :h] * c[:h] + P[:, ::-1][:, :h] * c[::-1][:h]
    return 0.5 + paired.sum(axis=1)
