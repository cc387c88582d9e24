"""Linear single-input scorer over hashed n-gram features.

The classification head is trained with cross-entropy on bucket indices and
decoded by the probability-weighted mean of bucket midpoints; the regression
head is trained with MSE on the scaled target. An optional prompt-category
head shares the features and adds ``aux_weight`` times its cross-entropy.
"""

from __future__ import annotations

import json
import logging
import struct
import zlib
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import PROMPT_CATEGORIES
from .errors import InvalidInput, TrainingDiverged, WrongHead
from .labeler import LabeledExample
from .segmentation import tokenize_words
from .simmetrics import BucketSpec, decode_normalized

log = logging.getLogger(__name__)

FAMILIES = ("word_unigram", "word_bigram", "char_3gram", "char_4gram", "char_5gram")
MAGIC = b"EMAGMDL\x00"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class FeatureSpec:
    dim: int = 2**18
    families: tuple[str, ...] = ("word_unigram", "word_bigram", "char_4gram")
    hash_seed: int = 0

    def __post_init__(self):
        if self.dim < 2**10 or self.dim & (self.dim - 1):
            raise InvalidInput(f"feature dim must be a power of two >= 1024, got {self.dim}")
        if not self.families:
            raise InvalidInput("at least one feature family must be enabled")
        bad = set(self.families) - set(FAMILIES)
        if bad:
            raise InvalidInput(f"unknown feature families {sorted(bad)}")
        object.__setattr__(self, "families", tuple(sorted(set(self.families), key=FAMILIES.index)))

    def to_json(self) -> dict:
        return {"dim": self.dim, "families": list(self.families), "hash_seed": self.hash_seed}


def _grams(text: str, family: str) -> list[str]:
    if family.startswith("word"):
        words = tokenize_words(text)
        if family == "word_unigram":
            return words
        return [a + " " + b for a, b in zip(words, words[1:])]
    n = int(family[5])
    s = " " + " ".join(text.lower().split()) + " "
    return [s[i : i + n] for i in range(len(s) - n + 1)]


def featurize_indices(text: str, spec: FeatureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Sorted bin indices and L2-normalized counts."""
    if not text or not text.strip():
        raise InvalidInput("cannot featurize empty text")
    mask = spec.dim - 1
    counts: dict[int, float] = {}
    for fam in spec.families:
        salt = zlib.crc32(f"{spec.hash_seed}:{fam}".encode("utf-8"))
        for g in _grams(text, fam):
            k = zlib.crc32(g.encode("utf-8"), salt) & mask
            counts[k] = counts.get(k, 0.0) + 1.0
    idx = np.fromiter(sorted(counts), dtype=np.int64, count=len(counts))
    vals = np.array([counts[i] for i in idx.tolist()], dtype=np.float64)
    vals /= np.linalg.norm(vals)
    return idx, vals


def featurize(text: str, spec: FeatureSpec) -> sp.csr_matrix:
    idx, vals = featurize_indices(text, spec)
    return sp.csr_matrix((vals, idx, np.array([0, idx.size])), shape=(1, spec.dim))


def featurize_batch(texts: Sequence[str], spec: FeatureSpec) -> sp.csr_matrix:
    indptr = [0]
    all_idx, all_vals = [], []
    for t in texts:
        idx, vals = featurize_indices(t, spec)
        all_idx.append(idx)
        all_vals.append(vals)
        indptr.append(indptr[-1] + idx.size)
    if not texts:
        return sp.csr_matrix((0, spec.dim))
    return sp.csr_matrix((np.concatenate(all_vals), np.concatenate(all_idx), np.array(indptr)),
                         shape=(len(texts), spec.dim))


# --------------------------------------------------------------------------
# parameters


@dataclass(eq=False)
class ModelParams:
    head_kind: str
    weights: np.ndarray
    bias: np.ndarray
    bucket_spec: BucketSpec
    feature_spec: Optional[FeatureSpec] = None
    aux_weights: Optional[np.ndarray] = None
    aux_bias: Optional[np.ndarray] = None
    aux_weight: float = 1.0
    aux_labels: tuple[str, ...] = PROMPT_CATEGORIES
    history: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.head_kind not in ("classification", "regression"):
            raise InvalidInput(f"unknown head kind {self.head_kind!r}")
        n_out = self.bucket_spec.n if self.head_kind == "classification" else 1
        if self.weights.shape[0] != n_out or self.bias.shape != (n_out,):
            raise InvalidInput(f"{self.head_kind} head needs {n_out} outputs")
        if self.feature_spec is not None and self.weights.shape[1] != self.feature_spec.dim:
            raise InvalidInput("weight width does not match feature dim")
        if self.aux_weight < 0:
            raise InvalidInput("aux_weight must be >= 0")

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def has_aux(self) -> bool:
        return self.aux_weights is not None

    def arrays(self) -> list[np.ndarray]:
        out = [self.weights, self.bias]
        if self.has_aux:
            out += [self.aux_weights, self.aux_bias]
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.head_kind, self.weights.copy(), self.bias.copy(), self.bucket_spec, self.feature_spec,
            None if self.aux_weights is None else self.aux_weights.copy(),
            None if self.aux_bias is None else self.aux_bias.copy(),
            self.aux_weight, self.aux_labels, list(self.history),
        )


def init_model(head_kind: str, bucket_spec: BucketSpec, feature_spec: Optional[FeatureSpec] = None,
               aux_weight: float = 1.0, dim: Optional[int] = None,
               aux_labels: Sequence[str] = PROMPT_CATEGORIES) -> ModelParams:
    """All-zero parameters. ``aux_weight == 0`` disables the prompt head."""
    dim = dim if dim is not None else feature_spec.dim
    n_out = bucket_spec.n if head_kind == "classification" else 1
    aux = aux_weight > 0
    return ModelParams(
        head_kind, np.zeros((n_out, dim)), np.zeros(n_out), bucket_spec, feature_spec,
        np.zeros((len(aux_labels), dim)) if aux else None, np.zeros(len(aux_labels)) if aux else None,
        aux_weight, tuple(aux_labels),
    )


# --------------------------------------------------------------------------
# inference


def _log_softmax(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=1, keepdims=True)
    shifted = z - m
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    return np.exp(_log_softmax(np.atleast_2d(z)))


def _logits(model: ModelParams, X) -> np.ndarray:
    return np.asarray(X @ model.weights.T) + model.bias


def _features(model: ModelParams, texts: Sequence[str]) -> sp.csr_matrix:
    if model.feature_spec is None:
        raise InvalidInput("model has no feature spec; pass a feature matrix instead")
    return featurize_batch(texts, model.feature_spec)


def predict_probs_matrix(model: ModelParams, X) -> np.ndarray:
    if model.head_kind != "classification":
        raise WrongHead("probabilities need a classification head")
    return softmax(_logits(model, X))


def predict_probs(model: ModelParams, text: str) -> np.ndarray:
    return predict_probs_matrix(model, _features(model, [text]))[0]


def predict_scores_matrix(model: ModelParams, X) -> np.ndarray:
    if model.head_kind == "regression":
        return np.clip(_logits(model, X)[:, 0], 0.0, 1.0)
    return decode_normalized(predict_probs_matrix(model, X))


def predict_scores(model: ModelParams, texts: Sequence[str]) -> np.ndarray:
    return predict_scores_matrix(model, _features(model, texts))


def predict_score(model: ModelParams, text: str) -> float:
    return float(predict_scores(model, [text])[0])


# --------------------------------------------------------------------------
# loss


@dataclass
class Batch:
    X: sp.csr_matrix
    targets: np.ndarray  # bucket indices (classification) or scaled targets (regression)
    aux: np.ndarray  # prompt-category index per row, -1 where unknown


def make_batch(model: ModelParams, examples: Sequence[LabeledExample], X=None) -> Batch:
    if not examples:
        raise InvalidInput("empty batch")
    if X is None:
        X = _features(model, [ex.text for ex in examples])
    if model.head_kind == "classification":
        targets = np.array([ex.bucket for ex in examples], dtype=np.int64)
    else:
        targets = np.array([ex.target for ex in examples], dtype=np.float64)
    lookup = {c: i for i, c in enumerate(model.aux_labels)}
    aux = np.array([lookup.get(ex.prompt_category, -1) for ex in examples], dtype=np.int64)
    return Batch(sp.csr_matrix(X), targets, aux)


def _check_targets(model: ModelParams, batch: Batch) -> None:
    n = batch.X.shape[0]
    if n == 0 or batch.targets.shape != (n,) or batch.aux.shape != (n,):
        raise InvalidInput("batch shapes are inconsistent or empty")
    if model.head_kind == "classification":
        if np.any(batch.targets < 0) or np.any(batch.targets >= model.bucket_spec.n):
            raise InvalidInput("bucket target out of range")
    elif np.any(batch.targets < 0) or np.any(batch.targets > 1) or not np.all(np.isfinite(batch.targets)):
        raise InvalidInput("regression target outside [0, 1]")
    if np.any(batch.aux >= len(model.aux_labels)) or np.any(batch.aux < -1):
        raise InvalidInput("prompt category index out of range")


def _ce(logits: np.ndarray, y: np.ndarray, denom: int) -> tuple[float, np.ndarray]:
    logp = _log_softmax(logits)
    rows = np.arange(y.size)
    loss = -logp[rows, y].sum() / denom
    dz = np.exp(logp)
    dz[rows, y] -= 1.0
    return float(loss), dz / denom


def loss_and_grad(model: ModelParams, batch: Batch) -> tuple[float, list[np.ndarray]]:
    """Mean loss over the batch and its exact gradient, aligned with ``model.arrays()``.

    Main head: CE on bucket indices or MSE on scaled targets. The prompt
    head contributes ``aux_weight`` times CE averaged over the batch rows
    that carry a known category.
    """
    _check_targets(model, batch)
    X = batch.X
    n = X.shape[0]
    z = _logits(model, X)
    if model.head_kind == "classification":
        loss, dz = _ce(z, batch.targets, n)
    else:
        resid = z[:, 0] - batch.targets
        loss = float(np.mean(resid**2))
        dz = (2.0 / n) * resid[:, None]
    grads = [np.asarray(X.T @ dz).T, dz.sum(axis=0)]

    if model.has_aux:
        gw = np.zeros_like(model.aux_weights)
        gb = np.zeros_like(model.aux_bias)
        known = np.flatnonzero(batch.aux >= 0)
        if known.size and model.aux_weight > 0:
            Xa = X[known]
            za = np.asarray(Xa @ model.aux_weights.T) + model.aux_bias
            aux_loss, dza = _ce(za, batch.aux[known], known.size)
            loss += model.aux_weight * aux_loss
            dza *= model.aux_weight
            gw = np.asarray(Xa.T @ dza).T
            gb = dza.sum(axis=0)
        grads += [gw, gb]
    return loss, grads


# --------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.1
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    aux_weight: float = 1.0

    def __post_init__(self):
        if self.lr < 0:
            raise InvalidInput("learning rate must be >= 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise InvalidInput("epochs must be >= 0 and batch_size >= 1")


def _sgd_step(model: ModelParams, batch: Batch, lr: float, epoch: int) -> None:
    """One gradient step restricted to the feature columns present in ``batch``.

    Columns absent from the batch have zero gradient, so this equals the
    dense update in :func:`loss_and_grad`.
    """
    cols, inverse = np.unique(batch.X.indices, return_inverse=True)
    # overflow on the way to divergence is reported below as TrainingDiverged
    Xc = sp.csr_matrix((batch.X.data, inverse, batch.X.indptr), shape=(batch.X.shape[0], cols.size))
    sub = ModelParams(
        model.head_kind, model.weights[:, cols], model.bias, model.bucket_spec, None,
        None if model.aux_weights is None else model.aux_weights[:, cols], model.aux_bias,
        model.aux_weight, model.aux_labels,
    )
    with np.errstate(over="ignore", invalid="ignore"):
        loss, grads = loss_and_grad(sub, Batch(Xc, batch.targets, batch.aux))
    if not np.isfinite(loss):
        raise TrainingDiverged(f"non-finite loss in epoch {epoch}")
    model.weights[:, cols] -= lr * grads[0]
    model.bias -= lr * grads[1]
    if model.has_aux:
        model.aux_weights[:, cols] -= lr * grads[2]
        model.aux_bias -= lr * grads[3]


def train(examples: Sequence[LabeledExample], head_kind: str, bucket_spec: BucketSpec,
          feature_spec: FeatureSpec, config: TrainConfig = TrainConfig(), X=None,
          on_epoch: Optional[Callable[[int, ModelParams], dict]] = None) -> ModelParams:
    """Mini-batch gradient descent from zero initialization.

    ``history`` on the returned model holds one ``{"epoch", "loss"}`` record
    per epoch (loss over the full training set after the epoch), merged with
    whatever ``on_epoch`` returns.
    """
    if not examples:
        raise InvalidInput("training set is empty")
    model = init_model(head_kind, bucket_spec, feature_spec, config.aux_weight)
    full = make_batch(model, examples, X)
    _check_targets(model, full)
    n = full.X.shape[0]
    rng = np.random.default_rng(config.seed)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            rows = order[start : start + config.batch_size]
            _sgd_step(model, Batch(full.X[rows], full.targets[rows], full.aux[rows]), config.lr, epoch)
        loss, _ = loss_and_grad(model, full)
        if not np.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss after epoch {epoch}")
        record = {"epoch": epoch, "loss": loss}
        if on_epoch is not None:
            record.update(on_epoch(epoch, model))
        model.history.append(record)
        log.info("epoch %d loss %.6f", epoch, loss)
    return model


# --------------------------------------------------------------------------
# serialization


def to_bytes(model: ModelParams) -> bytes:
    if model.feature_spec is None:
        raise InvalidInput("only models with a feature spec can be serialized")
    header = {
        "format_version": FORMAT_VERSION,
        "head_kind": model.head_kind,
        "n_outputs": int(model.weights.shape[0]),
        "dim": model.dim,
        "bucket_spec": {"n": model.bucket_spec.n, "tau_min": model.bucket_spec.tau_min,
                        "tau_max": model.bucket_spec.tau_max},
        "feature_spec": model.feature_spec.to_json(),
        "aux": {"enabled": model.has_aux, "aux_weight": model.aux_weight, "labels": list(model.aux_labels)},
    }
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in model.arrays())
    return MAGIC + struct.pack("<I", len(hb)) + hb + body


def from_bytes(data: bytes) -> ModelParams:
    if not data.startswith(MAGIC):
        raise InvalidInput("not a model file")
    (hlen,) = struct.unpack_from("<I", data, len(MAGIC))
    off = len(MAGIC) + 4
    try:
        header = json.loads(data[off : off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"corrupt model header: {exc}") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise InvalidInput(f"unsupported model format {header.get('format_version')}")
    off += hlen
    n_out, dim = header["n_outputs"], header["dim"]
    n_aux = len(header["aux"]["labels"])
    shapes = [(n_out, dim), (n_out,)]
    if header["aux"]["enabled"]:
        shapes += [(n_aux, dim), (n_aux,)]
    arrays = []
    for shape in shapes:
        count = int(np.prod(shape))
        if off + 8 * count > len(data):
            raise InvalidInput("model file is truncated")
        arrays.append(np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape).astype(np.float64))
        off += 8 * count
    if off != len(data):
        raise InvalidInput("trailing bytes in model file")
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise InvalidInput("model has non-finite parameters")
    bs = header["bucket_spec"]
    fs = header["feature_spec"]
    return ModelParams(
        header["head_kind"], arrays[0], arrays[1], BucketSpec(bs["n"], bs["tau_min"], bs["tau_max"]),
        FeatureSpec(fs["dim"], tuple(fs["families"]), fs["hash_seed"]),
        arrays[2] if len(arrays) > 2 else None, arrays[3] if len(arrays) > 2 else None,
        header["aux"]["aux_weight"], tuple(header["aux"]["labels"]),
    )


def save(model: ModelParams, path) -> None:
    from .jsonio import atomic_open

    with atomic_open(path, "wb") as fh:
        fh.write(to_bytes(model))


def load(path) -> ModelParams:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
