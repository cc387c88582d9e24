"""Source/edited pairs to supervised examples; prompt-disjoint splits; dataset statistics."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .embedding import EmbedderConfig, hash64
from .errors import InsufficientPrompts, InvalidInput
from .segmentation import tokenize_words
from .simmetrics import (
    BucketSpec,
    MetricKind,
    ScaleSpec,
    SoftNgramParams,
    bucket_of,
    raw_distance,
    scale_target,
)

EDITORS = ("human", "llm", "rule")
SPLITS = ("train", "val", "test")
TERNARY = ("human", "ai_edited", "ai_generated")

PAIR_FIELDS = ("id", "source_text", "edited_text", "editor", "prompt_id", "prompt_category", "domain", "split",
               "fully_ai")


@dataclass(frozen=True)
class DocumentPair:
    id: str
    source_text: str
    edited_text: str
    editor: str = "rule"
    prompt_id: Optional[str] = None
    prompt_category: Optional[str] = None
    domain: str = "general"
    split: Optional[str] = None
    # edited_text is a synthetic mirror rather than an edit of source_text
    fully_ai: bool = False

    def __post_init__(self):
        if not self.id:
            raise InvalidInput("pair id is empty")
        if not self.edited_text.strip() or (not self.fully_ai and not self.source_text.strip()):
            raise InvalidInput(f"pair {self.id}: texts must be non-empty")
        if self.editor not in EDITORS:
            raise InvalidInput(f"pair {self.id}: unknown editor {self.editor!r}")
        if self.split is not None and self.split not in SPLITS:
            raise InvalidInput(f"pair {self.id}: unknown split {self.split!r}")

    @classmethod
    def from_json(cls, rec: dict) -> "DocumentPair":
        unknown = set(rec) - set(PAIR_FIELDS)
        if unknown:
            raise InvalidInput(f"unknown pair fields: {sorted(unknown)}")
        missing = {"id", "edited_text"} - set(rec)
        if missing:
            raise InvalidInput(f"missing pair fields: {sorted(missing)}")
        return cls(**rec)

    def to_json(self) -> dict:
        d = asdict(self)
        if not d["fully_ai"]:
            del d["fully_ai"]
        if d["split"] is None:
            del d["split"]
        return d


@dataclass(frozen=True)
class LabeledExample:
    id: str
    text: str
    metric_kind: MetricKind
    raw_score: float
    target: float
    bucket: int
    ternary: str
    split: Optional[str] = None
    sentinel: bool = False
    prompt_category: Optional[str] = None

    def to_json(self) -> dict:
        d = {
            "id": self.id, "text": self.text, "metric_kind": self.metric_kind.value,
            "raw_score": self.raw_score, "target": self.target, "bucket": self.bucket,
            "ternary": self.ternary, "split": self.split, "sentinel": self.sentinel,
        }
        if self.prompt_category is not None:
            d["prompt_category"] = self.prompt_category
        return d

    @classmethod
    def from_json(cls, rec: dict) -> "LabeledExample":
        try:
            return cls(
                id=str(rec["id"]), text=rec["text"], metric_kind=MetricKind.parse(rec["metric_kind"]),
                raw_score=float(rec["raw_score"]), target=float(rec["target"]), bucket=int(rec["bucket"]),
                ternary=rec["ternary"], split=rec.get("split"), sentinel=bool(rec.get("sentinel", False)),
                prompt_category=rec.get("prompt_category"),
            )
        except KeyError as exc:
            raise InvalidInput(f"labeled record missing field {exc.args[0]!r}") from None


def ternary_of(raw: float, scale: ScaleSpec) -> str:
    if raw <= scale.tau_low:
        return "human"
    if raw >= scale.tau_high:
        return "ai_generated"
    return "ai_edited"


def label_from_raw(id: str, text: str, raw: float, kind: MetricKind, scale: ScaleSpec, buckets: BucketSpec,
                   split: Optional[str] = None, sentinel: bool = False,
                   prompt_category: Optional[str] = None) -> LabeledExample:
    return LabeledExample(
        id=id, text=text, metric_kind=MetricKind.parse(kind), raw_score=float(raw),
        target=scale_target(raw, scale), bucket=bucket_of(raw, buckets), ternary=ternary_of(raw, scale),
        split=split, sentinel=sentinel, prompt_category=prompt_category,
    )


def label_pair(pair: DocumentPair, kind: MetricKind, scale: ScaleSpec, buckets: BucketSpec,
               doc_embedder: Optional[EmbedderConfig] = None,
               soft: Optional[SoftNgramParams] = None) -> LabeledExample:
    """Label the edited side of ``pair``; the source is used only to compute the score."""
    if pair.fully_ai:
        return label_fully_ai(pair.edited_text, scale, buckets, kind, id=pair.id, split=pair.split,
                              prompt_category=pair.prompt_category)
    raw = raw_distance(pair.source_text, pair.edited_text, kind, doc_embedder or EmbedderConfig(),
                       soft or SoftNgramParams())
    return label_from_raw(pair.id, pair.edited_text, raw, kind, scale, buckets, pair.split,
                          prompt_category=pair.prompt_category)


def label_fully_ai(text: str, scale: ScaleSpec, buckets: BucketSpec,
                   kind: MetricKind = MetricKind.COSINE_DISTANCE, id: str = "", split: Optional[str] = None,
                   prompt_category: Optional[str] = None) -> LabeledExample:
    """Mirror texts get the upper threshold as a flagged sentinel raw score."""
    if not text or not text.strip():
        raise InvalidInput("fully-AI text is empty")
    ex = label_from_raw(id, text, scale.tau_high, kind, scale, buckets, split, sentinel=True,
                        prompt_category=prompt_category)
    # bucket n-1 regardless of how the bucket range relates to the scale range
    return replace(ex, bucket=buckets.n - 1, target=1.0)


def validate_example(ex: LabeledExample, scale: ScaleSpec, buckets: BucketSpec) -> None:
    if ex.target != scale_target(ex.raw_score, scale):
        raise InvalidInput(f"{ex.id}: target inconsistent with raw score")
    if ex.sentinel:
        if ex.bucket != buckets.n - 1 or ex.ternary != "ai_generated":
            raise InvalidInput(f"{ex.id}: sentinel example not in the top bucket")
        return
    if ex.bucket != bucket_of(ex.raw_score, buckets):
        raise InvalidInput(f"{ex.id}: bucket inconsistent with raw score")
    if ex.ternary != ternary_of(ex.raw_score, scale):
        raise InvalidInput(f"{ex.id}: ternary class inconsistent with thresholds")


# --------------------------------------------------------------------------
# splits


def _allocate(n_items: int, fractions: Sequence[float]) -> list[int]:
    counts = [int(round(f * n_items)) for f in fractions[:-1]]
    counts.append(n_items - sum(counts))
    # every nonzero fraction gets at least one item
    for k, f in enumerate(fractions):
        if f > 0 and counts[k] == 0:
            donor = max(range(len(counts)), key=lambda i: counts[i])
            counts[donor] -= 1
            counts[k] += 1
    for k, f in enumerate(fractions):
        if f == 0 and counts[k] != 0:
            donor = max(range(len(counts)), key=lambda i: fractions[i])
            counts[donor] += counts[k]
            counts[k] = 0
    return counts


def split_by_prompt(pairs: Sequence[DocumentPair], fractions: Sequence[float] = (0.8, 0.1, 0.1),
                    seed: int = 0) -> dict[str, str]:
    """Assign every pair to a split so that no prompt spans two splits.

    Prompts are shuffled with ``seed`` and cut by ``fractions``; pairs
    without a prompt are assigned independently at random.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise InvalidInput(f"fractions must be three non-negative numbers summing to 1, got {fractions}")
    prompts = sorted({p.prompt_id for p in pairs if p.prompt_id is not None})
    nonzero = sum(1 for f in fractions if f > 0)
    if prompts and len(prompts) < nonzero:
        raise InsufficientPrompts(f"{len(prompts)} distinct prompts cannot fill {nonzero} non-empty splits")

    rng = np.random.default_rng(hash64("split", seed))
    order = [prompts[i] for i in rng.permutation(len(prompts))]
    counts = _allocate(len(prompts), fractions)
    prompt_split: dict[str, str] = {}
    start = 0
    for name, c in zip(SPLITS, counts):
        for pid in order[start : start + c]:
            prompt_split[pid] = name
        start += c

    cum = np.cumsum(fractions)
    out = {}
    for p in pairs:
        if p.prompt_id is not None:
            out[p.id] = prompt_split[p.prompt_id]
        else:
            u = np.random.default_rng(hash64("split-pair", seed, p.id)).random()
            out[p.id] = SPLITS[min(int(np.searchsorted(cum, u, side="right")), 2)]
    return out


# --------------------------------------------------------------------------
# statistics


def dataset_stats(examples: Iterable[LabeledExample]) -> dict:
    """Counts and word-count mean/min/max per (split, ternary)."""
    groups: dict[tuple[str, str], list[int]] = {}
    for ex in examples:
        groups.setdefault((ex.split or "none", ex.ternary), []).append(len(tokenize_words(ex.text)))

    def summary(wc: list[int]) -> dict:
        if not wc:
            return {"count": 0, "mean_words": 0.0, "min_words": 0, "max_words": 0}
        return {"count": len(wc), "mean_words": sum(wc) / len(wc), "min_words": min(wc), "max_words": max(wc)}

    splits = list(SPLITS) + sorted({s for s, _ in groups} - set(SPLITS))
    report = {"by_split": {}, "by_ternary": {}, "total": summary([w for v in groups.values() for w in v])}
    for s in splits:
        report["by_split"][s] = {t: summary(groups.get((s, t), [])) for t in TERNARY}
    for t in TERNARY:
        report["by_ternary"][t] = summary([w for (s, tt), v in groups.items() if tt == t for w in v])
    return report
