"""End-to-end desk-scale runs: graded-edit detection and multi-edit trajectories."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .calibration import calibrate_ternary, classify_ternary
from .corpus import human_text, mirror_text, prompt_catalog
from .embedding import EmbedderConfig, hash64
from .evalmetrics import confusion_and_f1, paired_mean_diff, pearson_r
from .labeler import DocumentPair, TERNARY, label_pair, split_by_prompt
from .model import FeatureSpec, ModelParams, TrainConfig, featurize_batch, predict_scores, predict_scores_matrix, train
from .perturb import apply_edit, apply_edit_sequence
from .simmetrics import COSINE_THRESHOLDS, BucketSpec, MetricKind

log = logging.getLogger(__name__)

MIRROR = "mirror"


@dataclass
class GradedConfig:
    n_sources: int = 2000
    lambdas: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75)
    n_buckets: int = 4
    seed: int = 0
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    doc_embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    features: FeatureSpec = field(default_factory=FeatureSpec)
    train: TrainConfig = field(default_factory=lambda: TrainConfig(lr=2.0, epochs=30))


@dataclass
class GradedResult:
    model: ModelParams
    macro_f1: float
    accuracy: float
    per_class_f1: dict
    thresholds: tuple[float, float]
    mean_score_by_level: dict
    pearson_r: float
    label_counts: dict
    n_test: int
    seconds: float


def build_pairs(cfg: GradedConfig) -> tuple[list[DocumentPair], dict[str, object]]:
    """Edited variants at every lambda plus one mirror per source.

    Returns the pairs and a map from pair id to its level (a lambda or ``"mirror"``).
    """
    catalog = prompt_catalog()
    rng = np.random.default_rng(hash64("prompts", cfg.seed))
    pairs, level = [], {}
    for i in range(cfg.n_sources):
        sseed = hash64("source", cfg.seed, i)
        text, domain = human_text(sseed)
        prompt = catalog[int(rng.integers(len(catalog)))]
        for lam in cfg.lambdas:
            edited, _ = apply_edit(text, lam, hash64("edit", sseed, lam), prompt.profile)
            pid = f"s{i:05d}-l{lam:.2f}"
            pairs.append(DocumentPair(pid, text, edited, "rule", prompt.prompt_id,
                                      prompt.category if lam > 0 else None, domain))
            level[pid] = lam
        pid = f"s{i:05d}-mirror"
        pairs.append(DocumentPair(pid, text, mirror_text(sseed, domain), "rule", prompt.prompt_id, None, domain,
                                  fully_ai=True))
        level[pid] = MIRROR
    return pairs, level


def run_graded_detection(cfg: GradedConfig = GradedConfig()) -> GradedResult:
    t0 = time.perf_counter()
    pairs, level = build_pairs(cfg)
    assignment = split_by_prompt(pairs, cfg.fractions, cfg.seed)
    buckets = BucketSpec(cfg.n_buckets, COSINE_THRESHOLDS.tau_low, COSINE_THRESHOLDS.tau_high)
    examples = []
    for p in pairs:
        ex = label_pair(p, MetricKind.COSINE_DISTANCE, COSINE_THRESHOLDS, buckets, cfg.doc_embedder)
        examples.append(replace(ex, split=assignment[p.id]))
    by_split = {s: [e for e in examples if e.split == s] for s in ("train", "val", "test")}
    log.info("labeled %d examples in %.1fs", len(examples), time.perf_counter() - t0)

    train_ex = by_split["train"]
    X_train = featurize_batch([e.text for e in train_ex], cfg.features)
    model = train(train_ex, "classification", buckets, cfg.features, cfg.train, X=X_train)

    val_scores = predict_scores(model, [e.text for e in by_split["val"]])
    cal = calibrate_ternary(val_scores, [e.ternary for e in by_split["val"]])
    t1, t2 = cal.thresholds

    test = by_split["test"]
    scores = predict_scores(model, [e.text for e in test])
    preds = [classify_ternary(s, t1, t2) for s in scores]
    report = confusion_and_f1(preds, [e.ternary for e in test], TERNARY)

    levels = list(cfg.lambdas) + [MIRROR]
    means = {}
    for lv in levels:
        sel = [s for s, e in zip(scores, test) if level[e.id] == lv]
        means[lv] = float(np.mean(sel)) if sel else float("nan")
    measured = [(s, e.raw_score) for s, e in zip(scores, test) if not e.sentinel]
    r = pearson_r([m[0] for m in measured], [m[1] for m in measured])
    counts = {t: sum(e.ternary == t for e in examples) for t in TERNARY}
    return GradedResult(model, report.macro_f1, report.accuracy, report.per_class_f1, (t1, t2), means, r,
                        counts, len(test), time.perf_counter() - t0)


@dataclass
class TrajectoryResult:
    mean_scores: list[float]  # index 0 is the unedited source
    step_diffs: list[tuple[float, float, float]]


def run_trajectory(model: ModelParams, n_texts: int = 50, steps: int = 5, lam: float = 0.3,
                   profile: str = "paraphrase", seed: int = 0) -> TrajectoryResult:
    """Apply ``steps`` sequential edits to fresh texts and score every intermediate version."""
    rows = []
    for i in range(n_texts):
        text, _ = human_text(hash64("trajectory", seed, i))
        seeds = [hash64("trajectory-edit", seed, i, k) for k in range(steps)]
        seq = apply_edit_sequence(text, steps, [lam] * steps, seeds, [profile] * steps)
        rows.append([text] + [t for t, _ in seq])
    flat = [t for row in rows for t in row]
    scores = predict_scores_matrix(model, featurize_batch(flat, model.feature_spec)).reshape(n_texts, steps + 1)
    means = [float(m) for m in scores.mean(axis=0)]
    diffs = [paired_mean_diff(scores[:, k], scores[:, k + 1]) for k in range(steps)]
    return TrajectoryResult(means, diffs)
