"""F1-optimal decision thresholds for binary and ternary decisions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateLabels, InvalidInput
from .evalmetrics import confusion_and_f1

TERNARY_CLASSES = ("human", "ai_edited", "ai_generated")
TASKS = ("human_vs_any_ai", "fullyai_vs_rest", "ternary")


@dataclass(frozen=True)
class CalibrationResult:
    task: str
    thresholds: tuple[float, ...]
    fit_f1: tuple[float, ...]
    n_val: int

    def to_json(self) -> dict:
        return {"task": self.task, "thresholds": list(self.thresholds), "fit_f1": list(self.fit_f1),
                "n_val": self.n_val}

    @classmethod
    def from_json(cls, d: dict) -> "CalibrationResult":
        try:
            return cls(d["task"], tuple(d["thresholds"]), tuple(d["fit_f1"]), int(d["n_val"]))
        except KeyError as exc:
            raise InvalidInput(f"calibration record missing {exc.args[0]!r}") from None


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 0.0 if tp == 0 else 2 * tp / denom


def candidate_thresholds(scores: Sequence[float]) -> np.ndarray:
    """Midpoints between consecutive distinct scores, plus one below and one above."""
    u = np.unique(np.asarray(scores, dtype=np.float64))
    return np.concatenate([[u[0] - 1.0], (u[:-1] + u[1:]) / 2.0, [u[-1] + 1.0]])


def calibrate_binary(scores: Sequence[float], labels: Sequence[int], task: str = "human_vs_any_ai"
                     ) -> CalibrationResult:
    """Threshold maximizing F1 of ``score >= threshold => positive``.

    Ties in F1 go to the larger threshold.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise InvalidInput("scores and labels must be equal-length sequences")
    if not np.all(np.isin(y, (0, 1))):
        raise InvalidInput("binary labels must be 0 or 1")
    if not np.all(np.isfinite(s)):
        raise InvalidInput("scores must be finite")
    if y.size == 0 or y.min() == y.max():
        raise DegenerateLabels("binary calibration needs both classes")

    u, inverse = np.unique(s, return_inverse=True)
    pos_at = np.bincount(inverse, weights=(y == 1), minlength=u.size).astype(np.int64)
    neg_at = np.bincount(inverse, weights=(y == 0), minlength=u.size).astype(np.int64)
    # candidate k predicts positive for distinct scores u[k:], k = 0..len(u)
    tp = np.concatenate([np.cumsum(pos_at[::-1])[::-1], [0]])
    fp = np.concatenate([np.cumsum(neg_at[::-1])[::-1], [0]])
    total_pos = int(pos_at.sum())
    cands = candidate_thresholds(u)
    best_k, best_f1 = 0, -1.0
    for k in range(cands.size):
        f1 = f1_from_counts(int(tp[k]), int(fp[k]), total_pos - int(tp[k]))
        if f1 >= best_f1:
            best_k, best_f1 = k, f1
    return CalibrationResult(task, (float(cands[best_k]),), (best_f1,), int(s.size))


def classify_ternary(score: float, t1: float, t2: float) -> str:
    if t1 > t2:
        raise InvalidInput(f"t1={t1} exceeds t2={t2}")
    if score < t1:
        return "human"
    if score >= t2:
        return "ai_generated"
    return "ai_edited"


def calibrate_ternary(scores: Sequence[float], labels: Sequence[str]) -> CalibrationResult:
    """Two binary calibrations: human vs rest, then (human + edited) vs generated.

    ``fit_f1`` holds the two binary F1 values followed by the ternary
    macro-F1 on the calibration set.
    """
    labels = list(labels)
    missing = set(TERNARY_CLASSES) - set(labels)
    if missing:
        raise DegenerateLabels(f"ternary calibration needs all classes; missing {sorted(missing)}")
    if set(labels) - set(TERNARY_CLASSES):
        raise InvalidInput(f"unknown ternary labels {sorted(set(labels) - set(TERNARY_CLASSES))}")
    low = calibrate_binary(scores, [int(l != "human") for l in labels])
    high = calibrate_binary(scores, [int(l == "ai_generated") for l in labels])
    t1, t2 = low.thresholds[0], high.thresholds[0]
    if t1 > t2:
        t1 = t2 = (t1 + t2) / 2.0
    preds = [classify_ternary(s, t1, t2) for s in scores]
    macro = confusion_and_f1(preds, labels, TERNARY_CLASSES).macro_f1
    return CalibrationResult("ternary", (t1, t2), (low.fit_f1[0], high.fit_f1[0], macro), len(labels))
