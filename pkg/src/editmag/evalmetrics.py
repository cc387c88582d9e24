"""Evaluation statistics: F1 and friends, correlation, Krippendorff's alpha, bootstrap, histograms."""

from __future__ import annotations

import bisect
import builtins
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Hashable, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateData,
    DegenerateInput,
    EditMagError,
    InsufficientData,
    InvalidInput,
    UnstableStatistic,
)
from .simmetrics import BucketSpec, bucket_of


@dataclass(frozen=True)
class ClassificationReport:
    classes: tuple
    matrix: np.ndarray  # rows: true label, columns: prediction
    per_class_f1: dict
    macro_f1: float
    accuracy: float

    def to_json(self) -> dict:
        return {
            "classes": list(self.classes),
            "confusion": self.matrix.tolist(),
            "per_class_f1": {str(k): v for k, v in self.per_class_f1.items()},
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
        }


def confusion_and_f1(preds: Sequence, labels: Sequence, classes: Sequence) -> ClassificationReport:
    if len(preds) != len(labels):
        raise InvalidInput(f"{len(preds)} predictions vs {len(labels)} labels")
    classes = tuple(classes)
    index = {c: i for i, c in enumerate(classes)}
    bad = (set(preds) | set(labels)) - set(index)
    if bad:
        raise InvalidInput(f"values outside the class set: {sorted(map(str, bad))}")
    k = len(classes)
    mat = np.zeros((k, k), dtype=np.int64)
    for p, l in zip(preds, labels):
        mat[index[l], index[p]] += 1
    f1 = {}
    for i, c in enumerate(classes):
        tp = int(mat[i, i])
        fp = int(mat[:, i].sum()) - tp
        fn = int(mat[i, :].sum()) - tp
        f1[c] = 0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)
    macro = sum(f1.values()) / k if k else 0.0
    acc = float(np.trace(mat)) / len(labels) if len(labels) else 0.0
    return ClassificationReport(classes, mat, f1, macro, acc)


def pearson_r(xs: Sequence[float], ys: Sequence[float]) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidInput("pearson_r needs two equal-length sequences")
    if x.size < 2:
        raise InvalidInput("pearson_r needs at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInput("correlation undefined for a constant sequence")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def mse(preds: Sequence[float], targets: Sequence[float]) -> float:
    p = np.asarray(preds, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape or p.size == 0:
        raise InvalidInput("mse needs two equal, non-empty sequences")
    return float(np.mean((p - t) ** 2))


# --------------------------------------------------------------------------
# agreement


@dataclass(frozen=True)
class RatingsMatrix:
    """Units x raters; ``None`` marks a missing rating."""

    values: tuple[tuple[Optional[Hashable], ...], ...]

    def __post_init__(self):
        vals = tuple(tuple(row) for row in self.values)
        object.__setattr__(self, "values", vals)
        if not vals:
            raise InvalidInput("ratings matrix has no units")
        widths = {len(r) for r in vals}
        if len(widths) != 1:
            raise InvalidInput("every unit needs one slot per rater")
        if widths.pop() < 2:
            raise InvalidInput("need at least two raters")

    @property
    def units(self) -> int:
        return len(self.values)

    @property
    def raters(self) -> int:
        return len(self.values[0])

    def take(self, rows: Sequence[int]) -> "RatingsMatrix":
        return RatingsMatrix(tuple(self.values[i] for i in rows))


def krippendorff_alpha(ratings: RatingsMatrix, level: str = "nominal") -> float:
    """Nominal alpha from the coincidence matrix; missing values allowed."""
    if level != "nominal":
        raise InvalidInput(f"only nominal alpha is supported, got {level!r}")
    coincidence: Counter = Counter()
    for row in ratings.values:
        present = [v for v in row if v is not None]
        m = len(present)
        if m < 2:
            continue
        counts = Counter(present)
        for c, nc in counts.items():
            for k, nk in counts.items():
                pairs = nc * (nc - 1) if c == k else nc * nk
                coincidence[c, k] += pairs / (m - 1)
    if not coincidence:
        raise InsufficientData("no unit has two or more ratings")
    marg: Counter = Counter()
    for (c, _k), v in coincidence.items():
        marg[c] += v
    n = sum(marg.values())
    d_o = sum(v for (c, k), v in coincidence.items() if c != k) / n
    d_e = sum(marg[c] * marg[k] for c in marg for k in marg if c != k) / (n * (n - 1))
    if d_e == 0.0:
        raise DegenerateData("all pairable values are identical; expected disagreement is zero")
    return 1.0 - d_o / d_e


def metric_as_rater(pair_scores: Sequence[tuple[float, float]], tie_mode: str | BucketSpec = "strict"
                    ) -> list[str]:
    """The text with the higher score is the metric's pick.

    ``tie_mode`` is ``"strict"`` (tie only on exact equality) or a
    :class:`BucketSpec` (tie when both scores share a bucket).
    """
    out = []
    for s1, s2 in pair_scores:
        if isinstance(tie_mode, BucketSpec):
            s1, s2 = bucket_of(s1, tie_mode), bucket_of(s2, tie_mode)
        elif tie_mode != "strict":
            raise InvalidInput(f"unknown tie mode {tie_mode!r}")
        out.append("first" if s1 > s2 else "second" if s2 > s1 else "tie")
    return out


def ties_as_missing(values: Sequence[Optional[str]]) -> list[Optional[str]]:
    return [None if v == "tie" else v for v in values]


def bootstrap_se(statistic: Callable[[RatingsMatrix], float], ratings: RatingsMatrix, B: int = 1000,
                 seed: int = 0) -> float:
    """Sample standard deviation of ``statistic`` over ``B`` unit-level resamples.

    Resample ``b`` draws from its own stream ``(seed, b)`` so results do not
    depend on evaluation order.
    """
    if B < 2:
        raise InvalidInput("bootstrap needs B >= 2")
    U = ratings.units
    values, failures = [], 0
    for b in range(B):
        rng = np.random.default_rng([seed, b])
        rows = rng.integers(0, U, size=U)
        try:
            values.append(float(statistic(ratings.take(rows))))
        except EditMagError:
            failures += 1
    if failures > B / 2:
        raise UnstableStatistic(f"statistic failed on {failures} of {B} resamples")
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1))


# --------------------------------------------------------------------------
# paired differences, histograms


def paired_mean_diff(before: Sequence[float], after: Sequence[float]) -> tuple[float, float, float]:
    """``(mean(after - before), sample sd, share of pairs where after < before)``."""
    b = np.asarray(before, dtype=np.float64)
    a = np.asarray(after, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise InvalidInput("paired_mean_diff needs two equal, non-empty sequences")
    d = a - b
    sd = float(np.std(d, ddof=1)) if d.size > 1 else 0.0
    return float(d.mean()), sd, float(np.mean(a < b))


@dataclass(frozen=True)
class Histogram:
    bins: tuple[tuple[float, float, int], ...]
    underflow: int
    overflow: int

    @property
    def total(self) -> int:
        return sum(c for _, _, c in self.bins) + self.underflow + self.overflow

    def to_csv(self) -> str:
        lines = ["bin_lo,bin_hi,count"]
        lines += [f"{lo!r},{hi!r},{c}" for lo, hi, c in self.bins]
        return "\n".join(lines) + "\n"


def histogram(values: Sequence[float], bin_count: int, range: tuple[float, float] = (0.0, 1.0)) -> Histogram:
    """Equal-width bins; a value on an inner edge goes to the upper bin, ``hi`` to the top bin."""
    lo, hi = float(range[0]), float(range[1])
    if bin_count < 1:
        raise InvalidInput("bin_count must be >= 1")
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise InvalidInput(f"invalid histogram range {range}")
    edges = [lo + (hi - lo) * i / bin_count for i in builtins.range(bin_count)] + [hi]
    counts = [0] * bin_count
    under = over = 0
    for v in values:
        if v < lo:
            under += 1
        elif v > hi:
            over += 1
        else:
            counts[min(bin_count - 1, bisect.bisect_right(edges, v) - 1)] += 1
    return Histogram(tuple((edges[i], edges[i + 1], counts[i]) for i in builtins.range(bin_count)), under, over)

