import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from editmag.errors import DegenerateData, DegenerateInput, InsufficientData, InvalidInput, UnstableStatistic
from editmag.evalmetrics import (
    RatingsMatrix,
    bootstrap_se,
    confusion_and_f1,
    histogram,
    krippendorff_alpha,
    metric_as_rater,
    mse,
    paired_mean_diff,
    pearson_r,
    ties_as_missing,
)
from editmag.simmetrics import BucketSpec

from oracles import alpha_pairwise

TERN = ("H", "E", "A")


def test_confusion_examples():
    r = confusion_and_f1(list("HHEA"), list("HEEA"), TERN)
    assert r.per_class_f1 == pytest.approx({"H": 2 / 3, "E": 2 / 3, "A": 1.0})
    assert r.macro_f1 == pytest.approx(7 / 9) and r.accuracy == 0.75
    assert r.matrix.tolist() == [[1, 0, 0], [1, 1, 0], [0, 0, 1]]
    perfect = confusion_and_f1(list("HEA"), list("HEA"), TERN)
    assert perfect.accuracy == 1.0 and set(perfect.per_class_f1.values()) == {1.0}
    absent = confusion_and_f1(list("HH"), list("HH"), TERN)
    assert absent.per_class_f1["E"] == 0.0 and absent.macro_f1 == pytest.approx(1 / 3)
    with pytest.raises(InvalidInput):
        confusion_and_f1(["H"], ["H", "E"], TERN)
    with pytest.raises(InvalidInput):
        confusion_and_f1(["X"], ["H"], TERN)


@given(st.lists(st.tuples(st.sampled_from(TERN), st.sampled_from(TERN)), min_size=1, max_size=40))
def test_macro_is_mean_of_per_class(pairs):
    r = confusion_and_f1([p for p, _ in pairs], [l for _, l in pairs], TERN)
    assert all(0.0 <= v <= 1.0 for v in r.per_class_f1.values())
    assert r.macro_f1 == sum(r.per_class_f1.values()) / 3


def test_pearson_examples():
    assert pearson_r([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-15)
    assert pearson_r([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-15)
    assert pearson_r([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(DegenerateInput):
        pearson_r([1, 1, 1], [1, 2, 3])
    with pytest.raises(InvalidInput):
        pearson_r([1], [1])


@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=3, max_size=30),
       st.floats(0.1, 10), st.floats(-10, 10))
def test_pearson_affine_invariance(pts, a, b):
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.ptp(x) < 1e-3 or np.ptp(y) < 1e-3:
        return
    assert abs(pearson_r(x, y) - pearson_r(a * x + b, y)) <= 1e-12


def test_mse_examples():
    assert mse([0.3, 0.4], [0.3, 0.4]) == 0.0
    assert mse([0, 1], [1, 0]) == 1.0
    assert mse([0.5], [0.0]) == 0.25
    with pytest.raises(InvalidInput):
        mse([1], [1, 2])


# --------------------------------------------------------------------------
# agreement


def test_alpha_examples():
    assert krippendorff_alpha(RatingsMatrix((("A", "A"), ("A", "A"), ("A", "B")))) == 0.0
    assert krippendorff_alpha(RatingsMatrix((("A", "A"), ("B", "B"), ("C", "C", )))) == 1.0
    with pytest.raises(DegenerateData):
        krippendorff_alpha(RatingsMatrix((("A", "A"), ("A", "A"))))
    with pytest.raises(InsufficientData):
        krippendorff_alpha(RatingsMatrix((("A", None), (None, "B"))))
    with pytest.raises(InvalidInput):
        RatingsMatrix((("A",),))


matrices = st.integers(2, 4).flatmap(lambda r: st.lists(
    st.lists(st.sampled_from(["first", "second", "tie", None]), min_size=r, max_size=r),
    min_size=1, max_size=6))


@given(matrices)
def test_alpha_matches_definition(rows):
    pairable = [v for row in rows if sum(x is not None for x in row) >= 2 for v in row if v is not None]
    m = RatingsMatrix(tuple(map(tuple, rows)))
    if not pairable:
        with pytest.raises(InsufficientData):
            krippendorff_alpha(m)
    elif len(set(pairable)) < 2:
        with pytest.raises(DegenerateData):
            krippendorff_alpha(m)
    else:
        assert abs(krippendorff_alpha(m) - float(alpha_pairwise(rows))) <= 1e-9


def test_metric_as_rater():
    assert metric_as_rater([(0.2, 0.5), (0.3, 0.3), (0.9, 0.1)]) == ["second", "tie", "first"]
    assert metric_as_rater([(0.04, 0.05)], BucketSpec(4, 0.03, 0.15)) == ["tie"]
    assert ties_as_missing(["first", "tie", None]) == ["first", None, None]
    with pytest.raises(InvalidInput):
        metric_as_rater([(0.1, 0.2)], "fuzzy")


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)).filter(lambda p: p[0] != p[1]), max_size=20))
def test_strict_mode_never_ties_distinct_scores(pairs):
    assert "tie" not in metric_as_rater(pairs)


HAND = RatingsMatrix((("A", "A"), ("A", "A"), ("A", "B")))


def test_bootstrap_pinned_fixture():
    se = bootstrap_se(krippendorff_alpha, HAND, B=1000, seed=0)
    assert se == pytest.approx(0.1776043265791952, abs=1e-15)
    assert se > 0
    assert bootstrap_se(krippendorff_alpha, HAND, B=1000, seed=0) == se


def test_bootstrap_edge_cases():
    assert bootstrap_se(lambda r: 0.5, HAND, B=50) == 0.0
    with pytest.raises(InvalidInput):
        bootstrap_se(lambda r: 0.5, HAND, B=1)
    def broken(r):
        raise DegenerateData("always")

    with pytest.raises(UnstableStatistic):
        bootstrap_se(broken, HAND, B=20)
    # roughly a third of resamples of this matrix have no disagreement at all; that is tolerated
    sparse = RatingsMatrix((("A", "A"),) * 9 + (("A", "B"),))
    assert bootstrap_se(krippendorff_alpha, sparse, B=200) > 0


# --------------------------------------------------------------------------
# paired differences and histograms


def test_paired_mean_diff_examples():
    assert paired_mean_diff([0.1, 0.2], [0.1, 0.2]) == (0.0, 0.0, 0.0)
    mean, sd, frac = paired_mean_diff([0.9, 0.8], [0.5, 0.9])
    assert mean == pytest.approx(-0.15) and frac == 0.5
    assert sd == pytest.approx(np.std([-0.4, 0.1], ddof=1))
    with pytest.raises(InvalidInput):
        paired_mean_diff([], [])
    with pytest.raises(InvalidInput):
        paired_mean_diff([1, 2], [1])


def test_histogram_examples():
    h = histogram([0.05 + 0.1 * i for i in range(10)], 10)
    assert [c for _, _, c in h.bins] == [1] * 10 and h.total == 10
    empty = histogram([], 4)
    assert empty.total == 0 and len(empty.bins) == 4
    edge = histogram([0.5, 1.0, 0.0], 2)
    assert [c for _, _, c in edge.bins] == [1, 2]
    out = histogram([-1, 2, 0.3], 3)
    assert (out.underflow, out.overflow) == (1, 1)
    assert edge.to_csv().splitlines()[0] == "bin_lo,bin_hi,count"
    with pytest.raises(InvalidInput):
        histogram([0.1], 0)
    with pytest.raises(InvalidInput):
        histogram([0.1], 2, (1.0, 0.0))
    with pytest.raises(InvalidInput):
        histogram([0.1], 2, (0.0, math.inf))


@given(st.lists(st.floats(-0.5, 1.5), max_size=100), st.integers(1, 12))
def test_histogram_conserves_count(values, bins):
    assert histogram(values, bins).total == len(values)
