import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from editmag.corpus import PROMPT_CATEGORIES
from editmag.errors import InvalidInput, TrainingDiverged, WrongHead
from editmag.labeler import label_from_raw
from editmag.model import (
    Batch,
    FeatureSpec,
    TrainConfig,
    featurize,
    featurize_batch,
    from_bytes,
    init_model,
    load,
    loss_and_grad,
    make_batch,
    predict_probs,
    predict_score,
    predict_scores,
    save,
    softmax,
    to_bytes,
    train,
)
from editmag.simmetrics import COSINE_THRESHOLDS, BucketSpec, MetricKind

from oracles import central_difference, max_relative_error

B4 = BucketSpec(4, 0.03, 0.15)
SMALL = FeatureSpec(dim=1024)


def ex(text, raw, category=None, split="train"):
    return label_from_raw(text[:8], text, raw, MetricKind.COSINE_DISTANCE, COSINE_THRESHOLDS, B4, split,
                          prompt_category=category)


# --------------------------------------------------------------------------
# features


def test_featurize_is_normalized_and_deterministic():
    x = featurize("The quick brown fox jumps.", SMALL)
    assert x.shape == (1, 1024)
    assert abs(np.linalg.norm(x.data) - 1.0) < 1e-12
    y = featurize("The quick brown fox jumps.", SMALL)
    assert (x != y).nnz == 0
    other = featurize("The quick brown fox jumps.", FeatureSpec(dim=1024, hash_seed=1))
    assert (x != other).nnz > 0


def test_feature_spec_validation():
    for bad in (dict(dim=1000), dict(dim=512), dict(families=()), dict(families=("word_trigram",))):
        with pytest.raises(InvalidInput):
            FeatureSpec(**bad)


def test_empty_text_rejected():
    with pytest.raises(InvalidInput):
        featurize_batch(["fine", "  "], SMALL)


# --------------------------------------------------------------------------
# inference


def test_zero_model_predictions():
    m = init_model("classification", B4, SMALL)
    assert np.allclose(predict_probs(m, "anything at all"), 0.25, atol=0)
    assert predict_score(m, "anything") == 0.5
    r = init_model("regression", B4, SMALL)
    assert predict_score(r, "anything") == 0.0
    with pytest.raises(WrongHead):
        predict_probs(r, "x")


@given(st.lists(st.floats(-30, 30), min_size=4, max_size=4), st.floats(-50, 50))
def test_softmax_properties(z, c):
    z = np.array([z])
    p = softmax(z)
    assert np.all(p >= 0) and abs(p.sum() - 1) <= 1e-9
    assert np.argmax(softmax(z + c)) == np.argmax(p)


def test_score_range_for_classification():
    rng = np.random.default_rng(0)
    m = init_model("classification", B4, SMALL)
    m.weights[:] = rng.normal(0, 5, m.weights.shape)
    scores = predict_scores(m, [f"text number {i}" for i in range(50)])
    assert np.all(scores >= 0.5 / 4 - 1e-12) and np.all(scores <= 3.5 / 4 + 1e-12)


# --------------------------------------------------------------------------
# losses and gradients


def toy_examples(n=5):
    texts = ["alpha beta gamma", "delta epsilon", "beta beta zeta", "eta theta iota kappa", "alpha kappa"]
    raws = [0.0, 0.05, 0.09, 0.13, 0.2]
    cats = [PROMPT_CATEGORIES[0], None, PROMPT_CATEGORIES[3], PROMPT_CATEGORIES[8], PROMPT_CATEGORIES[3]]
    return [ex(t, r, c) for t, r, c in zip(texts[:n], raws[:n], cats[:n])]


def dense_batch(model, examples, dim=64, seed=0):
    # a small dense design matrix keeps the finite-difference loop cheap
    rng = np.random.default_rng(seed)
    X = rng.normal(0, 1, (len(examples), dim))
    return make_batch(model, examples, sp.csr_matrix(X))


@pytest.mark.parametrize("head, aux_weight", [("regression", 0.0), ("classification", 0.0),
                                              ("classification", 1.0), ("regression", 0.7)])
def test_gradient_matches_finite_differences(head, aux_weight):
    rng = np.random.default_rng(1)
    m = init_model(head, B4, aux_weight=aux_weight, dim=64)
    for a in m.arrays():
        a[...] = rng.normal(0, 0.3, a.shape)
    batch = dense_batch(m, toy_examples())
    _, analytic = loss_and_grad(m, batch)
    numeric = central_difference(lambda: loss_and_grad(m, batch)[0], m.arrays(), eps=1e-5)
    assert max_relative_error(analytic, numeric) <= 1e-4


def test_loss_limits():
    m = init_model("classification", B4, aux_weight=0.0, dim=64)
    exs = toy_examples()
    X = dense_batch(m, exs).X
    for i, e in enumerate(exs):
        # zero weights and a bias of +-15 put probability 1 - ~3e-13 on the true bucket
        m.bias[:] = -15.0
        m.bias[e.bucket] = 15.0
        loss, _ = loss_and_grad(m, make_batch(m, [e], X[i : i + 1]))
        assert loss <= 1e-11
    r = init_model("regression", B4, aux_weight=0.0, dim=64)
    e = exs[2]
    r.bias[:] = e.target
    assert loss_and_grad(r, make_batch(r, [e], X[:1]))[0] == 0.0


def test_bad_targets_rejected():
    m = init_model("classification", BucketSpec(2, 0.03, 0.15), aux_weight=0.0, dim=64)
    batch = dense_batch(m, toy_examples())
    with pytest.raises(InvalidInput):
        loss_and_grad(m, Batch(batch.X, np.array([0, 1, 5, 1, 0]), batch.aux))


# --------------------------------------------------------------------------
# training


def separable():
    pos = [ex(f"ornate lavish florid prose number {i}", 0.2) for i in range(20)]
    neg = [ex(f"plain simple words item {i}", 0.0) for i in range(20)]
    return pos + neg


def test_training_loss_non_increasing_on_separable_set():
    m = train(separable(), "classification", B4, SMALL, TrainConfig(lr=0.5, epochs=15, seed=3))
    losses = [h["loss"] for h in m.history]
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
    assert predict_score(m, "ornate lavish florid prose") > predict_score(m, "plain simple words")


def test_training_is_deterministic():
    cfg = TrainConfig(lr=0.3, epochs=3, seed=11)
    a = train(separable(), "classification", B4, SMALL, cfg)
    b = train(separable(), "classification", B4, SMALL, cfg)
    assert to_bytes(a) == to_bytes(b)


def test_zero_learning_rate_keeps_initialization():
    m = train(separable(), "regression", B4, SMALL, TrainConfig(lr=0.0, epochs=2))
    assert not np.any(m.weights) and not np.any(m.bias) and not np.any(m.aux_weights)


def test_divergence_detected():
    with pytest.raises(TrainingDiverged):
        train(separable(), "regression", B4, SMALL, TrainConfig(lr=1e200, epochs=3))


def test_empty_training_set():
    with pytest.raises(InvalidInput):
        train([], "classification", B4, SMALL)


# --------------------------------------------------------------------------
# serialization


@pytest.mark.parametrize("head, aux", [("classification", 1.0), ("regression", 0.0)])
def test_serialization_round_trip(tmp_path, head, aux):
    m = train(separable(), head, B4, SMALL, TrainConfig(lr=0.3, epochs=2, aux_weight=aux))
    path = tmp_path / "m.bin"
    save(m, path)
    back = load(path)
    assert to_bytes(back) == to_bytes(m) == path.read_bytes()
    for a, b in zip(m.arrays(), back.arrays()):
        assert a.tobytes() == b.tobytes()
    assert (back.head_kind, back.bucket_spec, back.feature_spec, back.has_aux) == (head, B4, SMALL, aux > 0)


def test_corrupt_model_files_rejected():
    data = to_bytes(init_model("classification", B4, SMALL))
    for bad in (b"nope" + data, data[:-8], data + b"\0" * 8):
        with pytest.raises(InvalidInput):
            from_bytes(bad)
