import base64
import json
import threading

import httpx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from editmag import embedding
from editmag.embedding import (
    API_KEY_ENV,
    DeterministicEmbedder,
    EmbedderConfig,
    EmbeddingCache,
    EmbeddingVector,
    RemoteEmbedder,
    content_digest,
    cosine_similarity,
    embed_batch,
    embed_matrix,
    synonym_groups,
)
from editmag.errors import (
    CacheConflict,
    CacheCorrupt,
    ConfigError,
    InvalidInput,
    ProviderContractViolation,
    ProviderUnavailable,
)


def vec(*xs):
    return EmbeddingVector(np.array(xs, dtype=float))


# --------------------------------------------------------------------------
# vectors and cosine


def test_vector_invariants():
    with pytest.raises(InvalidInput):
        EmbeddingVector(np.array([]))
    with pytest.raises(InvalidInput):
        EmbeddingVector(np.array([1.0, np.nan]))
    v = vec(3.0, 4.0)
    assert v.dim == 2 and v.norm == 5.0
    assert abs(v.normalized().norm - 1.0) <= 1e-9
    with pytest.raises(ValueError):
        v.components[0] = 1.0


def test_cosine_examples():
    assert cosine_similarity(vec(1, 0), vec(0, 1)) == 0.0
    assert abs(cosine_similarity(vec(1, 1), vec(1, 0)) - 0.7071067811865475) <= 1e-12
    u = vec(0.3, -2.0, 5.0)
    assert cosine_similarity(u, u) == 1.0
    with pytest.raises(InvalidInput):
        cosine_similarity(vec(1, 0), vec(1, 0, 0))
    with pytest.raises(InvalidInput):
        cosine_similarity(vec(0, 0), vec(1, 0))


finite = st.floats(-1e3, 1e3, allow_nan=False)


@given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3),
       st.floats(1e-3, 1e3))
def test_cosine_properties(a, b, c):
    u, v = np.array(a), np.array(b)
    if np.linalg.norm(u) < 1e-6 or np.linalg.norm(v) < 1e-6:
        return
    U, V = EmbeddingVector(u), EmbeddingVector(v)
    s = cosine_similarity(U, V)
    assert -1.0 <= s <= 1.0
    assert s == cosine_similarity(V, U)
    assert abs(cosine_similarity(U, EmbeddingVector(c * u)) - 1.0) <= 1e-12


# --------------------------------------------------------------------------
# deterministic provider


def test_embed_batch_examples():
    cfg = EmbedderConfig(dim=8, seed=7)
    (v1,) = embed_batch(["abc"], cfg)
    (v2,) = embed_batch(["abc"], cfg)
    assert v1.dim == 8 and abs(v1.norm - 1.0) < 1e-6
    assert v1 == v2
    a, b = embed_batch(["abc", "abc"], cfg)
    assert a == b
    with pytest.raises(InvalidInput):
        embed_batch([""], cfg)
    with pytest.raises(InvalidInput):
        embed_batch(["ok", "   "], cfg)


def test_embedding_depends_on_seed_model_and_text():
    base = EmbedderConfig(dim=32)
    ref = embed_matrix(["the cat sat"], base)[0]
    for other in (EmbedderConfig(dim=32, seed=1), EmbedderConfig(dim=32, model_id="other")):
        assert not np.array_equal(ref, embed_matrix(["the cat sat"], other)[0])
    assert not np.array_equal(ref, embed_matrix(["the cat sits"], base)[0])


def test_lexical_overlap_drives_similarity():
    cfg = EmbedderConfig(dim=512)
    a, b, c = embed_batch(["red green blue yellow", "red green blue purple", "one two three four"], cfg)
    assert cosine_similarity(a, b) > cosine_similarity(a, c)


def test_synonyms_share_vectors_when_enabled():
    on = DeterministicEmbedder(EmbedderConfig(dim=16, use_synonyms=True))
    off = DeterministicEmbedder(EmbedderConfig(dim=16, use_synonyms=False))
    group = next(g for g in synonym_groups() if len(g) >= 2)
    # synonyms share a word vector; only the small sequence term keeps the surface forms apart
    assert 0.999 < float(on.embed_one(group[0]) @ on.embed_one(group[1])) < 1.0
    assert float(off.embed_one(group[0]) @ off.embed_one(group[1])) < 0.9


def test_synonym_table_shape():
    groups = synonym_groups()
    assert len(groups) >= 20
    flat = [w for g in groups for w in g]
    assert len(flat) == len(set(flat)), "a word may belong to one group only"


def test_config_validation():
    with pytest.raises(ConfigError):
        EmbedderConfig(batch_size=0)
    with pytest.raises(ConfigError):
        EmbedderConfig(provider_kind="remote")
    with pytest.raises(ConfigError):
        EmbedderConfig(provider_kind="magic")
    with pytest.raises(ConfigError):
        EmbedderConfig(seed=-1)


# --------------------------------------------------------------------------
# cache


def test_cache_round_trip_1000_vectors(tmp_path):
    rng = np.random.default_rng(0)
    path = tmp_path / "cache.log"
    cache = EmbeddingCache(path)
    vectors = [EmbeddingVector(rng.standard_normal(16).astype(np.float32).astype(np.float64)) for _ in range(1000)]
    for i, v in enumerate(vectors):
        cache.put("m", content_digest(str(i)), v)
    reopened = EmbeddingCache(path)
    for i, v in enumerate(vectors):
        got = reopened.get("m", content_digest(str(i)))
        assert got == v and got.components.tobytes() == v.components.tobytes()


def test_cache_get_absent_and_conflict(tmp_path):
    cache = EmbeddingCache(tmp_path / "c.log")
    d = content_digest("x")
    assert cache.get("m", d) is None
    cache.put("m", d, vec(1.0, 2.0))
    cache.put("m", d, vec(1.0, 2.0))  # identical re-put is a no-op
    with pytest.raises(CacheConflict):
        cache.put("m", d, vec(1.0, 2.5))
    assert cache.get("other-model", d) is None


def test_cache_rejects_vectors_it_cannot_store_exactly(tmp_path):
    cache = EmbeddingCache(tmp_path / "c.log")
    with pytest.raises(InvalidInput):
        cache.put("m", content_digest("x"), vec(0.1, 0.2))


def test_cache_corrupt_record_raises_then_recomputes(tmp_path):
    path = tmp_path / "c.log"
    cfg = EmbedderConfig(dim=8, cache_path=str(path))
    good = embed_matrix(["hello world"], cfg)[0]
    d = content_digest("hello world")
    lines = path.read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith(d)
    path.write_text(f"{d}\t{cfg.model_id}\t8\tnot-base64!!\n")
    with pytest.raises(CacheCorrupt):
        EmbeddingCache(path).get(cfg.model_id, d)
    embedding._caches.clear()
    again = embed_matrix(["hello world"], cfg)[0]
    assert np.array_equal(good, again)
    # the recomputed record now shadows the corrupt one
    assert EmbeddingCache(path).get(cfg.model_id, d) == EmbeddingVector(good)


def test_cache_survives_restart_and_serves_hits(tmp_path):
    path = tmp_path / "c.log"
    cfg = EmbedderConfig(dim=8, cache_path=str(path))
    first = embed_matrix(["alpha beta", "gamma"], cfg)
    embedding._caches.clear()
    embedding._providers.clear()

    class Exploding:
        def embed(self, texts):
            raise AssertionError("cache should have served these")

    again = embed_matrix(["gamma", "alpha beta"], cfg, provider=Exploding())
    assert np.array_equal(again, first[::-1])


def test_cache_concurrent_writers(tmp_path):
    cache = EmbeddingCache(tmp_path / "c.log")
    rng = np.random.default_rng(1)
    vs = [EmbeddingVector(rng.standard_normal(4).astype(np.float32).astype(np.float64)) for _ in range(200)]

    def worker(k):
        for i in range(k, 200, 4):
            cache.put("m", content_digest(str(i)), vs[i])

    threads = [threading.Thread(target=worker, args=(k,)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    reopened = EmbeddingCache(tmp_path / "c.log")
    assert all(reopened.get("m", content_digest(str(i))) == vs[i] for i in range(200))


# --------------------------------------------------------------------------
# remote provider


def remote_cfg(**kw):
    return EmbedderConfig(provider_kind="remote", endpoint_url="http://embed.test/v1/embeddings", dim=3, **kw)


def fake_vector(text):
    rng = np.random.default_rng(sum(text.encode()))
    return [float(x) for x in rng.standard_normal(3)]


def test_remote_reorders_by_index_and_sends_auth(monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, "sekrit")
    seen = {}

    def handler(request):
        seen["auth"] = request.headers.get("authorization")
        body = json.loads(request.content)
        seen["model"] = body["model"]
        data = [{"index": i, "embedding": fake_vector(t)} for i, t in enumerate(body["input"])]
        return httpx.Response(200, json={"data": data[::-1]})

    prov = RemoteEmbedder(remote_cfg(), transport=httpx.MockTransport(handler))
    out = prov.embed(["one", "two", "three"])
    assert [list(v) for v in out] == [fake_vector(t) for t in ("one", "two", "three")]
    assert seen == {"auth": "Bearer sekrit", "model": "hash-embed-v1"}


def test_remote_retries_then_succeeds():
    calls = []
    sleeps = []

    def handler(request):
        calls.append(1)
        if len(calls) < 3:
            return httpx.Response(503)
        body = json.loads(request.content)
        return httpx.Response(200, json={"data": [{"index": i, "embedding": fake_vector(t)}
                                                  for i, t in enumerate(body["input"])]})

    prov = RemoteEmbedder(remote_cfg(), transport=httpx.MockTransport(handler), sleep=sleeps.append)
    assert len(prov.embed(["x"])) == 1
    assert len(calls) == 3
    assert sleeps == [0.25, 0.5]


def test_remote_gives_up_after_three_retries():
    calls = []

    def handler(request):
        calls.append(1)
        raise httpx.ConnectError("down", request=request)

    prov = RemoteEmbedder(remote_cfg(), transport=httpx.MockTransport(handler), sleep=lambda s: None)
    with pytest.raises(ProviderUnavailable):
        prov.embed(["x"])
    assert len(calls) == 4


@pytest.mark.parametrize("payload", [
    {"data": [{"index": 0, "embedding": [1.0, 2.0]}]},  # wrong dim
    {"data": []},  # missing item
    {"data": [{"index": 5, "embedding": [1.0, 2.0, 3.0]}]},  # bad index
    {"nope": 1},
])
def test_remote_contract_violations(payload):
    prov = RemoteEmbedder(remote_cfg(), transport=httpx.MockTransport(lambda r: httpx.Response(200, json=payload)))
    with pytest.raises(ProviderContractViolation):
        embed_matrix(["x"], remote_cfg(), provider=prov)


def test_remote_batches_preserve_order():
    def handler(request):
        body = json.loads(request.content)
        return httpx.Response(200, json={"data": [{"index": i, "embedding": fake_vector(t)}
                                                  for i, t in enumerate(body["input"])]})

    cfg = remote_cfg(batch_size=2)
    prov = RemoteEmbedder(cfg, transport=httpx.MockTransport(handler))
    texts = [f"text {i}" for i in range(9)] + ["text 0"]
    out = embed_matrix(texts, cfg, provider=prov)
    expected = np.array([fake_vector(t) for t in texts], dtype=np.float32).astype(np.float64)
    assert np.array_equal(out, expected)


def test_cache_file_format(tmp_path):
    path = tmp_path / "c.log"
    cfg = EmbedderConfig(dim=4, cache_path=str(path))
    v = embed_matrix(["some words"], cfg)[0]
    digest, model_id, dim, payload = path.read_text().strip().split("\t")
    assert digest == content_digest("some words") and model_id == cfg.model_id and dim == "4"
    assert np.array_equal(np.frombuffer(base64.b64decode(payload), dtype="<f4").astype(np.float64), v)
