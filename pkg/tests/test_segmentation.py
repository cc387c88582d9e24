import pytest
from hypothesis import given
from hypothesis import strategies as st

from editmag.errors import InvalidInput
from editmag.segmentation import enumerate_phrases, phrase_count, tokenize_words


@pytest.mark.parametrize("text, expected", [
    ("The cat sat.", ["the", "cat", "sat"]),
    ("  ", []),
    ("", []),
    ("don't stop\u2014now", ["don't", "stop\u2014now"]),
    ('"Hello," she said!!', ["hello", "she", "said"]),
    ("tabs\tand\nnewlines too", ["tabs", "and", "newlines", "too"]),
    ("... -- !!", []),
])
def test_tokenize_examples(text, expected):
    assert tokenize_words(text) == expected


def test_enumerate_examples():
    words = ["the", "cat", "sat"]
    assert [p.text for p in enumerate_phrases(words, 1, 2)] == ["the", "cat", "sat", "the cat", "cat sat"]
    assert [p.text for p in enumerate_phrases(words, 2, 3)] == ["the cat", "cat sat", "the cat sat"]
    assert [p.text for p in enumerate_phrases(["hi"], 3, 5)] == ["hi"]
    assert enumerate_phrases([], 1, 3) == []


@pytest.mark.parametrize("a, b", [(3, 2), (0, 2), (0, 0)])
def test_enumerate_rejects_bad_bounds(a, b):
    with pytest.raises(InvalidInput):
        enumerate_phrases(["x"], a, b)


words_st = st.lists(st.sampled_from(["a", "b", "c", "d", "e"]), max_size=50)
bounds_st = st.tuples(st.integers(1, 6), st.integers(1, 6)).map(sorted)


@given(words_st, bounds_st)
def test_phrase_count_formula(words, ab):
    a, b = ab
    phrases = enumerate_phrases(words, a, b)
    n = len(words)
    expected = sum(max(0, n - k + 1) for k in range(a, min(b, n) + 1))
    if 1 <= n < a:
        expected = 1
    assert len(phrases) == expected == phrase_count(n, a, b)


@given(words_st, bounds_st)
def test_phrases_are_contiguous_windows(words, ab):
    a, b = ab
    for p in enumerate_phrases(words, a, b):
        n = len(p.words)
        assert list(p.words) == words[p.start_index : p.start_index + n]
        assert p.text == " ".join(p.words)
        if len(words) >= a:
            assert a <= n <= b


@given(words_st, bounds_st)
def test_enumeration_is_stable(words, ab):
    assert enumerate_phrases(words, *ab) == enumerate_phrases(list(words), *ab)
