import numpy as np
import pytest

from chunklab.cache import (content_key, load_contexts, load_vectors, save_contexts,
                            save_vectors)
from chunklab.errors import ParseError


def test_vector_cache_round_trip(tmp_path):
    entries = {
        "d1#0": np.array([0.25, -0.5, 1.0], dtype=np.float64),
        "d1#1": np.array([0.0, 0.0, 0.0], dtype=np.float64),  # zero sentinel survives
        "q7": np.array([1.5, 2.5, -3.5], dtype=np.float64),
    }
    path = tmp_path / "vectors.vec"
    save_vectors(path, entries)
    loaded = load_vectors(path)
    assert set(loaded) == set(entries)
    for key, vector in entries.items():
        assert loaded[key].dtype == np.float64
        assert np.array_equal(loaded[key], vector)  # values chosen float32-exact


def test_vector_cache_float32_at_rest(tmp_path):
    # a non-float32-representable value is rounded by the cache, by design
    path = tmp_path / "vectors.vec"
    save_vectors(path, {"x": np.array([1.0 / 3.0])})
    loaded = load_vectors(path)["x"]
    assert loaded[0] == np.float64(np.float32(1.0 / 3.0))


def test_vector_cache_empty(tmp_path):
    path = tmp_path / "empty.vec"
    save_vectors(path, {})
    assert load_vectors(path) == {}


def test_vector_cache_bad_magic(tmp_path):
    path = tmp_path / "junk.vec"
    path.write_bytes(b"WHAT" + b"\x00" * 16)
    with pytest.raises(ParseError, match="magic"):
        load_vectors(path)


def test_context_cache_round_trip(tmp_path):
    contexts = {"d1#0": "Document: A. First sentence.", "d2#3": "unicode café"}
    path = tmp_path / "ctx.jsonl"
    save_contexts(path, contexts)
    assert load_contexts(path) == contexts


def test_content_key_order_sensitivity():
    assert content_key("a", "b") != content_key("b", "a")
    assert content_key("ab") != content_key("a", "b")
    assert content_key("x") == content_key("x")
