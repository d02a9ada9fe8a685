import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arqa.analysis import AnalyzerConfig
from arqa.tfidf import (
    BadMagicError,
    ChecksumError,
    TruncatedIndexError,
    VersionMismatchError,
    build_index,
    load_index,
    ngram_bin,
    ngram_bins,
    save_index,
    token_hashes,
    top_k,
    vectorize_query,
)

from oracles import dense_tfidf_scores, dense_top_k, random_latin_corpus, word_ngrams

BINS = 1 << 20
UNI = AnalyzerConfig(ngram_range=(1, 1))
BI = AnalyzerConfig(ngram_range=(1, 2))


def index_of(docs, cfg=BI, bins=BINS):
    return build_index([(f"d{i}", d) for i, d in enumerate(docs)], cfg, bins, unit="paragraph")


def test_two_unigram_docs_have_equal_weights():
    idx = build_index([("d1", "a b"), ("d2", "c d")], UNI, BINS)
    row = idx.row(0)
    assert np.allclose(row.weights, [1 / math.sqrt(2)] * 2, atol=1e-12)


def test_single_document_row_is_unit():
    idx = build_index([("d", "x y z y")], BI, BINS)
    assert np.linalg.norm(idx.row(0).weights) == pytest.approx(1.0, abs=1e-12)


def test_identical_docs_identical_rows():
    idx = index_of(["p q r", "p q r", "s"])
    a, b = idx.row(0), idx.row(1)
    assert np.array_equal(a.bins, b.bins) and np.array_equal(a.weights, b.weights)


def test_query_equal_to_doc_scores_one():
    idx = index_of(["alpha beta gamma", "beta delta"])
    hits = top_k(idx, vectorize_query("alpha beta gamma", idx), 2)
    assert hits[0].doc_id == "d0"
    assert hits[0].score == pytest.approx(1.0, abs=1e-9)


def test_oov_query_is_empty():
    idx = index_of(["alpha beta"])
    assert len(vectorize_query("omega psi", idx)) == 0
    assert top_k(idx, vectorize_query("omega psi", idx), 5) == []


def test_query_with_two_known_terms():
    idx = build_index([("d", "alpha beta")], UNI, BINS)
    assert len(vectorize_query("alpha beta zeta", idx)) == 2


def test_k_larger_than_corpus_returns_positive_docs():
    idx = index_of(["a b", "c d", "a c"])
    hits = top_k(idx, vectorize_query("a", idx), 50)
    assert {h.doc_id for h in hits} == {"d0", "d2"}


def test_toy_ranking_matches_dense_oracle():
    docs = ["red apple pie", "green apple", "red car"]
    idx = index_of(docs)
    expected = dense_tfidf_scores(docs, "red apple", 1, 2)
    hits = top_k(idx, vectorize_query("red apple", idx), 3)
    assert [h.doc_id for h in hits] == [f"d{i}" for i in dense_top_k(expected, 3)]
    for h in hits:
        assert h.score == pytest.approx(expected[int(h.doc_id[1:])], abs=1e-9)


def test_duplicate_docs_tie_by_row():
    idx = index_of(["x y", "z", "x y"])
    hits = top_k(idx, vectorize_query("x", idx), 3)
    assert [h.doc_id for h in hits] == ["d0", "d2"]
    assert hits[0].score == hits[1].score


def test_scalar_and_vector_ngram_bins_agree():
    text = "one two three four five"
    th = token_hashes(text, AnalyzerConfig(ngram_range=(1, 4)))
    got = sorted(ngram_bins(th, (1, 4), BINS).tolist())
    want = sorted(ngram_bin(g, BINS) for g in word_ngrams(text.split(), 1, 4))
    assert got == want


def test_hash_bins_validated():
    with pytest.raises(ValueError):
        build_index([("d", "x")], BI, 1000)
    with pytest.raises(ValueError):
        build_index([("d", "x")], BI, 1 << 8)


def test_empty_document_warns_and_never_matches():
    with pytest.warns(UserWarning, match="no features"):
        idx = build_index([("d0", "x"), ("d1", "...")], BI, BINS)
    assert [h.doc_id for h in top_k(idx, vectorize_query("x", idx), 5)] == ["d0"]


def test_parallel_build_is_identical():
    rng = random.Random(3)
    _, docs = random_latin_corpus(rng, 40, 30)
    a = index_of(docs)
    b = build_index([(f"d{i}", d) for i, d in enumerate(docs)], BI, BINS, unit="paragraph", workers=2)
    assert np.array_equal(a.indptr, b.indptr)
    assert np.array_equal(a.indices, b.indices)
    assert np.array_equal(a.data, b.data)
    assert np.array_equal(a.idf, b.idf)


# -- structure invariants ----------------------------------------------------

latin_docs = st.lists(
    st.lists(st.sampled_from([f"w{i}" for i in range(30)]), min_size=1, max_size=15).map(" ".join),
    min_size=1, max_size=20,
)


@settings(max_examples=60, deadline=None)
@given(latin_docs, st.sampled_from([1 << 10, 1 << 16]))
def test_rows_unit_sorted_and_scores_in_range(docs, bins):
    idx = index_of(docs, bins=bins)
    assert len(idx.doc_ids) == idx.n_docs
    for i in range(idx.n_docs):
        row = idx.row(i)
        assert np.all(np.diff(row.bins) > 0)
        assert np.all(row.weights != 0)
        if len(row):
            assert np.linalg.norm(row.weights) == pytest.approx(1.0, abs=1e-9)
    q = vectorize_query(docs[0], idx)
    assert np.all(np.diff(q.bins) > 0)
    hits = top_k(idx, q, idx.n_docs)
    assert all(0.0 < h.score <= 1.0 for h in hits)
    assert [h.score for h in hits] == sorted((h.score for h in hits), reverse=True)


@settings(max_examples=30, deadline=None)
@given(latin_docs, st.integers(1, 10))
def test_top_k_prefix_monotone(docs, k):
    idx = index_of(docs, bins=1 << 10)  # collisions allowed; structure must hold
    q = vectorize_query(docs[-1], idx)
    small, large = top_k(idx, q, k), top_k(idx, q, k + 5)
    assert large[: len(small)] == small


# -- persistence ---------------------------------------------------------------

@pytest.fixture
def saved(tmp_path):
    rng = random.Random(11)
    _, docs = random_latin_corpus(rng, 30, 25)
    idx = index_of(docs)
    path = tmp_path / "i.sqtf"
    save_index(idx, path)
    return idx, path


def test_round_trip_identical(saved):
    idx, path = saved
    back = load_index(path)
    assert back.doc_ids == idx.doc_ids and back.analyzer == idx.analyzer
    for arr in ("idf", "indptr", "indices", "data"):
        assert np.array_equal(getattr(back, arr), getattr(idx, arr))


def test_truncated_file(saved):
    _, path = saved
    blob = path.read_bytes()
    for cut in (3, 20, len(blob) // 2, len(blob) - 1):
        path.write_bytes(blob[:cut])
        with pytest.raises(TruncatedIndexError):
            load_index(path)


def test_bad_magic(saved):
    _, path = saved
    blob = path.read_bytes()
    path.write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(BadMagicError):
        load_index(path)


def test_version_mismatch(saved):
    _, path = saved
    blob = bytearray(path.read_bytes())
    blob[4] = 99
    path.write_bytes(bytes(blob))
    with pytest.raises(VersionMismatchError):
        load_index(path)


def test_flipped_body_byte(saved):
    _, path = saved
    blob = bytearray(path.read_bytes())
    blob[len(blob) // 2] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(ChecksumError):
        load_index(path)


def test_analyzer_hash_mismatch_warns(saved):
    _, path = saved
    with pytest.warns(UserWarning, match="analyzer"):
        load_index(path, expected_analyzer_hash=AnalyzerConfig(ngram_range=(1, 4)).digest())


def test_serialization_is_byte_identical(tmp_path):
    rng = random.Random(12)
    _, docs = random_latin_corpus(rng, 40, 20)
    a, b = tmp_path / "a.sqtf", tmp_path / "b.sqtf"
    save_index(index_of(docs), a)
    save_index(index_of(docs), b)
    assert a.read_bytes() == b.read_bytes()


def test_collision_heavy_index_keeps_structure():
    # about 4,000 distinct n-grams folded into 1,024 bins
    rng = random.Random(13)
    _, docs = random_latin_corpus(rng, 200, 1000, max_len=20)
    idx = index_of(docs, bins=1 << 10)
    for q in docs[:30]:
        vec = vectorize_query(q, idx)
        prev = []
        for k in (1, 3, 10, 50):
            hits = top_k(idx, vec, k)
            assert hits[: len(prev)] == prev
            assert all(0.0 < h.score <= 1.0 for h in hits)
            prev = hits
