import math
import random
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arqa.embeddings import WordVectors
from arqa.readers import (
    ExternalReader,
    ReaderExitedError,
    ReaderProtocolError,
    ReaderSpec,
    ReaderTimeoutError,
    embedding_reader,
    gen_candidates,
    random_reader,
    sliding_window_reader,
    tfidf_reader,
)
from arqa.readers.baselines import sliding_window_scores
from arqa.retriever import ParagraphHit

ECHO = str(Path(__file__).parent / "fixtures" / "echo_reader.py")


def para(text, aid="a", idx=0, score=0.5):
    return ParagraphHit(aid, idx, text, score)


def test_candidate_counts():
    assert len(gen_candidates("aa bb cc")) == 6
    twelve = " ".join(f"t{i}" for i in range(12))
    assert len(gen_candidates(twelve)) == sum(12 - l + 1 for l in range(1, 11)) == 75
    assert gen_candidates("") == []


def test_candidates_stay_inside_sentences():
    text = "aa bb. cc dd"
    spans = gen_candidates(text)
    assert len(spans) == 6
    assert all("." not in text[s:e] for s, e in spans)


@given(st.text(alphabet="ابتس .؟\n", max_size=50))
def test_candidates_are_slices(text):
    for s, e in gen_candidates(text):
        assert 0 <= s < e <= len(text)
        assert text[s:e].strip() == text[s:e]


def test_random_reader_reproducible():
    paras = [para("one two three four five"), para("six seven", "b")]
    a = random_reader("q", paras, random.Random(4))
    b = random_reader("q", paras, random.Random(4))
    assert a == b and len(a) == 2
    assert random_reader("q", [para("...")], random.Random(0)) == []
    read = ReaderSpec("random", seed=7).build()
    assert read("q", paras, "id1") == read("q", paras, "id1")


def test_sliding_window_hand_example():
    # passage [q1 x a1], question [q1], candidate [a1]
    score = sliding_window_scores("qq", "qq xx aa", [(6, 8)])[0]
    assert score == pytest.approx(math.log(2) - 1.0)


def test_sliding_window_colocated_and_disjoint():
    text = "qq rr"
    # candidate == whole passage == question: dist 0
    sw = sliding_window_scores("qq rr", text, [(0, 5)])[0]
    assert sw == pytest.approx(2 * math.log(2))
    # no shared token: every candidate has dist 1
    scores = sliding_window_scores("zz", text, gen_candidates(text))
    ic = math.log(2)
    assert scores == pytest.approx([ic - 1, 2 * ic - 1, ic - 1])


def test_sliding_window_reader_one_per_paragraph():
    out = sliding_window_reader("where is qq", [para("qq xx aa"), para("bb", "b")])
    assert len(out) == 2
    assert all(c.text == "qq xx aa"[c.char_start:c.char_end] or c.article_id == "b" for c in out)


def test_tfidf_reader_exact_and_zero():
    text = "alpha beta gamma. delta epsilon"
    best = tfidf_reader("alpha beta gamma", [para(text)])[0]
    assert best.text == "alpha beta gamma"
    assert best.ans_raw == pytest.approx(1.0)
    none = tfidf_reader("zeta", [para(text)])[0]
    assert (none.char_start, none.ans_raw) == (0, 0.0)


def test_tfidf_reader_picks_four_gram_span():
    text = "w1 w2 w3 w4 w5 w6 w7 w8 w9 w10 w11 w12"
    best = tfidf_reader("w5 w6 w7 w8", [para(text)])[0]
    assert best.text == "w5 w6 w7 w8"


def test_doc_score_inherited():
    out = tfidf_reader("alpha", [para("alpha beta", score=0.37)])
    assert out[0].doc_score == 0.37


def vectors():
    return WordVectors({"x": 0, "y": 1, "z": 2}, np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))


def test_embedding_reader_hand_cosines():
    from arqa.readers.baselines import embedding_span_scores

    text = "x y z"
    spans = [(0, 1), (2, 3), (4, 5)]
    got = embedding_span_scores("x", text, spans, vectors())
    assert got == pytest.approx([1.0, 0.0, 1 / math.sqrt(2)])
    best = embedding_reader("x", [para(text)], vectors())[0]
    assert best.text == "x"


def test_embedding_reader_oov():
    best = embedding_reader("q", [para("a b c")], vectors())[0]
    assert (best.char_start, best.ans_raw) == (0, 0.0)
    same = embedding_reader("x y", [para("x y")], vectors())[0]
    assert same.ans_raw == pytest.approx(1.0)


# -- external reader -----------------------------------------------------------

def external(mode, timeout=10.0):
    return ExternalReader([sys.executable, ECHO, mode], timeout=timeout)


def test_external_ok():
    with external("ok") as reader:
        out = reader("q", [para("abcdefgh ijk")], "q1")
        again = reader("q", [para("abcdefgh ijk")], "q2")
    assert len(out) == 1 and out[0].ans_raw == 1.0
    assert (out[0].char_start, out[0].char_end, out[0].text) == (0, 5, "abcde")
    assert again == out


def test_external_out_of_bounds_dropped():
    with external("oob") as reader, pytest.warns(UserWarning, match="bounds"):
        assert reader("q", [para("abc")], "q1") == []


def test_external_timeout_carries_qid():
    with external("sleep", timeout=0.5) as reader:
        with pytest.raises(ReaderTimeoutError, match="q-42"):
            reader("q", [para("abc")], "q-42")


def test_external_exit_and_garbage():
    with external("exit") as reader, pytest.raises(ReaderExitedError):
        reader("q", [para("abc")], "q1")
    with external("garbage") as reader, pytest.raises(ReaderProtocolError):
        reader("q", [para("abc")], "q1")


def test_reference_server_round_trip():
    cmd = [sys.executable, "-m", "arqa.readers.server", "--reader", "tfidf"]
    text = "alpha beta gamma. delta"
    with ExternalReader(cmd, timeout=30) as reader:
        out = reader("alpha beta gamma", [para(text)], "q1")
    assert out[0].text == "alpha beta gamma"


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(["aa", "bb", "cc", "dd", "ee"]), min_size=1, max_size=14),
       st.lists(st.sampled_from(["aa", "bb", "zz"]), min_size=1, max_size=4))
def test_sliding_window_distance_bounds(passage, question):
    from arqa.readers.baselines import min_distance, sliding_window_scores

    text = " ".join(passage)
    spans = gen_candidates(text)
    scores = sliding_window_scores(" ".join(question), text, spans)
    assert len(scores) == len(spans)
    # the distance term is in [0, 1] so every score lies in [sw - 1, sw]
    assert all(math.isfinite(s) and s >= -1.0 for s in scores)
    n = len(passage)
    assert 0.0 <= min_distance(np.array([0]), np.array([n - 1]), n) <= 1.0


@settings(max_examples=40, deadline=None)
@given(st.text(alphabet="ابتسلمن .؟", min_size=1, max_size=60), st.text(alphabet="ابتسلمن ", max_size=15))
def test_readers_emit_paragraph_slices(text, question):
    paras = [para(text)]
    for cands in (tfidf_reader(question, paras), sliding_window_reader(question, paras),
                  random_reader(question, paras, random.Random(0))):
        for c in cands:
            assert 0 <= c.char_start < c.char_end <= len(text)
            assert c.text == text[c.char_start:c.char_end]
