"""Non-neural span readers.

Each reader takes a question and a list of paragraph hits and returns at most
one candidate per paragraph (its best span).  Scores are raw and comparable
across paragraphs of the same question.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from typing import Sequence

import numpy as np

from ..analysis import AnalyzerConfig, analyze, analyze_terms, surface_tokens
from ..embeddings import WordVectors
from ..retriever import ParagraphHit
from ..tfidf import build_index, score_all, vectorize_query
from .candidates import AnswerCandidate, gen_candidates, make_candidate

READER_NGRAMS = (1, 4)
READER_BINS = 1 << 20


def random_reader(
    question: str,
    paragraphs: Sequence[ParagraphHit],
    rng: random.Random,
    cfg: AnalyzerConfig | None = None,
) -> list[AnswerCandidate]:
    out = []
    for para in paragraphs:
        cands = gen_candidates(para.text, cfg)
        if not cands:
            continue
        span = cands[rng.randrange(len(cands))]
        score = rng.random()
        while score == 0.0:
            score = rng.random()
        out.append(make_candidate(para, span, score))
    return out


def window_score(ic: np.ndarray, member: np.ndarray, width: int) -> float:
    """Best sum of ic over positions in `member`, across windows of `width` tokens."""
    n = ic.size
    if n == 0 or width < 1:
        return 0.0
    w = np.where(member, ic, 0.0)
    if width >= n:
        return float(w.sum())
    csum = np.concatenate([[0.0], np.cumsum(w)])
    return float((csum[width:] - csum[:-width]).max())


def min_distance(q_pos: np.ndarray, a_pos: np.ndarray, n: int) -> float:
    """Normalized minimum token distance between question and answer occurrences."""
    if n < 2:
        return 0.0
    if q_pos.size == 0 or a_pos.size == 0:
        return 1.0
    idx = np.searchsorted(q_pos, a_pos)
    left = q_pos[np.clip(idx - 1, 0, q_pos.size - 1)]
    right = q_pos[np.clip(idx, 0, q_pos.size - 1)]
    d = np.minimum(np.abs(a_pos - left), np.abs(right - a_pos))
    return float(d.min()) / (n - 1)


def sliding_window_scores(
    question: str, paragraph_text: str, spans: Sequence[tuple[int, int]], cfg: AnalyzerConfig | None = None
) -> list[float]:
    """Sliding-window overlap minus normalized distance, for each candidate span."""
    ptoks = analyze(paragraph_text, cfg)
    stems = [t.stem for t in ptoks]
    n = len(stems)
    vocab: dict[str, int] = {}
    pid = np.array([vocab.setdefault(s, len(vocab)) for s in stems], dtype=np.int64)
    counts = Counter(stems)
    ic = np.array([math.log(1.0 + 1.0 / counts[s]) for s in stems])

    q_stems = set(analyze_terms(question, cfg))
    q_ids = [vocab[s] for s in q_stems if s in vocab]
    q_member = np.isin(pid, q_ids) if q_ids else np.zeros(n, dtype=bool)
    q_pos = np.flatnonzero(q_member)
    starts = np.array([t.char_start for t in ptoks], dtype=np.int64)

    scores = []
    for cs, ce in spans:
        lo, hi = np.searchsorted(starts, cs), np.searchsorted(starts, ce)
        a_stems = set(stems[lo:hi])
        a_member = np.isin(pid, [vocab[s] for s in a_stems]) if a_stems else np.zeros(n, dtype=bool)
        sw = window_score(ic, q_member | a_member, len(a_stems | q_stems))
        dist = min_distance(q_pos, np.flatnonzero(a_member), n)
        scores.append(sw - dist)
    return scores


def sliding_window_reader(
    question: str, paragraphs: Sequence[ParagraphHit], cfg: AnalyzerConfig | None = None
) -> list[AnswerCandidate]:
    out = []
    for para in paragraphs:
        spans = gen_candidates(para.text, cfg)
        if not spans:
            continue
        scores = sliding_window_scores(question, para.text, spans, cfg)
        best = int(np.argmax(scores))
        out.append(make_candidate(para, spans[best], scores[best]))
    return out


def tfidf_span_scores(
    question: str,
    paragraph_text: str,
    spans: Sequence[tuple[int, int]],
    cfg: AnalyzerConfig | None = None,
    hash_bins: int = READER_BINS,
) -> np.ndarray:
    """Cosine of each candidate span to the question in a TF-IDF space over the spans."""
    cfg = (cfg or AnalyzerConfig()).with_ngrams(READER_NGRAMS)
    docs = [(str(i), paragraph_text[s:e]) for i, (s, e) in enumerate(spans)]
    index = build_index(docs, cfg, hash_bins, unit="paragraph", warn_empty=False)
    return score_all(index, vectorize_query(question, index))


def tfidf_reader(
    question: str,
    paragraphs: Sequence[ParagraphHit],
    cfg: AnalyzerConfig | None = None,
    hash_bins: int = READER_BINS,
) -> list[AnswerCandidate]:
    out = []
    for para in paragraphs:
        spans = gen_candidates(para.text, cfg)
        if not spans:
            continue
        scores = tfidf_span_scores(question, para.text, spans, cfg, hash_bins)
        best = int(np.argmax(scores))
        out.append(make_candidate(para, spans[best], scores[best]))
    return out


def embedding_span_scores(
    question: str,
    paragraph_text: str,
    spans: Sequence[tuple[int, int]],
    vectors: WordVectors,
    cfg: AnalyzerConfig | None = None,
) -> np.ndarray:
    q = vectors.sum_vector(t.stem for t in surface_tokens(question, cfg))
    q_norm = float(np.linalg.norm(q))
    toks = surface_tokens(paragraph_text, cfg)
    if q_norm == 0.0 or not toks:
        return np.zeros(len(spans))
    tv = np.array([vectors.sum_vector([t.stem]) for t in toks])
    csum = np.vstack([np.zeros(vectors.dim), np.cumsum(tv, axis=0)])
    starts = np.array([t.char_start for t in toks], dtype=np.int64)
    span_arr = np.asarray(spans, dtype=np.int64).reshape(-1, 2)
    lo = np.searchsorted(starts, span_arr[:, 0])
    hi = np.searchsorted(starts, span_arr[:, 1])
    sums = csum[hi] - csum[lo]
    norms = np.linalg.norm(sums, axis=1)
    dots = sums @ q
    scores = np.divide(dots, norms * q_norm, out=np.zeros(len(spans)), where=norms > 0)
    return np.clip(scores, 0.0, 1.0)


def embedding_reader(
    question: str,
    paragraphs: Sequence[ParagraphHit],
    vectors: WordVectors,
    cfg: AnalyzerConfig | None = None,
) -> list[AnswerCandidate]:
    out = []
    for para in paragraphs:
        spans = gen_candidates(para.text, cfg)
        if not spans:
            continue
        scores = embedding_span_scores(question, para.text, spans, vectors, cfg)
        best = int(np.argmax(scores))
        out.append(make_candidate(para, spans[best], scores[best]))
    return out
