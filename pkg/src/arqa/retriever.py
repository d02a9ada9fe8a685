"""Flat and two-stage document retrieval over TF-IDF indexes."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .analysis import AnalyzerConfig, surface_tokens
from .corpus import Corpus
from .embeddings import WordVectors
from .tfidf import (
    RetrievalHit,
    TfidfIndex,
    build_index,
    build_index_from_token_hashes,
    rank_rows,
    score_all,
    token_hashes,
    top_k,
    vectorize_query,
)

SUBSELECT_BINS = 1 << 20


@dataclass(frozen=True)
class HierarchicalConfig:
    stage1_ngrams: tuple[int, int] = (1, 2)
    k1: int = 1000
    stage2_ngrams: tuple[int, int] = (1, 4)
    k2: int = 15

    def __post_init__(self):
        for lo, hi in (self.stage1_ngrams, self.stage2_ngrams):
            if not 1 <= lo <= hi <= 4:
                raise ValueError(f"invalid ngram range ({lo}, {hi})")
        if not 1 <= self.k2 <= self.k1:
            raise ValueError(f"need 1 <= k2 <= k1, got k1={self.k1}, k2={self.k2}")


@dataclass(frozen=True)
class ParagraphHit:
    article_id: str
    paragraph_index: int
    text: str
    doc_score: float


class TokenCache:
    """Memoized token hashes per document, for one analyzer and hash seed.

    Analysis does not depend on the n-gram range, so the same cache serves
    every per-question stage-2 build.
    """

    def __init__(self, corpus: Corpus, analyzer: AnalyzerConfig, seed: int, max_docs: int | None = None):
        self.corpus = corpus
        self.analyzer = analyzer.with_ngrams((1, 1))
        self.seed = seed
        self.max_docs = max_docs
        self._store: dict[str, np.ndarray] = {}

    def get(self, doc_id: str) -> np.ndarray:
        th = self._store.get(doc_id)
        if th is None:
            th = token_hashes(self.corpus.doc_text(doc_id), self.analyzer, self.seed)
            if self.max_docs is None or len(self._store) < self.max_docs:
                self._store[doc_id] = th
        return th


def retrieve_flat(index: TfidfIndex, question: str, k: int) -> list[RetrievalHit]:
    return top_k(index, vectorize_query(question, index), k)


def stage_one(index: TfidfIndex, question: str, k1: int) -> list[RetrievalHit]:
    """The candidate set D' of the hierarchical retriever."""
    return retrieve_flat(index, question, k1)


def retrieve_hierarchical(
    stage1_index: TfidfIndex,
    corpus: Corpus,
    question: str,
    cfg: HierarchicalConfig | None = None,
    *,
    cache: TokenCache | None = None,
) -> list[RetrievalHit]:
    """Coarse retrieval of k1 documents, then a fresh finer-grained index over them.

    The stage-2 index is built per question.  When fewer than k1 documents
    score above zero at stage 1, zero-scoring documents (lowest rows first) are
    added to the stage-2 index as background for its idf statistics; they are
    never returned.
    """
    cfg = cfg or HierarchicalConfig()
    if stage1_index.ngram_range != tuple(cfg.stage1_ngrams):
        warnings.warn(
            f"stage-1 index uses n-grams {stage1_index.ngram_range}, config says {cfg.stage1_ngrams}",
            stacklevel=2,
        )
    q1 = vectorize_query(question, stage1_index)
    if len(q1) == 0:
        return []
    scores = score_all(stage1_index, q1)
    hit_rows = rank_rows(scores, cfg.k1)
    if hit_rows.size == 0:
        return []
    rows = hit_rows
    if hit_rows.size < cfg.k1:
        background = np.flatnonzero(scores <= 0)[: cfg.k1 - hit_rows.size]
        rows = np.concatenate([hit_rows, background])
    rows = np.sort(rows)
    eligible = np.isin(rows, hit_rows)

    doc_ids = [stage1_index.doc_ids[r] for r in rows]
    stage2_cfg = stage1_index.analyzer.with_ngrams(cfg.stage2_ngrams)
    if cache is not None:
        hashes = [cache.get(d) for d in doc_ids]
    else:
        hashes = [token_hashes(corpus.doc_text(d), stage2_cfg, stage1_index.hash_seed) for d in doc_ids]
    stage2 = build_index_from_token_hashes(
        doc_ids, hashes, stage2_cfg, stage1_index.hash_bins,
        unit=stage1_index.unit, seed=stage1_index.hash_seed, warn_empty=False,
    )
    q2 = vectorize_query(question, stage2)
    if len(q2) == 0:
        return []
    s2 = np.where(eligible, score_all(stage2, q2), 0.0)
    return [RetrievalHit(stage2.doc_ids[r], float(s2[r])) for r in rank_rows(s2, cfg.k2)]


def expand_to_paragraphs(hits: Sequence[RetrievalHit], corpus: Corpus) -> list[ParagraphHit]:
    out: list[ParagraphHit] = []
    for hit in hits:
        if hit.doc_id in corpus:
            for p in corpus.article(hit.doc_id).paragraphs:
                out.append(ParagraphHit(p.article_id, p.index, p.text, hit.score))
            continue
        para = corpus.resolve_paragraph(hit.doc_id)
        if para is None:
            raise KeyError(f"retrieved id {hit.doc_id!r} not found in corpus")
        out.append(ParagraphHit(para.article_id, para.index, para.text, hit.score))
    return out


def merge_external(
    primary_hits: Sequence[RetrievalHit],
    external_ids: Sequence[str],
    total_budget: int,
    corpus: Corpus | None = None,
) -> list[RetrievalHit]:
    """Fill a fixed retrieval budget: primary hits first, then unseen external ids.

    External documents get the lowest primary score (0 without primary hits).
    """
    if total_budget < 1:
        raise ValueError("total_budget must be >= 1")
    out: list[RetrievalHit] = []
    seen: set[str] = set()
    for hit in primary_hits:
        if hit.doc_id not in seen and len(out) < total_budget:
            seen.add(hit.doc_id)
            out.append(hit)
    floor = min((h.score for h in out), default=0.0)
    for doc_id in external_ids:
        if len(out) >= total_budget:
            break
        if doc_id in seen:
            continue
        if corpus is not None and not corpus.has_doc(doc_id):
            warnings.warn(f"external document {doc_id!r} not in corpus; skipped", stacklevel=2)
            continue
        seen.add(doc_id)
        out.append(RetrievalHit(doc_id, floor))
    return out


def subselect_paragraphs(
    paragraph_hits: Sequence[ParagraphHit],
    question: str,
    k: int,
    analyzer: AnalyzerConfig | None = None,
    hash_bins: int = SUBSELECT_BINS,
    ngram_range: tuple[int, int] = (1, 4),
) -> list[ParagraphHit]:
    """Keep the k paragraphs closest to the question; doc_score becomes that cosine."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not paragraph_hits:
        return []
    cfg = (analyzer or AnalyzerConfig()).with_ngrams(ngram_range)
    docs = [(str(i), p.text) for i, p in enumerate(paragraph_hits)]
    index = build_index(docs, cfg, hash_bins, unit="paragraph", warn_empty=False)
    hits = top_k(index, vectorize_query(question, index), k)
    return [replace(paragraph_hits[int(h.doc_id)], doc_score=h.score) for h in hits]


class EmbeddingRetriever:
    """Paragraph retriever scoring by cosine of summed word vectors."""

    def __init__(self, corpus: Corpus, vectors: WordVectors, analyzer: AnalyzerConfig | None = None):
        self.vectors = vectors
        self.analyzer = analyzer or AnalyzerConfig()
        self.doc_ids: list[str] = []
        rows = []
        for doc_id, text in corpus.documents("paragraph"):
            self.doc_ids.append(doc_id)
            rows.append(self._embed(text))
        mat = np.array(rows).reshape(len(rows), vectors.dim)
        norms = np.linalg.norm(mat, axis=1)
        self.matrix = np.divide(mat, norms[:, None], out=np.zeros_like(mat), where=norms[:, None] > 0)

    def _embed(self, text: str) -> np.ndarray:
        return self.vectors.sum_vector(t.stem for t in surface_tokens(text, self.analyzer))

    def retrieve(self, question: str, k: int) -> list[RetrievalHit]:
        q = self._embed(question)
        norm = np.linalg.norm(q)
        if norm == 0 or not self.doc_ids:
            return []
        scores = np.clip(self.matrix @ (q / norm), 0.0, 1.0)
        return [RetrievalHit(self.doc_ids[r], float(scores[r])) for r in rank_rows(scores, k)]
