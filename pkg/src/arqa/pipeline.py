"""End-to-end question answering and evaluation drivers."""

from __future__ import annotations

import json
import logging
import queue
import warnings
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Mapping, Sequence

from .corpus import Corpus, load_corpus
from .embeddings import WordVectors, load_vectors
from .fusion import FusedAnswer, FusionConfig, fuse, top_answers, write_predictions
from .metrics import EvalReport, QaExample, evaluate, retriever_recall
from .readers import AnswerCandidate, ReaderSpec
from .retriever import (
    EmbeddingRetriever,
    HierarchicalConfig,
    ParagraphHit,
    TokenCache,
    expand_to_paragraphs,
    merge_external,
    retrieve_flat,
    retrieve_hierarchical,
    subselect_paragraphs,
)
from .tfidf import RetrievalHit, TfidfIndex, load_index

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    index_path: str
    corpus_path: str
    hierarchical: HierarchicalConfig = field(default_factory=HierarchicalConfig)
    reader: ReaderSpec = field(default_factory=ReaderSpec)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    external_path: str | None = None
    budget: int = 10
    subselect_k: int | None = None
    workers: int = 1

    def __post_init__(self):
        for p in (self.index_path, self.corpus_path, self.external_path, self.reader.vectors_path):
            if p is not None and not Path(p).exists():
                raise FileNotFoundError(p)
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.subselect_k is not None and self.subselect_k < 1:
            raise ValueError("subselect_k must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def load_external(path: str | Path) -> dict[str, list[str]]:
    """External retrieval results: JSONL lines of {"qid": ..., "doc_ids": [...]}."""
    out: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out[str(rec["qid"])] = [str(d) for d in rec["doc_ids"]]
            except (json.JSONDecodeError, KeyError, TypeError):
                raise ValueError(f"{path}:{lineno}: expected {{\"qid\": ..., \"doc_ids\": [...]}}") from None
    return out


class Pipeline:
    """Question -> retrieval -> paragraphs -> reader -> fused, ranked answers."""

    def __init__(
        self,
        index: TfidfIndex,
        corpus: Corpus,
        *,
        hierarchical: HierarchicalConfig | None = None,
        reader: ReaderSpec | None = None,
        fusion: FusionConfig | None = None,
        external: Mapping[str, Sequence[str]] | None = None,
        budget: int = 10,
        subselect_k: int | None = None,
        workers: int = 1,
        vectors: WordVectors | None = None,
    ):
        self.index = index
        self.corpus = corpus
        self.hierarchical = hierarchical or HierarchicalConfig(stage1_ngrams=index.ngram_range)
        self.reader_spec = reader or ReaderSpec(analyzer=index.analyzer)
        self.fusion = fusion or FusionConfig()
        self.external = dict(external or {})
        self.budget = budget
        self.subselect_k = subselect_k
        self.workers = workers
        if self.reader_spec.name == "embedding" and vectors is None:
            vectors = load_vectors(self.reader_spec.vectors_path)
        self.vectors = vectors
        self.cache = TokenCache(corpus, index.analyzer, index.hash_seed)
        self._channels: queue.Queue = queue.Queue()
        self._shared_reader = None if self.reader_spec.needs_channel else self.reader_spec.build(vectors)

    @classmethod
    def from_config(cls, cfg: PipelineConfig) -> "Pipeline":
        index = load_index(cfg.index_path)
        corpus = load_corpus(cfg.corpus_path)
        external = load_external(cfg.external_path) if cfg.external_path else None
        return cls(
            index, corpus,
            hierarchical=cfg.hierarchical, reader=cfg.reader, fusion=cfg.fusion,
            external=external, budget=cfg.budget, subselect_k=cfg.subselect_k, workers=cfg.workers,
        )

    # -- stages -------------------------------------------------------------

    def retrieve(self, question: str, qid: str | None = None) -> list[RetrievalHit]:
        hits = retrieve_hierarchical(self.index, self.corpus, question, self.hierarchical, cache=self.cache)
        ext = self.external.get(qid, []) if qid is not None else []
        return merge_external(hits, ext, self.budget, self.corpus)

    def paragraphs(self, question: str, qid: str | None = None) -> list[ParagraphHit]:
        paras = expand_to_paragraphs(self.retrieve(question, qid), self.corpus)
        if self.subselect_k is not None and paras:
            paras = subselect_paragraphs(paras, question, self.subselect_k, self.index.analyzer)
        return paras

    @contextmanager
    def _reader(self) -> Iterator[Callable]:
        if self._shared_reader is not None:
            yield self._shared_reader
            return
        try:
            channel = self._channels.get_nowait()
        except queue.Empty:
            channel = self.reader_spec.build(self.vectors)
        try:
            yield channel
        finally:
            self._channels.put(channel)

    def candidates(self, question: str, qid: str | None = None) -> list[AnswerCandidate]:
        paras = self.paragraphs(question, qid)
        if not paras:
            return []
        with self._reader() as read:
            return read(question, paras, qid if qid is not None else question)

    def answer(self, question: str, qid: str | None = None, top_n: int | None = None) -> list[FusedAnswer]:
        cands = self.candidates(question, qid)
        return top_answers(fuse(cands, self.fusion.beta), top_n or self.fusion.top_n)

    def close(self) -> None:
        while True:
            try:
                ch = self._channels.get_nowait()
            except queue.Empty:
                break
            if hasattr(ch, "close"):
                ch.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def map_questions(self, fn: Callable[[QaExample], object], dataset: Sequence[QaExample]) -> list:
        """Apply `fn` per question with a bounded pool; results in dataset order."""
        if self.workers <= 1:
            return [fn(ex) for ex in dataset]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(fn, dataset))


def answer(question: str, config: PipelineConfig) -> list[FusedAnswer]:
    with Pipeline.from_config(config) as pipe:
        return pipe.answer(question)


def _safe(fn, ex: QaExample, default):
    try:
        return fn(ex)
    except Exception as exc:  # one failing question must not abort a run
        warnings.warn(f"question {ex.qid}: {type(exc).__name__}: {exc}; scored as unanswered", stacklevel=2)
        return default


def evaluate_open_domain(
    dataset: Sequence[QaExample],
    pipeline: Pipeline,
    *,
    report_at: Sequence[int] = (1, 3, 5),
    predictions_path: str | Path | None = None,
    topn_path: str | Path | None = None,
) -> dict[int, EvalReport]:
    """Answer every question and score the top-n lists for each n in `report_at`."""
    if not dataset:
        raise ValueError("empty dataset")
    depth = max(max(report_at), pipeline.fusion.top_n)
    ranked = pipeline.map_questions(
        lambda ex: _safe(lambda e: [fa.text for fa in pipeline.answer(e.question, e.qid, depth)], ex, []),
        dataset,
    )
    lists = {ex.qid: answers for ex, answers in zip(dataset, ranked)}
    if predictions_path is not None:
        write_predictions({q: (a[0] if a else "") for q, a in lists.items()}, predictions_path)
    if topn_path is not None:
        write_predictions({q: a[: pipeline.fusion.top_n] for q, a in lists.items()}, topn_path)
    reports = {}
    for n in sorted(set(report_at)):
        preds = {q: a[:n] if a else "" for q, a in lists.items()}
        reports[n] = evaluate(dataset, preds)
        log.info("top-%d: %s", n, reports[n].to_dict())
    return reports


def evaluate_reader(
    dataset: Sequence[QaExample],
    reader: ReaderSpec,
    *,
    workers: int = 1,
    predictions_path: str | Path | None = None,
    vectors: WordVectors | None = None,
) -> EvalReport:
    """Reader-only evaluation: each question is read against its gold paragraph."""
    if not dataset:
        raise ValueError("empty dataset")
    if reader.name == "embedding" and vectors is None:
        vectors = load_vectors(reader.vectors_path)
    channels: queue.Queue = queue.Queue()
    shared = None if reader.needs_channel else reader.build(vectors)

    def read_one(ex: QaExample):
        read = shared
        if read is None:
            try:
                read = channels.get_nowait()
            except queue.Empty:
                read = reader.build(vectors)
        try:
            para = ParagraphHit(ex.title or "gold", 0, ex.context, 0.0)
            ranked = fuse(read(ex.question, [para], ex.qid), 0.0)
        finally:
            if shared is None:
                channels.put(read)
        if not ranked:
            return {"text": "", "answer_start": None}
        best = ranked[0].candidate
        return {"text": best.text, "answer_start": best.char_start}

    def run(ex):
        return _safe(read_one, ex, {"text": "", "answer_start": None})

    if workers <= 1:
        preds = [run(ex) for ex in dataset]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            preds = list(pool.map(run, dataset))
    while not channels.empty():
        ch = channels.get_nowait()
        if hasattr(ch, "close"):
            ch.close()
    by_qid = {ex.qid: p for ex, p in zip(dataset, preds)}
    if predictions_path is not None:
        write_predictions({q: p["text"] for q, p in by_qid.items()}, predictions_path)
    scored = {q: ({"text": p["text"]} if p["answer_start"] is None else p) for q, p in by_qid.items()}
    return evaluate(dataset, scored)


@dataclass(frozen=True)
class RecallRow:
    method: str
    k: int
    recall: float


def evaluate_retriever(
    dataset: Sequence[QaExample],
    corpus: Corpus,
    flat_indexes: Mapping[str, TfidfIndex],
    ks: Sequence[int] = (15,),
    *,
    hierarchical_index: TfidfIndex | None = None,
    hierarchical: HierarchicalConfig | None = None,
    embedding: EmbeddingRetriever | None = None,
    normalize: bool = True,
) -> list[RecallRow]:
    """Recall@k for each flat index, the two-stage retriever and an embedding retriever."""
    if not dataset:
        raise ValueError("empty dataset")
    rows: list[RecallRow] = []

    def recall_for(search: Callable[[str, int], list[RetrievalHit]], k: int) -> float:
        retrieved = {ex.qid: [corpus.doc_text(h.doc_id) for h in search(ex.question, k)] for ex in dataset}
        return retriever_recall(dataset, retrieved, normalize)

    for name, index in flat_indexes.items():
        for k in ks:
            rows.append(RecallRow(name, k, recall_for(lambda q, k, ix=index: retrieve_flat(ix, q, k), k)))
    if hierarchical_index is not None:
        base = hierarchical or HierarchicalConfig(stage1_ngrams=hierarchical_index.ngram_range)
        cache = TokenCache(corpus, hierarchical_index.analyzer, hierarchical_index.hash_seed)
        for k in ks:
            cfg = HierarchicalConfig(base.stage1_ngrams, max(base.k1, k), base.stage2_ngrams, k)
            rows.append(RecallRow(
                "hierarchical", k,
                recall_for(lambda q, k, c=cfg: retrieve_hierarchical(hierarchical_index, corpus, q, c, cache=cache), k),
            ))
    if embedding is not None:
        for k in ks:
            rows.append(RecallRow("embedding", k, recall_for(embedding.retrieve, k)))
    return rows
