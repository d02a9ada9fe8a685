"""Span readers: candidate generation, non-neural baselines, external adapter."""

from __future__ import annotations

import functools
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from ..analysis import AnalyzerConfig
from ..embeddings import WordVectors, load_vectors
from .baselines import (
    READER_BINS,
    embedding_reader,
    random_reader,
    sliding_window_reader,
    tfidf_reader,
)
from .candidates import AnswerCandidate, gen_candidates, sentence_tokens
from .external import (
    ExternalReader,
    ReaderError,
    ReaderExitedError,
    ReaderProtocolError,
    ReaderTimeoutError,
)

READERS = ("random", "sliding_window", "tfidf", "embedding", "external")

Reader = Callable[..., list[AnswerCandidate]]


@dataclass(frozen=True)
class ReaderSpec:
    """Which reader to run and its settings; `build()` returns a callable
    ``reader(question, paragraphs, qid) -> list[AnswerCandidate]``."""

    name: str = "tfidf"
    seed: int = 0
    vectors_path: str | None = None
    command: tuple[str, ...] = ()
    timeout: float = 60.0
    hash_bins: int = READER_BINS
    analyzer: AnalyzerConfig | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.name not in READERS:
            raise ValueError(f"unknown reader {self.name!r}; choose from {', '.join(READERS)}")
        if self.name == "embedding" and not self.vectors_path:
            raise ValueError("the embedding reader needs a word-vector file")
        if self.name == "external" and not self.command:
            raise ValueError("the external reader needs a command")

    @property
    def needs_channel(self) -> bool:
        return self.name == "external"

    def build(self, vectors: WordVectors | None = None) -> Reader:
        cfg = self.analyzer
        if self.name == "external":
            return ExternalReader(self.command, timeout=self.timeout, analyzer=cfg)
        if self.name == "random":
            seed = self.seed

            def read(question, paragraphs, qid=None):
                rng = random.Random(f"{seed}:{qid if qid is not None else question}")
                return random_reader(question, paragraphs, rng, cfg)

            return read
        if self.name == "sliding_window":
            return _drop_qid(functools.partial(sliding_window_reader, cfg=cfg))
        if self.name == "tfidf":
            return _drop_qid(functools.partial(tfidf_reader, cfg=cfg, hash_bins=self.hash_bins))
        vectors = vectors or load_vectors(self.vectors_path)
        return _drop_qid(functools.partial(embedding_reader, vectors=vectors, cfg=cfg))


def _drop_qid(fn):
    def read(question, paragraphs: Sequence, qid=None):
        return fn(question, paragraphs)

    return read


__all__ = [
    "AnswerCandidate",
    "ExternalReader",
    "READERS",
    "ReaderError",
    "ReaderExitedError",
    "ReaderProtocolError",
    "ReaderSpec",
    "ReaderTimeoutError",
    "embedding_reader",
    "gen_candidates",
    "random_reader",
    "sentence_tokens",
    "sliding_window_reader",
    "tfidf_reader",
]
