from __future__ import annotations

from dataclasses import dataclass

from ..analysis import AnalyzerConfig, Token, sentence_spans, surface_tokens

MAX_CANDIDATE_TOKENS = 10


@dataclass(frozen=True)
class AnswerCandidate:
    article_id: str
    paragraph_index: int
    char_start: int
    char_end: int
    text: str
    ans_raw: float
    doc_score: float = 0.0


def sentence_tokens(text: str, cfg: AnalyzerConfig | None = None) -> list[list[Token]]:
    """Surface tokens grouped by sentence."""
    spans = sentence_spans(text)
    groups: list[list[Token]] = [[] for _ in spans]
    si = 0
    for tok in surface_tokens(text, cfg):
        while si < len(spans) and tok.char_start >= spans[si][1]:
            si += 1
        if si == len(spans):
            break
        groups[si].append(tok)
    return [g for g in groups if g]


def gen_candidates(
    paragraph_text: str,
    cfg: AnalyzerConfig | None = None,
    max_tokens: int = MAX_CANDIDATE_TOKENS,
) -> list[tuple[int, int]]:
    """Every span of 1..max_tokens consecutive tokens inside one sentence.

    Ordered by start token, then by length, so earlier char_start comes first.
    """
    out = []
    for toks in sentence_tokens(paragraph_text, cfg):
        for i, first in enumerate(toks):
            for j in range(i, min(i + max_tokens, len(toks))):
                out.append((first.char_start, toks[j].char_end))
    return out


def make_candidate(para, span: tuple[int, int], score: float) -> AnswerCandidate:
    s, e = span
    return AnswerCandidate(
        article_id=para.article_id,
        paragraph_index=para.paragraph_index,
        char_start=s,
        char_end=e,
        text=para.text[s:e],
        ans_raw=float(score),
        doc_score=para.doc_score,
    )
