"""Answer ranking: softmax-normalized document and span scores, mixed by beta."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .metrics import f1, normalize_answer
from .readers.candidates import AnswerCandidate


@dataclass(frozen=True)
class FusionConfig:
    beta: float = 0.5
    top_n: int = 5

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")


@dataclass(frozen=True)
class FusedAnswer:
    candidate: AnswerCandidate
    doc_norm: float
    ans_norm: float
    fused: float

    @property
    def text(self) -> str:
        return self.candidate.text

    def to_dict(self) -> dict:
        c = self.candidate
        return {
            "text": c.text,
            "score": self.fused,
            "article_id": c.article_id,
            "paragraph_index": c.paragraph_index,
            "char_start": c.char_start,
            "char_end": c.char_end,
            "doc_score": c.doc_score,
            "ans_score": c.ans_raw,
            "doc_norm": self.doc_norm,
            "ans_norm": self.ans_norm,
        }


def softmax(scores: Sequence[float]) -> np.ndarray:
    x = np.asarray(scores, dtype=np.float64)
    if x.size == 0:
        raise ValueError("softmax of an empty list")
    if not np.all(np.isfinite(x)):
        raise ValueError("softmax needs finite scores")
    e = np.exp(x - x.max())
    return e / e.sum()


def _order(cands: Sequence[AnswerCandidate], fused: np.ndarray) -> list[int]:
    return sorted(
        range(len(cands)),
        key=lambda i: (-fused[i], cands[i].article_id, cands[i].paragraph_index, cands[i].char_start),
    )


def fuse(candidates: Sequence[AnswerCandidate], beta: float) -> list[FusedAnswer]:
    """Fused score beta*softmax(doc) + (1-beta)*softmax(ans), best first."""
    if not candidates:
        return []
    doc = softmax([c.doc_score for c in candidates])
    ans = softmax([c.ans_raw for c in candidates])
    fused = beta * doc + (1.0 - beta) * ans
    return [
        FusedAnswer(candidates[i], float(doc[i]), float(ans[i]), float(fused[i]))
        for i in _order(candidates, fused)
    ]


def dedupe(fused: Sequence[FusedAnswer]) -> list[FusedAnswer]:
    """Drop answers whose normalized text repeats a better-ranked one."""
    seen: set[str] = set()
    out = []
    for fa in fused:
        key = normalize_answer(fa.text)
        if key in seen:
            continue
        seen.add(key)
        out.append(fa)
    return out


def top_answers(fused: Sequence[FusedAnswer], top_n: int) -> list[FusedAnswer]:
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    return dedupe(fused)[:top_n]


def rank_answers(fused: Sequence[FusedAnswer], top_n: int) -> list[str]:
    return [fa.text for fa in top_answers(fused, top_n)]


def beta_grid(step: float = 0.05) -> list[float]:
    if not 0.0 < step <= 0.5:
        raise ValueError("grid step must be in (0, 0.5]")
    n = int(np.floor(1.0 / step + 1e-9))
    grid = [round(i * step, 12) for i in range(n + 1)]
    if grid[-1] < 1.0:
        grid.append(1.0)
    return grid


def beta_curve(
    dev_runs: Sequence[tuple[Sequence[AnswerCandidate], Sequence[str]]],
    grid_step: float = 0.05,
) -> list[tuple[float, float]]:
    """Mean top-1 F1 over the dev set for every beta on the grid."""
    if not dev_runs:
        raise ValueError("empty development set")
    curve = []
    for beta in beta_grid(grid_step):
        total = 0.0
        for cands, golds in dev_runs:
            ranked = fuse(cands, beta)
            if ranked:
                total += f1(ranked[0].text, golds)
        curve.append((beta, total / len(dev_runs)))
    return curve


def tune_beta(
    dev_runs: Sequence[tuple[Sequence[AnswerCandidate], Sequence[str]]],
    grid_step: float = 0.05,
) -> float:
    """Smallest beta on the grid attaining the best mean top-1 F1."""
    best_beta, best = 0.0, -1.0
    for beta, score in beta_curve(dev_runs, grid_step):
        if score > best:
            best_beta, best = beta, score
    return best_beta


def write_predictions(preds: Mapping[str, object], path: str | Path) -> None:
    Path(path).write_text(json.dumps(preds, ensure_ascii=False, indent=1, sort_keys=False) + "\n", encoding="utf-8")
