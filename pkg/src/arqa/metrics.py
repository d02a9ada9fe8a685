"""SQuAD-style datasets and answer metrics: EM, token F1, sentence match, recall."""

from __future__ import annotations

import json
import math
import warnings
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .analysis import PUNCTUATION, normalize_chars, normalize_with_offsets, sentence_index, sentence_spans

DEFINITE_ARTICLE = "ال"
_PUNCT_TABLE = {ord(c): None for c in PUNCTUATION}


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Gold:
    text: str
    answer_start: int


@dataclass(frozen=True)
class QaExample:
    qid: str
    question: str
    context: str
    golds: tuple[Gold, ...]
    title: str = ""
    offsets_valid: bool = True

    @property
    def gold_texts(self) -> list[str]:
        return [g.text for g in self.golds]


@dataclass
class EvalReport:
    exact_match: float
    f1: float
    sentence_match: float
    n: int
    recall_at_k: dict[str, float] | None = field(default=None)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        if d["recall_at_k"] is None:
            del d["recall_at_k"]
        return d


def load_dataset(path: str | Path, strict: bool = False) -> list[QaExample]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return parse_dataset(raw, strict=strict, source=str(path))


def parse_dataset(raw: Mapping, strict: bool = False, source: str = "<dataset>") -> list[QaExample]:
    if "version" not in raw:
        warnings.warn(f"{source}: no 'version' key; assuming SQuAD v1.1 layout", stacklevel=3)
    if "data" not in raw:
        raise DatasetError(f"{source}: missing 'data'")
    out: list[QaExample] = []
    bad: list[str] = []
    for article in raw["data"]:
        title = article.get("title", "")
        for para in article["paragraphs"]:
            context = para["context"]
            for qa in para["qas"]:
                golds = tuple(Gold(a["text"], int(a["answer_start"])) for a in qa.get("answers", []))
                ok = all(context[g.answer_start:g.answer_start + len(g.text)] == g.text for g in golds)
                if not ok:
                    bad.append(str(qa["id"]))
                    warnings.warn(f"{source}: question {qa['id']}: answer_start does not match answer text", stacklevel=3)
                out.append(QaExample(str(qa["id"]), qa["question"], context, golds, title, ok))
    if strict and bad:
        raise DatasetError(f"{source}: {len(bad)} question(s) with mismatched answer offsets, e.g. {bad[0]}")
    return out


def write_dataset(raw: Mapping, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(raw, fh, ensure_ascii=False, indent=1)


def examples_to_squad(examples: Iterable[QaExample], version: str = "1.1") -> dict:
    """Group examples back into the nested SQuAD layout (one paragraph per context)."""
    articles: dict[str, dict[str, list]] = {}
    for ex in examples:
        paras = articles.setdefault(ex.title, {})
        paras.setdefault(ex.context, []).append({
            "id": ex.qid,
            "question": ex.question,
            "answers": [{"text": g.text, "answer_start": g.answer_start} for g in ex.golds],
        })
    return {
        "version": version,
        "data": [
            {"title": t, "paragraphs": [{"context": c, "qas": qas} for c, qas in paras.items()]}
            for t, paras in articles.items()
        ],
    }


# -- normalization and per-answer scores ------------------------------------

def _strip_article(tok: str) -> str:
    while tok.startswith(DEFINITE_ARTICLE) and len(tok) - len(DEFINITE_ARTICLE) >= 2:
        tok = tok[len(DEFINITE_ARTICLE):]
    return tok


def normalize_answer(text: str, strip_article: bool = True) -> str:
    text = normalize_chars(text)
    text = text.translate(_PUNCT_TABLE)
    toks = text.split()
    if strip_article:
        toks = [_strip_article(t) for t in toks]
    return " ".join(toks)


def exact_match(pred: str, golds: Sequence[str], strip_article: bool = True) -> int:
    p = normalize_answer(pred, strip_article)
    return int(any(p == normalize_answer(g, strip_article) for g in golds))


def _f1_single(pred_toks: list[str], gold_toks: list[str]) -> float:
    if not pred_toks or not gold_toks:
        return float(pred_toks == gold_toks)
    common = Counter(pred_toks) & Counter(gold_toks)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_toks)
    recall = overlap / len(gold_toks)
    return 2 * precision * recall / (precision + recall)


def f1(pred: str, golds: Sequence[str], strip_article: bool = True) -> float:
    p = normalize_answer(pred, strip_article).split()
    return max((_f1_single(p, normalize_answer(g, strip_article).split()) for g in golds), default=0.0)


def locate(pred: str, context: str) -> int | None:
    """First occurrence of `pred` in `context`, raw first, then after char normalization."""
    pred = pred.strip()
    if not pred:
        return None
    i = context.find(pred)
    if i >= 0:
        return i
    norm_ctx, origin = normalize_with_offsets(context)
    norm_pred = normalize_chars(pred).strip()
    if not norm_pred:
        return None
    i = norm_ctx.find(norm_pred)
    return origin[i] if i >= 0 else None


def sentence_match(pred: str | int | tuple[int, int] | None, golds: Sequence[Gold], context: str) -> int:
    """1 iff the prediction starts in the same sentence as some gold answer.

    `pred` is a span (start, end), a start offset, or a string to locate.
    """
    if pred is None:
        return 0
    if isinstance(pred, str):
        start = locate(pred, context)
        if start is None:
            return 0
    elif isinstance(pred, tuple):
        start = pred[0]
    else:
        start = int(pred)
    spans = sentence_spans(context)
    si = sentence_index(spans, start)
    if si < 0:
        return 0
    return int(any(sentence_index(spans, g.answer_start) == si for g in golds))


# -- aggregation ----------------------------------------------------------------

def _as_answer_list(value) -> list[tuple[str, int | None]]:
    items = value if isinstance(value, list) else [value]
    out = []
    for item in items:
        if isinstance(item, str):
            out.append((item, None))
        elif isinstance(item, Mapping):
            start = item.get("answer_start")
            out.append((str(item.get("text", "")), None if start is None else int(start)))
        else:
            raise DatasetError(f"unsupported prediction value {item!r}")
    return out


def score_example(ex: QaExample, value, strip_article: bool = True) -> tuple[int, float, int]:
    """(EM, F1, SM) for one question; lists of answers take the max of each metric."""
    golds = ex.gold_texts
    em = f = sm = 0
    for text, start in _as_answer_list(value):
        em = max(em, exact_match(text, golds, strip_article))
        f = max(f, f1(text, golds, strip_article))
        sm = max(sm, sentence_match(text if start is None else start, ex.golds, ex.context))
    return em, f, sm


def evaluate(
    dataset: Sequence[QaExample],
    predictions: Mapping[str, Any],
    strip_article: bool = True,
) -> EvalReport:
    known = {ex.qid for ex in dataset}
    unknown = [q for q in predictions if q not in known]
    if unknown:
        raise DatasetError(f"{len(unknown)} prediction(s) for unknown question ids, e.g. {unknown[0]!r}")
    missing = 0
    scores = []
    for ex in dataset:
        if ex.qid not in predictions:
            missing += 1
            continue
        scores.append(score_example(ex, predictions[ex.qid], strip_article))
    if missing:
        warnings.warn(f"{missing} question(s) have no prediction and score 0", stacklevel=2)
    n = len(dataset)
    # fsum keeps the aggregate independent of question order
    em, f, sm = (100.0 * math.fsum(col) / n if n else 0.0 for col in zip(*scores)) if scores else (0.0,) * 3
    return EvalReport(em, f, sm, n)


def answer_in_documents(golds: Sequence[str], docs: Sequence[str], normalize: bool = True) -> bool:
    if normalize:
        golds = [normalize_answer(g) for g in golds]
        docs = [normalize_answer(d) for d in docs]
    golds = [g for g in golds if g]
    return any(g in d for g in golds for d in docs)


def retriever_recall(
    dataset: Sequence[QaExample],
    retrieved: Mapping[str, Sequence[str]],
    normalize: bool = True,
) -> float:
    """Percentage of questions with a gold answer inside any retrieved document text."""
    if not dataset:
        return 0.0
    hits = missing = 0
    for ex in dataset:
        docs = retrieved.get(ex.qid)
        if docs is None:
            missing += 1
            continue
        hits += answer_in_documents(ex.gold_texts, docs, normalize)
    if missing:
        warnings.warn(f"{missing} question(s) have no retrieval results and count as misses", stacklevel=2)
    return 100.0 * hits / len(dataset)


def dump_report(report: EvalReport, path: str | Path | None = None) -> str:
    blob = json.dumps(report.to_dict(), ensure_ascii=False, indent=2)
    if path is not None:
        Path(path).write_text(blob + "\n", encoding="utf-8")
    return blob

