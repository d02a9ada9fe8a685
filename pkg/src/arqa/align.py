"""Repair answers that no longer occur verbatim in their paragraph.

Machine-translated QA data often renders the answer slightly differently
from the paragraph (article prefixes, tense, spelling).  Each such answer is
replaced by the paragraph span of at most `max_words` tokens with the least
character-level edit distance to it.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from typing import Mapping

from .analysis import TOKEN_RE, normalize_chars, normalize_with_offsets, original_end

DEFAULT_MAX_WORDS = 15
DEFAULT_MAX_DISTANCE_RATIO = 0.5


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class AlignmentResult:
    char_start: int
    char_end: int
    matched_text: str
    distance: int

    @property
    def exact(self) -> bool:
        return self.distance == 0


def normalize_for_alignment(text: str) -> str:
    return " ".join(normalize_chars(text).split())


def align_answer(context: str, answer: str, max_words: int = DEFAULT_MAX_WORDS) -> AlignmentResult:
    """Least-edit-distance token span of `context` for `answer`.

    Ties go to the span whose length is closest to the answer's, then to the
    earliest start.  Each start position extends its DP row by row and is
    abandoned once the row minimum exceeds the best distance found so far.
    """
    target = normalize_for_alignment(answer)
    if not target:
        raise AlignmentError("answer is empty after normalization")
    if max_words < 1:
        raise AlignmentError("max_words must be >= 1")
    norm, origin = normalize_with_offsets(context)
    toks = [(m.start(), m.end()) for m in TOKEN_RE.finditer(norm)]
    if not toks:
        raise AlignmentError("context has no tokens")

    m = len(target)
    best_key = (math.inf, math.inf, math.inf, math.inf)
    for ti, (start, _) in enumerate(toks):
        last = min(ti + max_words, len(toks)) - 1
        ends = {toks[tj][1] for tj in range(ti, last + 1)}
        limit = toks[last][1]
        prev = list(range(m + 1))
        for pos in range(start, limit):
            ch = norm[pos]
            length = pos + 1 - start
            cur = [length]
            for j in range(1, m + 1):
                sub = prev[j - 1] + (ch != target[j - 1])
                ins = cur[j - 1] + 1
                dele = prev[j] + 1
                cur.append(min(sub, ins, dele))
            if pos + 1 in ends:
                key = (cur[m], abs(length - m), start, pos + 1)
                if key < best_key:
                    best_key = key
            # every longer prefix costs at least the row minimum and the length gap
            if min(cur) > best_key[0] or length - m > best_key[0]:
                break
            prev = cur

    dist, _, s, e = best_key
    cs, ce = origin[s], original_end(context, origin, e, len(norm))
    return AlignmentResult(cs, ce, context[cs:ce], int(dist))


def align_dataset(
    dataset: Mapping,
    max_words: int = DEFAULT_MAX_WORDS,
    max_distance_ratio: float = DEFAULT_MAX_DISTANCE_RATIO,
) -> tuple[dict, dict[str, int]]:
    """Return a repaired copy of a SQuAD-layout dataset and outcome counts.

    Answers found verbatim keep their text (a wrong offset is corrected).
    Others are replaced by their aligned span; an alignment whose distance
    exceeds ``max_distance_ratio`` times the answer length counts as failed,
    and failed answers (and questions left without answers) are dropped.
    """
    out = copy.deepcopy(dict(dataset))
    stats = {"exact": 0, "repaired_exact": 0, "repaired_fuzzy": 0, "failed": 0}
    for article in out.get("data", []):
        for para in article["paragraphs"]:
            context = para["context"]
            kept_qas = []
            for qa in para["qas"]:
                kept = []
                for ans in qa.get("answers", []):
                    fixed = _repair(context, ans, max_words, max_distance_ratio, stats)
                    if fixed is not None:
                        kept.append(fixed)
                if kept:
                    qa["answers"] = kept
                    kept_qas.append(qa)
            para["qas"] = kept_qas
    return out, stats


def _repair(context, ans, max_words, max_ratio, stats) -> dict | None:
    text, start = ans["text"], int(ans.get("answer_start", -1))
    if text and context[start:start + len(text)] == text:
        stats["exact"] += 1
        return ans
    if text and text in context:
        stats["exact"] += 1
        return {**ans, "answer_start": context.index(text)}
    try:
        res = align_answer(context, text, max_words)
    except AlignmentError:
        stats["failed"] += 1
        return None
    if res.distance > max_ratio * len(normalize_for_alignment(text)):
        stats["failed"] += 1
        return None
    stats["repaired_exact" if res.exact else "repaired_fuzzy"] += 1
    return {**ans, "text": res.matched_text, "answer_start": res.char_start}
