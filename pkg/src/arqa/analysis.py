"""Arabic text analysis shared by indexing, querying, reading and scoring.

The analyzer runs a fixed pipeline: diacritic/tatweel removal, alef and
ya unification, tokenization on whitespace and punctuation, stopword
removal and light affix stripping.  Token offsets always point into the
original (un-normalized) text.
"""

from __future__ import annotations

import bisect
import functools
import hashlib
import json
import re
import string
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, NamedTuple, Sequence

DIACRITICS = frozenset(chr(c) for c in range(0x064B, 0x0653))
TATWEEL = "ـ"
ALEF_FORMS = {"أ": "ا", "إ": "ا", "آ": "ا"}
ALEF_MAQSURA = {"ى": "ي"}

ARABIC_PUNCTUATION = "،؛؟«»٪٫٬٭“”‘’„…\u2013\u2014·•"
PUNCTUATION = frozenset(string.punctuation + ARABIC_PUNCTUATION)

_PUNCT_CLASS = re.escape("".join(sorted(PUNCTUATION)))
TOKEN_RE = re.compile(rf"[^\s{_PUNCT_CLASS}]+")
SENTENCE_END_RE = re.compile(r"[.!?؟؛]+(?=\s|$)\s*|\n\s*")

DEFAULT_PREFIXES = ("وال", "بال", "كال", "فال", "ال", "لل", "و")
DEFAULT_SUFFIXES = ("ها", "ان", "ات", "ون", "ين", "ية", "يه", "ه", "ة", "ي")
DEFAULT_MIN_STEM = 3


@functools.lru_cache(maxsize=None)
def default_stopwords() -> frozenset[str]:
    text = resources.files("arqa.data").joinpath("stopwords_ar.txt").read_text("utf-8")
    words = (line.strip() for line in text.splitlines())
    return frozenset(w for w in words if w and not w.startswith("#"))


@dataclass(frozen=True)
class AnalyzerConfig:
    strip_diacritics: bool = True
    unify_alef_ya: bool = True
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    prefixes: tuple[str, ...] = DEFAULT_PREFIXES
    suffixes: tuple[str, ...] = DEFAULT_SUFFIXES
    min_stem: int = DEFAULT_MIN_STEM
    ngram_range: tuple[int, int] = (1, 2)

    def __post_init__(self):
        lo, hi = self.ngram_range
        if not 1 <= lo <= hi <= 4:
            raise ValueError(f"invalid ngram_range {self.ngram_range}; need 1 <= lo <= hi <= 4")
        if self.min_stem < 1:
            raise ValueError("min_stem must be >= 1")
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))
        object.__setattr__(self, "prefixes", tuple(self.prefixes))
        object.__setattr__(self, "suffixes", tuple(self.suffixes))
        object.__setattr__(self, "ngram_range", (int(lo), int(hi)))

    def with_ngrams(self, ngram_range: Sequence[int]) -> "AnalyzerConfig":
        return AnalyzerConfig(
            strip_diacritics=self.strip_diacritics,
            unify_alef_ya=self.unify_alef_ya,
            stopwords=self.stopwords,
            prefixes=self.prefixes,
            suffixes=self.suffixes,
            min_stem=self.min_stem,
            ngram_range=tuple(ngram_range),
        )

    def to_dict(self) -> dict:
        return {
            "strip_diacritics": self.strip_diacritics,
            "unify_alef_ya": self.unify_alef_ya,
            "stopwords": sorted(self.stopwords),
            "prefixes": list(self.prefixes),
            "suffixes": list(self.suffixes),
            "min_stem": self.min_stem,
            "ngram_range": list(self.ngram_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnalyzerConfig":
        return cls(
            strip_diacritics=bool(d["strip_diacritics"]),
            unify_alef_ya=bool(d["unify_alef_ya"]),
            stopwords=frozenset(d["stopwords"]),
            prefixes=tuple(d["prefixes"]),
            suffixes=tuple(d["suffixes"]),
            min_stem=int(d["min_stem"]),
            ngram_range=tuple(d["ngram_range"]),
        )

    def digest(self) -> bytes:
        """SHA-256 over the canonical JSON form; stored in index headers."""
        blob = json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).digest()


class Token(NamedTuple):
    stem: str
    char_start: int
    char_end: int


@functools.lru_cache(maxsize=8)
def _char_table(strip_diacritics: bool, unify: bool) -> dict[int, str | None]:
    table: dict[int, str | None] = {}
    if strip_diacritics:
        for ch in DIACRITICS:
            table[ord(ch)] = None
        table[ord(TATWEEL)] = None
    if unify:
        for src, dst in {**ALEF_FORMS, **ALEF_MAQSURA}.items():
            table[ord(src)] = dst
    return table


def normalize_chars(text: str, strip_diacritics: bool = True, unify_alef_ya: bool = True) -> str:
    """Character-level normalization only (steps 1-2 of the analyzer)."""
    return text.translate(_char_table(strip_diacritics, unify_alef_ya))


def normalize_with_offsets(
    text: str, strip_diacritics: bool = True, unify_alef_ya: bool = True
) -> tuple[str, list[int]]:
    """Normalize characters and return, for each output char, its index in `text`."""
    table = _char_table(strip_diacritics, unify_alef_ya)
    out: list[str] = []
    origin: list[int] = []
    for i, ch in enumerate(text):
        mapped = table.get(ord(ch), ch)
        if mapped is None:
            continue
        out.append(mapped)
        origin.append(i)
    return "".join(out), origin


def original_end(text: str, origin: Sequence[int], end: int, norm_len: int) -> int:
    """Original-text end of the normalized prefix `[:end]`, keeping trailing marks
    that normalization removed (diacritics on the last letter stay in the span)."""
    return origin[end] if end < norm_len else len(text)


def surface_tokens(text: str, cfg: AnalyzerConfig | None = None) -> list[Token]:
    """Normalized tokens with original-text offsets; no stopword removal or stemming."""
    cfg = cfg or AnalyzerConfig()
    norm, origin = normalize_with_offsets(text, cfg.strip_diacritics, cfg.unify_alef_ya)
    n = len(norm)
    return [
        Token(m.group(), origin[m.start()], original_end(text, origin, m.end(), n))
        for m in TOKEN_RE.finditer(norm)
    ]


@functools.lru_cache(maxsize=64)
def _normalized_stopwords(cfg: AnalyzerConfig) -> frozenset[str]:
    return frozenset(normalize_chars(w, cfg.strip_diacritics, cfg.unify_alef_ya) for w in cfg.stopwords)


@functools.lru_cache(maxsize=1 << 20)
def _stem(word: str, prefixes: tuple[str, ...], suffixes: tuple[str, ...], min_stem: int) -> str:
    # Only the longest matching affix is considered; it is skipped if the
    # remainder would fall below min_stem.
    best = max((p for p in prefixes if word.startswith(p)), key=len, default=None)
    if best is not None and len(word) - len(best) >= min_stem:
        word = word[len(best):]
    best = max((s for s in suffixes if word.endswith(s)), key=len, default=None)
    if best is not None and len(word) - len(best) >= min_stem:
        word = word[: len(word) - len(best)]
    return word


def stem(word: str, cfg: AnalyzerConfig | None = None) -> str:
    cfg = cfg or AnalyzerConfig()
    return _stem(word, cfg.prefixes, cfg.suffixes, cfg.min_stem)


def analyze(text: str, cfg: AnalyzerConfig | None = None) -> list[Token]:
    cfg = cfg or AnalyzerConfig()
    stops = _normalized_stopwords(cfg)
    return [
        Token(_stem(tok.stem, cfg.prefixes, cfg.suffixes, cfg.min_stem), tok.char_start, tok.char_end)
        for tok in surface_tokens(text, cfg)
        if tok.stem not in stops
    ]


def analyze_terms(text: str, cfg: AnalyzerConfig | None = None) -> list[str]:
    """Stems only. Same result as ``[t.stem for t in analyze(text, cfg)]``, but faster."""
    cfg = cfg or AnalyzerConfig()
    stops = _normalized_stopwords(cfg)
    norm = text.translate(_char_table(cfg.strip_diacritics, cfg.unify_alef_ya))
    p, s, m = cfg.prefixes, cfg.suffixes, cfg.min_stem
    return [_stem(w, p, s, m) for w in TOKEN_RE.findall(norm) if w not in stops]


def ngrams(stems: Iterable[str] | Sequence[Token], ngram_range: Sequence[int]) -> list[str]:
    terms = [t.stem if isinstance(t, Token) else t for t in stems]
    lo, hi = ngram_range
    if not 1 <= lo <= hi:
        raise ValueError(f"invalid ngram range {ngram_range}")
    out: list[str] = []
    for n in range(lo, hi + 1):
        out.extend(" ".join(terms[i:i + n]) for i in range(len(terms) - n + 1))
    return out


def sentence_spans(text: str) -> list[tuple[int, int]]:
    """Contiguous (start, end) spans covering `text`, one per sentence.

    A sentence ends after a run of . ! ? ؟ ؛ that is followed by whitespace or
    end of text, or at a newline. Trailing whitespace belongs to the sentence
    it follows.
    """
    spans = []
    start = 0
    for m in SENTENCE_END_RE.finditer(text):
        end = m.end()
        if end > start:
            spans.append((start, end))
            start = end
    if start < len(text):
        spans.append((start, len(text)))
    return spans


def sentence_index(spans: Sequence[tuple[int, int]], offset: int) -> int:
    """Index of the sentence containing character `offset` (-1 if outside)."""
    starts = [s for s, _ in spans]
    i = bisect.bisect_right(starts, offset) - 1
    if i < 0 or offset >= spans[i][1]:
        return -1
    return i
