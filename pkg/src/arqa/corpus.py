"""Document collection: articles made of ordered paragraphs."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

PARAGRAPH_SEP = "#"


class CorpusFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Paragraph:
    article_id: str
    index: int
    text: str

    @property
    def doc_id(self) -> str:
        return paragraph_doc_id(self.article_id, self.index)


@dataclass(frozen=True)
class Article:
    id: str
    title: str
    paragraphs: tuple[Paragraph, ...]

    @property
    def text(self) -> str:
        """Text indexed for the article unit: title followed by its paragraphs."""
        parts = [self.title] if self.title.strip() else []
        parts.extend(p.text for p in self.paragraphs)
        return "\n".join(parts)


def paragraph_doc_id(article_id: str, index: int) -> str:
    return f"{article_id}{PARAGRAPH_SEP}{index}"


class Corpus:
    """Immutable collection of articles keyed by id, in load order."""

    def __init__(self, articles: list[Article]):
        self._articles = list(articles)
        self._by_id: dict[str, Article] = {}
        for art in self._articles:
            if art.id in self._by_id:
                raise CorpusFormatError(f"duplicate article id {art.id!r}")
            self._by_id[art.id] = art

    @classmethod
    def from_records(cls, records, min_paragraph_chars: int = 1) -> "Corpus":
        articles = []
        for rec in records:
            articles.append(_make_article(rec["id"], rec.get("title", ""), rec["paragraphs"], min_paragraph_chars))
        return cls(articles)

    def __len__(self) -> int:
        return len(self._articles)

    def __iter__(self) -> Iterator[Article]:
        return iter(self._articles)

    def __contains__(self, article_id: str) -> bool:
        return article_id in self._by_id

    @property
    def articles(self) -> list[Article]:
        return list(self._articles)

    @property
    def n_paragraphs(self) -> int:
        return sum(len(a.paragraphs) for a in self._articles)

    def article(self, article_id: str) -> Article:
        try:
            return self._by_id[article_id]
        except KeyError:
            raise KeyError(f"unknown article id {article_id!r}") from None

    def paragraphs(self) -> Iterator[Paragraph]:
        for art in self._articles:
            yield from art.paragraphs

    def resolve_paragraph(self, doc_id: str) -> Paragraph | None:
        art_id, sep, idx = doc_id.rpartition(PARAGRAPH_SEP)
        if not sep or not idx.isdigit() or art_id not in self._by_id:
            return None
        paras = self._by_id[art_id].paragraphs
        i = int(idx)
        return paras[i] if i < len(paras) else None

    def has_doc(self, doc_id: str) -> bool:
        return doc_id in self._by_id or self.resolve_paragraph(doc_id) is not None

    def doc_text(self, doc_id: str) -> str:
        if doc_id in self._by_id:
            return self._by_id[doc_id].text
        para = self.resolve_paragraph(doc_id)
        if para is None:
            raise KeyError(f"unknown document id {doc_id!r}")
        return para.text

    def documents(self, unit: str = "article") -> Iterator[tuple[str, str]]:
        """(doc_id, text) pairs for the given retrieval unit."""
        if unit == "article":
            for art in self._articles:
                yield art.id, art.text
        elif unit == "paragraph":
            for para in self.paragraphs():
                yield para.doc_id, para.text
        else:
            raise ValueError(f"unknown unit {unit!r}")


def _make_article(art_id, title, paragraphs, min_chars: int) -> Article:
    kept = [p for p in paragraphs if len(p.strip()) >= min_chars]
    # Original positions are not preserved: indices are dense over kept paragraphs.
    return Article(
        id=art_id,
        title=title,
        paragraphs=tuple(Paragraph(art_id, i, text) for i, text in enumerate(kept)),
    )


def load_corpus(path: str | Path, format: str = "jsonl", min_paragraph_chars: int = 1) -> Corpus:
    if format != "jsonl":
        raise ValueError(f"unsupported corpus format {format!r}")
    articles: list[Article] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise CorpusFormatError(f"{path}:{lineno}: expected a JSON object")
            for key in ("id", "paragraphs"):
                if key not in rec:
                    raise CorpusFormatError(f"{path}:{lineno}: missing key {key!r}")
            art_id, paras = rec["id"], rec["paragraphs"]
            if not isinstance(art_id, str):
                raise CorpusFormatError(f"{path}:{lineno}: 'id' must be a string")
            if not isinstance(paras, list) or not all(isinstance(p, str) for p in paras):
                raise CorpusFormatError(f"{path}:{lineno}: 'paragraphs' must be a list of strings")
            if art_id in seen:
                raise CorpusFormatError(f"{path}:{lineno}: duplicate article id {art_id!r}")
            seen.add(art_id)
            articles.append(_make_article(art_id, str(rec.get("title", "")), paras, min_paragraph_chars))
    if not articles:
        warnings.warn(f"corpus {path} contains no articles", stacklevel=2)
    return Corpus(articles)


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for art in corpus:
            rec = {"id": art.id, "title": art.title, "paragraphs": [p.text for p in art.paragraphs]}
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
