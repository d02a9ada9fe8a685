import json

import pytest

from arqa.corpus import Corpus, CorpusFormatError, load_corpus, write_corpus


def write_lines(path, lines):
    path.write_text("".join(lines), encoding="utf-8")
    return path


def test_one_article_three_paragraphs(tmp_path):
    p = write_lines(tmp_path / "c.jsonl", [json.dumps({"id": "x", "title": "t", "paragraphs": ["a", "b", "c"]}) + "\n"])
    corpus = load_corpus(p)
    assert len(corpus) == 1
    assert corpus.n_paragraphs == 3
    assert [q.index for q in corpus.article("x").paragraphs] == [0, 1, 2]


def test_empty_file_warns(tmp_path):
    p = write_lines(tmp_path / "c.jsonl", [])
    with pytest.warns(UserWarning):
        corpus = load_corpus(p)
    assert len(corpus) == 0


def test_missing_paragraphs_reports_line(tmp_path):
    p = write_lines(tmp_path / "c.jsonl", [
        json.dumps({"id": "x", "title": "t", "paragraphs": ["a"]}) + "\n",
        json.dumps({"id": "y", "title": "t"}) + "\n",
    ])
    with pytest.raises(CorpusFormatError, match=":2"):
        load_corpus(p)


def test_duplicate_ids_rejected(tmp_path):
    rec = json.dumps({"id": "x", "title": "t", "paragraphs": ["a"]}) + "\n"
    with pytest.raises(CorpusFormatError):
        load_corpus(write_lines(tmp_path / "c.jsonl", [rec, rec]))


def test_empty_paragraphs_dropped():
    corpus = Corpus.from_records([{"id": "x", "title": "t", "paragraphs": ["a", "   ", "b"]}])
    assert [p.text for p in corpus.paragraphs()] == ["a", "b"]


def test_documents_by_unit(toy_corpus):
    arts = dict(toy_corpus.documents("article"))
    paras = dict(toy_corpus.documents("paragraph"))
    assert set(arts) == {"a1", "a2", "a3"}
    assert "a1#1" in paras and len(paras) == 4
    assert toy_corpus.doc_text("a1#1") == paras["a1#1"]
    assert arts["a1"].startswith("ليفربول")


def test_write_round_trip(tmp_path, toy_corpus):
    path = tmp_path / "out.jsonl"
    write_corpus(toy_corpus, path)
    again = load_corpus(path)
    assert list(again.documents("paragraph")) == list(toy_corpus.documents("paragraph"))
