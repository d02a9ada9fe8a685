import json

import pytest

from arqa.corpus import Corpus

TOY_ARTICLES = [
    {"id": "a1", "title": "ليفربول", "paragraphs": [
        "نادي ليفربول لكرة القدم هو نادٍ إنجليزي. يلعب نادي ليفربول في ملعب الأنفيلد منذ عام 1892.",
        "فاز النادي بدوري أبطال أوروبا ست مرات.",
    ]},
    {"id": "a2", "title": "برشلونة", "paragraphs": ["نادي برشلونة هو نادٍ رياضي إسباني. يلعب برشلونة في ملعب كامب نو."]},
    {"id": "a3", "title": "القاهرة", "paragraphs": ["القاهرة هي عاصمة جمهورية مصر العربية وأكبر مدنها."]},
]


@pytest.fixture
def toy_records():
    return [dict(a) for a in TOY_ARTICLES]


@pytest.fixture
def toy_corpus():
    return Corpus.from_records(TOY_ARTICLES)


@pytest.fixture
def toy_corpus_path(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text("".join(json.dumps(a, ensure_ascii=False) + "\n" for a in TOY_ARTICLES), encoding="utf-8")
    return path


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
