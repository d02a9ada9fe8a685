import json

from hypothesis import given, strategies as st

from arqa.analysis import (
    AnalyzerConfig,
    analyze,
    analyze_terms,
    ngrams,
    normalize_chars,
    normalize_with_offsets,
    sentence_index,
    sentence_spans,
    stem,
)

ARABIC_LETTERS = "ابتثجحخدذرزسشصضطظعغفقكلمنهوي"
DIACRITICS = "ًٌٍَُِّْ"


def test_empty_text():
    assert analyze("") == []


def test_diacritics_do_not_change_stems():
    toks = analyze("عَلَّمَ عَلِمَ")
    assert [t.stem for t in toks] == ["علم", "علم"]


def test_default_rules_on_short_sentence():
    assert [t.stem for t in analyze("يلعب نادي ليفربول")] == ["يلعب", "ناد", "ليفربول"]


def test_alef_and_ya_unified():
    assert normalize_chars("أإآى") == "اااي"
    assert normalize_chars("مـــصر") == "مصر"


def test_prefix_needs_three_letter_remainder():
    assert stem("والد") == "والد"  # removing "وال" would leave one letter
    assert stem("الكتاب") == "كتاب"
    assert stem("بالمدرسة") == "مدرس"


def test_stopwords_dropped():
    assert analyze_terms("في القاهرة") == ["قاهر"]


def test_offsets_point_into_original_text():
    text = "ذَهَبَ الوَلَدُ إلى المَدْرَسَةِ."
    for tok in analyze(text):
        raw = text[tok.char_start:tok.char_end]
        assert normalize_chars(raw) == normalize_chars(raw).strip()
        assert tok.char_end <= len(text)
    starts = [t.char_start for t in analyze(text)]
    assert starts == sorted(starts)


def test_ngrams_examples():
    assert ngrams(["a", "b", "c"], (1, 2)) == ["a", "b", "c", "a b", "b c"]
    assert ngrams([], (1, 3)) == []
    assert ngrams(["a"], (2, 2)) == []


def test_config_round_trip_and_digest():
    cfg = AnalyzerConfig(ngram_range=(1, 3))
    back = AnalyzerConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back == cfg
    assert back.digest() == cfg.digest()
    assert cfg.digest() != cfg.with_ngrams((1, 2)).digest()


def test_sentence_spans():
    text = "الجملة الأولى. الثانية؟ الثالثة\nالرابعة"
    spans = sentence_spans(text)
    assert len(spans) == 4
    assert sentence_index(spans, text.index("الثانية")) == 1
    assert sentence_index(spans, text.index("الرابعة")) == 3


words = st.text(alphabet=ARABIC_LETTERS + DIACRITICS + "ـأإآى", min_size=1, max_size=9)
texts = st.lists(words, max_size=12).map(" ".join)


@given(texts)
def test_deterministic(text):
    assert analyze(text) == analyze(text)


@given(st.text(alphabet=ARABIC_LETTERS + DIACRITICS + " .،؟!ـأى\n", max_size=60))
def test_offsets_monotone_and_in_bounds(text):
    toks = analyze(text)
    prev = -1
    for t in toks:
        assert 0 <= t.char_start < t.char_end <= len(text)
        assert t.char_start > prev
        prev = t.char_start


@given(st.text(alphabet=ARABIC_LETTERS + DIACRITICS + "ـأإآى ", max_size=40))
def test_normalize_offsets_project_back(text):
    norm, origin = normalize_with_offsets(text)
    assert len(norm) == len(origin)
    for ch, pos in zip(norm, origin):
        assert normalize_chars(text[pos]) == ch


# Affix-free words (no leading و/ا/ب/ك/ف/ل, no trailing ه/ي/ة/ن/ت) are fixed points.
core = st.text(alphabet="تثجحخدذرزسشصضطظعغقمن", min_size=3, max_size=6).filter(lambda w: not w.endswith(("ن", "ت")))


@given(st.lists(core, min_size=1, max_size=6))
def test_idempotent_on_stems(ws):
    cfg = AnalyzerConfig(stopwords=frozenset())
    once = analyze_terms(" ".join(ws), cfg)
    assert analyze_terms(" ".join(once), cfg) == once


def test_trailing_diacritic_kept_in_span():
    text = "المَدْرَسَةِ x"
    tok = analyze(text)[0]
    assert text[tok.char_start:tok.char_end] == "المَدْرَسَةِ"


from arqa.analysis import surface_tokens


@given(st.text(alphabet=ARABIC_LETTERS + DIACRITICS + "ـأإآى .،", max_size=60))
def test_slice_normalizes_to_surface_form(text):
    for tok in surface_tokens(text):
        assert normalize_chars(text[tok.char_start:tok.char_end]) == tok.stem


@given(st.lists(st.text(alphabet="abc", min_size=1, max_size=2), max_size=12), st.integers(1, 4), st.integers(0, 3))
def test_ngram_count(stems, lo, extra):
    hi = min(4, lo + extra)
    assert len(ngrams(stems, (lo, hi))) == sum(max(0, len(stems) - n + 1) for n in range(lo, hi + 1))


@given(texts, st.data())
def test_removing_a_stopword_never_loses_tokens(text, data):
    base = AnalyzerConfig()
    word = data.draw(st.sampled_from(sorted(base.stopwords)))
    fewer = AnalyzerConfig(stopwords=base.stopwords - {word})
    assert len(analyze(text, fewer)) >= len(analyze(text, base))


def test_stacked_affixes_are_not_a_fixed_point():
    # one prefix per pass: a second pass strips the next layer
    once = analyze_terms("الالعاب")
    assert once == ["العاب"]
    assert analyze_terms(" ".join(once)) != once
