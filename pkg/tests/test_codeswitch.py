import pytest
from hypothesis import given, strategies as st

from bitextmine.codeswitch import (
    BilingualDictionary,
    DictionaryError,
    code_switch,
    corpus_coverage,
    load_dictionary,
)
from bitextmine.corpus import Corpus, SentenceRecord


def make_dict(entries, src="kl", tgt="en"):
    return BilingualDictionary(source_lang=src, target_lang=tgt,
                               entries={k.casefold(): v for k, v in entries.items()})


def make_corpus(texts, lang="kl"):
    return Corpus(lang=lang, records=tuple(
        SentenceRecord(id=i, text=t, lang=lang) for i, t in enumerate(texts)))


class TestLoadDictionary:
    def test_two_line_fixture(self, tmp_path):
        path = tmp_path / "d.tsv"
        path.write_text("aallartippoq\tstarted\nilaa\tright\n", encoding="utf-8")
        d = load_dictionary(path, "kl", "en")
        assert len(d) == 2
        assert d.entries["aallartippoq"] == "started"

    def test_duplicate_key_keeps_first(self, tmp_path):
        path = tmp_path / "d.tsv"
        path.write_text("aluu\thello\naluu\thi\n", encoding="utf-8")
        d = load_dictionary(path, "kl", "en")
        assert len(d) == 1
        assert d.entries["aluu"] == "hello"
        assert d.duplicate_count == 1

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.tsv"
        path.write_text("", encoding="utf-8")
        assert len(load_dictionary(path, "kl", "en")) == 0

    def test_keys_case_folded(self, tmp_path):
        path = tmp_path / "d.tsv"
        path.write_text("Aluu\thello\n", encoding="utf-8")
        assert "aluu" in load_dictionary(path, "kl", "en").entries

    def test_malformed_line_names_lineno(self, tmp_path):
        path = tmp_path / "d.tsv"
        path.write_text("aluu\thello\nbroken line\n", encoding="utf-8")
        with pytest.raises(DictionaryError, match="line 2"):
            load_dictionary(path, "kl", "en")

    def test_multiword_key_rejected(self, tmp_path):
        path = tmp_path / "d.tsv"
        path.write_text("aluu ilaa\thello there\n", encoding="utf-8")
        with pytest.raises(DictionaryError):
            load_dictionary(path, "kl", "en")


class TestCodeSwitch:
    def test_empty_dicts_identity(self):
        res = code_switch("aluu ilaa una", [])
        assert res.text == "aluu ilaa una"
        assert res.coverage == 0.0

    def test_casefold_and_punctuation(self):
        d = make_dict({"aallartippoq": "started"})
        res = code_switch("Aallartippoq.", [d])
        assert res.text == "started."
        assert res.tokens_replaced == 1
        assert res.tokens_total == 1
        assert res.coverage == 1.0

    def test_ordered_dictionary_priority(self):
        en = make_dict({"aluu": "hello"}, tgt="en")
        da = make_dict({"aluu": "hej"}, tgt="da")
        assert code_switch("aluu", [en, da]).text == "hello"
        assert code_switch("aluu", [da, en]).text == "hej"

    def test_mismatched_source_lang_rejected(self):
        a = make_dict({"x": "y"}, src="kl")
        b = make_dict({"x": "y"}, src="da")
        with pytest.raises(DictionaryError):
            code_switch("x", [a, b])

    def test_unmatched_tokens_unchanged(self):
        d = make_dict({"aluu": "hello"})
        assert code_switch("aluu ilaa", [d]).text == "hello ilaa"

    def test_surrounding_punctuation_reattached(self):
        d = make_dict({"aluu": "hello"})
        assert code_switch('"aluu," ilaa', [d]).text == '"hello," ilaa'

    def test_empty_text(self):
        res = code_switch("", [make_dict({"a": "b"})])
        assert res.tokens_total == 0
        assert res.coverage == 0.0

    @given(st.text(alphabet="abc .", max_size=40))
    def test_token_count_preserved(self, text):
        d = make_dict({"a": "x", "ab": "y"})
        res = code_switch(text, [d])
        assert len(res.text.split()) == res.tokens_total == len(text.split())
        assert res.tokens_replaced <= res.tokens_total


class TestCorpusCoverage:
    def test_full_coverage(self):
        d = make_dict({"aluu": "hello", "ilaa": "right"})
        assert corpus_coverage(make_corpus(["aluu ilaa", "ilaa aluu"]), [d]) == 1.0

    def test_zero_coverage(self):
        d = make_dict({"zzz": "q"})
        assert corpus_coverage(make_corpus(["aluu ilaa"]), [d]) == 0.0

    def test_token_weighted_mean(self):
        # 2 sentences x 4 tokens, 2 replacements -> 0.25
        d = make_dict({"aluu": "hello"})
        c = make_corpus(["aluu una ila taku", "qanoq aluu ippit maani"])
        assert corpus_coverage(c, [d]) == pytest.approx(0.25)

    def test_empty_corpus(self):
        assert corpus_coverage(make_corpus([]), []) == 0.0

    def test_monotone_in_entries(self):
        c = make_corpus(["aluu una ilaa", "qanoq ippit"])
        small = make_dict({"aluu": "hello"})
        big = make_dict({"aluu": "hello", "qanoq": "how"})
        assert corpus_coverage(c, [big]) >= corpus_coverage(c, [small])
