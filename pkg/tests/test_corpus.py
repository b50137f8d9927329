import pytest
from hypothesis import given, strategies as st

from bitextmine.corpus import (
    Corpus,
    CorpusError,
    SentenceRecord,
    clean_text,
    dedup,
    read_corpus,
    segment_sentences,
    write_corpus,
)


def make_corpus(texts, lang="kl"):
    return Corpus(
        lang=lang,
        records=tuple(
            SentenceRecord(id=i, text=t, lang=lang) for i, t in enumerate(texts)
        ),
    )


class TestCleanText:
    def test_fixed_point(self):
        assert clean_text("abc") == "abc"

    def test_whitespace_collapse(self):
        assert clean_text("  a \t b\n") == "a b"

    def test_url_removal(self):
        assert clean_text("se https://example.gl nu") == "se nu"

    def test_www_url_removal(self):
        assert clean_text("besøg www.example.dk i dag") == "besøg i dag"

    def test_email_removal(self):
        assert clean_text("skriv til post@example.gl tak") == "skriv til tak"

    def test_control_and_zero_width_removed(self):
        assert clean_text("a​b\x00c") == "abc"

    def test_nfc_normalization(self):
        decomposed = "á"  # a + combining acute
        assert clean_text(decomposed) == "á"

    def test_empty_when_nothing_survives(self):
        assert clean_text("  https://x.gl  ") == ""

    @given(st.text(max_size=200))
    def test_idempotent(self, s):
        once = clean_text(s)
        assert clean_text(once) == once

    @given(st.text(max_size=200))
    def test_no_double_spaces_or_edges(self, s):
        out = clean_text(s)
        assert "  " not in out
        assert out == out.strip()


class TestSegmentSentences:
    def test_basic_split_unfiltered(self):
        assert segment_sentences("Aap. Naamik!", apply_filters=False) == [
            "Aap.",
            "Naamik!",
        ]

    def test_basic_split_filtered_drops_short(self):
        # both segments have fewer than 3 tokens
        assert segment_sentences("Aap. Naamik!") == []

    def test_empty_input(self):
        assert segment_sentences("") == []

    def test_all_short_segments_dropped(self):
        assert segment_sentences("a. b. c.") == []

    def test_terminator_kept_left(self):
        segs = segment_sentences("una oqaluttuaq pillugu. taava allamik oqaluppoq!", apply_filters=False)
        assert segs == ["una oqaluttuaq pillugu.", "taava allamik oqaluppoq!"]

    def test_long_segment_dropped(self):
        text = " ".join(["tok"] * 201) + "."
        assert segment_sentences(text, max_tokens=200) == []

    def test_low_alpha_ratio_dropped(self):
        assert segment_sentences("12 34 56 78 90.") == []

    def test_no_terminator_yields_whole_text(self):
        assert segment_sentences("aluu ilaa una", apply_filters=False) == ["aluu ilaa una"]


class TestDedup:
    def test_keeps_first(self):
        out = dedup(make_corpus(["x", "y", "x"]))
        assert out.texts() == ["x", "y"]
        assert [r.id for r in out] == [0, 1]

    def test_empty(self):
        assert len(dedup(make_corpus([]))) == 0

    def test_all_duplicates(self):
        assert dedup(make_corpus(["a", "a", "a"])).texts() == ["a"]

    @given(st.lists(st.text(min_size=1, max_size=10).map(lambda s: clean_text(s) or "x")))
    def test_idempotent_and_shrinking(self, texts):
        c = make_corpus(texts)
        once = dedup(c)
        assert len(once) <= len(c)
        assert dedup(once).texts() == once.texts()


class TestCorpusIO:
    def test_plain_round_trip(self, tmp_path):
        c = make_corpus(["aluu ilaa", "qanoq ippit", "ajunngilaq"])
        path = tmp_path / "c.txt"
        write_corpus(c, path)
        back = read_corpus(path, lang="kl")
        assert back.texts() == c.texts()
        assert [r.id for r in back] == [0, 1, 2]

    def test_jsonl_round_trip(self, tmp_path):
        c = Corpus(
            lang="kl",
            records=(
                SentenceRecord(0, "aluu ilaa", "kl", "https://x.gl/a", "x.gl"),
                SentenceRecord(1, "qanoq ippit", "kl", "https://x.gl/b", "x.gl"),
            ),
        )
        path = tmp_path / "c.jsonl"
        write_corpus(c, path)
        assert read_corpus(path, lang="kl") == c

    def test_plain_three_lines_empty_metadata(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("aluu ilaa\nqanoq ippit\najunngilaq una\n", encoding="utf-8")
        c = read_corpus(path, lang="kl")
        assert len(c) == 3
        assert all(r.source_url == "" and r.site_id == "" for r in c)

    def test_duplicate_strict_names_line(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("aluu\nqanoq\naluu\n", encoding="utf-8")
        with pytest.raises(CorpusError) as exc:
            read_corpus(path, lang="kl", strict=True)
        assert exc.value.line == 3

    def test_duplicate_lenient_kept(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("aluu\naluu\n", encoding="utf-8")
        assert len(read_corpus(path, lang="kl")) == 2

    def test_unknown_field_strict(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text(
            '{"id": 0, "text": "aluu", "lang": "kl", "source_url": "", "site_id": "", "bogus": 1}\n',
            encoding="utf-8",
        )
        with pytest.raises(CorpusError):
            read_corpus(path, lang="kl", strict=True)
        assert len(read_corpus(path, lang="kl")) == 1  # lenient ignores

    def test_malformed_json_names_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"id": 0, "text": "ok", "lang": "kl"}\n{broken\n', encoding="utf-8")
        with pytest.raises(CorpusError) as exc:
            read_corpus(path)
        assert exc.value.line == 2

    def test_uncleaned_text_rejected(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("a  b\n", encoding="utf-8")
        with pytest.raises(CorpusError) as exc:
            read_corpus(path, lang="kl")
        assert exc.value.line == 1

    def test_out_of_order_id_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"id": 5, "text": "aluu", "lang": "kl"}\n', encoding="utf-8")
        with pytest.raises(CorpusError):
            read_corpus(path)

    @given(
        st.lists(
            st.text(
                alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd")),
                min_size=1,
                max_size=12,
            ),
            max_size=20,
        )
    )
    def test_round_trip_property(self, tmp_path_factory, texts):
        texts = [clean_text(t) for t in texts]
        texts = list(dict.fromkeys(t for t in texts if t))
        c = make_corpus(texts)
        path = tmp_path_factory.mktemp("rt") / "c.txt"
        write_corpus(c, path)
        assert read_corpus(path, lang="kl").texts() == texts
