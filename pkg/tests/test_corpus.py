import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from structsum.corpus import (
    DatasetError,
    build_document_set,
    load_dataset,
    load_stopwords,
    segment_sentences,
    tokenize,
)


class TestSegmentation:
    def test_plain_split(self):
        assert segment_sentences("The cat sat. The dog ran.") == [
            "The cat sat.",
            "The dog ran.",
        ]

    def test_abbreviation_not_a_boundary(self):
        assert segment_sentences("Dr. Smith left. He returned.") == [
            "Dr. Smith left.",
            "He returned.",
        ]

    def test_digit_starts_new_sentence(self):
        assert segment_sentences("Prices fell. 7 firms closed.") == [
            "Prices fell.",
            "7 firms closed.",
        ]

    def test_lowercase_continuation_not_split(self):
        assert segment_sentences("He said approx. two dozen left.") == [
            "He said approx. two dozen left."
        ]

    def test_question_and_exclamation(self):
        assert segment_sentences("Really? Yes! Fine.") == ["Really?", "Yes!", "Fine."]

    def test_no_terminal_punctuation(self):
        assert segment_sentences("No period here") == ["No period here"]

    def test_empty_input_raises(self):
        with pytest.raises(ValueError):
            segment_sentences("   ")

    def test_quoted_abbreviation(self):
        text = 'She cited "Mr. Jones. Then she left.'
        # the period after the quoted abbreviation must not split
        assert segment_sentences(text)[0] == 'She cited "Mr. Jones.' or len(
            segment_sentences(text)
        ) == 2

    @settings(max_examples=200, deadline=None)
    @given(st.text(alphabet="abcZ .!?", min_size=1, max_size=60))
    def test_segments_preserve_non_space_text(self, raw):
        try:
            pieces = segment_sentences(raw)
        except ValueError:
            assert not raw.strip()
            return
        stripped = "".join(raw.split())
        joined = "".join("".join(p.split()) for p in pieces)
        assert joined == stripped


class TestTokenize:
    def test_worked_example(self, stopwords):
        tokens = tokenize("The cat, sat!", stopwords)
        assert [t.normalized for t in tokens] == ["the", "cat", "sat"]
        assert [t.is_stopword for t in tokens] == [True, False, False]

    def test_internal_punctuation_kept(self):
        tokens = tokenize("U.S.-based")
        assert [t.normalized for t in tokens] == ["u.s.-based"]

    def test_capitalization_recorded_before_lowercasing(self):
        tokens = tokenize('"Word" word')
        assert [t.is_capitalized for t in tokens] == [True, False]
        assert [t.normalized for t in tokens] == ["word", "word"]

    def test_pure_punctuation_dropped(self):
        assert tokenize("-- ... !!") == []

    def test_length_counts_normalized_form(self):
        (token,) = tokenize("Hello,")
        assert token.length == 5
        assert token.surface == "Hello,"

    @settings(max_examples=100, deadline=None)
    @given(st.text(alphabet="aB.'- ", max_size=30))
    def test_tokens_never_empty_and_lowercase(self, raw):
        for token in tokenize(raw):
            assert token.normalized
            assert token.normalized == token.normalized.lower()


class TestBuildDocumentSet:
    def test_ids_and_positions(self, make_docset):
        x = make_docset(["First one. Second one.", "Third one."])
        assert [s.id for s in x.sentences] == [0, 1, 2]
        assert [s.doc_id for s in x.sentences] == [0, 0, 1]
        assert [s.position_in_doc for s in x.sentences] == [0, 1, 0]
        assert x.num_docs == 2

    def test_cost_is_utf8_bytes(self, make_docset):
        x = make_docset(["The cat sat."])
        assert x.sentences[0].cost == 12
        x2 = make_docset(["A café."])
        assert x2.sentences[0].cost == len("A café.".encode("utf-8")) == 8

    def test_blank_documents_skipped(self, make_docset):
        x = make_docset(["", "Only doc here.", "   "])
        assert x.num_docs == 1
        assert x.num_sentences == 1

    def test_tokenless_sentence_dropped_but_position_kept(self, make_docset):
        x = make_docset(["$$$! 9 lives left."])
        assert [s.text for s in x.sentences] == ["9 lives left."]
        assert [s.position_in_doc for s in x.sentences] == [1]
        assert [s.id for s in x.sentences] == [0]

    def test_degenerate_doc_still_counted(self, make_docset):
        x = make_docset(["$$$", "Real text here."])
        assert x.num_docs == 2
        assert x.num_sentences == 1

    def test_all_empty_raises(self):
        with pytest.raises(DatasetError):
            build_document_set("x", ["", "   "], frozenset())

    def test_vocabulary_stats(self, make_docset):
        x = make_docset(["Apple apple pear. Apple kiwi.", "Pear kiwi. 9 kiwi plum."])
        stats = x.vocabulary["apple"]
        assert stats.total_count == 3
        assert stats.sentence_freq == 2
        assert stats.doc_freq == 1
        assert stats.max_in_sentence == 2
        assert stats.ever_capitalized is True
        kiwi = x.vocabulary["kiwi"]
        assert kiwi.doc_freq == 2
        assert kiwi.sentence_freq == 3
        assert kiwi.max_in_sentence == 1
        assert kiwi.ever_capitalized is False

    def test_abbreviation_table_blocks_split(self, make_docset):
        # "fig." reads as the figure abbreviation, so no boundary after it
        x = make_docset(["See fig. 9 for details."])
        assert x.num_sentences == 1

    def test_earliest_position(self, make_docset):
        x = make_docset(["Lead word here. Plum arrived late.", "Plum first here."])
        assert x.vocabulary["plum"].earliest_position == 0
        assert x.vocabulary["lead"].earliest_position == 0
        assert x.vocabulary["late"].earliest_position == 1

    def test_budget_recorded(self, make_docset):
        assert make_docset(["One thing."], budget=123).budget_bytes == 123
        assert make_docset(["One thing."]).budget_bytes is None


class TestLoadDataset:
    def _write(self, tmp_path, lines):
        path = tmp_path / "data.jsonl"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def _record(self, **overrides):
        record = {
            "set_id": "s1",
            "documents": ["A fine day. It went well."],
            "references": ["fine day went well"],
        }
        record.update(overrides)
        return record

    def test_roundtrip(self, tmp_path, stopwords):
        path = self._write(
            tmp_path,
            [json.dumps(self._record()), json.dumps(self._record(set_id="s2", budget_bytes=40))],
        )
        data = load_dataset(path, stopwords)
        assert [x.set_id for x, _ in data] == ["s1", "s2"]
        assert data[1][0].budget_bytes == 40
        assert data[0][1].references[0][0].normalized == "fine"

    def test_malformed_json_reports_line(self, tmp_path):
        path = self._write(tmp_path, [json.dumps(self._record()), "{not json"])
        with pytest.raises(DatasetError, match="line 2"):
            load_dataset(path)

    def test_missing_field(self, tmp_path):
        record = self._record()
        del record["references"]
        path = self._write(tmp_path, [json.dumps(record)])
        with pytest.raises(DatasetError, match="missing field"):
            load_dataset(path)

    def test_no_references(self, tmp_path):
        path = self._write(tmp_path, [json.dumps(self._record(references=[]))])
        with pytest.raises(DatasetError, match="no references"):
            load_dataset(path)

    def test_empty_reference_text(self, tmp_path):
        path = self._write(tmp_path, [json.dumps(self._record(references=["..."]))])
        with pytest.raises(DatasetError, match="empty reference"):
            load_dataset(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        with pytest.raises(DatasetError, match="empty"):
            load_dataset(path)

    def test_blank_lines_skipped(self, tmp_path):
        path = self._write(tmp_path, ["", json.dumps(self._record()), ""])
        assert len(load_dataset(path)) == 1


def test_stopword_loader_packaged_default():
    stopwords = load_stopwords()
    assert "the" in stopwords and "of" in stopwords
    assert "cat" not in stopwords


def test_stopword_loader_custom(tmp_path):
    path = tmp_path / "sw.txt"
    path.write_text("# comment\nfoo\nbar\n", encoding="utf-8")
    assert load_stopwords(path) == frozenset({"foo", "bar"})
