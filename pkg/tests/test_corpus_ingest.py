#!/usr/bin/env python3
"""
Unit tests for export parsing and corpus filtering.
"""

import io

import pytest

from conftest import export_block, make_record
from errors import CorpusReadError
from models import CorpusFilter, PaperRecord
from operations.corpus_ingest import filter_corpus, parse_export, read_export, records_by_id


class TestParseExport:
    """Test field-tagged export parsing."""

    def test_parse_single_record(self):
        """A complete block becomes one record."""
        text = export_block("WOS:1", citations="20", extra=["TI A study of attention", "WC Psychology"])
        records, report = parse_export(io.StringIO(text))

        assert report.records_parsed == 1
        assert report.records_skipped == 0
        assert records == [PaperRecord(
            id="WOS:1", year=2007, doc_type="Article", citations=20,
            addresses_raw="Univ X, London, England", title="A study of attention",
            categories=("Psychology",),
        )]

    def test_header_lines_are_ignored(self):
        text = "FN Clarivate Analytics Web of Science\nVR 1.0\n" + export_block("WOS:1") + "EF\n"
        records, report = parse_export(io.StringIO(text))

        assert [r.id for r in records] == ["WOS:1"]
        assert report.blocks_total == 1

    def test_continuation_lines_join_addresses(self):
        text = ("PT J\nC1 Univ A, London, England\n   Univ B, Oxford OX1 3UD, England\n"
                "DT Article\nPY 2007\nTC 4\nUT WOS:9\nER\n")
        records, _ = parse_export(io.StringIO(text))

        assert records[0].addresses_raw == "Univ A, London, England; Univ B, Oxford OX1 3UD, England"

    def test_crlf_and_bom(self):
        text = "\ufeff" + export_block("WOS:1").replace("\n", "\r\n")
        records, report = parse_export(io.StringIO(text))

        assert report.records_parsed == 1
        assert records[0].id == "WOS:1"

    def test_missing_citation_count_is_skipped(self):
        """Block without TC is skipped and reported, never fatal."""
        text = export_block("WOS:1") + export_block("WOS:2", citations=None) + export_block("WOS:3")
        records, report = parse_export(io.StringIO(text))

        assert [r.id for r in records] == ["WOS:1", "WOS:3"]
        assert report.records_skipped == 1
        assert report.skip_reasons[0][1] == "missing tag TC"

    def test_duplicate_id_keeps_first(self):
        text = export_block("WOS:1", citations="5") + export_block("WOS:1", citations="99")
        records, report = parse_export(io.StringIO(text))

        assert len(records) == 1
        assert records[0].citations == 5
        assert report.skip_reasons[0][1] == "duplicate id"

    @pytest.mark.parametrize("year,citations,reason", [
        ("07", "3", "invalid PY value '07'"),
        ("0999", "3", "invalid PY value '0999'"),
        ("0000", "3", "invalid PY value '0000'"),
        ("2007", "-1", "invalid TC value '-1'"),
        ("2007", "many", "invalid TC value 'many'"),
    ])
    def test_invalid_values_are_skipped(self, year, citations, reason):
        records, report = parse_export(io.StringIO(export_block("WOS:1", year=year, citations=citations)))

        assert records == []
        assert report.skip_reasons == [(1, reason)]

    def test_single_character_line_skips_block(self):
        text = export_block("WOS:1") + "X\n" + export_block("WOS:2")[len("PT J\n"):]
        records, report = parse_export(io.StringIO(text))

        assert [r.id for r in records] == ["WOS:1"]
        assert report.records_skipped == 1
        assert report.skip_reasons == [(10, "malformed line 10")]

    def test_two_letter_tag_without_value(self):
        records, report = parse_export(io.StringIO(export_block("WOS:1", extra=("TI",))))

        assert report.records_parsed == 1
        assert records[0].title is None

    def test_empty_stream(self):
        records, report = parse_export(io.StringIO(""))

        assert records == []
        assert report.records_parsed == 0
        assert report.records_skipped == 0

    def test_unterminated_block_is_skipped(self):
        text = export_block("WOS:1") + "PT J\nC1 Univ X, Paris, France\nDT Article\nPY 2007\nTC 1\nUT WOS:2\n"
        records, report = parse_export(io.StringIO(text))

        assert [r.id for r in records] == ["WOS:1"]
        assert report.skip_reasons[-1][1] == "unterminated record"

    def test_read_export_missing_file(self, tmp_path):
        with pytest.raises(CorpusReadError):
            read_export(str(tmp_path / "absent.txt"))

    def test_golden_corpus_report(self, fixtures_path):
        """The golden export has 605 valid blocks and 2 malformed ones."""
        records, report = read_export(str(fixtures_path / "excellence_corpus.txt"))

        assert report.records_parsed == 605
        assert report.records_skipped == 2
        assert len(records_by_id(records)) == 605


class TestFilterCorpus:
    """Test corpus restriction."""

    def test_year_and_doc_type(self):
        records = [
            make_record("a", year=2007, doc_type="Article"),
            make_record("b", year=2007, doc_type="Review"),
            make_record("c", year=2006, doc_type="Article"),
            make_record("d", year=2007, doc_type="article"),
        ]
        kept = filter_corpus(records, CorpusFilter(year=2007, doc_types=frozenset({"Article"})))

        assert [r.id for r in kept] == ["a", "d"]

    def test_doc_type_matches_whole_token(self):
        records = [make_record("a", doc_type="Article; Proceedings Paper")]

        assert filter_corpus(records, CorpusFilter()) == []

    def test_no_year_keeps_all_years(self):
        records = [make_record("a", year=2006), make_record("b", year=2007)]

        assert len(filter_corpus(records, CorpusFilter())) == 2

    def test_category_filter(self):
        records = [
            PaperRecord("a", 2007, "Article", 1, "X, London, England", categories=("Psychology, Clinical",)),
            PaperRecord("b", 2007, "Article", 1, "X, London, England", categories=("Economics",)),
            PaperRecord("c", 2007, "Article", 1, "X, London, England"),
        ]
        kept = filter_corpus(records, CorpusFilter(categories=frozenset({"psychology, clinical"})))

        assert [r.id for r in kept] == ["a", "c"]

    def test_golden_corpus_filter(self, fixtures_path):
        records, _ = read_export(str(fixtures_path / "excellence_corpus.txt"))
        kept = filter_corpus(records, CorpusFilter(year=2007))

        assert len(kept) == 600
