"""
Corpus ingest operations for the city excellence pipeline.
Parses field-tagged bibliographic exports (WoS-style tags) into paper records
and restricts the corpus by year, document type and subject category.
"""

import re
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

from errors import CorpusReadError
from models import CorpusFilter, PaperRecord, ParseReport
from logging_config import get_logger, log_operation


logger = get_logger(__name__)

MANDATORY_TAGS = ("UT", "PY", "DT", "TC", "C1")
HEADER_TAGS = ("FN", "VR", "EF")
END_OF_RECORD = "ER"
CONTINUATION_PREFIX = "   "
VALUE_SEPARATOR = "; "

_YEAR_PATTERN = re.compile(r"^[1-9]\d{3}$")
_COUNT_PATTERN = re.compile(r"^\d+$")


class _Block:
    """Tag values of one record block while it is being read."""

    def __init__(self, line_number: int):
        self.line_number = line_number
        self.fields: Dict[str, str] = {}
        self.last_tag: Optional[str] = None
        self.problem: Optional[str] = None

    def add(self, tag: str, value: str) -> None:
        if tag in self.fields:
            self.fields[tag] = f"{self.fields[tag]}{VALUE_SEPARATOR}{value}"
        else:
            self.fields[tag] = value
        self.last_tag = tag

    def extend(self, value: str) -> None:
        self.fields[self.last_tag] = f"{self.fields[self.last_tag]}{VALUE_SEPARATOR}{value}"


def _split_categories(raw: Optional[str]) -> Tuple[str, ...]:
    if not raw:
        return ()
    return tuple(part.strip() for part in raw.split(";") if part.strip())


def _build_record(block: _Block, seen_ids: set) -> Tuple[Optional[PaperRecord], Optional[str]]:
    """Validate a finished block; returns the record or the skip reason."""
    if block.problem:
        return None, block.problem
    for tag in MANDATORY_TAGS:
        if tag not in block.fields:
            return None, f"missing tag {tag}"

    record_id = block.fields["UT"].strip()
    if not record_id:
        return None, "empty UT value"
    year_raw = block.fields["PY"].strip()
    if not _YEAR_PATTERN.match(year_raw):
        return None, f"invalid PY value {year_raw!r}"
    citations_raw = block.fields["TC"].strip()
    if not _COUNT_PATTERN.match(citations_raw):
        return None, f"invalid TC value {citations_raw!r}"
    if record_id in seen_ids:
        return None, "duplicate id"

    try:
        record = PaperRecord(
            id=record_id,
            year=int(year_raw),
            doc_type=block.fields["DT"].strip(),
            citations=int(citations_raw),
            addresses_raw=block.fields["C1"].strip(),
            title=block.fields.get("TI", "").strip() or None,
            categories=_split_categories(block.fields.get("WC")),
        )
    except ValueError as e:
        return None, str(e)
    return record, None


@log_operation("parse_export")
def parse_export(stream: TextIO) -> Tuple[List[PaperRecord], ParseReport]:
    """
    Parse a field-tagged export into paper records.

    Each record is a run of ``XX value`` lines ending with ``ER``; lines that
    start with three spaces continue the previous tag. Malformed blocks are
    skipped and reported, never fatal.

    Args:
        stream: UTF-8 text stream (LF or CRLF line endings)

    Returns:
        Records in input order and the parse report

    Raises:
        CorpusReadError: If the stream cannot be read
    """
    records: List[PaperRecord] = []
    report = ParseReport()
    seen_ids: set = set()
    block: Optional[_Block] = None

    def finish(current: _Block) -> None:
        record, reason = _build_record(current, seen_ids)
        if record is None:
            report.records_skipped += 1
            report.skip_reasons.append((current.line_number, reason))
            logger.warning("skipped record", line=current.line_number, reason=reason)
        else:
            seen_ids.add(record.id)
            records.append(record)
            report.records_parsed += 1

    try:
        for line_number, raw_line in enumerate(stream, start=1):
            line = raw_line.rstrip("\r\n")
            if line_number == 1:
                line = line.lstrip("\ufeff")
            if not line.strip():
                continue

            if line.startswith(CONTINUATION_PREFIX):
                if block is not None and block.last_tag is not None:
                    block.extend(line.strip())
                continue

            if line.rstrip() == END_OF_RECORD:
                if block is not None:
                    finish(block)
                block = None
                continue

            tag = line[:2]
            if block is None and tag in HEADER_TAGS:
                continue
            if block is None:
                block = _Block(line_number)

            if len(line) == 2:
                block.add(tag, "")
            elif len(line) > 2 and line[2] == " ":
                block.add(tag, line[3:].strip())
            elif block.problem is None:
                block.problem = f"malformed line {line_number}"
    except (OSError, UnicodeDecodeError) as e:
        raise CorpusReadError(f"cannot read export: {e}")

    if block is not None:
        block.problem = block.problem or "unterminated record"
        finish(block)

    logger.info("parsed export", records=report.records_parsed, skipped=report.records_skipped)
    return records, report


def read_export(path: str) -> Tuple[List[PaperRecord], ParseReport]:
    """Open and parse an export file.

    Raises:
        CorpusReadError: If the file cannot be opened or read
    """
    try:
        with open(Path(path), "r", encoding="utf-8-sig", newline="") as f:
            return parse_export(f)
    except OSError as e:
        raise CorpusReadError(f"cannot open export {path}: {e}")


def _matches_categories(record: PaperRecord, allowed: Optional[frozenset]) -> bool:
    if not allowed or not record.categories:
        return True
    return any(category.casefold() in allowed for category in record.categories)


@log_operation("filter_corpus")
def filter_corpus(records: Sequence[PaperRecord], corpus_filter: CorpusFilter) -> List[PaperRecord]:
    """
    Keep the records whose document type, year and categories pass the filter.

    Document types match case-insensitively on the whole token. Records
    without subject categories pass the category filter.

    Args:
        records: Parsed records
        corpus_filter: Filter settings

    Returns:
        Matching records, in input order
    """
    doc_types = {doc_type.strip().casefold() for doc_type in corpus_filter.doc_types}
    categories = None
    if corpus_filter.categories:
        categories = frozenset(category.strip().casefold() for category in corpus_filter.categories)

    kept = [
        record for record in records
        if record.doc_type.strip().casefold() in doc_types
        and (corpus_filter.year is None or record.year == corpus_filter.year)
        and _matches_categories(record, categories)
    ]
    logger.info("filtered corpus", kept=len(kept), dropped=len(records) - len(kept))
    return kept


def records_by_id(records: Iterable[PaperRecord]) -> Dict[str, PaperRecord]:
    return {record.id: record for record in records}
