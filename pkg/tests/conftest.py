"""
Shared fixtures for the city excellence pipeline tests.
"""

import sys
from pathlib import Path

import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from config import RunConfig  # noqa: E402
from logging_config import configure_logging  # noqa: E402
from models import CityKey, CorpusSummary, PaperRecord  # noqa: E402


FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_path() -> Path:
    return FIXTURES


@pytest.fixture
def golden_path() -> Path:
    return FIXTURES / "golden"


@pytest.fixture
def golden_config(tmp_path) -> RunConfig:
    """Configuration of the checked-in 600-paper, 5-city golden run."""
    return RunConfig(
        input_path=str(FIXTURES / "excellence_corpus.txt"),
        gazetteer_path=str(FIXTURES / "gazetteer.csv"),
        output_prefix=str(tmp_path / "excellence"),
        top_fraction=0.10,
        min_papers=50,
        year=2007,
        doc_types=frozenset({"Article"}),
    ).validate()


@pytest.fixture
def london() -> CityKey:
    return CityKey("LONDON", None, "ENGLAND")


@pytest.fixture
def small_summary() -> CorpusSummary:
    return CorpusSummary(n_total=600, top_fraction=0.10, citation_threshold=16, n_top=60)


def make_record(paper_id: str, citations: int = 0, addresses: str = "Univ X, London, England",
                year: int = 2007, doc_type: str = "Article") -> PaperRecord:
    """Build a minimal valid paper record."""
    return PaperRecord(id=paper_id, year=year, doc_type=doc_type,
                       citations=citations, addresses_raw=addresses)


def export_block(paper_id: str, citations="3", year="2007", doc_type="Article",
                 addresses="Univ X, London, England", extra=()) -> str:
    """Render one field-tagged record block."""
    lines = ["PT J", "AU Doe, J"]
    lines.extend(extra)
    if addresses is not None:
        lines.append(f"C1 {addresses}")
    if doc_type is not None:
        lines.append(f"DT {doc_type}")
    if year is not None:
        lines.append(f"PY {year}")
    if citations is not None:
        lines.append(f"TC {citations}")
    if paper_id is not None:
        lines.append(f"UT {paper_id}")
    lines.append("ER")
    return "\n".join(lines) + "\n\n"


@pytest.fixture(autouse=True)
def reset_logging():
    """Rebind log output to the real stderr after tests that capture it."""
    yield
    configure_logging("INFO")
