"""
Geographic attribution operations for the city excellence pipeline.
Turns raw address fields into normalized city keys and per-paper city
occurrences under integer counting (a paper counts at most once per city).
"""

import re
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, Optional, Sequence, Set, Union

from unidecode import unidecode

from models import CityKey, Occurrence, PaperRecord, RegionOnly, Unparseable
from logging_config import get_logger, log_operation


logger = get_logger(__name__)

DEFAULT_REGION_LEVEL_NAMES = frozenset({"MIDLANDS"})
CLAUSE_SEPARATOR = "; "

_AUTHOR_PREFIX = re.compile(r"^\s*\[[^\]]*\]\s*")
_DISALLOWED = re.compile(r"[^A-Z0-9 \-]+")
_WHITESPACE = re.compile(r"\s+")
_US_STATE = re.compile(r"^([A-Z]{2})\b")
_HAS_DIGIT = re.compile(r"\d")

ParsedAddress = Union[CityKey, RegionOnly, Unparseable]


def normalize(text: str) -> str:
    """Uppercase, fold diacritics to ASCII and collapse whitespace.

    Only letters, digits, spaces and hyphens survive. Idempotent.
    """
    folded = unidecode(text or "").upper()
    folded = _DISALLOWED.sub(" ", folded)
    return _WHITESPACE.sub(" ", folded).strip()


def _split_clauses(addresses_raw: str) -> List[str]:
    """Split on '; ' outside bracketed author lists."""
    clauses: List[str] = []
    depth = 0
    start = 0
    i = 0
    while i < len(addresses_raw):
        char = addresses_raw[i]
        if char == "[":
            depth += 1
        elif char == "]" and depth > 0:
            depth -= 1
        elif depth == 0 and addresses_raw.startswith(CLAUSE_SEPARATOR, i):
            clauses.append(addresses_raw[start:i])
            start = i + len(CLAUSE_SEPARATOR)
            i = start
            continue
        i += 1
    clauses.append(addresses_raw[start:])
    return clauses


def split_addresses(addresses_raw: str) -> List[str]:
    """
    Split a C1 field into address clauses.

    Author lists such as ``[Smith, A.; Doe, B.]`` are stripped, so their own
    semicolons do not split the field.

    Args:
        addresses_raw: Raw address field

    Returns:
        Trimmed, non-empty address clauses in field order
    """
    result = []
    for clause in _split_clauses(addresses_raw or ""):
        clause = _AUTHOR_PREFIX.sub("", clause).strip()
        if clause:
            result.append(clause)
    return result


def _strip_postal_codes(city_token: str) -> str:
    words = city_token.split()
    while words and _HAS_DIGIT.search(words[-1]):
        words.pop()
    while words and _HAS_DIGIT.search(words[0]):
        words.pop(0)
    return " ".join(words)


def parse_city(address: str,
               region_level_names: FrozenSet[str] = DEFAULT_REGION_LEVEL_NAMES) -> ParsedAddress:
    """
    Extract the city key from one address clause.

    The last comma token is the country and the one before it the city. For
    US addresses (``..., Cambridge, MA 02138 USA``) the country is USA and the
    leading two-letter state code becomes the region. Postal codes around the
    city name are dropped.

    Args:
        address: One clause from split_addresses
        region_level_names: Normalized names that denote areas, not cities

    Returns:
        CityKey, RegionOnly for area names, or Unparseable
    """
    tokens = [token.strip() for token in address.split(",")]
    tokens = [token for token in tokens if token]
    if len(tokens) < 2:
        return Unparseable(address, "fewer than 2 comma tokens")

    country_token = normalize(tokens[-1])
    region: Optional[str] = None
    if country_token.endswith("USA"):
        state = _US_STATE.match(country_token)
        if state and country_token != "USA":
            region = state.group(1)
        country_token = "USA"
    if not country_token:
        return Unparseable(address, "empty country")

    city = normalize(_strip_postal_codes(normalize(tokens[-2])))
    if not city:
        return Unparseable(address, "no city token")

    if city in region_level_names:
        return RegionOnly(CityKey(city, region, country_token, region_level=True))
    return CityKey(city, region, country_token)


def city_occurrences(record: PaperRecord,
                     region_level_names: FrozenSet[str] = DEFAULT_REGION_LEVEL_NAMES) -> Set[CityKey]:
    """
    Deduplicated city keys of one paper.

    Identical addresses and different institutions in one city both give a
    single occurrence; unparseable clauses contribute nothing.
    """
    keys: Set[CityKey] = set()
    for clause in split_addresses(record.addresses_raw):
        parsed = parse_city(clause, region_level_names)
        if isinstance(parsed, RegionOnly):
            keys.add(parsed.key)
        elif isinstance(parsed, CityKey):
            keys.add(parsed)
    return keys


@dataclass
class AttributionResult:
    """Occurrences of a corpus plus clause-level counts."""
    occurrences: List[Occurrence] = field(default_factory=list)
    clauses_total: int = 0
    clauses_region_level: int = 0
    clauses_unparseable: int = 0
    papers_without_city: int = 0
    unparseable_examples: List[str] = field(default_factory=list)


@log_operation("attribute_corpus")
def attribute_corpus(records: Sequence[PaperRecord],
                     region_level_names: FrozenSet[str] = DEFAULT_REGION_LEVEL_NAMES,
                     max_examples: int = 10) -> AttributionResult:
    """
    Attribute every record to its cities.

    Args:
        records: Filtered corpus
        region_level_names: Normalized area names
        max_examples: How many unparseable clauses to keep for reporting

    Returns:
        Occurrences sorted by paper id, then key, with clause counts
    """
    result = AttributionResult()
    for record in records:
        keys: Set[CityKey] = set()
        for clause in split_addresses(record.addresses_raw):
            result.clauses_total += 1
            parsed = parse_city(clause, region_level_names)
            if isinstance(parsed, Unparseable):
                result.clauses_unparseable += 1
                if len(result.unparseable_examples) < max_examples:
                    result.unparseable_examples.append(clause)
                continue
            if isinstance(parsed, RegionOnly):
                result.clauses_region_level += 1
                parsed = parsed.key
            keys.add(parsed)
        if not keys:
            result.papers_without_city += 1
        result.occurrences.extend(Occurrence(record.id, key) for key in keys)

    result.occurrences.sort(key=lambda occ: (occ.paper_id, occ.key.sort_key()))
    if result.clauses_unparseable:
        logger.warning("unparseable address clauses", count=result.clauses_unparseable,
                       examples=result.unparseable_examples[:3])
    logger.info("attributed corpus", occurrences=len(result.occurrences),
                region_level=result.clauses_region_level,
                papers_without_city=result.papers_without_city)
    return result


def format_attribution_dump(occurrences: Iterable[Occurrence]) -> str:
    """Tab-separated ``paper_id city region country`` lines sorted by paper id, then key."""
    ordered = sorted(occurrences, key=lambda occ: (occ.paper_id, occ.key.sort_key()))
    lines = [
        f"{occ.paper_id}\t{occ.key.city}\t{occ.key.region or ''}\t{occ.key.country}\n"
        for occ in ordered
    ]
    return "".join(lines)
