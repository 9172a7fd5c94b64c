"""
Excellence statistics for the city excellence pipeline.

Determines the top-paper citation threshold, aggregates observed and expected
top-paper counts per city, and tests each city with the pooled two-proportion
z-test (city papers against all remaining papers, no continuity correction).
"""

import math
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Sequence, TextIO, Tuple

from errors import StatisticsError
from models import (
    CityKey, CityStats, CorpusSummary, Direction, Occurrence, PaperRecord,
    SignificanceClass, SignificanceLevel,
)
from logging_config import get_logger, log_operation


logger = get_logger(__name__)

# Two-sided standard normal critical values.
Z_P05 = 1.959964
Z_P01 = 2.575829
Z_P001 = 3.290527

DIRECTION_EPSILON = 1e-9

STATS_HEADER = "city\tregion\tcountry\tn_papers\tobserved\texpected\tz\tstars\tdirection"


def _exact_fraction(f: float) -> Fraction:
    # repr keeps the decimal the caller wrote, so 0.10 compares as exactly 1/10
    return Fraction(repr(float(f)))


def citation_threshold(records: Sequence[PaperRecord], f: float) -> Tuple[int, int]:
    """
    Pick the citation threshold c whose top share is closest to f.

    share(c) is the fraction of papers with at least c citations. Distance
    ties go to the larger top set (smaller c). Thresholds that select the
    same papers are represented by the largest of them, i.e. the lowest
    citation count inside the top set.

    Args:
        records: Corpus
        f: Target top fraction in (0, 1)

    Returns:
        (c, T) with T the number of papers having at least c citations

    Raises:
        StatisticsError: If the corpus is empty or f is out of range
    """
    if not records:
        raise StatisticsError("empty corpus")
    if not 0.0 < f < 1.0:
        raise StatisticsError(f"top fraction {f} outside (0, 1)")

    n_total = len(records)
    target = _exact_fraction(f)
    counts: Dict[int, int] = {}
    for record in records:
        counts[record.citations] = counts.get(record.citations, 0) + 1

    best_c = max(counts) + 1
    best_top = 0
    best_distance = abs(Fraction(0) - target)
    cumulative = 0
    for value in sorted(counts, reverse=True):
        cumulative += counts[value]
        distance = abs(Fraction(cumulative, n_total) - target)
        if distance <= best_distance:
            best_c, best_top, best_distance = value, cumulative, distance
    return best_c, best_top


@log_operation("summarize_corpus")
def summarize_corpus(records: Sequence[PaperRecord], f: float) -> CorpusSummary:
    """Build the corpus summary (N, f, c, T)."""
    c, n_top = citation_threshold(records, f)
    summary = CorpusSummary(n_total=len(records), top_fraction=f,
                            citation_threshold=c, n_top=n_top)
    logger.info("citation threshold", n_total=summary.n_total, threshold=c,
                n_top=n_top, share=round(summary.top_share, 6))
    return summary


@log_operation("aggregate")
def aggregate(records: Sequence[PaperRecord], occurrences: Iterable[Occurrence],
              c: int) -> Dict[CityKey, Tuple[int, int]]:
    """
    Count papers and top papers per city.

    Args:
        records: Corpus the occurrences were drawn from
        occurrences: (paper, city) attributions
        c: Citation threshold

    Returns:
        Mapping CityKey -> (n_papers, observed), ordered by key

    Raises:
        StatisticsError: If an occurrence names a paper not in records
    """
    citations = {record.id: record.citations for record in records}
    papers: Dict[CityKey, set] = {}
    for occurrence in occurrences:
        if occurrence.paper_id not in citations:
            raise StatisticsError(f"dangling paper id {occurrence.paper_id}")
        papers.setdefault(occurrence.key, set()).add(occurrence.paper_id)

    result: Dict[CityKey, Tuple[int, int]] = {}
    for key in sorted(papers, key=CityKey.sort_key):
        ids = papers[key]
        result[key] = (len(ids), sum(1 for paper_id in ids if citations[paper_id] >= c))
    return result


def two_proportion_z(observed: int, n1: int, T: float, N: int) -> float:
    """
    Pooled z statistic comparing a city's top share with the rest of the corpus.

    p1 = observed/n1, p2 = (T - observed)/(N - n1), pooled p = T/N,
    z = (p1 - p2) / sqrt(p(1 - p)(1/n1 + 1/(N - n1))).

    T may be fractional when a pooled share is imposed rather than counted.

    Raises:
        StatisticsError: For n1 = N, a pooled share of 0 or 1, or counts out of range
    """
    if n1 == N:
        raise StatisticsError("city equals corpus")
    if not 1 <= n1 < N:
        raise StatisticsError(f"city size {n1} outside [1, {N})")
    if not 0 <= T <= N:
        raise StatisticsError(f"top count {T} outside [0, {N}]")
    if not 0 <= observed <= min(n1, T):
        raise StatisticsError(f"observed {observed} outside [0, min({n1}, {T})]")

    pooled = T / N
    if pooled <= 0.0 or pooled >= 1.0:
        raise StatisticsError("degenerate corpus")

    p1 = observed / n1
    p2 = (T - observed) / (N - n1)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / (N - n1)))
    z = (p1 - p2) / se
    return z + 0.0


def classify(z: float) -> SignificanceClass:
    """Map |z| onto the two-sided significance classes.

    Raises:
        StatisticsError: If z is not finite
    """
    if not math.isfinite(z):
        raise StatisticsError(f"non-finite z {z}")
    magnitude = abs(z)
    if magnitude >= Z_P001:
        return SignificanceClass.of(SignificanceLevel.P001)
    if magnitude >= Z_P01:
        return SignificanceClass.of(SignificanceLevel.P01)
    if magnitude >= Z_P05:
        return SignificanceClass.of(SignificanceLevel.P05)
    return SignificanceClass.of(SignificanceLevel.NONE)


def p_value(z: float) -> float:
    """Two-sided normal p-value of z."""
    return math.erfc(abs(z) / math.sqrt(2.0))


def direction_of(observed: int, expected: float) -> Direction:
    if observed > expected + DIRECTION_EPSILON:
        return Direction.ABOVE
    if observed < expected - DIRECTION_EPSILON:
        return Direction.BELOW
    return Direction.EQUAL


def city_stats(key: CityKey, n_papers: int, observed: int, summary: CorpusSummary) -> CityStats:
    """
    Observed vs. expected statistics for one city.

    expected = n_papers * T / N.

    Raises:
        StatisticsError: If n_papers < 1 or the z-test is undefined
    """
    if n_papers < 1:
        raise StatisticsError(f"city {key} has no papers")
    expected = n_papers * summary.n_top / summary.n_total
    z = two_proportion_z(observed, n_papers, summary.n_top, summary.n_total)
    return CityStats(
        key=key,
        n_papers=n_papers,
        observed=observed,
        expected=expected,
        z=z,
        significance=classify(z),
        direction=direction_of(observed, expected),
        p_value=p_value(z),
    )


@log_operation("compute_city_stats")
def compute_city_stats(aggregates: Mapping[CityKey, Tuple[int, int]],
                       summary: CorpusSummary) -> List[CityStats]:
    """City statistics for every aggregated key, ordered by key."""
    return [
        city_stats(key, n_papers, observed, summary)
        for key, (n_papers, observed) in sorted(aggregates.items(), key=lambda item: item[0].sort_key())
    ]


def cutoff_order(stats: CityStats) -> Tuple[float, Tuple[str, str, str]]:
    return (-stats.deviation, stats.key.sort_key())


@log_operation("apply_city_cutoff")
def apply_city_cutoff(stats: Sequence[CityStats], min_papers: int = 50) -> List[CityStats]:
    """
    Keep cities with at least min_papers papers.

    Returns:
        Retained cities by descending |observed - expected|, then key
    """
    if min_papers < 1:
        raise StatisticsError(f"min papers must be at least 1, got {min_papers}")
    kept = [item for item in stats if item.n_papers >= min_papers]
    kept.sort(key=cutoff_order)
    logger.info("applied city cutoff", min_papers=min_papers, kept=len(kept), dropped=len(stats) - len(kept))
    return kept


def warn_small_expected(stats: Iterable[CityStats], minimum: float = 5.0) -> List[CityStats]:
    """Log cities whose expected top count is below the z-test's working minimum."""
    small = [item for item in stats if item.expected < minimum]
    for item in small:
        logger.warning("expected top count below minimum", city=str(item.key),
                       expected=round(item.expected, 3), minimum=minimum)
    return small


def format_stats_dump(stats: Iterable[CityStats]) -> str:
    """Tab-separated statistics dump, one row per city in the given order."""
    lines = [STATS_HEADER + "\n"]
    for item in stats:
        lines.append(
            f"{item.key.city}\t{item.key.region or ''}\t{item.key.country}\t"
            f"{item.n_papers}\t{item.observed}\t{item.expected:.6f}\t{item.z:.6f}\t"
            f"{item.significance.stars}\t{item.direction.value}\n"
        )
    return "".join(lines)


def read_stats_dump(stream: TextIO) -> List[CityStats]:
    """
    Parse a statistics dump back into city statistics.

    Raises:
        StatisticsError: If the header or a row is malformed
    """
    lines = [line.rstrip("\r\n") for line in stream]
    if not lines or lines[0] != STATS_HEADER:
        raise StatisticsError("statistics dump lacks the expected header")

    result: List[CityStats] = []
    for line_number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 9:
            raise StatisticsError(f"statistics dump line {line_number}: expected 9 fields, got {len(fields)}")
        city, region, country, n_papers, observed, expected, z, stars, direction = fields
        try:
            z_value = float(z)
            result.append(CityStats(
                key=CityKey(city, region or None, country),
                n_papers=int(n_papers),
                observed=int(observed),
                expected=float(expected),
                z=z_value,
                significance=SignificanceClass.from_stars(stars),
                direction=Direction(direction),
                p_value=p_value(z_value),
            ))
        except ValueError as e:
            raise StatisticsError(f"statistics dump line {line_number}: {e}")
    return result
