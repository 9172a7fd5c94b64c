#!/usr/bin/env python3
"""
City Excellence Pipeline

Finds geographic centers of research excellence in a bibliographic export:
for every city it compares the observed number of highly cited papers with
the number expected from the city's output, tests the difference with a
two-proportion z-test and writes map overlays.

Usage:
    python src/excellence_pipeline.py run --input savedrecs.txt --out-prefix out/psych
    python src/excellence_pipeline.py stats --input savedrecs.txt --out-prefix out/psych
    python src/excellence_pipeline.py map --stats out/psych.stats.tsv --out-prefix out/psych

Subcommands:
    run    ingest, attribute, test, geocode and emit all output files
    stats  stop after writing <prefix>.stats.tsv
    map    emit the map files from an existing statistics dump

Outputs:
    <prefix>.stats.tsv      per-city statistics in cutoff order
    <prefix>.gpsviz.txt     GPS Visualizer text
    <prefix>.geojson        GeoJSON FeatureCollection
    <prefix>.kml            KML document
"""

import argparse
import asyncio
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from dotenv import load_dotenv

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config import ConfigManager, RunConfig, build_run_config
from errors import (
    ConfigurationError, ExcellenceMapError, StatisticsError, StrictGeocodingError, EXIT_OK,
)
from geocoder_client import RemoteGeocoder
from models import (
    CityKey, CityStats, CorpusFilter, Gazetteer, GeoPoint, MapMarker, Missing, RunReport,
)
from operations.corpus_ingest import filter_corpus, read_export
from operations.excellence_stats import (
    aggregate, apply_city_cutoff, compute_city_stats, format_stats_dump,
    read_stats_dump, summarize_corpus, warn_small_expected,
)
from operations.gazetteer import load_gazetteer, resolve
from operations.geo_attribution import attribute_corpus, format_attribution_dump
from operations.map_emit import marker_style, write_document, write_map_files
from logging_config import configure_logging, get_logger


logger = get_logger(__name__)

STATS_SUFFIX = ".stats.tsv"
ATTRIBUTION_SUFFIX = ".attribution.tsv"
SUMMARY_LABEL_WIDTH = 32


def _require_file(path: Optional[str], what: str) -> str:
    if not path:
        raise ConfigurationError(f"no {what} given")
    if not Path(path).is_file():
        raise ConfigurationError(f"{what} not found: {path}")
    return path


def _require_prefix(prefix: Optional[str]) -> str:
    if not prefix:
        raise ConfigurationError("no output prefix given")
    return prefix


class ExcellencePipeline:
    """Runs the pipeline stages for one RunConfig and collects the run report."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.report = RunReport(summary=None, min_papers=config.min_papers)
        self.gazetteer: Optional[Gazetteer] = None

    def compute_statistics(self) -> List[CityStats]:
        """
        Ingest, filter and attribute the corpus, then test every city.

        Returns:
            Cities passing the cutoff, in cutoff order

        Raises:
            CorpusReadError: If the export cannot be read
            StatisticsError: If the filtered corpus is empty or degenerate
        """
        config = self.config
        input_path = _require_file(config.input_path, "input file")
        prefix = _require_prefix(config.output_prefix)

        records, parse_report = read_export(input_path)
        self.report.parse_report = parse_report
        corpus = filter_corpus(records, CorpusFilter(
            year=config.year, doc_types=config.doc_types, categories=config.categories,
        ))

        attribution = attribute_corpus(corpus, config.region_level_names)
        if config.attribution_dump:
            write_document(f"{prefix}{ATTRIBUTION_SUFFIX}",
                           format_attribution_dump(attribution.occurrences))

        summary = summarize_corpus(corpus, config.top_fraction)
        self.report.summary = summary
        counts = aggregate(corpus, attribution.occurrences, summary.citation_threshold)
        all_stats = compute_city_stats(counts, summary)
        kept = apply_city_cutoff(all_stats, config.min_papers)
        warn_small_expected(kept, config.min_expected_warning)

        self.report.cities_total = len(all_stats)
        self.report.cities_after_cutoff = len(kept)
        self.report.city_stats = kept
        self.report.output_paths.append(
            write_document(f"{prefix}{STATS_SUFFIX}", format_stats_dump(kept))
        )
        return kept

    def load_statistics(self, stats_path: str) -> List[CityStats]:
        """Read a statistics dump written by an earlier run; rows are already in cutoff order."""
        _require_file(stats_path, "statistics dump")
        try:
            with open(stats_path, "r", encoding="utf-8", newline="") as handle:
                stats = read_stats_dump(handle)
        except OSError as e:
            raise StatisticsError(f"cannot read statistics dump {stats_path}: {e}")
        self.report.cities_total = len(stats)
        self.report.cities_after_cutoff = len(stats)
        self.report.city_stats = stats
        return stats

    async def locate(self, stats: Sequence[CityStats]) -> List[MapMarker]:
        """
        Find coordinates for every city and style its marker.

        The gazetteer is consulted first; the remote geocoder, when configured,
        only sees keys the gazetteer lacks.

        Raises:
            StrictGeocodingError: If strict geocoding is on and any city has no coordinates
        """
        gazetteer_path = _require_file(self.config.gazetteer_path, "gazetteer")
        self.gazetteer = load_gazetteer(gazetteer_path)

        located: Dict[CityKey, Union[GeoPoint, Missing]] = {}
        labels: Dict[CityKey, tuple] = {}
        pending: List[CityKey] = []
        for item in stats:
            found = resolve(self.gazetteer, item.key)
            if isinstance(found, Missing):
                pending.append(item.key)
                continue
            located[item.key] = found.point
            labels[item.key] = (self.gazetteer.label_for(found.matched_key),
                                self.gazetteer.country_label_for(found.matched_key))

        if pending and self.config.geocoder is not None:
            async with RemoteGeocoder(self.config.geocoder) as geocoder:
                for key in pending:
                    located[key] = await geocoder.geocode(key)
                logger.info("remote geocoding finished", requests=geocoder.stats.total_requests,
                            failed=geocoder.stats.failed_requests, cache_hits=geocoder.stats.cache_hits,
                            avg_response_s=round(geocoder.stats.average_response_time, 3))

        markers: List[MapMarker] = []
        missing: List[CityKey] = []
        for item in stats:
            point = located.get(item.key)
            label, country_label = labels.get(item.key, (item.key.display_label(), item.key.country_label()))
            self.report.labels[item.key] = label
            if point is None or isinstance(point, Missing):
                logger.warning("⚠️ no coordinates for city", city=str(item.key))
                missing.append(item.key)
                continue
            markers.append(marker_style(item, point, label, country_label))

        self.report.cities_geocoded = len(markers)
        self.report.cities_missing_coordinates = missing
        if missing and self.config.strict_geocoding:
            raise StrictGeocodingError(str(key) for key in missing)
        return markers

    def emit(self, markers: Sequence[MapMarker]) -> List[str]:
        paths = write_map_files(_require_prefix(self.config.output_prefix), markers)
        self.report.output_paths.extend(paths)
        return paths


async def run(config: RunConfig) -> RunReport:
    """
    Execute the full pipeline.

    Args:
        config: Validated run configuration

    Returns:
        RunReport with corpus summary, city counts and output paths

    Raises:
        ExcellenceMapError: Any fatal stage error (its exit_code selects the process status)
    """
    pipeline = ExcellencePipeline(config)
    stats = pipeline.compute_statistics()
    markers = await pipeline.locate(stats)
    pipeline.emit(markers)
    logger.info("✅ run complete", cities=pipeline.report.cities_after_cutoff,
                geocoded=pipeline.report.cities_geocoded,
                missing=len(pipeline.report.cities_missing_coordinates))
    return pipeline.report


def run_stats(config: RunConfig) -> RunReport:
    """Run up to and including the statistics dump."""
    pipeline = ExcellencePipeline(config)
    pipeline.compute_statistics()
    return pipeline.report


async def run_map(config: RunConfig, stats_path: str) -> RunReport:
    """Emit the map files from a statistics dump and the gazetteer."""
    pipeline = ExcellencePipeline(config)
    stats = pipeline.load_statistics(stats_path)
    markers = await pipeline.locate(stats)
    pipeline.emit(markers)
    return pipeline.report


def print_summary(report: RunReport, limit: int = 20) -> str:
    """
    Human-readable run summary: corpus line, city counts and the top cities
    by |observed - expected|.
    """
    lines: List[str] = []
    summary = report.summary
    if summary is not None:
        lines.append(
            f"Corpus: N={summary.n_total} papers, T={summary.n_top} top papers "
            f"(citations >= {summary.citation_threshold}, target share {summary.top_fraction:.0%})"
        )
    lines.append(
        f"Cities: {report.cities_total} attributed, {report.cities_after_cutoff} after cutoff, "
        f"{report.cities_geocoded} geocoded, {len(report.cities_missing_coordinates)} missing coordinates"
    )
    if not report.city_stats:
        lines.append("no cities passed the cutoff")
        return "\n".join(lines) + "\n"

    lines.append(f"{'city':<{SUMMARY_LABEL_WIDTH}} {'papers':>6} {'obs':>5}  {'exp':>5}  {'sig':<3} {'z':>7}")
    for item in report.city_stats[:limit]:
        label = report.labels.get(item.key) or item.key.display_label()
        lines.append(
            f"{label:<{SUMMARY_LABEL_WIDTH}} {item.n_papers:>6} {item.observed:>5}  "
            f"{item.expected:>5.1f}  {item.significance.stars:<3} {item.z:>7.2f}"
        )
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="City excellence pipeline")
    parser.add_argument("--config", help="YAML configuration file (default: config/config.yaml)")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Diagnostic log level (default: from config or LOG_LEVEL)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add_common(sub: argparse.ArgumentParser, corpus: bool, geocoding: bool):
        sub.add_argument("--out-prefix", required=True, help="Output file prefix")
        if corpus:
            sub.add_argument("--input", required=True, help="Field-tagged bibliographic export")
            sub.add_argument("--top-fraction", type=float, help="Share of papers counted as top papers (default: 0.10)")
            sub.add_argument("--min-papers", type=int, help="Minimum papers per city (default: 50)")
            sub.add_argument("--year", type=int, help="Keep only this publication year")
            sub.add_argument("--doc-type", action="append", dest="doc_types",
                             help="Document type to keep (repeatable, default: Article)")
            sub.add_argument("--category", action="append", dest="categories",
                             help="Subject category to keep (repeatable)")
            sub.add_argument("--attribution-dump", action="store_true",
                             help="Also write <prefix>.attribution.tsv")
        if geocoding:
            sub.add_argument("--gazetteer", help="Gazetteer CSV (default: from config)")
            sub.add_argument("--strict-geocoding", action="store_true", default=None,
                             help="Fail when any city has no coordinates")
            sub.add_argument("--geocoder-url", help="Remote geocoder URL template with {query} and {key}")
            sub.add_argument("--geocoder-delay-ms", type=int, help="Minimum delay between geocoder requests")
            sub.add_argument("--geocoder-cache", help="Geocoder cache CSV")
        sub.add_argument("--summary-limit", type=int, help="Cities listed in the summary (default: 20)")

    add_common(subparsers.add_parser("run", help="Run the full pipeline"), corpus=True, geocoding=True)
    add_common(subparsers.add_parser("stats", help="Stop after the statistics dump"), corpus=True, geocoding=False)
    map_parser = subparsers.add_parser("map", help="Emit map files from a statistics dump")
    map_parser.add_argument("--stats", required=True, help="Statistics dump written by run or stats")
    add_common(map_parser, corpus=False, geocoding=True)
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, object]:
    return {
        "input_path": getattr(args, "input", None),
        "gazetteer_path": getattr(args, "gazetteer", None),
        "output_prefix": args.out_prefix,
        "top_fraction": getattr(args, "top_fraction", None),
        "min_papers": getattr(args, "min_papers", None),
        "year": getattr(args, "year", None),
        "doc_types": getattr(args, "doc_types", None),
        "categories": getattr(args, "categories", None),
        "strict_geocoding": getattr(args, "strict_geocoding", None),
        "geocoder_url": getattr(args, "geocoder_url", None),
        "geocoder_delay_ms": getattr(args, "geocoder_delay_ms", None),
        "geocoder_cache": getattr(args, "geocoder_cache", None),
        "attribution_dump": getattr(args, "attribution_dump", False),
        "summary_limit": args.summary_limit,
    }


async def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run the selected subcommand and return the exit status."""
    load_dotenv()
    args = build_parser().parse_args(argv)

    try:
        manager = ConfigManager(args.config)
        manager.load_config()
        configure_logging(args.log_level or manager.get_log_level())
        config = build_run_config(overrides_from_args(args), manager)

        if args.command == "run":
            report = await run(config)
        elif args.command == "stats":
            report = run_stats(config)
        else:
            report = await run_map(config, args.stats)
    except ExcellenceMapError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code

    sys.stdout.write(print_summary(report, config.summary_limit))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(asyncio.run(main()))
