"""
Data models for the city excellence pipeline.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, List, Dict, Tuple, FrozenSet
from enum import Enum


class SignificanceLevel(Enum):
    """Two-sided significance levels of the z-test."""
    NONE = "none"
    P05 = "p05"
    P01 = "p01"
    P001 = "p001"


class Direction(Enum):
    """Observed top-paper count relative to the expected count."""
    ABOVE = "ABOVE"
    BELOW = "BELOW"
    EQUAL = "EQUAL"


class ColorClass(Enum):
    """Marker color classes."""
    DARK_GREEN = "DARK_GREEN"
    LIGHT_GREEN = "LIGHT_GREEN"
    GREY = "GREY"
    ORANGE_RED = "ORANGE_RED"
    RED = "RED"


STARS_BY_LEVEL: Dict[SignificanceLevel, str] = {
    SignificanceLevel.NONE: "",
    SignificanceLevel.P05: "*",
    SignificanceLevel.P01: "**",
    SignificanceLevel.P001: "***",
}


@dataclass(frozen=True)
class PaperRecord:
    """One publication from a bibliographic export."""
    id: str
    year: int
    doc_type: str
    citations: int
    addresses_raw: str
    title: Optional[str] = None
    categories: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise ValueError("record id must be non-empty")
        if self.citations < 0:
            raise ValueError(f"negative citation count {self.citations}")
        if not 1000 <= self.year <= 9999:
            raise ValueError(f"year {self.year} is not a 4-digit year")


@dataclass(frozen=True)
class CorpusFilter:
    """Corpus restriction by year, document type and (optionally) subject category."""
    year: Optional[int] = None
    doc_types: FrozenSet[str] = frozenset({"Article"})
    categories: Optional[FrozenSet[str]] = None

    def __post_init__(self):
        if not self.doc_types:
            raise ValueError("doc_types must not be empty")


@dataclass
class ParseReport:
    """Outcome of parsing one export stream."""
    records_parsed: int = 0
    records_skipped: int = 0
    skip_reasons: List[Tuple[int, str]] = field(default_factory=list)

    @property
    def blocks_total(self) -> int:
        return self.records_parsed + self.records_skipped


@dataclass(frozen=True)
class CityKey:
    """Normalized (city, region, country) attribution unit.

    ``region_level`` marks keys that stand for an area broader than a city.
    It is informational and does not take part in equality or hashing.
    """
    city: str
    region: Optional[str]
    country: str
    region_level: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not self.city or not self.country:
            raise ValueError("city and country must be non-empty")

    def sort_key(self) -> Tuple[str, str, str]:
        return (self.city, self.region or "", self.country)

    def without_region(self) -> "CityKey":
        return CityKey(self.city, None, self.country, self.region_level)

    def country_label(self) -> str:
        return self.country if self.country == "USA" else self.country.title()

    def display_label(self) -> str:
        return f"{self.city.title()}, {self.country_label()}"

    def __str__(self) -> str:
        if self.region:
            return f"{self.city}/{self.region}/{self.country}"
        return f"{self.city}/{self.country}"


@dataclass(frozen=True)
class RegionOnly:
    """Address clause that names an area rather than a city."""
    key: CityKey


@dataclass(frozen=True)
class Unparseable:
    """Address clause from which no city could be extracted."""
    clause: str
    reason: str


@dataclass(frozen=True)
class Occurrence:
    """One (paper, city) attribution."""
    paper_id: str
    key: CityKey


@dataclass(frozen=True)
class CorpusSummary:
    """Corpus size N, top fraction f, citation threshold c and top-paper count T."""
    n_total: int
    top_fraction: float
    citation_threshold: int
    n_top: int

    def __post_init__(self):
        if not 0.0 < self.top_fraction < 1.0:
            raise ValueError(f"top fraction {self.top_fraction} outside (0, 1)")
        if not 0 <= self.n_top <= self.n_total:
            raise ValueError(f"top count {self.n_top} outside [0, {self.n_total}]")

    @property
    def top_share(self) -> float:
        return self.n_top / self.n_total


@dataclass(frozen=True)
class SignificanceClass:
    """Significance level with its star marking."""
    level: SignificanceLevel
    stars: str

    @classmethod
    def of(cls, level: SignificanceLevel) -> "SignificanceClass":
        return cls(level, STARS_BY_LEVEL[level])

    @classmethod
    def from_stars(cls, stars: str) -> "SignificanceClass":
        for level, marking in STARS_BY_LEVEL.items():
            if marking == stars:
                return cls(level, marking)
        raise ValueError(f"unknown significance marking {stars!r}")

    @property
    def significant(self) -> bool:
        return self.level is not SignificanceLevel.NONE


@dataclass(frozen=True)
class CityStats:
    """Observed vs. expected top papers for one city."""
    key: CityKey
    n_papers: int
    observed: int
    expected: float
    z: float
    significance: SignificanceClass
    direction: Direction
    p_value: Optional[float] = None

    @property
    def deviation(self) -> float:
        return abs(self.observed - self.expected)


@dataclass(frozen=True)
class GeoPoint:
    """Latitude/longitude in degrees."""
    latitude: float
    longitude: float

    def __post_init__(self):
        if not (math.isfinite(self.latitude) and -90.0 <= self.latitude <= 90.0):
            raise ValueError(f"latitude {self.latitude} out of range")
        if not (math.isfinite(self.longitude) and -180.0 <= self.longitude <= 180.0):
            raise ValueError(f"longitude {self.longitude} out of range")


@dataclass(frozen=True)
class Missing:
    """No coordinates could be found for a key."""
    key: CityKey
    reason: str = "not found"


@dataclass(frozen=True)
class Resolution:
    """Coordinates found for a key, with the key that actually matched."""
    point: GeoPoint
    matched_key: CityKey
    fallback: bool = False
    source: str = "gazetteer"


@dataclass
class Gazetteer:
    """Offline table of normalized city keys to coordinates."""
    entries: Dict[CityKey, GeoPoint] = field(default_factory=dict)
    source_path: str = ""
    labels: Dict[CityKey, Tuple[str, str]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: CityKey) -> bool:
        return key in self.entries

    def label_for(self, key: CityKey) -> str:
        names = self.labels.get(key)
        if names:
            return f"{names[0]}, {names[1]}"
        return key.display_label()

    def country_label_for(self, key: CityKey) -> str:
        names = self.labels.get(key)
        return names[1] if names else key.country_label()


@dataclass(frozen=True)
class ColorTable:
    """Hex color per marker color class."""
    colors: Dict[ColorClass, str] = field(default_factory=lambda: {
        ColorClass.DARK_GREEN: "#006400",
        ColorClass.LIGHT_GREEN: "#90EE90",
        ColorClass.GREY: "#808080",
        ColorClass.ORANGE_RED: "#FF4500",
        ColorClass.RED: "#FF0000",
    })

    def __post_init__(self):
        missing = [c.name for c in ColorClass if c not in self.colors]
        if missing:
            raise ValueError(f"color table lacks {', '.join(missing)}")

    def hex(self, color: ColorClass) -> str:
        return self.colors[color]


@dataclass(frozen=True)
class MapMarker:
    """Geocoded, styled city marker."""
    key: CityKey
    point: GeoPoint
    radius: float
    color: ColorClass
    label: str
    description: str
    stats: CityStats
    country_label: str = ""


@dataclass
class RunReport:
    """Result of one end-to-end pipeline run."""
    summary: Optional[CorpusSummary]
    cities_total: int = 0
    cities_after_cutoff: int = 0
    cities_geocoded: int = 0
    cities_missing_coordinates: List[CityKey] = field(default_factory=list)
    output_paths: List[str] = field(default_factory=list)
    parse_report: Optional[ParseReport] = None
    city_stats: List[CityStats] = field(default_factory=list)
    labels: Dict[CityKey, str] = field(default_factory=dict)
    min_papers: int = 50
