"""
Map overlay emission for the city excellence pipeline.

Styles city statistics as proportional-symbol markers and renders them as
GPS Visualizer text, GeoJSON and KML. Every emitter is deterministic: the
same markers always produce byte-identical documents.
"""

from pathlib import Path
from typing import Dict, List, Sequence
from xml.sax.saxutils import escape

import orjson

from errors import EmitError
from models import (
    CityStats, ColorClass, ColorTable, Direction, GeoPoint, MapMarker,
)
from operations.excellence_stats import DIRECTION_EPSILON
from logging_config import get_logger


logger = get_logger(__name__)

DEFAULT_COLOR_TABLE = ColorTable()

GPSVISUALIZER_HEADER = "name\tdesc\tlatitude\tlongitude\tcolor\tscale"

KML_STYLE_IDS: Dict[ColorClass, str] = {
    ColorClass.DARK_GREEN: "style-dark-green",
    ColorClass.LIGHT_GREEN: "style-light-green",
    ColorClass.GREY: "style-grey",
    ColorClass.ORANGE_RED: "style-orange-red",
    ColorClass.RED: "style-red",
}

OUTPUT_SUFFIXES = {
    "gpsvisualizer": ".gpsviz.txt",
    "geojson": ".geojson",
    "kml": ".kml",
}


def marker_radius(observed: int, expected: float) -> float:
    """|observed - expected| + 1; exactly 1 when the two agree within the direction epsilon."""
    deviation = abs(observed - expected)
    if deviation <= DIRECTION_EPSILON:
        return 1.0
    return deviation + 1.0


def marker_color(stats: CityStats) -> ColorClass:
    if stats.direction is Direction.EQUAL:
        return ColorClass.GREY
    if stats.direction is Direction.ABOVE:
        return ColorClass.DARK_GREEN if stats.significance.significant else ColorClass.LIGHT_GREEN
    return ColorClass.RED if stats.significance.significant else ColorClass.ORANGE_RED


def marker_description(stats: CityStats) -> str:
    return (f"observed={stats.observed} expected={stats.expected:.1f} "
            f"z={stats.z:.2f}{stats.significance.stars}")


def marker_style(stats: CityStats, point: GeoPoint, label: str = "",
                 country_label: str = "") -> MapMarker:
    """
    Style one city as a map marker.

    Green marks more top papers than expected (dark when significant at
    p < .05), red/orange-red fewer, grey equality.

    Args:
        stats: City statistics that passed the cutoff
        point: City coordinates
        label: "City, Country" display label (title-cased key when empty)
        country_label: Country display name
    """
    return MapMarker(
        key=stats.key,
        point=point,
        radius=marker_radius(stats.observed, stats.expected),
        color=marker_color(stats),
        label=label or stats.key.display_label(),
        description=marker_description(stats),
        stats=stats,
        country_label=country_label or stats.key.country_label(),
    )


def emit_gpsvisualizer(markers: Sequence[MapMarker], colors: ColorTable = DEFAULT_COLOR_TABLE) -> str:
    """Tab-separated name/desc/latitude/longitude/color/scale document."""
    lines = [GPSVISUALIZER_HEADER]
    for marker in markers:
        lines.append(
            f"{marker.label}\t{marker.description}\t{marker.point.latitude:.6f}\t"
            f"{marker.point.longitude:.6f}\t{colors.hex(marker.color)}\t{marker.radius:.1f}"
        )
    return "\n".join(lines) + "\n"


def _feature(marker: MapMarker, colors: ColorTable) -> dict:
    return {
        "type": "Feature",
        "geometry": {
            "type": "Point",
            "coordinates": [round(marker.point.longitude, 6), round(marker.point.latitude, 6)],
        },
        "properties": {
            "name": marker.label,
            "country": marker.country_label,
            "n_papers": marker.stats.n_papers,
            "observed": marker.stats.observed,
            "expected": round(marker.stats.expected, 1),
            "z": round(marker.stats.z, 2),
            "stars": marker.stats.significance.stars,
            "color_class": marker.color.value,
            "color_hex": colors.hex(marker.color),
            "radius": round(marker.radius, 1),
        },
    }


def emit_geojson(markers: Sequence[MapMarker], colors: ColorTable = DEFAULT_COLOR_TABLE) -> str:
    """Compact GeoJSON FeatureCollection of Point features, keys in fixed order."""
    collection = {
        "type": "FeatureCollection",
        "features": [_feature(marker, colors) for marker in markers],
    }
    return orjson.dumps(collection).decode("utf-8")


def kml_color(hex_color: str) -> str:
    """#RRGGBB -> opaque KML aabbggrr."""
    rgb = hex_color.lstrip("#").lower()
    return f"ff{rgb[4:6]}{rgb[2:4]}{rgb[0:2]}"


def emit_kml(markers: Sequence[MapMarker], colors: ColorTable = DEFAULT_COLOR_TABLE,
             document_name: str = "Research excellence by city") -> str:
    """KML 2.2 document with one shared style per color class and one placemark per marker."""
    lines: List[str] = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<kml xmlns="http://www.opengis.net/kml/2.2">',
        "  <Document>",
        f"    <name>{escape(document_name)}</name>",
    ]
    for color in ColorClass:
        lines.extend([
            f'    <Style id="{KML_STYLE_IDS[color]}">',
            "      <IconStyle>",
            f"        <color>{kml_color(colors.hex(color))}</color>",
            "      </IconStyle>",
            "    </Style>",
        ])
    for marker in markers:
        lines.extend([
            "    <Placemark>",
            f"      <name>{escape(marker.label)}</name>",
            f"      <description>{escape(marker.description)}</description>",
            f"      <styleUrl>#{KML_STYLE_IDS[marker.color]}</styleUrl>",
            "      <ExtendedData>",
            f'        <Data name="radius"><value>{marker.radius:.1f}</value></Data>',
            "      </ExtendedData>",
            "      <Point>",
            f"        <coordinates>{marker.point.longitude:.6f},{marker.point.latitude:.6f}</coordinates>",
            "      </Point>",
            "    </Placemark>",
        ])
    lines.extend(["  </Document>", "</kml>"])
    return "\n".join(lines) + "\n"


def write_document(path: str, document: str) -> str:
    """Write one output document (UTF-8, LF).

    Raises:
        EmitError: If the file cannot be written
    """
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(document)
    except OSError as e:
        raise EmitError(f"cannot write {path}: {e}")
    logger.info("wrote output", path=str(path))
    return str(path)


def write_map_files(prefix: str, markers: Sequence[MapMarker],
                    colors: ColorTable = DEFAULT_COLOR_TABLE) -> List[str]:
    """Write ``<prefix>.gpsviz.txt``, ``<prefix>.geojson`` and ``<prefix>.kml``."""
    return [
        write_document(f"{prefix}{OUTPUT_SUFFIXES['gpsvisualizer']}", emit_gpsvisualizer(markers, colors)),
        write_document(f"{prefix}{OUTPUT_SUFFIXES['geojson']}", emit_geojson(markers, colors) + "\n"),
        write_document(f"{prefix}{OUTPUT_SUFFIXES['kml']}", emit_kml(markers, colors)),
    ]
