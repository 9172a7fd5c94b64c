"""
Offline gazetteer operations for the city excellence pipeline.
Loads ``city,region,country,latitude,longitude`` tables, resolves city keys
to coordinates and appends remote geocoding results to the cache file.
"""

import csv
import fcntl
import io
import os
from pathlib import Path
from typing import Optional, Union

from errors import GazetteerError
from models import CityKey, Gazetteer, GeoPoint, Missing, Resolution
from operations.geo_attribution import normalize
from logging_config import get_logger, log_operation


logger = get_logger(__name__)

GAZETTEER_HEADER = ["city", "region", "country", "latitude", "longitude"]


def make_key(city: str, region: Optional[str], country: str) -> CityKey:
    """Normalize raw names into a key exactly as address attribution does."""
    return CityKey(normalize(city), normalize(region or "") or None, normalize(country))


def _read_rows(handle, source: str, gazetteer: Gazetteer) -> Gazetteer:
    reader = csv.reader(handle)
    header = next(reader, None)
    if header is None:
        return gazetteer
    if [column.strip().lower() for column in header] != GAZETTEER_HEADER:
        raise GazetteerError(f"{source}: header must be {','.join(GAZETTEER_HEADER)}")

    for row in reader:
        row_number = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 5:
            raise GazetteerError(f"{source} row {row_number}: expected 5 columns, got {len(row)}")
        city, region, country, latitude, longitude = (cell.strip() for cell in row)
        try:
            key = make_key(city, region, country)
        except ValueError as e:
            raise GazetteerError(f"{source} row {row_number}: {e}")
        try:
            point = GeoPoint(float(latitude), float(longitude))
        except ValueError as e:
            raise GazetteerError(f"{source} row {row_number}: invalid coordinate ({e})")
        if key in gazetteer:
            raise GazetteerError(f"{source} row {row_number}: duplicate key {key}")
        gazetteer.entries[key] = point
        gazetteer.labels[key] = (city, country)
    return gazetteer


@log_operation("load_gazetteer")
def load_gazetteer(path: str) -> Gazetteer:
    """
    Load a gazetteer file.

    Args:
        path: Comma-separated UTF-8 file with header city,region,country,latitude,longitude

    Returns:
        Gazetteer keyed by normalized CityKey

    Raises:
        GazetteerError: If the file is unreadable, a key repeats or a coordinate is out of range
    """
    gazetteer = Gazetteer(source_path=str(path))
    try:
        with open(path, "r", encoding="utf-8-sig", newline="") as handle:
            _read_rows(handle, str(path), gazetteer)
    except OSError as e:
        raise GazetteerError(f"cannot read gazetteer {path}: {e}")
    logger.info("loaded gazetteer", path=str(path), entries=len(gazetteer))
    return gazetteer


def load_cache(path: Optional[str]) -> Gazetteer:
    """Load a geocoding cache; a missing or empty file is an empty cache."""
    if not path or not Path(path).exists() or Path(path).stat().st_size == 0:
        return Gazetteer(source_path=str(path or ""))
    return load_gazetteer(path)


def resolve(gazetteer: Gazetteer, key: CityKey) -> Union[Resolution, Missing]:
    """
    Look a key up; keys with a region are retried once without it.

    Returns:
        Resolution (flagged fallback when the region-less key matched) or Missing
    """
    point = gazetteer.entries.get(key)
    if point is not None:
        return Resolution(point=point, matched_key=key, source="gazetteer")
    if key.region:
        bare = key.without_region()
        point = gazetteer.entries.get(bare)
        if point is not None:
            logger.info("resolved without region", city=str(key), matched=str(bare))
            return Resolution(point=point, matched_key=bare, fallback=True, source="gazetteer")
    return Missing(key)


def format_row(key: CityKey, point: GeoPoint) -> str:
    buffer = io.StringIO()
    csv.writer(buffer, lineterminator="\n").writerow([
        key.city.title(), key.region or "", key.country_label(),
        f"{point.latitude:.6f}", f"{point.longitude:.6f}",
    ])
    return buffer.getvalue()


def append_cache(path: str, key: CityKey, point: GeoPoint) -> None:
    """
    Append one geocoded key to the cache file under an exclusive lock.

    The header is written when the file is new or empty.

    Raises:
        GazetteerError: If the cache cannot be written
    """
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8", newline="") as handle:
            fcntl.flock(handle.fileno(), fcntl.LOCK_EX)
            try:
                handle.seek(0, os.SEEK_END)
                if handle.tell() == 0:
                    handle.write(",".join(GAZETTEER_HEADER) + "\n")
                handle.write(format_row(key, point))
                handle.flush()
            finally:
                fcntl.flock(handle.fileno(), fcntl.LOCK_UN)
    except OSError as e:
        raise GazetteerError(f"cannot append to cache {path}: {e}")
    logger.debug("cached coordinates", city=str(key), path=str(path))
