"""
Remote geocoding client for the city excellence pipeline.
Cache-first HTTP geocoder with a single rate-limited request queue and
bounded retries. Results are appended to a gazetteer-format cache file.
"""

import asyncio
import time
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, List, Optional, Union
from urllib.parse import quote

import aiohttp

from config import GeocoderConfig
from errors import GeocoderError
from models import CityKey, GeoPoint, Missing
from operations.gazetteer import append_cache, load_cache
from logging_config import get_logger, log_api_call


@dataclass
class GeocoderStats:
    """Request statistics for monitoring."""
    cache_hits: int = 0
    total_requests: int = 0
    failed_requests: int = 0
    response_times: List[float] = field(default_factory=list)
    last_updated: Optional[datetime] = None

    @property
    def average_response_time(self) -> float:
        return sum(self.response_times) / len(self.response_times) if self.response_times else 0.0


def build_query(key: CityKey) -> str:
    """The free-text query "city, region, country" (region omitted when absent)."""
    parts = [key.city, key.region, key.country]
    return ", ".join(part for part in parts if part)


def parse_response(payload: Any) -> Optional[GeoPoint]:
    """
    Read the first result of a ``[{"lat": ..., "lon": ...}, ...]`` response.

    Returns:
        The point rounded to 6 decimals, or None when there are no results

    Raises:
        GeocoderError: If the payload does not have the expected shape
    """
    if not isinstance(payload, list):
        raise GeocoderError(f"expected a JSON array, got {type(payload).__name__}")
    if not payload:
        return None
    first = payload[0]
    if not isinstance(first, dict) or "lat" not in first or "lon" not in first:
        raise GeocoderError("first result lacks lat/lon")
    try:
        return GeoPoint(round(float(first["lat"]), 6), round(float(first["lon"]), 6))
    except (TypeError, ValueError) as e:
        raise GeocoderError(f"invalid coordinates in response: {e}")


class RemoteGeocoder:
    """Client for an HTTP geocoding endpoint with caching and rate limiting."""

    def __init__(self, config: GeocoderConfig, session: Optional[aiohttp.ClientSession] = None):
        """
        Initialize the geocoder.

        Args:
            config: Endpoint, key, delay and cache settings
            session: Existing aiohttp session (optional; one is created otherwise)
        """
        self.config = config
        self.logger = get_logger(__name__)
        self.session = session
        self._owns_session = session is None
        self.cache = load_cache(config.cache_path)
        self.stats = GeocoderStats()

        # One request in flight; at least delay_ms between request starts.
        self._semaphore = asyncio.Semaphore(1)
        self._last_request_at: Optional[float] = None

    async def __aenter__(self):
        """Async context manager entry."""
        await self._create_session()
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        """Async context manager exit."""
        await self.close()

    async def _create_session(self):
        if self.session is None:
            timeout = aiohttp.ClientTimeout(total=self.config.timeout)
            self.session = aiohttp.ClientSession(timeout=timeout, headers={"Accept": "application/json"})
            self._owns_session = True

    async def close(self):
        if self.session is not None and self._owns_session:
            await self.session.close()
            self.session = None

    def _build_url(self, query: str) -> str:
        return (self.config.url_template
                .replace("{query}", quote(query))
                .replace("{key}", quote(self.config.api_key or "")))

    async def _wait_for_slot(self):
        if self._last_request_at is None:
            return
        delay = self.config.delay_ms / 1000.0
        elapsed = time.monotonic() - self._last_request_at
        if elapsed < delay:
            await asyncio.sleep(delay - elapsed)

    def _backoff_seconds(self, attempt: int) -> float:
        """Pause after failed attempt n: delay * 2**(n-1)."""
        return self.config.delay_ms / 1000.0 * (2 ** (attempt - 1))

    @log_api_call("geocode", "GET")
    async def _request(self, query: str) -> Optional[GeoPoint]:
        """Issue one GET request. Raises GeocoderError on any failure."""
        await self._create_session()
        url = self._build_url(query)
        try:
            async with self.session.get(url) as response:
                if response.status >= 400:
                    raise GeocoderError(f"HTTP {response.status}")
                payload = await response.json(content_type=None)
        except (aiohttp.ClientError, asyncio.TimeoutError, ValueError) as e:
            raise GeocoderError(f"request failed: {e}")
        return parse_response(payload)

    async def _execute_rate_limited(self, query: str) -> Optional[GeoPoint]:
        async with self._semaphore:
            await self._wait_for_slot()
            started = time.monotonic()
            self._last_request_at = started
            self.stats.total_requests += 1
            try:
                return await self._request(query)
            except GeocoderError:
                self.stats.failed_requests += 1
                raise
            finally:
                self.stats.response_times.append(time.monotonic() - started)
                if len(self.stats.response_times) > 100:
                    self.stats.response_times.pop(0)
                self.stats.last_updated = datetime.now()

    async def geocode(self, key: CityKey) -> Union[GeoPoint, Missing]:
        """
        Coordinates for a key: cache first, then the remote endpoint.

        Failures are retried with exponential backoff (delay, 2 * delay, ...)
        up to max_attempts, and then reported as Missing. Successful lookups
        are cached.
        """
        cached = self.cache.entries.get(key)
        if cached is not None:
            self.stats.cache_hits += 1
            self.logger.debug("geocoder cache hit", city=str(key))
            return cached

        query = build_query(key)
        attempts = max(1, self.config.max_attempts)
        for attempt in range(1, attempts + 1):
            try:
                point = await self._execute_rate_limited(query)
            except GeocoderError as e:
                self.logger.warning("⚠️ geocoder request failed", city=str(key),
                                    attempt=attempt, max_attempts=attempts, error=str(e))
                if attempt < attempts:
                    await asyncio.sleep(self._backoff_seconds(attempt))
                continue
            if point is None:
                self.logger.info("geocoder returned no candidates", city=str(key))
                return Missing(key, "no remote candidates")
            if self.config.cache_path:
                append_cache(self.config.cache_path, key, point)
            self.cache.entries[key] = point
            self.logger.info("✅ geocoded", city=str(key), latitude=point.latitude, longitude=point.longitude)
            return point

        self.logger.warning("giving up on remote geocoding", city=str(key), attempts=attempts)
        return Missing(key, "remote geocoder failed")


async def geocode_remote(config: GeocoderConfig, key: CityKey) -> Union[GeoPoint, Missing]:
    """One-shot cache-first lookup of a single key."""
    async with RemoteGeocoder(config) as geocoder:
        return await geocoder.geocode(key)
