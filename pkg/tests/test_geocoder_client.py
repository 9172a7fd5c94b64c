#!/usr/bin/env python3
"""
Tests for the remote geocoder client against a local stub endpoint.
"""

import time

import pytest
import pytest_asyncio
from aiohttp import web
from aiohttp.test_utils import TestServer

from config import GeocoderConfig
from errors import GeocoderError
from geocoder_client import RemoteGeocoder, build_query, geocode_remote, parse_response
from models import CityKey, GeoPoint, Missing


class StubGeocoder:
    """Records queries and answers by the first word of the query."""

    def __init__(self):
        self.queries = []
        self.times = []
        self.failures_left = {"FLAKY": 1}

    async def search(self, request):
        query = request.query["q"]
        self.queries.append(query)
        self.times.append(time.monotonic())
        city = query.split(",")[0]
        if city == "LONDON":
            return web.json_response([{"lat": "51.5074", "lon": "-0.1278"}, {"lat": "0", "lon": "0"}])
        if city == "FLAKY":
            if self.failures_left["FLAKY"] > 0:
                self.failures_left["FLAKY"] -= 1
                return web.Response(status=503, text="busy")
            return web.json_response([{"lat": 10.1234567, "lon": 20.7654321}])
        if city == "BROKEN":
            return web.Response(text="<html>oops</html>", content_type="text/html")
        return web.json_response([])


@pytest_asyncio.fixture
async def stub():
    handler = StubGeocoder()
    app = web.Application()
    app.router.add_get("/search", handler.search)
    server = TestServer(app)
    await server.start_server()
    handler.url = str(server.make_url("/search")) + "?q={query}&key={key}"
    yield handler
    await server.close()


def geocoder_config(stub, tmp_path, **overrides):
    settings = dict(url_template=stub.url, api_key="secret", delay_ms=0, max_attempts=3,
                    cache_path=str(tmp_path / "cache.csv"))
    settings.update(overrides)
    return GeocoderConfig(**settings)


class TestParseResponse:
    """Test response decoding."""

    def test_first_result_rounded(self):
        assert parse_response([{"lat": "52.1234567", "lon": 4.1}]) == GeoPoint(52.123457, 4.1)

    def test_no_results(self):
        assert parse_response([]) is None

    @pytest.mark.parametrize("payload", [{"lat": 1, "lon": 2}, [{"latitude": 1}], [{"lat": "x", "lon": "y"}]])
    def test_bad_shape(self, payload):
        with pytest.raises(GeocoderError):
            parse_response(payload)

    def test_build_query(self):
        assert build_query(CityKey("CAMBRIDGE", "MA", "USA")) == "CAMBRIDGE, MA, USA"
        assert build_query(CityKey("LONDON", None, "ENGLAND")) == "LONDON, ENGLAND"


class TestRemoteGeocoder:
    """Test cache-first remote lookups."""

    @pytest.mark.asyncio
    async def test_geocode_and_cache(self, stub, tmp_path):
        london = CityKey("LONDON", None, "ENGLAND")
        config = geocoder_config(stub, tmp_path)

        async with RemoteGeocoder(config) as geocoder:
            assert await geocoder.geocode(london) == GeoPoint(51.5074, -0.1278)
            assert await geocoder.geocode(london) == GeoPoint(51.5074, -0.1278)
            assert geocoder.stats.total_requests == 1
            assert geocoder.stats.cache_hits == 1

        # A fresh client reads the persisted cache and makes no request.
        assert await geocode_remote(config, london) == GeoPoint(51.5074, -0.1278)
        assert stub.queries == ["LONDON, ENGLAND"]

    @pytest.mark.asyncio
    async def test_retry_after_server_error(self, stub, tmp_path):
        async with RemoteGeocoder(geocoder_config(stub, tmp_path)) as geocoder:
            point = await geocoder.geocode(CityKey("FLAKY", None, "NOWHERE"))

        assert point == GeoPoint(10.123457, 20.765432)
        assert len(stub.queries) == 2

    @pytest.mark.asyncio
    async def test_gives_up_after_max_attempts(self, stub, tmp_path):
        key = CityKey("BROKEN", None, "NOWHERE")
        async with RemoteGeocoder(geocoder_config(stub, tmp_path)) as geocoder:
            result = await geocoder.geocode(key)
            assert geocoder.stats.failed_requests == 3

        assert result == Missing(key, "remote geocoder failed")
        assert len(stub.queries) == 3

    @pytest.mark.asyncio
    async def test_no_candidates_is_missing(self, stub, tmp_path):
        key = CityKey("ATLANTIS", None, "OCEAN")
        result = await geocode_remote(geocoder_config(stub, tmp_path), key)

        assert result == Missing(key, "no remote candidates")
        assert not (tmp_path / "cache.csv").exists()

    @pytest.mark.asyncio
    async def test_requests_are_spaced_by_delay(self, stub, tmp_path):
        config = geocoder_config(stub, tmp_path, delay_ms=200, cache_path=None)
        async with RemoteGeocoder(config) as geocoder:
            for city in ("A", "B", "C"):
                await geocoder.geocode(CityKey(city, None, "NOWHERE"))

        gaps = [later - earlier for earlier, later in zip(stub.times, stub.times[1:])]
        assert len(gaps) == 2
        assert all(gap >= 0.15 for gap in gaps)

    @pytest.mark.asyncio
    async def test_unreachable_endpoint_is_missing(self, tmp_path, mocker):
        sleep = mocker.patch("geocoder_client.asyncio.sleep")
        config = GeocoderConfig(url_template="http://127.0.0.1:9/search?q={query}", delay_ms=1000,
                                max_attempts=2, timeout=2)
        key = CityKey("LONDON", None, "ENGLAND")

        assert await geocode_remote(config, key) == Missing(key, "remote geocoder failed")
        assert any(call.args and call.args[0] > 0.9 for call in sleep.await_args_list)

    @pytest.mark.asyncio
    async def test_retries_back_off_exponentially(self, tmp_path, mocker):
        sleep = mocker.patch("geocoder_client.asyncio.sleep")
        config = GeocoderConfig(url_template="http://127.0.0.1:9/search?q={query}", delay_ms=1000,
                                max_attempts=3, timeout=2)
        key = CityKey("LONDON", None, "ENGLAND")

        assert await geocode_remote(config, key) == Missing(key, "remote geocoder failed")
        pauses = [call.args[0] for call in sleep.await_args_list if call.args[0] >= 1.0]
        assert pauses == [1.0, 2.0]

    @pytest.mark.asyncio
    async def test_stats_track_response_times(self, stub, tmp_path):
        async with RemoteGeocoder(geocoder_config(stub, tmp_path)) as geocoder:
            await geocoder.geocode(CityKey("FLAKY", None, "NOWHERE"))
            stats = geocoder.stats

        assert stats.total_requests == 2
        assert stats.failed_requests == 1
        assert len(stats.response_times) == 2
        assert stats.average_response_time > 0.0
