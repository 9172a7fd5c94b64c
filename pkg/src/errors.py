"""
Exception hierarchy for the city excellence pipeline.
Every exception carries the process exit code the CLI reports for it.
"""

from typing import Iterable


EXIT_OK = 0
EXIT_DATA_ERROR = 1
EXIT_CONFIG_ERROR = 2
EXIT_STRICT_GEOCODING = 3


class ExcellenceMapError(Exception):
    """Base exception for pipeline errors."""
    exit_code = EXIT_DATA_ERROR


class DataError(ExcellenceMapError):
    """Raised when input data cannot be processed."""
    exit_code = EXIT_DATA_ERROR


class CorpusReadError(DataError):
    """Raised when the bibliographic export stream cannot be read."""
    pass


class StatisticsError(DataError):
    """Raised when a statistic is undefined for the given inputs."""
    pass


class GazetteerError(DataError):
    """Raised when a gazetteer or cache file is invalid."""
    pass


class EmitError(DataError):
    """Raised when an output file cannot be written."""
    pass


class ConfigurationError(ExcellenceMapError):
    """Raised when the run configuration is invalid."""
    exit_code = EXIT_CONFIG_ERROR


class StrictGeocodingError(ExcellenceMapError):
    """Raised when strict geocoding is on and cities lack coordinates."""
    exit_code = EXIT_STRICT_GEOCODING

    def __init__(self, missing_keys: Iterable[str]):
        self.missing_keys = list(missing_keys)
        super().__init__(f"no coordinates for: {', '.join(self.missing_keys)}")


class GeocoderError(Exception):
    """Raised inside the remote geocoder client; retried, never surfaced to callers."""
    pass
