"""
Configuration management for the city excellence pipeline.

Settings are resolved with the precedence: command-line flags > environment
variables > configuration file > built-in defaults.
"""

import os
import yaml
from typing import Dict, Any, Optional, Mapping, FrozenSet
from pathlib import Path
from dataclasses import dataclass, field

from errors import ConfigurationError
from logging_config import get_logger


logger = get_logger(__name__)

PROJECT_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_CONFIG_FILE = PROJECT_ROOT / "config" / "config.yaml"

DEFAULT_TOP_FRACTION = 0.10
DEFAULT_MIN_PAPERS = 50
DEFAULT_DOC_TYPES = frozenset({"Article"})
DEFAULT_REGION_LEVEL_NAMES = frozenset({"MIDLANDS"})
DEFAULT_GEOCODER_DELAY_MS = 1000


@dataclass
class GeocoderConfig:
    """Configuration for the remote geocoding service."""
    url_template: str
    api_key: str = ""
    delay_ms: int = DEFAULT_GEOCODER_DELAY_MS
    timeout: int = 30
    max_attempts: int = 3
    cache_path: Optional[str] = None


@dataclass
class RunConfig:
    """All parameters of one pipeline run."""
    input_path: Optional[str] = None
    gazetteer_path: Optional[str] = None
    output_prefix: Optional[str] = None
    top_fraction: float = DEFAULT_TOP_FRACTION
    min_papers: int = DEFAULT_MIN_PAPERS
    year: Optional[int] = None
    doc_types: FrozenSet[str] = DEFAULT_DOC_TYPES
    categories: Optional[FrozenSet[str]] = None
    strict_geocoding: bool = False
    geocoder: Optional[GeocoderConfig] = None
    region_level_names: FrozenSet[str] = DEFAULT_REGION_LEVEL_NAMES
    attribution_dump: bool = False
    min_expected_warning: float = 5.0
    summary_limit: int = 20

    def validate(self) -> "RunConfig":
        """Check parameter ranges.

        Raises:
            ConfigurationError: If any parameter is out of range
        """
        if not 0.0 < self.top_fraction < 1.0:
            raise ConfigurationError(f"top fraction must lie in (0, 1), got {self.top_fraction}")
        if self.min_papers < 1:
            raise ConfigurationError(f"min papers must be at least 1, got {self.min_papers}")
        if not self.doc_types:
            raise ConfigurationError("at least one document type is required")
        if self.geocoder is not None and self.geocoder.delay_ms < 0:
            raise ConfigurationError("geocoder delay must be non-negative")
        return self


class ConfigManager:
    """Loads the YAML configuration file."""

    def __init__(self, config_file: Optional[str] = None):
        """Initialize the configuration manager.

        Args:
            config_file: Path to the configuration file. If None, uses
                config/config.yaml in the working directory or the project default.
        """
        self.explicit = config_file is not None
        if config_file:
            self.config_file = Path(config_file)
        elif Path("config/config.yaml").exists():
            self.config_file = Path("config/config.yaml")
        else:
            self.config_file = DEFAULT_CONFIG_FILE
        self.config: Dict[str, Any] = {}

    def load_config(self) -> bool:
        """Load configuration from file.

        Returns:
            True if a file was loaded, False if none was found

        Raises:
            ConfigurationError: If an explicitly named file is missing or unreadable
        """
        if not self.config_file.exists():
            if self.explicit:
                raise ConfigurationError(f"configuration file not found: {self.config_file}")
            logger.debug("no configuration file, using defaults", path=str(self.config_file))
            return False
        try:
            with open(self.config_file, "r", encoding="utf-8") as f:
                self.config = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigurationError(f"cannot read configuration {self.config_file}: {e}")
        if not isinstance(self.config, dict):
            raise ConfigurationError(f"configuration {self.config_file} is not a mapping")
        return True

    def get_pipeline_config(self) -> Dict[str, Any]:
        return self.config.get("pipeline", {}) or {}

    def get_attribution_config(self) -> Dict[str, Any]:
        return self.config.get("attribution", {}) or {}

    def get_geocoder_config(self) -> Dict[str, Any]:
        return self.config.get("geocoder", {}) or {}

    def get_log_level(self, environ: Mapping[str, str] = os.environ) -> str:
        return environ.get("LOG_LEVEL") or (self.config.get("logging", {}) or {}).get("level", "INFO")


def _env_number(environ: Mapping[str, str], name: str, kind: type) -> Optional[Any]:
    raw = environ.get(name)
    if raw is None or raw == "":
        return None
    try:
        return kind(raw)
    except ValueError:
        raise ConfigurationError(f"environment variable {name}={raw!r} is not a valid {kind.__name__}")


def _first(*values: Any) -> Any:
    for value in values:
        if value is not None:
            return value
    return None


def project_path(value: Optional[str]) -> Optional[str]:
    """Anchor a relative path from the configuration file at the project root."""
    if not value:
        return None
    path = Path(value).expanduser()
    return str(path if path.is_absolute() else PROJECT_ROOT / path)


def build_run_config(overrides: Dict[str, Any],
                     manager: Optional[ConfigManager] = None,
                     environ: Mapping[str, str] = os.environ) -> RunConfig:
    """Merge flags, environment, config file and defaults into a validated RunConfig.

    Args:
        overrides: Values from command-line flags; None means "not given"
        manager: Loaded configuration manager (optional)
        environ: Environment mapping

    Returns:
        Validated RunConfig

    Raises:
        ConfigurationError: If a merged value is invalid
    """
    pipeline = manager.get_pipeline_config() if manager else {}
    attribution = manager.get_attribution_config() if manager else {}
    geocoder = manager.get_geocoder_config() if manager else {}

    doc_types = overrides.get("doc_types") or pipeline.get("doc_types") or DEFAULT_DOC_TYPES
    categories = overrides.get("categories") or pipeline.get("categories")
    region_names = attribution.get("region_level_names") or DEFAULT_REGION_LEVEL_NAMES

    try:
        top_fraction = float(_first(overrides.get("top_fraction"),
                                    _env_number(environ, "EXCELLENCE_TOP_FRACTION", float),
                                    pipeline.get("top_fraction"),
                                    DEFAULT_TOP_FRACTION))
        min_papers = int(_first(overrides.get("min_papers"),
                                _env_number(environ, "EXCELLENCE_MIN_PAPERS", int),
                                pipeline.get("min_papers"),
                                DEFAULT_MIN_PAPERS))
        year = _first(overrides.get("year"),
                      _env_number(environ, "EXCELLENCE_YEAR", int),
                      pipeline.get("year"))
        year = int(year) if year is not None else None
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"invalid pipeline setting: {e}")

    url_template = _first(overrides.get("geocoder_url"), environ.get("GEOCODER_URL") or None,
                          geocoder.get("url"))
    geocoder_config = None
    if url_template:
        delay_ms = _first(overrides.get("geocoder_delay_ms"),
                          _env_number(environ, "GEOCODER_DELAY_MS", int),
                          geocoder.get("delay_ms"),
                          DEFAULT_GEOCODER_DELAY_MS)
        geocoder_config = GeocoderConfig(
            url_template=url_template,
            api_key=_first(environ.get("GEOCODER_KEY") or None, geocoder.get("key"), ""),
            delay_ms=int(delay_ms),
            timeout=int(geocoder.get("timeout", 30)),
            max_attempts=int(geocoder.get("max_attempts", 3)),
            cache_path=_first(overrides.get("geocoder_cache"), project_path(geocoder.get("cache_path"))),
        )

    strict = overrides.get("strict_geocoding")
    if strict is None:
        strict = bool(pipeline.get("strict_geocoding", False))

    config = RunConfig(
        input_path=overrides.get("input_path"),
        gazetteer_path=_first(overrides.get("gazetteer_path"), project_path(pipeline.get("gazetteer_path"))),
        output_prefix=overrides.get("output_prefix"),
        top_fraction=top_fraction,
        min_papers=min_papers,
        year=year,
        doc_types=frozenset(doc_types),
        categories=frozenset(categories) if categories else None,
        strict_geocoding=strict,
        geocoder=geocoder_config,
        region_level_names=frozenset(name.upper() for name in region_names),
        attribution_dump=bool(overrides.get("attribution_dump") or False),
        min_expected_warning=float(pipeline.get("min_expected_warning", 5.0)),
        summary_limit=int(_first(overrides.get("summary_limit"), pipeline.get("summary_limit"), 20)),
    )
    return config.validate()
