#!/usr/bin/env python3
"""
Unit tests for configuration loading and precedence.
"""

from pathlib import Path

import pytest

from config import PROJECT_ROOT, ConfigManager, RunConfig, build_run_config, project_path
from errors import ConfigurationError


def write_config(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text, encoding="utf-8")
    manager = ConfigManager(str(path))
    manager.load_config()
    return manager


class TestRunConfig:
    """Test parameter validation."""

    @pytest.mark.parametrize("top_fraction", [0.0, 1.0, 1.5, -0.1])
    def test_top_fraction_range(self, top_fraction):
        with pytest.raises(ConfigurationError):
            RunConfig(top_fraction=top_fraction).validate()

    def test_min_papers_at_least_one(self):
        with pytest.raises(ConfigurationError):
            RunConfig(min_papers=0).validate()

    def test_defaults(self):
        config = RunConfig().validate()

        assert config.top_fraction == 0.10
        assert config.min_papers == 50
        assert config.doc_types == frozenset({"Article"})
        assert config.strict_geocoding is False


class TestConfigManager:
    """Test YAML loading."""

    def test_explicit_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            ConfigManager(str(tmp_path / "absent.yaml")).load_config()

    def test_invalid_yaml(self, tmp_path):
        with pytest.raises(ConfigurationError):
            write_config(tmp_path, "pipeline: [unclosed\n")

    def test_log_level_precedence(self, tmp_path):
        manager = write_config(tmp_path, "logging:\n  level: WARNING\n")

        assert manager.get_log_level({}) == "WARNING"
        assert manager.get_log_level({"LOG_LEVEL": "DEBUG"}) == "DEBUG"


class TestBuildRunConfig:
    """Test flags > environment > file > defaults."""

    def test_file_values(self, tmp_path):
        manager = write_config(tmp_path, (
            "pipeline:\n  top_fraction: 0.05\n  min_papers: 20\n  year: 2007\n"
            "  doc_types: [Article, Review]\n  categories: [Psychology]\n"
            "attribution:\n  region_level_names: [midlands, Ruhr]\n"
        ))
        config = build_run_config({}, manager, environ={})

        assert config.top_fraction == 0.05
        assert config.min_papers == 20
        assert config.year == 2007
        assert config.doc_types == frozenset({"Article", "Review"})
        assert config.categories == frozenset({"Psychology"})
        assert config.region_level_names == frozenset({"MIDLANDS", "RUHR"})
        assert config.geocoder is None

    def test_environment_beats_file(self, tmp_path):
        manager = write_config(tmp_path, "pipeline:\n  top_fraction: 0.05\n  min_papers: 20\n")
        config = build_run_config({}, manager, environ={"EXCELLENCE_TOP_FRACTION": "0.2",
                                                        "EXCELLENCE_MIN_PAPERS": "30"})

        assert config.top_fraction == 0.2
        assert config.min_papers == 30

    def test_flags_beat_environment(self, tmp_path):
        manager = write_config(tmp_path, "pipeline:\n  min_papers: 20\n")
        config = build_run_config({"min_papers": 10, "top_fraction": 0.01}, manager,
                                  environ={"EXCELLENCE_MIN_PAPERS": "30"})

        assert config.min_papers == 10
        assert config.top_fraction == 0.01

    def test_bad_environment_value(self):
        with pytest.raises(ConfigurationError, match="EXCELLENCE_MIN_PAPERS"):
            build_run_config({}, None, environ={"EXCELLENCE_MIN_PAPERS": "fifty"})

    def test_invalid_flag_value(self):
        with pytest.raises(ConfigurationError):
            build_run_config({"top_fraction": 1.5}, None, environ={})

    def test_geocoder_from_environment(self, tmp_path):
        manager = write_config(tmp_path, "geocoder:\n  delay_ms: 1500\n  cache_path: cache.csv\n")
        config = build_run_config({}, manager, environ={
            "GEOCODER_URL": "http://localhost/search?q={query}&key={key}",
            "GEOCODER_KEY": "k",
        })

        assert config.geocoder.url_template == "http://localhost/search?q={query}&key={key}"
        assert config.geocoder.api_key == "k"
        assert config.geocoder.delay_ms == 1500
        assert config.geocoder.cache_path == str(PROJECT_ROOT / "cache.csv")

    def test_geocoder_delay_flag(self):
        config = build_run_config({"geocoder_url": "http://localhost/?q={query}", "geocoder_delay_ms": 0},
                                  None, environ={"GEOCODER_DELAY_MS": "5000"})

        assert config.geocoder.delay_ms == 0

    def test_strict_geocoding_flag(self):
        assert build_run_config({"strict_geocoding": True}, None, environ={}).strict_geocoding is True
        assert build_run_config({}, None, environ={}).strict_geocoding is False


class TestShippedConfigs:
    """The YAML files under config/ load and validate."""

    CONFIG_DIR = Path(__file__).parent.parent / "config"

    def test_default_config(self):
        manager = ConfigManager(str(self.CONFIG_DIR / "config.yaml"))
        manager.load_config()
        config = build_run_config({}, manager, environ={})

        assert config.year is None
        assert config.categories is None
        assert config.region_level_names == frozenset({"MIDLANDS"})
        assert config.geocoder is None

    def test_psychology_categories(self):
        manager = ConfigManager(str(self.CONFIG_DIR / "psychology_categories.yaml"))
        manager.load_config()
        config = build_run_config({}, manager, environ={})

        assert config.year == 2007
        assert "Psychology, Clinical" in config.categories
        assert len(config.categories) == 11


class TestProjectPaths:
    """Relative paths in the configuration file are anchored at the project root."""

    def test_shipped_gazetteer_found_from_any_directory(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        manager = ConfigManager(str(PROJECT_ROOT / "config" / "config.yaml"))
        manager.load_config()
        config = build_run_config({}, manager, environ={})

        assert config.gazetteer_path == str(PROJECT_ROOT / "data" / "gazetteer.csv")
        assert Path(config.gazetteer_path).exists()

    def test_absolute_path_is_kept(self, tmp_path):
        assert project_path(str(tmp_path / "g.csv")) == str(tmp_path / "g.csv")
        assert project_path(None) is None

    def test_flag_is_not_rewritten(self, tmp_path):
        manager = write_config(tmp_path, "pipeline:\n  gazetteer_path: data/gazetteer.csv\n")
        config = build_run_config({"gazetteer_path": "local.csv"}, manager, environ={})

        assert config.gazetteer_path == "local.csv"
