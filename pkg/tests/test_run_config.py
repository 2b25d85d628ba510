"""Tests for run configuration loading, overrides and the echo header."""
import pytest

from run_config import (
    THREADS_ENV,
    ConfigError,
    __version__,
    apply_overrides,
    load_config,
    num_threads,
    parse_config_text,
)


class TestLoadConfig:
    def test_defaults(self):
        config = load_config()
        assert config.radius == 1.0
        assert config.h == 0.1
        assert config.kappa == 0.9
        assert config.iterations == 50
        assert config.normalize is True
        assert config.data_weighting == "film"
        assert config.step_bound is True
        assert config.step_safety == 0.9
        assert config.noise_seeds == 5

    def test_file_merged_over_defaults(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# coarse run\nh = 0.2\nmu = 0.5  # momentum\nnoise_color = pink\n", encoding="utf-8")
        config = load_config(path)
        assert config.h == 0.2
        assert config.mu == 0.5
        assert config.noise_color == "pink"
        assert config.gamma == 5e-2

    def test_overrides_applied_last(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("h = 0.2\n", encoding="utf-8")
        config = load_config(path, ["h=0.05", "html=yes", "iterations=7"])
        assert config.h == 0.05
        assert config.html is True
        assert config.iterations == 7

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.cfg")

    def test_invalid_values_rejected(self):
        with pytest.raises(ConfigError):
            load_config(overrides=["h=2.0"])
        with pytest.raises(ConfigError):
            load_config(overrides=["T=0"])
        with pytest.raises(ConfigError):
            load_config(overrides=["kappa=-0.5"])
        with pytest.raises(ConfigError, match="data_weighting"):
            load_config(overrides=["data_weighting=voltage"])
        with pytest.raises(ConfigError, match="step_safety"):
            load_config(overrides=["step_safety=1.5"])

    def test_config_error_is_value_error(self):
        with pytest.raises(ValueError):
            load_config(overrides=["nonsense=1"])


class TestParseConfigText:
    def test_unknown_key_names_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("h = 0.1\nwidth = 3\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config_text("h 0.1\n")

    def test_bad_number(self):
        with pytest.raises(ConfigError, match="float"):
            parse_config_text("gamma = fast\n")

    def test_bad_bool(self):
        with pytest.raises(ConfigError):
            parse_config_text("normalize = maybe\n")

    def test_types(self):
        values = parse_config_text("seed = 4\nnormalize = off\nphantom = bumps\n")
        assert values == {"seed": 4, "normalize": False, "phantom": "bumps"}

    def test_override_without_equals(self):
        with pytest.raises(ConfigError):
            apply_overrides(load_config(), ["h"])


class TestRunConfig:
    def test_material(self):
        material = load_config(overrides=["kappa=0.0", "c_p=2.0"]).material()
        assert material.kappa == 0.0
        assert material.c_p == 2.0

    def test_echo_sorted_with_version(self):
        lines = load_config().echo()
        keys = [line.split("=", 1)[0] for line in lines[:-1]]
        assert keys == sorted(keys)
        assert "normalize=true" in lines
        assert "h=0.1" in lines
        assert lines[-1] == f"version={__version__}"


class TestNumThreads:
    def test_default(self, monkeypatch):
        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert num_threads() == 1

    def test_from_environment(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "4")
        assert num_threads() == 4

    @pytest.mark.parametrize("raw", ["four", "0"])
    def test_invalid(self, monkeypatch, raw):
        monkeypatch.setenv(THREADS_ENV, raw)
        with pytest.raises(ConfigError):
            num_threads()
