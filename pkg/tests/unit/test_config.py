"""Unit tests for settings files."""
import pytest

from app.config import ConfigError, Settings, load_config, parse_config_text, render_config


class TestRenderConfig:
    """key=value echo."""

    def test_every_field_once(self):
        lines = render_config(Settings()).splitlines()
        assert [line.split("=", 1)[0] for line in lines] == list(Settings.model_fields)

    def test_booleans_lowercase(self):
        assert "use_gcd=true" in render_config(Settings()).splitlines()
        assert "fill_gaps=false" in render_config(Settings(fill_gaps=False)).splitlines()

    def test_echo_is_byte_identical(self, tmp_path):
        text = render_config(Settings(num_keys=4, attention="dense", gcd_epsilon=1e-6))
        path = tmp_path / "run.cfg"
        path.write_text(text)
        assert render_config(load_config(path)) == text


class TestParseConfigText:
    """Line-based parsing."""

    def test_comments_and_blanks(self):
        assert parse_config_text("# header\n\nnum_keys = 4\n") == {"num_keys": "4"}

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="line 2: unknown key 'colour'"):
            parse_config_text("num_keys=4\ncolour=red\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config_text("num_keys 4\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("seed=1\nseed=2\n")


class TestLoadConfig:
    """Settings from files and overrides."""

    def test_defaults(self):
        config = load_config()
        assert config.embedding_thresh == 0.4
        assert config.max_lost == 30

    def test_file_values(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("max_lost=5\nmotion_gating=false\n")
        config = load_config(path)
        assert config.max_lost == 5
        assert config.motion_gating is False

    def test_override_wins(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("max_lost=5\n")
        assert load_config(path, max_lost=7).max_lost == 7

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.cfg")

    def test_invalid_value(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("num_keys=0\n")
        with pytest.raises(ConfigError, match="num_keys"):
            load_config(path)

    def test_environment(self, monkeypatch):
        monkeypatch.setenv("RELTRACK_MAX_LOST", "12")
        assert Settings().max_lost == 12
