"""Tests for board configuration (src/config.py): the file format and env overrides."""

from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import pytest

from src.config import (
    DEFAULT_CONFIG_FILE,
    DEFAULT_PORT,
    ENV_CONFIG,
    ENV_MAP_DIR,
    ENV_PORT,
    ENV_TRANSPORT,
    BoardConfig,
    ConfigError,
    load_board_config,
    parse_board_config,
    resolve_config_path,
    resolve_map_directory,
    resolve_port,
    resolve_transport,
)


# --- the shipped file --------------------------------------------------------

def test_shipped_config_matches_the_compiled_defaults():
    shipped = load_board_config(DEFAULT_CONFIG_FILE)
    assert shipped == BoardConfig()


def test_shipped_rails_and_pots():
    config = load_board_config(DEFAULT_CONFIG_FILE)
    assert [rail.default_code for rail in config.rails] == [209, 127, 56, 209, 127]
    assert config.pot_addresses == (0x2C, 0x2D)
    assert config.rail(4).pot_i2c_address == 0x2D


# --- parsing -----------------------------------------------------------------

def test_values_are_exact(tmp_path):
    config = parse_board_config(
        "f_in = 27000000\nsession.read_timeout = 1/4\nmax_rel_error = 1e-12\n",
        base_directory=tmp_path,
    )
    assert config.f_in == 27_000_000
    assert config.read_timeout == Fraction(1, 4)
    assert config.constraints.max_rel_error == Fraction(1, 10**12)


def test_map_paths_resolve_against_the_config_directory(tmp_path):
    config = parse_board_config("synth.map = bench.regmap\n", base_directory=tmp_path)
    assert config.synth_map == tmp_path / "bench.regmap"
    assert config.pot_map == tmp_path / "pot.regmap"


def test_rail_settings_merge_into_the_defaults(tmp_path):
    config = parse_board_config("rail.2.r_fixed = 12000\n", base_directory=tmp_path)
    assert config.rail(2).r_fixed == 12_000
    assert config.rail(2).default_code == 56
    assert config.rail(1).r_fixed == 10_000


def test_new_rail_needs_a_pot_and_a_channel(tmp_path):
    with pytest.raises(ConfigError, match="'pot' and 'channel'"):
        parse_board_config("rail.5.v_ref = 0.8\n", base_directory=tmp_path)
    config = parse_board_config("rail.5.pot = 0x2D\nrail.5.channel = 1\n", base_directory=tmp_path)
    assert config.rail(5).wiper_field == "wiper1"


def test_pot_on_the_synthesizer_address_is_refused(tmp_path):
    with pytest.raises(ConfigError, match="synthesizer's address") as caught:
        parse_board_config("rail.0.pot = 0x70\n", "bench.conf", tmp_path)
    assert caught.value.source == "bench.conf"
    with pytest.raises(ConfigError, match="synthesizer's address"):
        parse_board_config("synth.address = 0x2D\n", base_directory=tmp_path)


def test_two_rails_on_one_wiper_are_refused(tmp_path):
    with pytest.raises(ConfigError, match="rails 0 and 1 share wiper 0"):
        parse_board_config("rail.1.channel = 0\n", base_directory=tmp_path)


def test_conflicting_rails_are_refused_without_a_file():
    rails = BoardConfig().rails
    with pytest.raises(ConfigError):
        BoardConfig(rails=rails + (replace(rails[4], rail_id=5),))


def test_unknown_key_names_its_line(tmp_path):
    with pytest.raises(ConfigError) as caught:
        parse_board_config("f_in = 25000000\n\nvco_maxx = 3e9\n", "bench.conf", tmp_path)
    assert caught.value.line_number == 3
    assert str(caught.value).startswith("bench.conf, line 3:")
    assert "vco_maxx" in str(caught.value)


@pytest.mark.parametrize(
    "text",
    [
        "f_in 25000000\n",
        "f_in = fast\n",
        "channels = 2.5\n",
        "rail.1.colour = red\n",
        "session.read_timeout = 0\n",
        "firmware.smb_latency = 6\n",
        "synth.address = 0x80\n",
        "feedback_min = 600\n",
    ],
)
def test_bad_values_are_config_errors(text, tmp_path):
    with pytest.raises(ConfigError):
        parse_board_config(text, base_directory=tmp_path)


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError, match="no board config"):
        load_board_config(tmp_path / "absent.conf")


def test_unknown_rail_id():
    with pytest.raises(ConfigError, match="no rail 7"):
        BoardConfig().rail(7)


# --- environment -------------------------------------------------------------

def test_defaults_without_environment(monkeypatch):
    for name in (ENV_CONFIG, ENV_MAP_DIR, ENV_PORT, ENV_TRANSPORT):
        monkeypatch.delenv(name, raising=False)
    assert resolve_config_path() == DEFAULT_CONFIG_FILE
    assert resolve_port() == DEFAULT_PORT
    assert resolve_transport() == "sim"


def test_environment_overrides(monkeypatch, tmp_path):
    monkeypatch.setenv(ENV_CONFIG, f"  {tmp_path / 'bench.conf'}  ")
    monkeypatch.setenv(ENV_MAP_DIR, str(tmp_path))
    monkeypatch.setenv(ENV_PORT, "60000")
    monkeypatch.setenv(ENV_TRANSPORT, "tcp:bench")
    assert resolve_config_path() == tmp_path / "bench.conf"
    assert resolve_map_directory() == tmp_path
    assert resolve_port() == 60_000
    assert resolve_transport() == "tcp:bench"


def test_blank_environment_values_fall_back(monkeypatch):
    monkeypatch.setenv(ENV_PORT, "   ")
    monkeypatch.setenv(ENV_TRANSPORT, "")
    assert resolve_port() == DEFAULT_PORT
    assert resolve_transport() == "sim"


def test_bad_port_in_the_environment(monkeypatch):
    monkeypatch.setenv(ENV_PORT, "eighty")
    with pytest.raises(ConfigError, match=ENV_PORT):
        resolve_port()


def test_config_file_from_the_environment(monkeypatch, tmp_path):
    (tmp_path / "bench.conf").write_text("f_in = 10000000\n", encoding="utf-8")
    monkeypatch.setenv(ENV_CONFIG, str(tmp_path / "bench.conf"))
    config = load_board_config()
    assert config.f_in == 10_000_000
    assert config.synth_map == Path(tmp_path) / "synth.regmap"
