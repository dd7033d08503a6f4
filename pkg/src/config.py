"""Defaults, environment overrides, and the board config file.

Every default is compiled in, so an empty config file is a valid board. Paths
and ports can be moved by environment variable without touching a file:

    CLOCKGEN_CONFIG=boards/lab2.conf      # which board config to load
    CLOCKGEN_MAP_DIR=maps                 # where register maps are looked up
    CLOCKGEN_PORT=53380                   # simulator / TCP endpoint port
    CLOCKGEN_TRANSPORT=tcp:10.0.0.5:53380 # default CLI transport

The board config is ``key = value`` lines with ``#`` comments. Numbers are read
exactly, so ``f_in = 25e6`` is the integer 25 000 000, not a float.
"""

import logging
import os
import re
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from src.errors import ClockGenError
from src.planning.apply import DEFAULT_SYNTH_ADDRESS
from src.planning.frequency import DEFAULT_CONSTRAINTS, DEFAULT_F_IN, PlannerConstraints
from src.planning.power import RailModel

logger = logging.getLogger(__name__)

REPO_ROOT = Path(__file__).resolve().parent.parent

ENV_CONFIG = "CLOCKGEN_CONFIG"
ENV_MAP_DIR = "CLOCKGEN_MAP_DIR"
ENV_PORT = "CLOCKGEN_PORT"
ENV_TRANSPORT = "CLOCKGEN_TRANSPORT"

DEFAULT_PORT = 53380
DEFAULT_READ_TIMEOUT = Fraction(1)
DEFAULT_TRANSPORT = "sim"
DEFAULT_SMB_LATENCY = 1

DEFAULT_MAP_DIRECTORY = REPO_ROOT / "maps"
DEFAULT_CONFIG_FILE = DEFAULT_MAP_DIRECTORY / "board.conf"
SYNTH_MAP_NAME = "synth.regmap"
POT_MAP_NAME = "pot.regmap"

# Five rails on two four-channel pots: 0-3 on the first, 4 on the second.
# Codes give roughly 3.3, 2.5, 1.8, 3.3 and 2.5 V with the default resistors.
DEFAULT_POT_ADDRESSES = (0x2C, 0x2D)
DEFAULT_RAIL_CODES = (209, 127, 56, 209, 127)


class ConfigError(ClockGenError, ValueError):
    """A config file that cannot be used."""

    def __init__(self, message: str, source: str = "<string>", line_number: Optional[int] = None):
        self.message = message
        self.source = source
        self.line_number = line_number
        where = f"{source}, line {line_number}" if line_number else source
        super().__init__(f"{where}: {message}")


def default_rails() -> List[RailModel]:
    rails = []
    for rail_id, code in enumerate(DEFAULT_RAIL_CODES):
        pot = DEFAULT_POT_ADDRESSES[0] if rail_id < 4 else DEFAULT_POT_ADDRESSES[1]
        rails.append(RailModel(rail_id, pot, rail_id % 4, default_code=code))
    return rails


@dataclass(frozen=True)
class BoardConfig:
    f_in: Fraction = DEFAULT_F_IN
    constraints: PlannerConstraints = DEFAULT_CONSTRAINTS
    synth_address: int = DEFAULT_SYNTH_ADDRESS
    synth_map: Path = DEFAULT_MAP_DIRECTORY / SYNTH_MAP_NAME
    pot_map: Path = DEFAULT_MAP_DIRECTORY / POT_MAP_NAME
    rails: Tuple[RailModel, ...] = field(default_factory=lambda: tuple(default_rails()))
    read_timeout: Fraction = DEFAULT_READ_TIMEOUT
    port: int = DEFAULT_PORT
    smb_latency: int = DEFAULT_SMB_LATENCY

    def __post_init__(self):
        # Device addresses are distinct and each wiper drives one rail.
        wipers = {}
        for rail in self.rails:
            if rail.pot_i2c_address == self.synth_address:
                raise ConfigError(
                    f"rail {rail.rail_id} puts a pot at 0x{rail.pot_i2c_address:02X}, "
                    f"the synthesizer's address",
                    "board config",
                )
            wiper = (rail.pot_i2c_address, rail.pot_channel)
            if wiper in wipers:
                raise ConfigError(
                    f"rails {wipers[wiper]} and {rail.rail_id} share wiper {rail.pot_channel} "
                    f"of the pot at 0x{rail.pot_i2c_address:02X}",
                    "board config",
                )
            wipers[wiper] = rail.rail_id

    @property
    def pot_addresses(self) -> Tuple[int, ...]:
        seen = []
        for rail in self.rails:
            if rail.pot_i2c_address not in seen:
                seen.append(rail.pot_i2c_address)
        return tuple(seen)

    def rail(self, rail_id: int) -> RailModel:
        for rail in self.rails:
            if rail.rail_id == rail_id:
                return rail
        raise ConfigError(
            f"no rail {rail_id}; configured rails are "
            f"{', '.join(str(r.rail_id) for r in self.rails)}"
        )


def resolve_map_directory() -> Path:
    override = os.environ.get(ENV_MAP_DIR, "").strip()
    return Path(override) if override else DEFAULT_MAP_DIRECTORY


def resolve_config_path() -> Path:
    override = os.environ.get(ENV_CONFIG, "").strip()
    return Path(override) if override else DEFAULT_CONFIG_FILE


def resolve_port() -> int:
    override = os.environ.get(ENV_PORT, "").strip()
    if not override:
        return DEFAULT_PORT
    try:
        return int(override)
    except ValueError:
        raise ConfigError(f"{ENV_PORT}={override!r} is not a port number") from None


def resolve_transport() -> str:
    return os.environ.get(ENV_TRANSPORT, "").strip() or DEFAULT_TRANSPORT


_CONSTRAINT_KEYS = {f.name for f in fields(PlannerConstraints)}
_RAIL_KEY = re.compile(r"^rail\.(\d+)\.(\w+)$")
_RAIL_FIELDS = {"pot", "channel", "v_ref", "r_fixed", "r_ab", "r_wiper", "default_code"}
_INTEGER_CONSTRAINTS = {
    "feedback_min", "feedback_max", "output_min", "output_max",
    "denominator_max", "phase_steps_max", "channels",
}


def _exact(text: str, key: str, source: str, line_number: int) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{key}: {text!r} is not a number", source, line_number) from None


def _integer(text: str, key: str, source: str, line_number: int) -> int:
    try:
        return int(text, 0)
    except ValueError:
        value = _exact(text, key, source, line_number)
        if value.denominator != 1:
            raise ConfigError(f"{key}: {text!r} is not an integer", source, line_number) from None
        return value.numerator


def parse_board_config(
    text: str,
    source: str = "<string>",
    base_directory: Optional[Path] = None,
) -> BoardConfig:
    """Build a `BoardConfig` from ``key = value`` text.

    Relative map paths resolve against ``base_directory``, which defaults to
    the map directory. Unknown keys are errors.
    """
    base_directory = base_directory or resolve_map_directory()
    config = BoardConfig(
        synth_map=base_directory / SYNTH_MAP_NAME,
        pot_map=base_directory / POT_MAP_NAME,
    )
    constraint_updates: Dict[str, object] = {}
    rail_updates: Dict[int, Dict[str, object]] = {}
    updates: Dict[str, object] = {}

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or not key or not value:
            raise ConfigError(f"expected 'key = value', got {line!r}", source, line_number)

        if key == "f_in":
            updates["f_in"] = _exact(value, key, source, line_number)
        elif key in _CONSTRAINT_KEYS:
            if key in _INTEGER_CONSTRAINTS:
                constraint_updates[key] = _integer(value, key, source, line_number)
            else:
                constraint_updates[key] = _exact(value, key, source, line_number)
        elif key == "synth.address":
            updates["synth_address"] = _integer(value, key, source, line_number)
        elif key in ("synth.map", "pot.map"):
            path = Path(value)
            updates[key.replace(".", "_")] = path if path.is_absolute() else base_directory / path
        elif key == "session.read_timeout":
            updates["read_timeout"] = _exact(value, key, source, line_number)
        elif key == "session.port":
            updates["port"] = _integer(value, key, source, line_number)
        elif key == "firmware.smb_latency":
            updates["smb_latency"] = _integer(value, key, source, line_number)
        elif _RAIL_KEY.match(key):
            match = _RAIL_KEY.match(key)
            rail_id, attribute = int(match[1]), match[2]
            if attribute not in _RAIL_FIELDS:
                raise ConfigError(f"unknown rail setting {key!r}", source, line_number)
            if attribute in ("pot", "channel", "default_code"):
                parsed = _integer(value, key, source, line_number)
            else:
                parsed = _exact(value, key, source, line_number)
            rail_updates.setdefault(rail_id, {})[attribute] = parsed
        else:
            raise ConfigError(f"unknown key {key!r}", source, line_number)

    try:
        if constraint_updates:
            updates["constraints"] = replace(DEFAULT_CONSTRAINTS, **constraint_updates)
        if rail_updates:
            updates["rails"] = _merge_rails(config.rails, rail_updates)
        config = replace(config, **updates)
    except ConfigError as exc:
        raise ConfigError(exc.message, source) from exc
    except ValueError as exc:
        raise ConfigError(str(exc), source) from exc

    if config.read_timeout <= 0:
        raise ConfigError("session.read_timeout must be positive", source)
    if not 1 <= config.smb_latency <= 5:
        raise ConfigError("firmware.smb_latency must be 1..5 steps", source)
    if not 0 <= config.synth_address <= 0x7F:
        raise ConfigError("synth.address must fit 7 bits", source)
    return config


def _merge_rails(defaults, rail_updates) -> Tuple[RailModel, ...]:
    rails = {rail.rail_id: rail for rail in defaults}
    renames = {"pot": "pot_i2c_address", "channel": "pot_channel"}
    for rail_id, attributes in sorted(rail_updates.items()):
        changes = {renames.get(k, k): v for k, v in attributes.items()}
        if rail_id in rails:
            rails[rail_id] = replace(rails[rail_id], **changes)
        else:
            if "pot_i2c_address" not in changes or "pot_channel" not in changes:
                raise ValueError(f"new rail {rail_id} needs both 'pot' and 'channel'")
            rails[rail_id] = RailModel(rail_id, **changes)
    return tuple(rails[k] for k in sorted(rails))


def load_board_config(path=None) -> BoardConfig:
    """Load the board config; ``None`` means `resolve_config_path()`."""
    path = Path(path) if path is not None else resolve_config_path()
    if not path.is_file():
        raise ConfigError(f"no board config at {path}", str(path))
    logger.debug("Loading board config from %s", path)
    return parse_board_config(
        path.read_text(encoding="utf-8"), source=str(path), base_directory=path.parent,
    )
