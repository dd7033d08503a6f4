"""The bridge as the host sees it: one register read or write per command."""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional, Tuple

from src.config import BoardConfig
from src.errors import ClockGenError
from src.planning.frequency import FrequencyPlan, PhasePlan, PlannerConstraints
from src.planning.power import RailModel
from src.protocol.wire import (
    RESPONSE_LENGTH,
    BridgeCommand,
    decode_response,
    encode_command,
)
from src.registers.register_map import RegisterMap, load_register_map
from src.transport.session import Session, SessionConfig, open_session

logger = logging.getLogger(__name__)


class UnknownRailError(ClockGenError, ValueError):
    """A rail id the board config does not define."""


class Bridge:
    """Counts what it sends, so tests can check one command per access."""

    def __init__(self, session: Session):
        self.session = session
        self.commands_sent = 0

    def read_register(self, i2c_address: int, register_address: int) -> int:
        self._send(BridgeCommand.read(i2c_address, register_address))
        return decode_response(self.session.read_bytes(RESPONSE_LENGTH)).value

    def write_register(self, i2c_address: int, register_address: int, value: int) -> None:
        self._send(BridgeCommand.write(i2c_address, register_address, value))

    def _send(self, command: BridgeCommand) -> None:
        self.session.write_bytes(encode_command(command))
        self.commands_sent += 1

    def close(self) -> None:
        self.session.close()


@dataclass
class DeviceHandle:
    bridge: Bridge
    synth_map: RegisterMap
    pot_map: RegisterMap
    synth_address: int
    constraints: PlannerConstraints
    rails: Tuple[RailModel, ...]
    f_in: Fraction
    plans: Dict[int, FrequencyPlan] = field(default_factory=dict)
    phases: Dict[int, PhasePlan] = field(default_factory=dict)

    # Device operations go through these two methods and nothing else, which
    # also makes the handle a `RegisterBus`.
    def read_register(self, i2c_address: int, register_address: int) -> int:
        return bridge_read(self, i2c_address, register_address)

    def write_register(self, i2c_address: int, register_address: int, value: int) -> None:
        bridge_write(self, i2c_address, register_address, value)

    def rail(self, rail_id: int) -> RailModel:
        for rail in self.rails:
            if rail.rail_id == rail_id:
                return rail
        raise UnknownRailError(
            f"no rail {rail_id}; the board has rails "
            f"{', '.join(str(r.rail_id) for r in self.rails)}"
        )

    def close(self) -> None:
        self.bridge.close()

    def __enter__(self) -> "DeviceHandle":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def bridge_init(
    session_config: SessionConfig,
    board_config: Optional[BoardConfig] = None,
) -> DeviceHandle:
    """Open a session and load the register maps the board config names."""
    board_config = board_config or BoardConfig()
    synth_map = load_register_map(board_config.synth_map)
    pot_map = load_register_map(board_config.pot_map)
    session = open_session(session_config)
    return DeviceHandle(
        bridge=Bridge(session),
        synth_map=synth_map,
        pot_map=pot_map,
        synth_address=board_config.synth_address,
        constraints=board_config.constraints,
        rails=board_config.rails,
        f_in=board_config.f_in,
    )


def bridge_read(handle: DeviceHandle, i2c_address: int, register_address: int) -> int:
    value = handle.bridge.read_register(i2c_address, register_address)
    logger.debug("Read 0x%02X:0x%02X = 0x%02X", i2c_address, register_address, value)
    return value


def bridge_write(handle: DeviceHandle, i2c_address: int, register_address: int, value: int) -> None:
    logger.debug("Write 0x%02X:0x%02X <- 0x%02X", i2c_address, register_address, value)
    handle.bridge.write_register(i2c_address, register_address, value)
