"""The simulated board: a synthesizer, digital pots, and the bridge firmware."""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional

from src.config import BoardConfig
from src.registers.bus import write_fields
from src.registers.register_file import RegisterFile
from src.registers.register_map import RegisterMap, load_register_map
from src.sim.boot import BootState, run_boot
from src.sim.firmware import Firmware, FirmwarePhase, FirmwareState
from src.sim.models import ChannelStatus, RailStatus, decode_outputs, decode_rails

logger = logging.getLogger(__name__)


@dataclass
class BoardState:
    devices: Dict[int, RegisterFile]
    f_in: Fraction
    firmware: FirmwareState


class Board:
    def __init__(
        self,
        config: Optional[BoardConfig] = None,
        synth_map: Optional[RegisterMap] = None,
        pot_map: Optional[RegisterMap] = None,
    ):
        self.config = config or BoardConfig()
        self.synth_map = synth_map or load_register_map(self.config.synth_map)
        self.pot_map = pot_map or load_register_map(self.config.pot_map)

        devices = {self.config.synth_address: self.synth_map.new_register_file()}
        for address in self.config.pot_addresses:
            devices[address] = self.pot_map.new_register_file()

        self.devices = devices
        self.firmware = Firmware(devices, self.config.smb_latency)

    @property
    def state(self) -> BoardState:
        return BoardState(self.devices, self.config.f_in, self.firmware.state)

    @property
    def booted(self) -> bool:
        return self.firmware.phase is FirmwarePhase.MAIN_LOOP

    def boot(self) -> Optional[BootState]:
        """Startup, PowerInit, MainLoop. Booting a running board does nothing."""
        if self.booted:
            return None
        return run_boot(self)

    def apply_default_rail_codes(self) -> List[int]:
        initialised = []
        for rail in self.config.rails:
            if rail.default_code is None:
                continue
            write_fields(
                self.firmware.bus, rail.pot_i2c_address, self.pot_map,
                {rail.wiper_field: rail.default_code},
            )
            initialised.append(rail.rail_id)
        return initialised

    def device(self, i2c_address: int) -> RegisterFile:
        try:
            return self.devices[i2c_address]
        except KeyError:
            raise KeyError(f"no device at I2C address 0x{i2c_address:02X}") from None

    def ingest_byte(self, byte: int) -> None:
        self.firmware.ingest_byte(byte)

    def step(self) -> bool:
        return self.firmware.step()

    def query_outputs(self) -> List[ChannelStatus]:
        return decode_outputs(
            self.firmware.bus, self.config.synth_address, self.synth_map,
            self.config.f_in, self.config.constraints,
        )

    def query_rails(self) -> List[RailStatus]:
        return decode_rails(self.firmware.bus, self.config.rails, self.pot_map)


def boot(board: Board) -> Optional[BootState]:
    return board.boot()


def ingest_byte(board: Board, byte: int) -> None:
    board.ingest_byte(byte)


def step(board: Board) -> bool:
    return board.step()


def query_outputs(board: Board) -> List[ChannelStatus]:
    return board.query_outputs()


def query_rails(board: Board) -> List[RailStatus]:
    return board.query_rails()
