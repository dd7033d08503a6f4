"""Shared fixtures: the shipped maps, a booted simulator, and a host handle on it.

Everything here runs in-process. Tests that need real sockets build their own
server and carry the `integration` marker.
"""

from typing import Dict, List, Tuple

import pytest

from src.config import BoardConfig
from src.host.bridge import bridge_init
from src.registers.register_file import RegisterFile
from src.registers.register_map import load_register_map
from src.sim.server import Simulator
from src.transport.session import InProcessEndpoint, SessionConfig


class RecordingBus:
    """A `RegisterBus` over plain register files that logs every access."""

    def __init__(self, devices: Dict[int, RegisterFile]):
        self.devices = devices
        self.log: List[Tuple[str, int, int, int]] = []

    def read_register(self, i2c_address, register_address):
        value = self.devices[i2c_address].read(register_address)
        self.log.append(("read", i2c_address, register_address, value))
        return value

    def write_register(self, i2c_address, register_address, value):
        self.log.append(("write", i2c_address, register_address, value))
        self.devices[i2c_address].write(register_address, value)

    @property
    def writes(self):
        return [entry for entry in self.log if entry[0] == "write"]

    @property
    def reads(self):
        return [entry for entry in self.log if entry[0] == "read"]


@pytest.fixture(scope="session")
def board_config():
    return BoardConfig()


@pytest.fixture(scope="session")
def synth_map(board_config):
    return load_register_map(board_config.synth_map)


@pytest.fixture(scope="session")
def pot_map(board_config):
    return load_register_map(board_config.pot_map)


@pytest.fixture
def synth_bus(synth_map):
    return RecordingBus({0x70: synth_map.new_register_file()})


@pytest.fixture
def pot_bus(pot_map):
    return RecordingBus({0x2C: pot_map.new_register_file(), 0x2D: pot_map.new_register_file()})


@pytest.fixture
def simulator(board_config):
    return Simulator(config=board_config)


@pytest.fixture
def handle(simulator, board_config):
    handle = bridge_init(SessionConfig(InProcessEndpoint(simulator)), board_config)
    yield handle
    handle.close()
