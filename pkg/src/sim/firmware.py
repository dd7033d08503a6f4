"""The bridge microcontroller, modelled at the level the host can observe.

The real firmware is an interrupt routine plus a main loop sharing two flags.
The interrupt moves bytes from the USB endpoint into a four-byte receive
buffer; when the buffer fills it decodes the command, parks it in ``pending``
and raises ``flag_write`` or ``flag_read``. The main loop polls the flags,
runs the SMB transaction, and clears the flag.

While a flag is up the interrupt stops draining the endpoint, so the next
command waits in the FIFO instead of overwriting ``pending``.

Time is counted in main-loop steps. A transaction flagged at step ``t``
completes at step ``t + smb_latency``.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, List, Mapping, Optional

from src.protocol.wire import BridgeCommand, CommandFramer, WireError, decode_command
from src.registers.register_file import RegisterFile

logger = logging.getLogger(__name__)

SMB_LATENCY_MIN = 1
SMB_LATENCY_MAX = 5

# An absent device leaves SDA released; the bus reads all ones.
NO_DEVICE_RESPONSE = 0xFF


class FirmwarePhase(Enum):
    STARTUP = "startup"
    POWER_INIT = "power_init"
    MAIN_LOOP = "main_loop"


@dataclass(frozen=True)
class DispatchRecord:
    command: BridgeCommand
    flagged_at: int
    dispatched_at: int

    @property
    def latency(self) -> int:
        return self.dispatched_at - self.flagged_at


@dataclass
class FirmwareState:
    phase: FirmwarePhase = FirmwarePhase.STARTUP
    flag_write: bool = False
    flag_read: bool = False
    pending: Optional[BridgeCommand] = None
    rx_buffer: CommandFramer = field(default_factory=CommandFramer)
    endpoint_fifo: Deque[int] = field(default_factory=deque)
    tx_queue: Deque[int] = field(default_factory=deque)
    step_counter: int = 0
    flagged_at: Optional[int] = None
    discarded: int = 0

    @property
    def flagged(self) -> bool:
        return self.flag_write or self.flag_read


class DeviceBus:
    """The I2C side of the bridge: register files by 7-bit address.

    Writes to an address nobody answers are dropped; reads return 0xFF.
    """

    def __init__(self, devices: Mapping[int, RegisterFile]):
        self.devices = devices

    def read_register(self, i2c_address: int, register_address: int) -> int:
        device = self.devices.get(i2c_address)
        if device is None:
            logger.warning("Read from absent I2C device 0x%02X", i2c_address)
            return NO_DEVICE_RESPONSE
        return device.read(register_address)

    def write_register(self, i2c_address: int, register_address: int, value: int) -> None:
        device = self.devices.get(i2c_address)
        if device is None:
            logger.warning(
                "Write to absent I2C device 0x%02X ignored (register 0x%02X)",
                i2c_address, register_address,
            )
            return
        device.write(register_address, value)


class Firmware:
    def __init__(self, devices: Mapping[int, RegisterFile], smb_latency: int = SMB_LATENCY_MIN):
        if not SMB_LATENCY_MIN <= smb_latency <= SMB_LATENCY_MAX:
            raise ValueError(
                f"smb_latency must be {SMB_LATENCY_MIN}..{SMB_LATENCY_MAX} steps, "
                f"got {smb_latency}"
            )
        self.bus = DeviceBus(devices)
        self.smb_latency = smb_latency
        self.state = FirmwareState()
        self.dispatch_log: List[DispatchRecord] = []

    @property
    def phase(self) -> FirmwarePhase:
        return self.state.phase

    @property
    def idle(self) -> bool:
        """Nothing flagged and nothing waiting in the endpoint."""
        return not self.state.flagged and not self.state.endpoint_fifo

    def clear_queues(self) -> None:
        """Drop everything in flight. Register files are not touched."""
        state = self.state
        state.flag_write = state.flag_read = False
        state.pending = None
        state.flagged_at = None
        state.rx_buffer.clear()
        state.endpoint_fifo.clear()
        state.tx_queue.clear()

    def ingest_byte(self, byte: int) -> None:
        if not 0 <= byte <= 0xFF:
            raise ValueError(f"{byte} is not a byte")
        self.state.endpoint_fifo.append(byte)
        self._usb_interrupt()

    def ingest(self, data: bytes) -> None:
        for byte in data:
            self.ingest_byte(byte)

    def step(self) -> bool:
        """One main-loop iteration. Returns False when there was nothing to do."""
        state = self.state
        if state.phase is not FirmwarePhase.MAIN_LOOP:
            return False
        if self.idle:
            return False

        state.step_counter += 1
        if state.flagged and state.step_counter - state.flagged_at >= self.smb_latency:
            self._dispatch()
            self._usb_interrupt()
        return True

    def run_until_idle(self, max_steps: int = 100_000) -> int:
        steps = 0
        while self.step():
            steps += 1
            if steps >= max_steps:
                raise RuntimeError(f"firmware still busy after {max_steps} steps")
        return steps

    def take_responses(self, count: int) -> bytes:
        if count > len(self.state.tx_queue):
            raise ValueError(
                f"{count} response bytes requested, {len(self.state.tx_queue)} queued"
            )
        return bytes(self.state.tx_queue.popleft() for _ in range(count))

    @property
    def responses_pending(self) -> int:
        return len(self.state.tx_queue)

    def _usb_interrupt(self) -> None:
        state = self.state
        while not state.flagged and state.endpoint_fifo:
            for frame in state.rx_buffer.feed((state.endpoint_fifo.popleft(),)):
                self._flag(frame)

    def _flag(self, frame: bytes) -> None:
        state = self.state
        try:
            command = decode_command(frame)
        except WireError as exc:
            state.discarded += 1
            logger.warning("Discarded frame %s: %s", frame.hex(" "), exc)
            return

        state.pending = command
        state.flagged_at = state.step_counter
        if command.is_write:
            state.flag_write = True
        else:
            state.flag_read = True
        logger.debug("Flagged %s at step %d", command, state.step_counter)

    def _dispatch(self) -> None:
        state = self.state
        command = state.pending
        if state.flag_write:
            self.bus.write_register(
                command.i2c_address, command.register_address, command.payload
            )
        else:
            state.tx_queue.append(
                self.bus.read_register(command.i2c_address, command.register_address)
            )

        self.dispatch_log.append(
            DispatchRecord(command, state.flagged_at, state.step_counter)
        )
        logger.debug("Dispatched %s at step %d", command, state.step_counter)
        state.flag_write = state.flag_read = False
        state.pending = None
        state.flagged_at = None
