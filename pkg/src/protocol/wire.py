"""The bridge protocol, bit for bit.

Every host request is four bytes: an opcode, the target's 7-bit I2C address,
the register address, and a payload. ``0xFF`` writes and ``0x00`` reads. A read
answers with exactly one byte, the register value, and nothing else. There is
no status byte and no error channel, so a device-side failure is only ever
visible to the host as a timeout.

Reads are framed as four bytes too, with the payload sent as ``0x00`` and
ignored on decode. Fixed-length frames make the stream self-delimiting over any
byte transport, which is what lets TCP carry it with no extra framing.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator

from src.errors import ClockGenError

COMMAND_LENGTH = 4
RESPONSE_LENGTH = 1

OPCODE_WRITE = 0xFF
OPCODE_READ = 0x00

MAX_I2C_ADDRESS = 0x7F
MAX_BYTE = 0xFF


class WireError(ClockGenError, ValueError):
    """Bytes that are not a valid command or response."""


class FramingError(WireError):
    """Wrong number of bytes for a frame."""


class InvalidOpcodeError(WireError):
    """The first byte is neither 0xFF (write) nor 0x00 (read)."""


class InvalidAddressError(WireError):
    """An I2C address outside 7 bits, or a byte field outside 0..255."""


class Action(Enum):
    WRITE = "write"
    READ = "read"


@dataclass(frozen=True)
class BridgeCommand:
    """One request crossing the bridge.

    ``i2c_address`` is the unshifted 7-bit address. The firmware applies the
    R/W bit when it drives the bus, so the host never sees it.
    """

    action: Action
    i2c_address: int
    register_address: int
    payload: int = 0

    def __post_init__(self):
        if not 0 <= self.i2c_address <= MAX_I2C_ADDRESS:
            raise InvalidAddressError(
                f"I2C address 0x{self.i2c_address:X} does not fit in 7 bits"
            )
        if not 0 <= self.register_address <= MAX_BYTE:
            raise InvalidAddressError(
                f"register address {self.register_address} is outside 0x00..0xFF"
            )
        if not 0 <= self.payload <= MAX_BYTE:
            raise InvalidAddressError(f"payload {self.payload} is outside 0x00..0xFF")
        if self.action is Action.READ and self.payload != 0:
            # A read carries no value. Normalise here so two reads of the same
            # register always compare equal.
            object.__setattr__(self, "payload", 0)

    @classmethod
    def write(cls, i2c_address: int, register_address: int, value: int) -> "BridgeCommand":
        return cls(Action.WRITE, i2c_address, register_address, value)

    @classmethod
    def read(cls, i2c_address: int, register_address: int) -> "BridgeCommand":
        return cls(Action.READ, i2c_address, register_address, 0)

    @property
    def is_write(self) -> bool:
        return self.action is Action.WRITE

    def __str__(self):
        if self.is_write:
            return (
                f"Write(0x{self.i2c_address:02X}, 0x{self.register_address:02X}, "
                f"0x{self.payload:02X})"
            )
        return f"Read(0x{self.i2c_address:02X}, 0x{self.register_address:02X})"


@dataclass(frozen=True)
class ReadResponse:
    value: int

    def __post_init__(self):
        if not 0 <= self.value <= MAX_BYTE:
            raise InvalidAddressError(f"response value {self.value} is outside 0x00..0xFF")


def encode_command(cmd: BridgeCommand) -> bytes:
    """``[opcode, i2c, register, payload]``; the payload is 0x00 for a read."""
    opcode = OPCODE_WRITE if cmd.is_write else OPCODE_READ
    payload = cmd.payload if cmd.is_write else 0
    return bytes((opcode, cmd.i2c_address, cmd.register_address, payload))


def decode_command(data: bytes) -> BridgeCommand:
    """Inverse of `encode_command`.

    Total over four-byte input: every sequence comes back as a command or a
    `WireError`, never anything else.
    """
    if len(data) != COMMAND_LENGTH:
        raise FramingError(
            f"a command is {COMMAND_LENGTH} bytes, got {len(data)}"
        )
    opcode, i2c_address, register_address, payload = bytes(data)

    if opcode == OPCODE_WRITE:
        action = Action.WRITE
    elif opcode == OPCODE_READ:
        action = Action.READ
        payload = 0
    else:
        raise InvalidOpcodeError(
            f"opcode 0x{opcode:02X} is neither write (0xFF) nor read (0x00)"
        )

    return BridgeCommand(action, i2c_address, register_address, payload)


def encode_response(response: ReadResponse) -> bytes:
    return bytes((response.value,))


def decode_response(data: bytes) -> ReadResponse:
    if len(data) != RESPONSE_LENGTH:
        raise FramingError(f"a response is {RESPONSE_LENGTH} byte, got {len(data)}")
    return ReadResponse(data[0])


class CommandFramer:
    """Cuts an arbitrary byte stream into four-byte frames.

    Chunk boundaries carry no meaning: two writes of four bytes, one write of
    eight, or eight writes of one all frame the same way. Leftover bytes wait
    for the next `feed`.
    """

    def __init__(self):
        self._buffer = bytearray()

    def feed(self, data: Iterable[int]) -> Iterator[bytes]:
        self._buffer.extend(data)
        while len(self._buffer) >= COMMAND_LENGTH:
            frame = bytes(self._buffer[:COMMAND_LENGTH])
            del self._buffer[:COMMAND_LENGTH]
            yield frame

    @property
    def pending(self) -> int:
        """Bytes received toward an incomplete frame."""
        return len(self._buffer)

    def clear(self) -> None:
        self._buffer.clear()
