from typing import Iterable, Optional

REGISTER_COUNT = 256
BYTE_MASK = 0xFF


def _check_address(addr: int) -> None:
    if not 0 <= addr < REGISTER_COUNT:
        raise ValueError(f"register address {addr} is outside 0x00..0xFF")


class RegisterFile:
    """A flat page of 256 eight-bit registers behind per-register write masks.

    A mask bit of 1 is writable. Writes to read-only bits are dropped silently,
    because the bus has no way to report them:

        new = (old & ~mask) | (value & mask)

    Reads are total over 0..255. An address nobody configured reads 0x00.
    """

    def __init__(
        self,
        reset_values: Optional[Iterable[int]] = None,
        write_masks: Optional[Iterable[int]] = None,
    ):
        self._reset = bytearray(reset_values or bytes(REGISTER_COUNT))
        self.write_masks = bytearray(write_masks or bytes(REGISTER_COUNT))
        if len(self._reset) != REGISTER_COUNT or len(self.write_masks) != REGISTER_COUNT:
            raise ValueError(f"a register file has exactly {REGISTER_COUNT} registers")
        self.registers = bytearray(self._reset)

    @classmethod
    def fully_writable(cls) -> "RegisterFile":
        """Every bit of every register writable, every register reset to 0."""
        return cls(write_masks=bytes([BYTE_MASK]) * REGISTER_COUNT)

    def read(self, addr: int) -> int:
        _check_address(addr)
        return self.registers[addr]

    def write(self, addr: int, value: int) -> None:
        _check_address(addr)
        if not 0 <= value <= BYTE_MASK:
            raise ValueError(f"register value {value} is outside 0x00..0xFF")
        mask = self.write_masks[addr]
        old = self.registers[addr]
        self.registers[addr] = (old & ~mask & BYTE_MASK) | (value & mask)

    def reset(self) -> None:
        self.registers[:] = self._reset

    def snapshot(self) -> bytes:
        return bytes(self.registers)


def read_register(file: RegisterFile, addr: int) -> int:
    return file.read(addr)


def write_register(file: RegisterFile, addr: int, value: int) -> None:
    file.write(addr, value)
