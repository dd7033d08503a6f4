"""Named-field access over anything that can read and write a register.

The host's bridge and the tests' in-memory stubs both satisfy `RegisterBus`, so
the code that turns a plan into register writes never knows which it is
talking to.
"""

from typing import Dict, Iterable, Mapping, Protocol

from src.registers.register_map import RegisterMap


class RegisterBus(Protocol):
    def read_register(self, i2c_address: int, register_address: int) -> int: ...

    def write_register(self, i2c_address: int, register_address: int, value: int) -> None: ...


def write_fields(
    bus: RegisterBus,
    i2c_address: int,
    register_map: RegisterMap,
    values: Mapping[str, int],
) -> None:
    """Write named fields, touching only their bits.

    Updates are merged per register first. A register whose writable bits are
    all covered is written blind; one that holds bits of other fields is read,
    merged and written back. Registers go out in ascending address order.
    """
    updates: Dict[int, list] = {}
    for name, value in values.items():
        for address, (mask, bits) in register_map.field(name).deposit(value).items():
            merged = updates.setdefault(address, [0, 0])
            merged[0] |= mask
            merged[1] |= bits

    for address in sorted(updates):
        mask, bits = updates[address]
        entry = register_map.entry(address)
        writable = entry.write_mask if entry is not None else 0xFF
        if (writable & ~mask) & 0xFF:
            current = bus.read_register(i2c_address, address)
            bits = (current & ~mask & 0xFF) | bits
        bus.write_register(i2c_address, address, bits)


def read_fields(
    bus: RegisterBus,
    i2c_address: int,
    register_map: RegisterMap,
    names: Iterable[str],
) -> Dict[str, int]:
    """Read named fields, fetching each register once."""
    names = list(names)
    cache: Dict[int, int] = {}

    def read(address: int) -> int:
        if address not in cache:
            cache[address] = bus.read_register(i2c_address, address)
        return cache[address]

    return {name: register_map.field(name).extract(read) for name in names}
