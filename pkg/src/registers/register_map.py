"""Register maps: reset values, write masks, and where the named fields live.

The register layout is data, not code. A map file has two sections. The first
lists registers the way vendor tools export them:

    # addr, reset, mask
    0x1D, 0x90, 0xFF

The second starts at a ``[fields]`` header and binds names to bit ranges:

    [fields]
    oe0 = 0xE6[0:0]
    fb.p1 = 0x61[7:0]
    fb.p1 = 0x62[7:0]
    fb.p1 = 0x63[1:0]

A field wider than one register is bound once per segment by repeating its
name. Segments concatenate least-significant first, in the order they appear,
so ``fb.p1`` above is 18 bits with ``0x61`` as its low byte.

Two fields may share a register but never a bit. `parse_register_map` checks
that with an exhaustive scan, so a map that loads is a map the planner can
write without clobbering a neighbour.
"""

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Tuple

from src.errors import ClockGenError
from src.registers.register_file import REGISTER_COUNT, RegisterFile

logger = logging.getLogger(__name__)

FIELDS_HEADER = "[fields]"

ENTRY_LINE = re.compile(
    r"^(?P<addr>0[xX][0-9A-Fa-f]+|\d+)\s*,\s*"
    r"(?P<value>0[xX][0-9A-Fa-f]+|\d+)\s*,\s*"
    r"(?P<mask>0[xX][0-9A-Fa-f]+|\d+)$"
)
FIELD_LINE = re.compile(
    r"^(?P<name>[A-Za-z_][A-Za-z0-9_.]*)\s*=\s*"
    r"(?P<addr>0[xX][0-9A-Fa-f]+|\d+)\s*\[\s*(?P<msb>\d+)\s*:\s*(?P<lsb>\d+)\s*\]$"
)


class RegisterMapError(ClockGenError, ValueError):
    """A register map that cannot be used."""


class RegisterMapSyntaxError(RegisterMapError):
    """A line that does not parse, or parses to an illegal value."""

    def __init__(self, line_number: int, message: str, source: str = "<string>"):
        self.line_number = line_number
        self.source = source
        super().__init__(f"{source}, line {line_number}: {message}")


class OverlappingFieldsError(RegisterMapError):
    """Two named fields claim the same bit."""


class UnknownFieldError(RegisterMapError):
    """A field name the map does not bind."""


@dataclass(frozen=True)
class RegisterEntry:
    address: int
    reset_value: int
    write_mask: int


@dataclass(frozen=True)
class FieldSegment:
    """Bits ``msb..lsb`` (inclusive) of one register."""

    address: int
    msb: int
    lsb: int

    @property
    def width(self) -> int:
        return self.msb - self.lsb + 1

    @property
    def mask(self) -> int:
        return ((1 << self.width) - 1) << self.lsb

    def bits(self) -> Iterable[Tuple[int, int]]:
        return ((self.address, bit) for bit in range(self.lsb, self.msb + 1))


@dataclass(frozen=True)
class FieldBinding:
    name: str
    segments: Tuple[FieldSegment, ...]

    @property
    def width(self) -> int:
        return sum(segment.width for segment in self.segments)

    @property
    def addresses(self) -> Tuple[int, ...]:
        seen = []
        for segment in self.segments:
            if segment.address not in seen:
                seen.append(segment.address)
        return tuple(seen)

    def extract(self, read: Callable[[int], int]) -> int:
        """Assemble the field's value from a register reader."""
        value = 0
        shift = 0
        for segment in self.segments:
            piece = (read(segment.address) & segment.mask) >> segment.lsb
            value |= piece << shift
            shift += segment.width
        return value

    def deposit(self, value: int) -> Dict[int, Tuple[int, int]]:
        """Split a value into ``{address: (mask, bits)}`` for a masked write."""
        if not 0 <= value < (1 << self.width):
            raise ValueError(
                f"{value} does not fit the {self.width}-bit field {self.name!r}"
            )
        updates: Dict[int, Tuple[int, int]] = {}
        for segment in self.segments:
            piece = value & ((1 << segment.width) - 1)
            value >>= segment.width
            mask, bits = updates.get(segment.address, (0, 0))
            updates[segment.address] = (
                mask | segment.mask,
                bits | (piece << segment.lsb),
            )
        return updates


@dataclass(frozen=True)
class RegisterMap:
    """Immutable after parse, so one map can be shared by any number of readers."""

    entries: Tuple[RegisterEntry, ...]
    fields: Mapping[str, FieldBinding]

    def entry(self, address: int) -> Optional[RegisterEntry]:
        for entry in self.entries:
            if entry.address == address:
                return entry
        return None

    def field(self, name: str) -> FieldBinding:
        try:
            return self.fields[name]
        except KeyError:
            raise UnknownFieldError(
                f"the register map binds no field named {name!r}"
            ) from None

    def field_addresses(self, prefix: str) -> Tuple[int, ...]:
        """Every register holding a bit of a field whose name starts with ``prefix``."""
        found = []
        for name, binding in self.fields.items():
            if name == prefix or name.startswith(prefix):
                for address in binding.addresses:
                    if address not in found:
                        found.append(address)
        return tuple(sorted(found))

    def new_register_file(self) -> RegisterFile:
        resets = bytearray(REGISTER_COUNT)
        masks = bytearray(REGISTER_COUNT)
        for entry in self.entries:
            resets[entry.address] = entry.reset_value
            masks[entry.address] = entry.write_mask
        return RegisterFile(resets, masks)


def _number(text: str) -> int:
    return int(text, 0)


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_register_map(text: str, source: str = "<string>") -> RegisterMap:
    """Parse and validate a map. Every error names its line."""
    entries: List[RegisterEntry] = []
    entry_lines: Dict[int, int] = {}
    segments: Dict[str, List[FieldSegment]] = {}
    segment_lines: Dict[Tuple[str, int], int] = {}
    in_fields = False

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue

        if line.lower() == FIELDS_HEADER:
            if in_fields:
                raise RegisterMapSyntaxError(
                    line_number, "a second [fields] header", source
                )
            in_fields = True
            continue

        if not in_fields:
            match = ENTRY_LINE.match(line)
            if not match:
                raise RegisterMapSyntaxError(
                    line_number,
                    f"expected '<addr>, <value>, <mask>', got {line!r}",
                    source,
                )
            address, value, mask = (
                _number(match["addr"]), _number(match["value"]), _number(match["mask"])
            )
            if address >= REGISTER_COUNT:
                raise RegisterMapSyntaxError(
                    line_number, f"address 0x{address:X} is outside 0x00..0xFF", source
                )
            if value > 0xFF or mask > 0xFF:
                raise RegisterMapSyntaxError(
                    line_number,
                    f"reset value and mask must be bytes, got 0x{value:X} and 0x{mask:X}",
                    source,
                )
            if address in entry_lines:
                raise RegisterMapSyntaxError(
                    line_number,
                    f"address 0x{address:02X} already defined on line "
                    f"{entry_lines[address]}",
                    source,
                )
            entry_lines[address] = line_number
            entries.append(RegisterEntry(address, value, mask))
            continue

        match = FIELD_LINE.match(line)
        if not match:
            raise RegisterMapSyntaxError(
                line_number,
                f"expected '<name> = <addr>[<msb>:<lsb>]', got {line!r}",
                source,
            )
        address, msb, lsb = _number(match["addr"]), int(match["msb"]), int(match["lsb"])
        if address >= REGISTER_COUNT:
            raise RegisterMapSyntaxError(
                line_number, f"address 0x{address:X} is outside 0x00..0xFF", source
            )
        if not 0 <= lsb <= msb <= 7:
            raise RegisterMapSyntaxError(
                line_number, f"bit range [{msb}:{lsb}] is not within [7:0]", source
            )
        if address not in entry_lines:
            raise RegisterMapSyntaxError(
                line_number,
                f"field {match['name']!r} uses register 0x{address:02X}, "
                f"which the map does not define",
                source,
            )
        segment = FieldSegment(address, msb, lsb)
        segments.setdefault(match["name"], []).append(segment)
        segment_lines[(match["name"], len(segments[match["name"]]) - 1)] = line_number

    fields = {
        name: FieldBinding(name, tuple(parts)) for name, parts in segments.items()
    }
    _check_disjoint(fields, segment_lines, source)

    logger.debug(
        "Parsed register map %s: %d registers, %d fields",
        source, len(entries), len(fields),
    )
    return RegisterMap(tuple(entries), fields)


def _check_disjoint(fields, segment_lines, source) -> None:
    owner: Dict[Tuple[int, int], str] = {}
    for name, binding in fields.items():
        for index, segment in enumerate(binding.segments):
            for bit in segment.bits():
                if bit in owner:
                    raise OverlappingFieldsError(
                        f"{source}, line {segment_lines[(name, index)]}: field "
                        f"{name!r} overlaps {owner[bit]!r} at register "
                        f"0x{bit[0]:02X} bit {bit[1]}"
                    )
                owner[bit] = name


def serialize_register_map(register_map: RegisterMap) -> str:
    """Text that parses back to an identical map."""
    lines = ["# addr, reset, mask"]
    for entry in register_map.entries:
        lines.append(
            f"0x{entry.address:02X}, 0x{entry.reset_value:02X}, 0x{entry.write_mask:02X}"
        )
    lines.append("")
    lines.append(FIELDS_HEADER)
    for name, binding in register_map.fields.items():
        for segment in binding.segments:
            lines.append(f"{name} = 0x{segment.address:02X}[{segment.msb}:{segment.lsb}]")
    return "\n".join(lines) + "\n"


def load_register_map(path) -> RegisterMap:
    path = Path(path)
    if not path.is_file():
        raise RegisterMapError(f"no register map at {path}")
    return parse_register_map(path.read_text(encoding="utf-8"), source=str(path))
