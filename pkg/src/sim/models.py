"""What the registers mean: output frequencies, phases, and rail voltages.

These functions read through a `RegisterBus`, so the same decoding runs inside
the simulator (straight off the register files) and on the host (over the
bridge). Planner and simulator agreeing is then a statement about the
registers, not about two copies of the arithmetic.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence

from src.planning.apply import (
    FEEDBACK_PREFIX,
    decode_phase_steps,
    enable_field,
    output_prefix,
    phase_field,
    power_down_field,
)
from src.planning.dividers import DividerError, RationalDivider, decode_divider
from src.planning.frequency import PlannerConstraints
from src.planning.power import RailModel, predict_voltage
from src.registers.bus import RegisterBus, read_fields
from src.registers.register_map import RegisterMap


@dataclass(frozen=True)
class ChannelStatus:
    channel: int
    enabled: bool
    valid: bool
    f_out: Optional[Fraction]
    f_vco: Optional[Fraction]
    phase_offset: Optional[Fraction]
    error: Optional[str] = None


@dataclass(frozen=True)
class RailStatus:
    rail_id: int
    code: int
    volts: Fraction


def _divider_names(prefix: str) -> List[str]:
    return [f"{prefix}.p1", f"{prefix}.p2", f"{prefix}.p3"]


def status_fields(channels: int) -> List[str]:
    names = _divider_names(FEEDBACK_PREFIX)
    for k in range(channels):
        names += _divider_names(output_prefix(k))
        names += [phase_field(k), enable_field(k), power_down_field(k)]
    return names


def _decode(values, prefix: str, a_range) -> RationalDivider:
    p1, p2, p3 = (values[name] for name in _divider_names(prefix))
    return decode_divider(p1, p2, p3, a_range)


def decode_outputs(
    bus: RegisterBus,
    i2c_address: int,
    register_map: RegisterMap,
    f_in: Fraction,
    constraints: PlannerConstraints,
) -> List[ChannelStatus]:
    """Per-channel status from the synthesizer's registers.

    A channel is valid when both its dividers decode and the VCO sits in its
    window. ``f_out`` is only reported for channels that are valid and enabled.
    """
    values = read_fields(bus, i2c_address, register_map, status_fields(constraints.channels))

    f_vco = None
    shared_error = None
    try:
        feedback = _decode(values, FEEDBACK_PREFIX, constraints.feedback_range)
        f_vco = f_in * feedback.value
        if not constraints.vco_in_window(f_vco):
            shared_error = (
                f"VCO at {float(f_vco):.9g} Hz is outside "
                f"{float(constraints.vco_min):.9g}..{float(constraints.vco_max):.9g} Hz"
            )
    except DividerError as exc:
        shared_error = f"feedback divider: {exc}"

    statuses = []
    for k in range(constraints.channels):
        enabled = values[enable_field(k)] == 1 and values[power_down_field(k)] == 0
        error = shared_error
        output = None
        if error is None:
            try:
                output = _decode(values, output_prefix(k), constraints.output_range)
            except DividerError as exc:
                error = f"output divider: {exc}"

        if error is not None:
            statuses.append(ChannelStatus(k, enabled, False, None, f_vco, None, error))
            continue

        width = register_map.field(phase_field(k)).width
        steps = decode_phase_steps(values[phase_field(k)], width)
        f_out = f_vco / output.value if enabled else None
        statuses.append(
            ChannelStatus(k, enabled, True, f_out, f_vco, Fraction(steps) / f_vco)
        )
    return statuses


def decode_rails(
    bus: RegisterBus,
    rails: Sequence[RailModel],
    pot_map: RegisterMap,
) -> List[RailStatus]:
    statuses = []
    for rail in rails:
        code = read_fields(bus, rail.pot_i2c_address, pot_map, [rail.wiper_field])[
            rail.wiper_field
        ]
        statuses.append(RailStatus(rail.rail_id, code, predict_voltage(rail, code)))
    return statuses
