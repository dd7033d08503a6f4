"""Turning plans into register writes.

Field names follow the shipped synthesizer map: ``fb.p1/p2/p3`` for the
feedback divider, ``ms<k>.p1/p2/p3`` and ``ms<k>.phase`` for output ``k``.
Nothing here touches another channel's fields.
"""

import logging
from typing import Dict, Optional

from src.planning.dividers import encode_divider
from src.planning.frequency import (
    DEFAULT_CONSTRAINTS,
    FrequencyPlan,
    PhasePlan,
    PlannerConstraints,
    check_channel,
)
from src.registers.bus import RegisterBus, write_fields
from src.registers.register_map import RegisterMap

logger = logging.getLogger(__name__)

FEEDBACK_PREFIX = "fb"

DEFAULT_SYNTH_ADDRESS = 0x70


def output_prefix(channel: int) -> str:
    return f"ms{channel}"


def phase_field(channel: int) -> str:
    return f"ms{channel}.phase"


def enable_field(channel: int) -> str:
    return f"oe{channel}"


def power_down_field(channel: int) -> str:
    return f"pdn{channel}"


def divider_fields(prefix: str, p1: int, p2: int, p3: int) -> Dict[str, int]:
    return {f"{prefix}.p1": p1, f"{prefix}.p2": p2, f"{prefix}.p3": p3}


def encode_phase_steps(steps: int, width: int) -> int:
    """Two's complement into a ``width``-bit field."""
    limit = 1 << (width - 1)
    if not -limit <= steps < limit:
        raise ValueError(f"{steps} phase steps do not fit a signed {width}-bit field")
    return steps & ((1 << width) - 1)


def decode_phase_steps(raw: int, width: int) -> int:
    sign = 1 << (width - 1)
    return (raw ^ sign) - sign


def apply_plan(
    bus: RegisterBus,
    register_map: RegisterMap,
    plan: FrequencyPlan,
    phase: Optional[PhasePlan],
    channel: int,
    *,
    i2c_address: int = DEFAULT_SYNTH_ADDRESS,
    constraints: PlannerConstraints = DEFAULT_CONSTRAINTS,
) -> None:
    """Store the plan's feedback and output dividers, and the phase step count.

    ``phase=None`` leaves the channel's phase register as it is. Transport
    errors propagate; a failure part-way leaves whatever was already written.
    """
    check_channel(channel, constraints)
    if plan.channel != channel:
        raise ValueError(f"plan is for channel {plan.channel}, not {channel}")

    values = divider_fields(FEEDBACK_PREFIX, *encode_divider(plan.feedback))
    values.update(divider_fields(output_prefix(channel), *encode_divider(plan.output)))
    if phase is not None:
        width = register_map.field(phase_field(channel)).width
        values[phase_field(channel)] = encode_phase_steps(phase.steps, width)

    logger.debug(
        "Applying channel %d: feedback %s, output %s, phase %s",
        channel, plan.feedback, plan.output,
        "unchanged" if phase is None else phase.steps,
    )
    write_fields(bus, i2c_address, register_map, values)
