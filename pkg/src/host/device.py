"""Device operations: plan, then write through the bridge.

Everything here reaches the hardware through `bridge_read` and `bridge_write`
on the handle, one wire command per register access. Nothing writes before
its plan has succeeded, so a request the planner rejects leaves the device
untouched.

All four outputs share one VCO. The first channel planned picks it; later
channels are planned against it and never move it, so programming one channel
leaves every other channel's registers as they were.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Tuple

from src.errors import ClockGenError
from src.host.bridge import DeviceHandle
from src.planning.apply import (
    FEEDBACK_PREFIX,
    apply_plan,
    divider_fields,
    enable_field,
    encode_phase_steps,
    output_prefix,
    phase_field,
)
from src.planning.dividers import RationalDivider, encode_divider
from src.planning.frequency import (
    FrequencyPlan,
    PhasePlan,
    UnsatisfiablePlanError,
    check_channel,
    plan_frequency,
    plan_phase,
)
from src.planning.power import SupplySetting, apply_supply, plan_voltage
from src.planning.rational import Number, as_fraction
from src.registers.bus import read_fields, write_fields
from src.sim.models import ChannelStatus, RailStatus, decode_outputs, decode_rails

logger = logging.getLogger(__name__)

SCRATCH_REGISTER = 0x06
ECHO_PATTERNS = (0x00, 0x55, 0xAA, 0xFF)


class NoPlanError(ClockGenError):
    """Phase requested on a channel that has no frequency yet."""


@dataclass(frozen=True)
class DeviceStatus:
    channels: List[ChannelStatus]
    rails: List[RailStatus]


@dataclass(frozen=True)
class EchoResult:
    pattern: int
    readback: int

    @property
    def ok(self) -> bool:
        return self.pattern == self.readback


@dataclass(frozen=True)
class DividerCheck:
    group: str
    expected: Tuple[int, int, int]
    readback: Tuple[int, int, int]

    @property
    def ok(self) -> bool:
        return self.expected == self.readback


@dataclass(frozen=True)
class SelftestReport:
    echoes: List[EchoResult]
    dividers: List[DividerCheck]
    commands: int

    @property
    def passed(self) -> bool:
        return all(e.ok for e in self.echoes) and all(d.ok for d in self.dividers)


def _plan_on_shared_vco(handle: DeviceHandle, channel: int, f_target: Fraction) -> FrequencyPlan:
    """Plan ``channel`` on the VCO the other planned channels run from.

    Only a handle with no other plans chooses the VCO freely.
    """
    c = handle.constraints
    others = {k: p for k, p in handle.plans.items() if k != channel}
    if not others:
        return plan_frequency(handle.f_in, f_target, channel, c)

    shared_vco = next(iter(others.values())).f_vco
    try:
        return plan_frequency(handle.f_in, f_target, channel, c, f_vco=shared_vco)
    except UnsatisfiablePlanError as exc:
        raise UnsatisfiablePlanError(
            f"channel {channel} cannot reach its target from the "
            f"{float(shared_vco):.9g} Hz VCO that channels {sorted(others)} run from: {exc}"
        ) from exc


def set_frequency(handle: DeviceHandle, channel: int, f_target: Number) -> FrequencyPlan:
    """Plan and program ``channel``, enable it, and zero its phase."""
    check_channel(channel, handle.constraints)
    plan = _plan_on_shared_vco(handle, channel, as_fraction(f_target))
    phase = PhasePlan(0, 1 / plan.f_vco, Fraction(0))

    apply_plan(
        handle, handle.synth_map, plan, phase, channel,
        i2c_address=handle.synth_address, constraints=handle.constraints,
    )
    write_fields(handle, handle.synth_address, handle.synth_map, {enable_field(channel): 1})
    handle.plans[channel] = plan
    handle.phases[channel] = phase
    logger.info(
        "Channel %d at %s Hz (feedback %s, output %s)",
        channel, plan.f_achieved, plan.feedback, plan.output,
    )
    return plan


def set_phase(
    handle: DeviceHandle,
    channel: int,
    offset: Number,
    *,
    degrees: bool = False,
) -> PhasePlan:
    check_channel(channel, handle.constraints)
    plan = handle.plans.get(channel)
    if plan is None:
        raise NoPlanError(
            f"channel {channel} has no frequency plan; run set_frequency first"
        )
    phase = plan_phase(plan, offset, degrees=degrees, constraints=handle.constraints)
    width = handle.synth_map.field(phase_field(channel)).width
    write_fields(
        handle, handle.synth_address, handle.synth_map,
        {phase_field(channel): encode_phase_steps(phase.steps, width)},
    )
    handle.phases[channel] = phase
    return phase


def enable_output(handle: DeviceHandle, channel: int, on: bool) -> None:
    check_channel(channel, handle.constraints)
    write_fields(
        handle, handle.synth_address, handle.synth_map, {enable_field(channel): int(bool(on))}
    )


def set_rail_voltage(handle: DeviceHandle, rail_id: int, v_target: Number) -> SupplySetting:
    rail = handle.rail(rail_id)
    setting = plan_voltage(rail, v_target)
    apply_supply(handle, rail, setting, handle.pot_map)
    return setting


def read_status(handle: DeviceHandle) -> DeviceStatus:
    channels = decode_outputs(
        handle, handle.synth_address, handle.synth_map, handle.f_in, handle.constraints
    )
    rails = decode_rails(handle, handle.rails, handle.pot_map)
    return DeviceStatus(channels, rails)


def _divider_check(handle: DeviceHandle, prefix: str, expected) -> DividerCheck:
    names = list(divider_fields(prefix, 0, 0, 0))
    values = read_fields(handle, handle.synth_address, handle.synth_map, names)
    return DividerCheck(prefix, tuple(expected), tuple(values[n] for n in names))


def run_selftest(handle: DeviceHandle) -> SelftestReport:
    """Echo test on the scratch register, then read back every planned divider.

    The scratch register's value is restored afterwards.
    """
    start = handle.bridge.commands_sent
    original = handle.read_register(handle.synth_address, SCRATCH_REGISTER)

    echoes = []
    for pattern in ECHO_PATTERNS:
        handle.write_register(handle.synth_address, SCRATCH_REGISTER, pattern)
        echoes.append(
            EchoResult(pattern, handle.read_register(handle.synth_address, SCRATCH_REGISTER))
        )
    handle.write_register(handle.synth_address, SCRATCH_REGISTER, original)

    dividers = []
    plans: Dict[int, FrequencyPlan] = dict(sorted(handle.plans.items()))
    if plans:
        feedback = next(iter(plans.values())).feedback
        dividers.append(_divider_check(handle, FEEDBACK_PREFIX, encode_divider(feedback)))
    for k, plan in plans.items():
        dividers.append(_divider_check(handle, output_prefix(k), encode_divider(plan.output)))

    report = SelftestReport(echoes, dividers, handle.bridge.commands_sent - start)
    log = logger.info if report.passed else logger.warning
    log(
        "Selftest %s: %d/%d echoes, %d/%d divider groups",
        "passed" if report.passed else "FAILED",
        sum(e.ok for e in echoes), len(echoes),
        sum(d.ok for d in dividers), len(dividers),
    )
    return report


def adopt_plans(handle: DeviceHandle) -> Dict[int, FrequencyPlan]:
    """Rebuild plans for channels the device is already running.

    A handle opened after another one programmed the board starts with no
    plans. Every enabled, valid channel is adopted with its achieved frequency
    as the target and its phase register as the phase. Channels the handle
    already plans are left alone.
    """
    status = read_status(handle)
    adopted = {}
    for channel in status.channels:
        if channel.channel in handle.plans or not (channel.enabled and channel.valid):
            continue
        plan = FrequencyPlan(
            handle.f_in, channel.f_out, channel.channel,
            RationalDivider.from_fraction(channel.f_vco / handle.f_in),
            RationalDivider.from_fraction(channel.f_vco / channel.f_out),
        )
        handle.plans[channel.channel] = plan
        handle.phases[channel.channel] = PhasePlan(
            round(channel.phase_offset * plan.f_vco), 1 / plan.f_vco, channel.phase_offset,
        )
        adopted[channel.channel] = plan
    if adopted:
        logger.info("Adopted running channels %s", sorted(adopted))
    return adopted
