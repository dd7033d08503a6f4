"""Frequency and phase planning for the any-frequency synthesizer.

The signal chain is

    f_vco = f_in * feedback        feedback = a + b/c, VCO inside its window
    f_out = f_vco / output         output   = a + b/c, one per channel

and the planner searches it in a fixed order, taking the first family that
yields a plan:

1. integer feedback, integer output
2. integer feedback, exact fractional output
3. exact fractional feedback, integer output
4. integer feedback, output approximated by Stern–Brocot descent under the
   denominator cap, minimising the relative error

Inside a family the lowest VCO wins, then the smallest feedback denominator,
then the smallest output denominator. Lower VCO tends to mean lower jitter, and
a fixed order means the same request always produces the same registers.

Everything is a `Fraction`. `rel_error` is exact, and it is zero whenever an
exact plan exists in families 1–3.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional

from src.errors import ClockGenError
from src.planning.dividers import DENOMINATOR_MAX, RationalDivider
from src.planning.rational import Number, as_fraction, best_rational, round_half_away

logger = logging.getLogger(__name__)

MHZ = 10**6

DEFAULT_F_IN = Fraction(25 * MHZ)


class PlanningError(ClockGenError, ValueError):
    """A frequency or phase request the synthesizer cannot realise."""


class UnsatisfiablePlanError(PlanningError):
    """No divider pair reaches the target inside the constraints."""


class PhaseRangeError(PlanningError):
    """The phase offset needs more steps than the phase register holds."""


class ChannelError(PlanningError):
    """A channel number the synthesizer does not have."""


@dataclass(frozen=True)
class PlannerConstraints:
    """The synthesizer's limits. All are configurable; these are the defaults."""

    vco_min: Fraction = Fraction(2200 * MHZ)
    vco_max: Fraction = Fraction(2840 * MHZ)
    feedback_min: int = 8
    feedback_max: int = 566
    output_min: int = 5
    output_max: int = 2048
    denominator_max: int = DENOMINATOR_MAX
    phase_steps_max: int = 127
    band_min: Fraction = Fraction(5 * MHZ)
    band_max: Fraction = Fraction(200 * MHZ)
    f_in_min: Fraction = Fraction(10 * MHZ)
    f_in_max: Fraction = Fraction(50 * MHZ)
    max_rel_error: Fraction = Fraction(1, 10**9)
    channels: int = 4

    def __post_init__(self):
        if not 0 < self.vco_min < self.vco_max:
            raise ValueError("need 0 < vco_min < vco_max")
        if not 1 <= self.feedback_min <= self.feedback_max:
            raise ValueError("need 1 <= feedback_min <= feedback_max")
        if not 1 <= self.output_min <= self.output_max:
            raise ValueError("need 1 <= output_min <= output_max")
        if not 1 <= self.denominator_max <= DENOMINATOR_MAX:
            raise ValueError(f"denominator_max must be within 1..{DENOMINATOR_MAX}")
        if not 0 < self.band_min <= self.band_max:
            raise ValueError("need 0 < band_min <= band_max")
        if self.phase_steps_max < 0 or self.channels < 1:
            raise ValueError("phase_steps_max must be >= 0 and channels >= 1")

    @property
    def feedback_range(self):
        return self.feedback_min, self.feedback_max

    @property
    def output_range(self):
        return self.output_min, self.output_max

    def vco_in_window(self, f_vco: Fraction) -> bool:
        return self.vco_min <= f_vco <= self.vco_max


DEFAULT_CONSTRAINTS = PlannerConstraints()


@dataclass(frozen=True)
class FrequencyPlan:
    f_in: Fraction
    f_target: Fraction
    channel: int
    feedback: RationalDivider
    output: RationalDivider

    @property
    def f_vco(self) -> Fraction:
        return self.f_in * self.feedback.value

    @property
    def f_achieved(self) -> Fraction:
        return self.f_vco / self.output.value

    @property
    def rel_error(self) -> Fraction:
        return abs(self.f_achieved - self.f_target) / self.f_target

    @property
    def is_exact(self) -> bool:
        return self.f_achieved == self.f_target


@dataclass(frozen=True)
class PhasePlan:
    steps: int
    quantum: Fraction
    offset_requested: Fraction

    @property
    def offset_achieved(self) -> Fraction:
        return self.steps * self.quantum

    @property
    def residual(self) -> Fraction:
        return self.offset_requested - self.offset_achieved


def check_channel(channel: int, constraints: PlannerConstraints = DEFAULT_CONSTRAINTS) -> None:
    if not 0 <= channel < constraints.channels:
        raise ChannelError(
            f"channel {channel} does not exist; the synthesizer has "
            f"channels 0..{constraints.channels - 1}"
        )


def _integer_feedbacks(f_in: Fraction, c: PlannerConstraints) -> Iterator[int]:
    """Integer feedback values with the VCO in its window, lowest VCO first."""
    low = max(c.feedback_min, math.ceil(c.vco_min / f_in))
    high = min(c.feedback_max, math.floor(c.vco_max / f_in))
    return iter(range(low, high + 1))


def _integer_outputs(f_target: Fraction, c: PlannerConstraints) -> Iterator[int]:
    low = max(c.output_min, math.ceil(c.vco_min / f_target))
    high = min(c.output_max, math.floor(c.vco_max / f_target))
    return iter(range(low, high + 1))


def _legal(value: Fraction, a_min: int, a_max: int, c: PlannerConstraints) -> bool:
    return value.denominator <= c.denominator_max and a_min <= math.floor(value) <= a_max


def plan_output_divider(
    f_vco: Fraction,
    f_target: Fraction,
    constraints: PlannerConstraints = DEFAULT_CONSTRAINTS,
) -> Optional[RationalDivider]:
    """The output divider for a fixed VCO: exact if it fits, else the nearest
    legal approximation, or None when even that is out of range."""
    ratio = f_vco / f_target
    if ratio.denominator > constraints.denominator_max:
        ratio = best_rational(ratio, constraints.denominator_max)
    if not _legal(ratio, *constraints.output_range, constraints):
        return None
    return RationalDivider.from_fraction(ratio)


def plan_frequency(
    f_in: Number,
    f_target: Number,
    channel: int,
    constraints: PlannerConstraints = DEFAULT_CONSTRAINTS,
    *,
    f_vco: Optional[Number] = None,
) -> FrequencyPlan:
    """Plan ``f_target`` on ``channel`` from reference ``f_in``.

    Passing ``f_vco`` pins the VCO, for when other channels already run from
    it. The feedback divider must still land exactly on the pinned VCO.

    Raises:
        UnsatisfiablePlanError: the target is outside the band, the reference
            is outside its range, or no divider pair reaches the target within
            ``constraints.max_rel_error``.
    """
    c = constraints
    f_in = as_fraction(f_in)
    f_target = as_fraction(f_target)
    check_channel(channel, c)

    if not c.band_min <= f_target <= c.band_max:
        raise UnsatisfiablePlanError(
            f"{_hz(f_target)} is outside the {_hz(c.band_min)} - {_hz(c.band_max)} band"
        )
    if not c.f_in_min <= f_in <= c.f_in_max:
        raise UnsatisfiablePlanError(
            f"reference {_hz(f_in)} is outside {_hz(c.f_in_min)} - {_hz(c.f_in_max)}"
        )

    if f_vco is not None:
        plan = _plan_pinned(f_in, f_target, channel, as_fraction(f_vco), c)
    else:
        plan = _plan_free(f_in, f_target, channel, c)

    logger.debug(
        "Planned channel %d: %s Hz -> feedback %s, output %s, f_vco %s Hz, error %s",
        channel, f_target, plan.feedback, plan.output, plan.f_vco, plan.rel_error,
    )
    return plan


def _plan_pinned(f_in, f_target, channel, f_vco, c) -> FrequencyPlan:
    if not c.vco_in_window(f_vco):
        raise UnsatisfiablePlanError(f"pinned VCO {_hz(f_vco)} is outside its window")
    feedback = f_vco / f_in
    if not _legal(feedback, *c.feedback_range, c):
        raise UnsatisfiablePlanError(
            f"pinned VCO {_hz(f_vco)} needs feedback {feedback}, which the "
            f"feedback divider cannot hold"
        )
    output = plan_output_divider(f_vco, f_target, c)
    if output is None:
        raise UnsatisfiablePlanError(
            f"{_hz(f_target)} needs an output divider outside "
            f"{c.output_min}..{c.output_max} from a {_hz(f_vco)} VCO"
        )
    plan = FrequencyPlan(f_in, f_target, channel, RationalDivider.from_fraction(feedback), output)
    if plan.rel_error > c.max_rel_error:
        raise UnsatisfiablePlanError(
            f"{_hz(f_target)} from a {_hz(f_vco)} VCO misses by "
            f"{float(plan.rel_error):.3g}, above the {float(c.max_rel_error):.3g} limit"
        )
    return plan


def _plan_free(f_in, f_target, channel, c) -> FrequencyPlan:
    feedbacks = list(_integer_feedbacks(f_in, c))

    # 1 and 2: integer feedback. An integer output ratio beats any fractional
    # one, even at a higher VCO.
    fractional = None
    for n in feedbacks:
        ratio = f_in * n / f_target
        if ratio.denominator == 1 and _legal(ratio, *c.output_range, c):
            return FrequencyPlan(
                f_in, f_target, channel,
                RationalDivider(n), RationalDivider(ratio.numerator),
            )
        if fractional is None and _legal(ratio, *c.output_range, c):
            fractional = (n, ratio)
    if fractional is not None:
        n, ratio = fractional
        return FrequencyPlan(
            f_in, f_target, channel,
            RationalDivider(n), RationalDivider.from_fraction(ratio),
        )

    # 3: fractional feedback onto an integer output. The walk is in output
    # order, which is VCO order, so ties on VCO cannot occur.
    for m in _integer_outputs(f_target, c):
        feedback = f_target * m / f_in
        if _legal(feedback, *c.feedback_range, c):
            return FrequencyPlan(
                f_in, f_target, channel,
                RationalDivider.from_fraction(feedback), RationalDivider(m),
            )

    # 4: nothing exact. Best approximation of the output ratio per feedback.
    best = None
    for n in feedbacks:
        output = plan_output_divider(f_in * n, f_target, c)
        if output is None:
            continue
        plan = FrequencyPlan(f_in, f_target, channel, RationalDivider(n), output)
        if best is None or plan.rel_error < best.rel_error:
            best = plan

    if best is None:
        raise UnsatisfiablePlanError(
            f"no divider pair puts the VCO inside {_hz(c.vco_min)} - "
            f"{_hz(c.vco_max)} for {_hz(f_target)} from {_hz(f_in)}"
        )
    if best.rel_error > c.max_rel_error:
        raise UnsatisfiablePlanError(
            f"the closest plan for {_hz(f_target)} misses by "
            f"{float(best.rel_error):.3g}, above the {float(c.max_rel_error):.3g} limit"
        )
    return best


def plan_phase(
    plan: FrequencyPlan,
    offset: Number,
    *,
    degrees: bool = False,
    constraints: PlannerConstraints = DEFAULT_CONSTRAINTS,
) -> PhasePlan:
    """Quantise a phase offset to whole VCO periods.

    ``offset`` is seconds, or degrees of the output period with
    ``degrees=True``. Steps round to nearest, halves away from zero, so the
    residual never exceeds half a step.
    """
    offset = as_fraction(offset)
    seconds = offset / 360 / plan.f_achieved if degrees else offset
    quantum = 1 / plan.f_vco

    steps = round_half_away(seconds / quantum)
    if abs(steps) > constraints.phase_steps_max:
        raise PhaseRangeError(
            f"an offset of {float(seconds):.6g} s needs {steps} steps of "
            f"{float(quantum):.6g} s; the phase register holds "
            f"±{constraints.phase_steps_max}"
        )
    return PhasePlan(steps, quantum, seconds)


def _hz(value: Fraction) -> str:
    """Human-readable frequency for messages."""
    value = Fraction(value)
    for unit, scale in (("GHz", 10**9), ("MHz", 10**6), ("kHz", 10**3)):
        if abs(value) >= scale:
            return f"{float(value / scale):.9g} {unit}"
    return f"{float(value):.9g} Hz"
