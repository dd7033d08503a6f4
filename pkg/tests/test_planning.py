"""Tests for the frequency and phase planner and the divider encoding.

Covers src/planning/rational.py, dividers.py and frequency.py. Everything is
exact arithmetic, so expected values are compared with ``==``.
"""

import math
import random
from fractions import Fraction

import pytest
from hypothesis import given
import hypothesis.strategies as st

from src.planning.apply import apply_plan
from src.planning.dividers import (
    DENOMINATOR_MAX,
    DividerError,
    DividerFieldOverflowError,
    InconsistentDividerError,
    RationalDivider,
    decode_divider,
    encode_divider,
)
from src.planning.frequency import (
    DEFAULT_CONSTRAINTS,
    ChannelError,
    FrequencyPlan,
    PhaseRangeError,
    PlannerConstraints,
    UnsatisfiablePlanError,
    plan_frequency,
    plan_phase,
)
from src.planning.rational import as_fraction, best_rational, round_half_away

F_IN = Fraction(25_000_000)
MHZ = 10**6


def brute_force_best(x: Fraction, cap: int) -> Fraction:
    candidates = set()
    for d in range(1, cap + 1):
        n = math.floor(x * d)
        candidates.update({Fraction(n, d), Fraction(n + 1, d)})
    return min(candidates, key=lambda c: (abs(x - c), c.denominator, c))


def has_exact_plan(f_in: Fraction, f_target: Fraction, c: PlannerConstraints) -> bool:
    """Any legal feedback/output pair, integer or fractional, that lands exactly."""
    for n in range(c.feedback_min, c.feedback_max + 1):
        f_vco = f_in * n
        if c.vco_in_window(f_vco):
            ratio = f_vco / f_target
            if ratio.denominator <= c.denominator_max and c.output_min <= math.floor(ratio) <= c.output_max:
                return True
    for m in range(c.output_min, c.output_max + 1):
        f_vco = f_target * m
        if c.vco_in_window(f_vco):
            feedback = f_vco / f_in
            if feedback.denominator <= c.denominator_max and c.feedback_min <= math.floor(feedback) <= c.feedback_max:
                return True
    return False


# --- exact numbers -----------------------------------------------------------

def test_float_is_read_through_its_decimal_repr():
    assert as_fraction(1.3) == Fraction(13, 10)
    assert as_fraction("17/2") == Fraction(17, 2)


@pytest.mark.parametrize(
    "value, expected", [(Fraction(5, 2), 3), (Fraction(-5, 2), -3), (Fraction(7, 3), 2), (Fraction(-7, 3), -2)]
)
def test_round_half_away_from_zero(value, expected):
    assert round_half_away(value) == expected


def test_best_rational_finds_the_classic_pi_approximation():
    assert best_rational(Fraction(314159265358979, 10**14), 1000) == Fraction(355, 113)


def test_best_rational_tie_goes_to_the_smaller_denominator():
    # 5/12 sits exactly halfway between 1/3 and 1/2.
    assert best_rational(Fraction(5, 12), 3) == Fraction(1, 2)


def test_best_rational_returns_x_when_it_already_fits():
    assert best_rational(Fraction(22, 7), 7) == Fraction(22, 7)


def test_best_rational_near_an_integer_does_not_walk_one_mediant_at_a_time():
    x = 3 + Fraction(1, DENOMINATOR_MAX + 5)
    assert best_rational(x, DENOMINATOR_MAX) == 3 + Fraction(1, DENOMINATOR_MAX)


@given(
    st.fractions(min_value=0, max_value=50, max_denominator=10**6),
    st.integers(1, 40),
)
def test_best_rational_matches_brute_force(x, cap):
    assert best_rational(x, cap) == brute_force_best(x, cap)


# --- divider encoding --------------------------------------------------------

def test_integer_divider_encoding():
    assert encode_divider(RationalDivider(88)) == (10752, 0, 1)
    assert decode_divider(10752, 0, 1) == RationalDivider(88)


def test_fractional_divider_encoding():
    divider = RationalDivider(22, 1, 4)
    assert encode_divider(divider) == (2336, 0, 4)
    assert decode_divider(2336, 0, 4).value == Fraction(89, 4)


def test_divider_must_be_in_lowest_terms():
    with pytest.raises(DividerError):
        RationalDivider(10, 2, 4)


def test_divider_below_four_overflows_p1():
    with pytest.raises(DividerFieldOverflowError):
        encode_divider(RationalDivider(3))


@pytest.mark.parametrize(
    "p1, p2, p3",
    [(10752, 0, 0), (10752, 5, 5), (10752, 1, 3), (2**18, 0, 1)],
)
def test_inconsistent_triples_are_rejected(p1, p2, p3):
    with pytest.raises(InconsistentDividerError):
        decode_divider(p1, p2, p3)


def test_decode_enforces_the_legal_range_when_asked():
    with pytest.raises(InconsistentDividerError):
        decode_divider(0, 0, 1, a_range=(5, 2048))


@pytest.mark.parametrize(
    "divider",
    [
        RationalDivider(5),
        RationalDivider(2048),
        RationalDivider(2048, DENOMINATOR_MAX - 1, DENOMINATOR_MAX),
        RationalDivider(566, 1, DENOMINATOR_MAX),
        RationalDivider(8, DENOMINATOR_MAX - 1, DENOMINATOR_MAX),
    ],
)
def test_denominator_cap_boundaries_survive_encoding(divider):
    assert decode_divider(*encode_divider(divider)) == divider


def test_ten_thousand_random_dividers_keep_their_value():
    rng = random.Random(8)
    for _ in range(10_000):
        c = rng.choice([1, 2, 3, rng.randint(1, 1000), rng.randint(1, DENOMINATOR_MAX), DENOMINATOR_MAX])
        value = rng.randint(5, 2048) + Fraction(rng.randrange(c), c)
        divider = RationalDivider.from_fraction(value)
        assert decode_divider(*encode_divider(divider)).value == value


# --- frequency planning ------------------------------------------------------

@pytest.mark.parametrize(
    "target, feedback, output",
    [(200 * MHZ, 88, 11), (100 * MHZ, 88, 22), (5 * MHZ, 88, 440)],
)
def test_integer_plans_take_the_lowest_vco(target, feedback, output):
    plan = plan_frequency(F_IN, target, 0)
    assert plan.feedback == RationalDivider(feedback)
    assert plan.output == RationalDivider(output)
    assert plan.f_vco == 2_200 * MHZ
    assert plan.rel_error == 0


def test_fractional_output_keeps_an_integer_feedback():
    target = 150_000_001
    plan = plan_frequency(F_IN, target, 0)
    assert plan.feedback == RationalDivider(88)
    assert not plan.output.is_integer
    assert plan.f_achieved == target


def test_fractional_feedback_when_outputs_cannot_be_exact():
    constraints = PlannerConstraints(denominator_max=10)
    plan = plan_frequency(F_IN, Fraction(110_625_000), 0, constraints)
    assert plan.feedback == RationalDivider(88, 1, 2)
    assert plan.output == RationalDivider(20)
    assert plan.is_exact


def test_approximation_when_nothing_is_exact():
    constraints = PlannerConstraints(denominator_max=10, max_rel_error=Fraction(1, 100))
    plan = plan_frequency(F_IN, 100_000_001, 0, constraints)
    assert not plan.is_exact
    assert plan.feedback.is_integer
    assert plan.output.c <= 10
    assert plan.rel_error <= Fraction(1, 100)


def test_approximation_above_the_error_limit_is_refused():
    constraints = PlannerConstraints(denominator_max=10)
    with pytest.raises(UnsatisfiablePlanError, match="misses by"):
        plan_frequency(F_IN, 100_000_001, 0, constraints)


@pytest.mark.parametrize("target", [4 * MHZ, 200 * MHZ + 1, 1 * MHZ])
def test_targets_outside_the_band_are_refused(target):
    with pytest.raises(UnsatisfiablePlanError, match="band"):
        plan_frequency(F_IN, target, 0)


def test_reference_outside_its_range_is_refused():
    with pytest.raises(UnsatisfiablePlanError, match="reference"):
        plan_frequency(5 * MHZ, 100 * MHZ, 0)


def test_channel_four_does_not_exist():
    with pytest.raises(ChannelError):
        plan_frequency(F_IN, 100 * MHZ, 4)


def test_pinned_vco_plans_the_output_only():
    plan = plan_frequency(F_IN, 100 * MHZ, 1, f_vco=2_500 * MHZ)
    assert plan.feedback == RationalDivider(100)
    assert plan.output == RationalDivider(25)


def test_pinned_vco_outside_the_window_is_refused():
    with pytest.raises(UnsatisfiablePlanError, match="window"):
        plan_frequency(F_IN, 100 * MHZ, 1, f_vco=3_000 * MHZ)


def test_float_targets_plan_like_integers():
    assert plan_frequency(25e6, 100e6, 0) == plan_frequency(F_IN, 100 * MHZ, 0)


@pytest.mark.slow
def test_band_sweep_is_fully_covered():
    rng = random.Random(0)
    targets = [5 * MHZ, 200 * MHZ] + [rng.randint(5 * MHZ, 200 * MHZ) for _ in range(1000)]
    for target in targets:
        plan = plan_frequency(F_IN, target, 0)
        assert DEFAULT_CONSTRAINTS.vco_in_window(plan.f_vco)
        assert plan.rel_error <= Fraction(1, 10**9)
        if has_exact_plan(F_IN, Fraction(target), DEFAULT_CONSTRAINTS):
            assert plan.rel_error == 0


def random_rational_target(rng: random.Random) -> Fraction:
    """Small denominators reach fractional feedbacks; large ones force approximation."""
    q = rng.choice([rng.randint(1, 40), rng.randint(10**3, 10**6)])
    return Fraction(rng.randint(5 * MHZ * q, 200 * MHZ * q), q)


@pytest.mark.slow
def test_rational_targets_across_the_band_stay_within_the_error_limit():
    rng = random.Random(12)
    fractional_feedback = inexact = 0
    for _ in range(500):
        target = random_rational_target(rng)
        plan = plan_frequency(F_IN, target, 0)
        assert DEFAULT_CONSTRAINTS.vco_in_window(plan.f_vco)
        assert plan.rel_error <= DEFAULT_CONSTRAINTS.max_rel_error
        assert decode_divider(*encode_divider(plan.output)) == plan.output
        if has_exact_plan(F_IN, target, DEFAULT_CONSTRAINTS):
            assert plan.is_exact
        fractional_feedback += not plan.feedback.is_integer
        inexact += not plan.is_exact
    assert fractional_feedback > 0
    assert inexact > 0


def test_apply_plan_checks_the_channel_against_the_configured_limits(synth_bus, synth_map):
    plan = plan_frequency(F_IN, 100 * MHZ, 3)
    with pytest.raises(ChannelError):
        apply_plan(synth_bus, synth_map, plan, None, 3, constraints=PlannerConstraints(channels=2))
    assert synth_bus.log == []
    apply_plan(synth_bus, synth_map, plan, None, 3)
    assert synth_bus.writes


# --- phase -------------------------------------------------------------------

@pytest.fixture
def plan_2g5():
    """100 MHz out of a 2.5 GHz VCO: one phase step is 0.4 ns."""
    return FrequencyPlan(F_IN, Fraction(100 * MHZ), 0, RationalDivider(100), RationalDivider(25))


def test_degrees_become_whole_vco_periods(plan_2g5):
    phase = plan_phase(plan_2g5, 45, degrees=True)
    assert phase.steps == 3
    assert phase.offset_achieved == Fraction(12, 10**10)
    assert phase.residual == Fraction(5, 10**11)


def test_seconds_and_degrees_agree(plan_2g5):
    assert plan_phase(plan_2g5, Fraction(125, 10**11)) == plan_phase(plan_2g5, 45, degrees=True)


def test_zero_offset_is_zero_steps(plan_2g5):
    assert plan_phase(plan_2g5, 0).steps == 0


@pytest.mark.parametrize("offset, steps", [(Fraction(1, 10**9), 3), (Fraction(-1, 10**9), -3)])
def test_half_steps_round_away_from_zero(plan_2g5, offset, steps):
    assert plan_phase(plan_2g5, offset).steps == steps


def test_offset_beyond_127_steps_is_refused(plan_2g5):
    with pytest.raises(PhaseRangeError, match="150 steps"):
        plan_phase(plan_2g5, Fraction(60, 10**9))


def test_five_hundred_offsets_stay_within_half_a_step(plan_2g5):
    rng = random.Random(6)
    quantum = 1 / plan_2g5.f_vco
    for _ in range(500):
        offset = Fraction(rng.randint(-127_000, 127_000), 1000) * quantum
        phase = plan_phase(plan_2g5, offset)
        assert abs(phase.residual) <= quantum / 2
        assert phase.offset_achieved == phase.steps * quantum
