"""Exact rationals in, exact rationals out.

Frequencies, divider ratios and errors are `fractions.Fraction` end to end. A
float anywhere in the chain is how an "exact" plan drifts by a few parts in
10^16, and the planner/simulator agreement check is an equality, not a
tolerance.
"""

import math
from decimal import Decimal
from fractions import Fraction
from numbers import Rational
from typing import Union

Number = Union[int, Fraction, Decimal, float, str]


def as_fraction(value: Number) -> Fraction:
    """Read a number exactly.

    A float is read through its shortest decimal repr, so ``2.5`` is 5/2 and
    ``1.3`` is 13/10 rather than the nearest binary fraction. Strings accept
    anything `Fraction` does: ``"200000000"``, ``"1.25e-9"``, ``"17/2"``.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational, Decimal)):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"{value} is not a finite number")
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot read {value!r} as an exact number")


def round_half_away(value: Fraction) -> int:
    """Nearest integer; halves go away from zero."""
    magnitude = math.floor(abs(value) + Fraction(1, 2))
    return magnitude if value >= 0 else -magnitude


def best_rational(x: Number, max_denominator: int) -> Fraction:
    """The fraction nearest ``x`` whose denominator is at most ``max_denominator``.

    Stern–Brocot descent: keep the two Farey neighbours that bracket ``x`` and
    replace one of them by their mediant until the next mediant would exceed the
    denominator cap. A single step per mediant needs up to ``max_denominator``
    iterations near an integer, so each move takes the whole run of same-side
    steps at once, which is one continued-fraction term.

    Ties between the two neighbours go to the smaller denominator.
    """
    if max_denominator < 1:
        raise ValueError("max_denominator must be at least 1")
    x = as_fraction(x)
    if x < 0:
        return -best_rational(-x, max_denominator)
    if x.denominator <= max_denominator:
        return x

    floor = math.floor(x)
    lower_n, lower_d = floor, 1
    upper_n, upper_d = floor + 1, 1

    while True:
        moved = False

        # Lower bound chases x: lower + k*upper stays below x for k < gap_low/gap_high.
        gap_low = x * lower_d - lower_n
        gap_high = upper_n - x * upper_d
        k = math.ceil(gap_low / gap_high) - 1
        k = min(k, (max_denominator - lower_d) // upper_d)
        if k > 0:
            lower_n, lower_d = lower_n + k * upper_n, lower_d + k * upper_d
            moved = True

        gap_low = x * lower_d - lower_n
        gap_high = upper_n - x * upper_d
        k = math.ceil(gap_high / gap_low) - 1
        k = min(k, (max_denominator - upper_d) // lower_d)
        if k > 0:
            upper_n, upper_d = upper_n + k * lower_n, upper_d + k * lower_d
            moved = True

        if not moved:
            break

    lower = Fraction(lower_n, lower_d)
    upper = Fraction(upper_n, upper_d)
    below, above = x - lower, upper - x
    if below < above:
        return lower
    if above < below:
        return upper
    return lower if lower_d <= upper_d else upper
