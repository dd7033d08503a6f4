"""Fractional dividers and their register encoding.

A divider realises ``a + b/c``. The synthesizer stores it as three integers:

    P1 = floor(128 * (a*c + b) / c) - 512      18 bits
    P2 = (128 * b) mod c                       30 bits
    P3 = c                                     30 bits

so that ``a + b/c == (P1 + 512 + P2/P3) / 128`` holds exactly. Decoding uses
that identity and then insists the result really is ``something / P3``; a
triple that no divider encodes to is rejected rather than rounded.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

from src.errors import ClockGenError

DENOMINATOR_MAX = 2**30 - 1

P1_BITS = 18
P2_BITS = 30
P3_BITS = 30

_SCALE = 128
_OFFSET = 512


class DividerError(ClockGenError, ValueError):
    """A divider value or encoding outside what the hardware can hold."""


class DividerFieldOverflowError(DividerError):
    """P1, P2 or P3 does not fit its register field."""


class InconsistentDividerError(DividerError):
    """No legal divider encodes to this P1/P2/P3."""


@dataclass(frozen=True)
class RationalDivider:
    a: int
    b: int = 0
    c: int = 1

    def __post_init__(self):
        if self.c < 1:
            raise DividerError(f"denominator c must be at least 1, got {self.c}")
        if self.c > DENOMINATOR_MAX:
            raise DividerError(
                f"denominator {self.c} exceeds the cap of {DENOMINATOR_MAX}"
            )
        if not 0 <= self.b < self.c:
            raise DividerError(f"need 0 <= b < c, got b={self.b}, c={self.c}")
        if self.b > 0 and math.gcd(self.b, self.c) != 1:
            raise DividerError(f"{self.b}/{self.c} is not in lowest terms")

    @classmethod
    def from_fraction(cls, value: Fraction) -> "RationalDivider":
        a = math.floor(value)
        rest = value - a
        return cls(a, rest.numerator, rest.denominator)

    @property
    def value(self) -> Fraction:
        return self.a + Fraction(self.b, self.c)

    @property
    def is_integer(self) -> bool:
        return self.b == 0

    def within(self, a_min: int, a_max: int) -> bool:
        return a_min <= self.a <= a_max

    def __str__(self):
        return str(self.a) if self.b == 0 else f"{self.a} + {self.b}/{self.c}"


def encode_divider(d: RationalDivider) -> Tuple[int, int, int]:
    p1 = (d.a * d.c + d.b) * _SCALE // d.c - _OFFSET
    p2 = (d.b * _SCALE) % d.c
    p3 = d.c
    if not 0 <= p1 < 2**P1_BITS:
        raise DividerFieldOverflowError(
            f"P1 = {p1} for divider {d} does not fit {P1_BITS} bits"
        )
    if p2 >= 2**P2_BITS or p3 >= 2**P3_BITS:
        raise DividerFieldOverflowError(
            f"P2/P3 = {p2}/{p3} for divider {d} do not fit {P2_BITS} bits"
        )
    return p1, p2, p3


def decode_divider(
    p1: int,
    p2: int,
    p3: int,
    a_range: Optional[Tuple[int, int]] = None,
) -> RationalDivider:
    """Recover the divider stored in P1/P2/P3.

    ``a_range`` optionally restricts the integer part to a divider's legal
    range, for callers that know whether they are reading a feedback or an
    output divider.
    """
    if not 0 <= p1 < 2**P1_BITS or not 0 <= p2 < 2**P2_BITS or not 0 <= p3 < 2**P3_BITS:
        raise InconsistentDividerError(
            f"P1/P2/P3 = {p1}/{p2}/{p3} exceed their field widths"
        )
    if p3 == 0:
        raise InconsistentDividerError("P3 = 0: a divider denominator cannot be zero")
    if p2 >= p3:
        raise InconsistentDividerError(
            f"P2 = {p2} must be smaller than P3 = {p3}"
        )

    value = Fraction(p1 + _OFFSET, _SCALE) + Fraction(p2, _SCALE * p3)
    if (value * p3).denominator != 1:
        raise InconsistentDividerError(
            f"P1/P2/P3 = {p1}/{p2}/{p3} is not a divider with denominator {p3}"
        )

    divider = RationalDivider.from_fraction(value)
    if a_range is not None and not divider.within(*a_range):
        raise InconsistentDividerError(
            f"decoded divider {divider} is outside {a_range[0]}..{a_range[1]}"
        )
    return divider
