"""Supply-rail planning: digital-pot wiper codes for target voltages.

Each of the five rails is an adjustable regulator with a digital pot as the
upper feedback resistor:

    R_wb(code) = code / 256 * r_ab + r_wiper
    v_out      = v_ref * (1 + R_wb(code) / r_fixed)

The board's resistor values are not published, so every constant is per-rail
configuration. The defaults below are this project's, chosen to give a
1.26 V .. 3.75 V span that covers the synthesizer's 1.8 / 2.5 / 3.3 V pins.

Planning is exhaustive over all 256 codes, lower code on a tie.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

from src.errors import ClockGenError
from src.planning.rational import Number, as_fraction
from src.registers.bus import RegisterBus, write_fields
from src.registers.register_map import RegisterMap

logger = logging.getLogger(__name__)

WIPER_STEPS = 256


class InfeasibleVoltageError(ClockGenError, ValueError):
    """The target lies outside what the rail can reach."""


@dataclass(frozen=True)
class RailModel:
    rail_id: int
    pot_i2c_address: int
    pot_channel: int
    v_ref: Fraction = Fraction("1.25")
    r_fixed: Fraction = Fraction(10_000)
    r_ab: Fraction = Fraction(20_000)
    r_wiper: Fraction = Fraction(60)
    steps: int = WIPER_STEPS
    default_code: Optional[int] = None

    def __post_init__(self):
        for name in ("v_ref", "r_fixed", "r_ab", "r_wiper"):
            value = as_fraction(getattr(self, name))
            if value <= 0:
                raise ValueError(f"rail {self.rail_id}: {name} must be positive")
            object.__setattr__(self, name, value)
        if self.steps != WIPER_STEPS:
            raise ValueError(f"rail {self.rail_id}: the pot has {WIPER_STEPS} steps")
        if not 0 <= self.pot_i2c_address <= 0x7F:
            raise ValueError(f"rail {self.rail_id}: pot address must fit 7 bits")
        if not 0 <= self.pot_channel <= 3:
            raise ValueError(f"rail {self.rail_id}: pot channel must be 0..3")
        if self.default_code is not None and not 0 <= self.default_code < self.steps:
            raise ValueError(f"rail {self.rail_id}: default code must be 0..255")

    @property
    def wiper_field(self) -> str:
        return f"wiper{self.pot_channel}"

    @property
    def lsb(self) -> Fraction:
        """Volts per wiper step."""
        return self.v_ref * self.r_ab / (self.steps * self.r_fixed)

    def voltage_range(self) -> Tuple[Fraction, Fraction]:
        return predict_voltage(self, 0), predict_voltage(self, self.steps - 1)


@dataclass(frozen=True)
class SupplySetting:
    code: int
    v_predicted: Fraction
    v_error: Fraction


def predict_voltage(rail: RailModel, code: int) -> Fraction:
    if not 0 <= code < rail.steps:
        raise ValueError(f"wiper code {code} is outside 0..{rail.steps - 1}")
    r_wb = Fraction(code, rail.steps) * rail.r_ab + rail.r_wiper
    return rail.v_ref * (1 + r_wb / rail.r_fixed)


def plan_voltage(rail: RailModel, v_target: Number) -> SupplySetting:
    """The code whose predicted voltage is closest to ``v_target``.

    Ties go to the lower code. ``v_error`` is signed, predicted minus target.

    Raises:
        InfeasibleVoltageError: ``v_target`` is more than half a step outside
            the rail's reachable range.
    """
    v_target = as_fraction(v_target)
    if v_target <= 0:
        raise InfeasibleVoltageError(f"rail {rail.rail_id}: {float(v_target)} V is not positive")

    low, high = rail.voltage_range()
    half_lsb = rail.lsb / 2
    if v_target < low - half_lsb or v_target > high + half_lsb:
        raise InfeasibleVoltageError(
            f"rail {rail.rail_id} reaches {float(low):.4f} V - {float(high):.4f} V; "
            f"{float(v_target):.4f} V is outside it"
        )

    best = None
    for code in range(rail.steps):
        v = predict_voltage(rail, code)
        if best is None or abs(v - v_target) < abs(best[1] - v_target):
            best = (code, v)

    code, v = best
    return SupplySetting(code, v, v - v_target)


def apply_supply(
    bus: RegisterBus,
    rail: RailModel,
    setting: SupplySetting,
    pot_map: RegisterMap,
) -> None:
    """One write to the rail's pot, selecting its channel and code."""
    logger.debug(
        "Rail %d: pot 0x%02X %s <- %d", rail.rail_id, rail.pot_i2c_address,
        rail.wiper_field, setting.code,
    )
    write_fields(bus, rail.pot_i2c_address, pot_map, {rail.wiper_field: setting.code})
