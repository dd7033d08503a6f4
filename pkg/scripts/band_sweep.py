#!/usr/bin/env python
"""Sweep the output band and report how well the planner covers it.

Draws targets across 5-200 MHz, plans each one, and counts how many came out
exact, how many needed an approximated output divider, and how many the
planner refused. With ``--verify`` every plan is also programmed into a
simulated board and read back, which checks planner and simulator agree.

    python scripts/band_sweep.py                      # 1000 random targets, seed 0
    python scripts/band_sweep.py --samples 200 --grid # evenly spaced instead
    python scripts/band_sweep.py --verify             # program each plan and read it back
"""

import argparse
import logging
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

# Allow `python scripts/band_sweep.py` from the repo root without installing.
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.config import load_board_config
from src.host.bridge import bridge_init
from src.host.device import read_status, set_frequency
from src.planning.frequency import UnsatisfiablePlanError, plan_frequency
from src.sim.server import Simulator
from src.transport.session import InProcessEndpoint, SessionConfig

logger = logging.getLogger(__name__)


def sweep_targets(band_min: Fraction, band_max: Fraction, samples: int, seed: int, grid: bool):
    """Integer-hertz targets inside the band."""
    low, high = int(band_min), int(band_max)
    if grid:
        if samples == 1:
            return [low]
        return [low + (high - low) * i // (samples - 1) for i in range(samples)]
    rng = random.Random(seed)
    return [rng.randint(low, high) for _ in range(samples)]


def main() -> int:
    parser = argparse.ArgumentParser(
        description="Plan a sweep of output frequencies and report coverage."
    )
    parser.add_argument("--samples", type=int, default=1000, help="targets to plan (default: 1000)")
    parser.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    parser.add_argument("--grid", action="store_true",
                        help="evenly spaced targets instead of random ones")
    parser.add_argument("--channel", type=int, default=0)
    parser.add_argument("--config", type=Path, default=None,
                        help="board config (default: CLOCKGEN_CONFIG or maps/board.conf)")
    parser.add_argument("--verify", action="store_true",
                        help="program every plan into a simulated board and read it back")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(message)s")

    config = load_board_config(args.config)
    constraints = config.constraints
    targets = sweep_targets(
        constraints.band_min, constraints.band_max, args.samples, args.seed, args.grid
    )

    started = time.perf_counter()
    exact = approximate = 0
    worst = Fraction(0)
    refused = []
    plans = []
    for target in targets:
        try:
            plan = plan_frequency(config.f_in, target, args.channel, constraints)
        except UnsatisfiablePlanError as exc:
            refused.append((target, str(exc)))
            continue
        plans.append(plan)
        if plan.is_exact:
            exact += 1
        else:
            approximate += 1
            worst = max(worst, plan.rel_error)

    print(f"Planned {len(targets)} targets in {time.perf_counter() - started:.1f}s")
    print(f"  exact        {exact}")
    print(f"  approximate  {approximate}  (worst relative error {float(worst):.3g})")
    print(f"  refused      {len(refused)}")
    for target, reason in refused[:10]:
        print(f"    {target} Hz: {reason}", file=sys.stderr)

    mismatches = 0
    if args.verify:
        simulator = Simulator(config=config)
        with bridge_init(SessionConfig(InProcessEndpoint(simulator), config.read_timeout), config) as handle:
            for plan in plans:
                set_frequency(handle, args.channel, plan.f_target)
                reported = read_status(handle).channels[args.channel].f_out
                if reported != plan.f_achieved:
                    mismatches += 1
                    print(
                        f"  {plan.f_target} Hz: planned {plan.f_achieved}, board reports {reported}",
                        file=sys.stderr,
                    )
        print(f"Verified {len(plans)} plans on the simulator: {mismatches} mismatches")

    return 1 if refused or mismatches else 0


if __name__ == "__main__":
    sys.exit(main())
