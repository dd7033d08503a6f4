"""Command-line front end for scripted board configuration.

    python main.py set-freq --channel 0 --hz 200M
    python main.py set-phase --channel 0 --degrees 45
    python main.py --json status
    python main.py --transport tcp:lab-bench:53380 set-rail --rail 1 --volts 2.5
    python main.py simulate --port 53380

Exit status is 0 on success, 1 when the board or planner refuses a request,
and 2 for a malformed command line. Each subcommand is one device operation;
``set-freq`` and ``set-phase`` first read back what the board is already
running, so consecutive invocations share the VCO the way one handle would.

The flag grammar, exit codes and JSON field names are documented in
docs/USAGE.md and are kept stable for scripts.
"""

import argparse
import contextlib
import json
import logging
import re
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional, TextIO

from src.config import BoardConfig, load_board_config, resolve_port, resolve_transport
from src.errors import ClockGenError
from src.host.bridge import DeviceHandle, bridge_init, bridge_read, bridge_write
from src.host.device import (
    adopt_plans,
    enable_output,
    read_status,
    run_selftest,
    set_frequency,
    set_phase,
    set_rail_voltage,
)
from src.planning.dividers import RationalDivider
from src.sim.server import Simulator, SimulatorServer
from src.transport.session import SessionConfig, parse_transport

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN_ERROR = 1
EXIT_USAGE = 2

FREQUENCY_SUFFIXES = {"": 1, "k": 10**3, "M": 10**6, "G": 10**9}
TIME_SUFFIXES = {"": Fraction(1), "m": Fraction(1, 10**3), "u": Fraction(1, 10**6),
                 "n": Fraction(1, 10**9), "p": Fraction(1, 10**12)}
QUANTITY = re.compile(r"^\s*([+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)\s*([A-Za-z]?)\s*$")


def _quantity(text: str, suffixes: Dict[str, Fraction]) -> Fraction:
    match = QUANTITY.match(text)
    if match and match[2] in suffixes:
        return Fraction(match[1]) * suffixes[match[2]]
    raise argparse.ArgumentTypeError(
        f"{text!r} is not a number with an optional "
        f"{'/'.join(s for s in suffixes if s)} suffix"
    )


def parse_frequency(text: str) -> Fraction:
    """``200000000``, ``200M``, ``2.5k``, ``1.2G``; always exact."""
    text = text.strip()
    if text.lower().endswith("hz"):
        text = text[:-2]
    return _quantity(text, FREQUENCY_SUFFIXES)


def parse_seconds(text: str) -> Fraction:
    """``1.25e-9``, ``1.25n``, ``1.25ns``, ``800p``."""
    text = text.strip()
    if text.endswith("s"):
        text = text[:-1]
    return _quantity(text, TIME_SUFFIXES)


def parse_exact(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None


def parse_byte(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer (use 0x.. for hex)") from None
    if not 0 <= value <= 0xFF:
        raise argparse.ArgumentTypeError(f"{text} is outside 0x00..0xFF")
    return value


def parse_device(text: str) -> int:
    try:
        value = int(text, 16)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a hex I2C address") from None
    if not 0 <= value <= 0x7F:
        raise argparse.ArgumentTypeError(f"0x{value:X} is not a 7-bit I2C address")
    return value


def parse_transport_spec(text: str) -> str:
    try:
        parse_transport(text, simulator_factory=lambda: None)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clockgen",
        description="Configure the clock generator board through its USB-I2C bridge.",
    )
    parser.add_argument(
        "--transport", type=parse_transport_spec, default=None,
        help="sim (in-process simulator, the default) or tcp:HOST:PORT. "
             "CLOCKGEN_TRANSPORT sets the default.",
    )
    parser.add_argument("--map", type=Path, default=None, help="synthesizer register map file")
    parser.add_argument(
        "--config", type=Path, default=None,
        help="board config file (default: CLOCKGEN_CONFIG or maps/board.conf)",
    )
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument("--verbose", "-v", action="store_true", help="log every bridge command")

    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    simulate = commands.add_parser("simulate", help="run the board simulator on a TCP port")
    simulate.add_argument("--host", default="127.0.0.1")
    simulate.add_argument("--port", type=int, default=None, help="default: CLOCKGEN_PORT or 53380")

    set_freq = commands.add_parser("set-freq", help="program an output frequency")
    set_freq.add_argument("--channel", type=int, required=True)
    set_freq.add_argument("--hz", type=parse_frequency, required=True,
                          help="target, with optional k/M/G suffix")

    set_ph = commands.add_parser("set-phase", help="program an output's phase offset")
    set_ph.add_argument("--channel", type=int, required=True)
    offset = set_ph.add_mutually_exclusive_group(required=True)
    offset.add_argument("--seconds", type=parse_seconds, help="offset, with optional m/u/n/p suffix")
    offset.add_argument("--degrees", type=parse_exact, help="offset in degrees of the output period")

    for name, text in (("enable", "turn an output on"), ("disable", "turn an output off")):
        toggle = commands.add_parser(name, help=text)
        toggle.add_argument("--channel", type=int, required=True)

    set_rail = commands.add_parser("set-rail", help="set a supply rail voltage")
    set_rail.add_argument("--rail", type=int, required=True)
    set_rail.add_argument("--volts", type=parse_exact, required=True)

    reg = commands.add_parser("reg", help="raw register access")
    reg_commands = reg.add_subparsers(dest="reg_command", required=True, metavar="ACTION")
    reg_read = reg_commands.add_parser("read", help="read one register")
    reg_read.add_argument("address", type=parse_byte)
    reg_read.add_argument("--dev", type=parse_device, default=None,
                          help="I2C address in hex (default: the synthesizer)")
    reg_write = reg_commands.add_parser("write", help="write one register")
    reg_write.add_argument("address", type=parse_byte)
    reg_write.add_argument("value", type=parse_byte)
    reg_write.add_argument("--dev", type=parse_device, default=None,
                           help="I2C address in hex (default: the synthesizer)")

    commands.add_parser("status", help="read back every output and rail")
    commands.add_parser("selftest", help="bridge echo test and divider read-back")
    return parser


# --- rendering ---------------------------------------------------------------

def exact(value) -> Optional[str]:
    """Rationals go out as exact strings: "200000000", "1/3"."""
    return None if value is None else str(value)


def format_hz(value: Optional[Fraction]) -> str:
    if value is None:
        return "-"
    for unit, scale in (("GHz", 10**9), ("MHz", 10**6), ("kHz", 10**3)):
        if abs(value) >= scale:
            return f"{float(value / scale):.9g} {unit}"
    return f"{float(value):.9g} Hz"


def format_seconds(value: Optional[Fraction]) -> str:
    if value is None:
        return "-"
    if value == 0:
        return "0 s"
    for unit, scale in (("s", 1), ("ms", Fraction(1, 10**3)), ("us", Fraction(1, 10**6)),
                        ("ns", Fraction(1, 10**9))):
        if abs(value) >= scale:
            return f"{float(value / scale):.6g} {unit}"
    return f"{float(value * 10**12):.6g} ps"


def divider_document(divider: RationalDivider) -> dict:
    return {"a": divider.a, "b": divider.b, "c": divider.c, "value": exact(divider.value)}


def plan_document(plan) -> dict:
    return {
        "channel": plan.channel,
        "f_in": exact(plan.f_in),
        "f_target": exact(plan.f_target),
        "f_vco": exact(plan.f_vco),
        "f_achieved": exact(plan.f_achieved),
        "rel_error": exact(plan.rel_error),
        "feedback": divider_document(plan.feedback),
        "output": divider_document(plan.output),
    }


def status_document(status) -> dict:
    return {
        "channels": [
            {
                "channel": c.channel,
                "enabled": c.enabled,
                "valid": c.valid,
                "f_out": exact(c.f_out),
                "f_vco": exact(c.f_vco),
                "phase_offset": exact(c.phase_offset),
                "error": c.error,
            }
            for c in status.channels
        ],
        "rails": [
            {"rail_id": r.rail_id, "code": r.code, "volts": exact(r.volts)}
            for r in status.rails
        ],
    }


def status_lines(status) -> List[str]:
    lines = [f"{'ch':>2}  {'enabled':7}  {'f_out':>16}  {'f_vco':>16}  {'phase':>12}"]
    for c in status.channels:
        f_out = format_hz(c.f_out) if c.valid else f"invalid: {c.error}"
        lines.append(
            f"{c.channel:>2}  {'yes' if c.enabled else 'no':7}  {f_out:>16}  "
            f"{format_hz(c.f_vco):>16}  {format_seconds(c.phase_offset):>12}"
        )
    lines.append("")
    lines.append(f"{'rail':>4}  {'code':>4}  {'volts':>8}")
    for r in status.rails:
        lines.append(f"{r.rail_id:>4}  {r.code:>4}  {float(r.volts):>8.4f}")
    return lines


# --- commands ----------------------------------------------------------------

class SelftestFailed(ClockGenError):
    def __init__(self, document, lines):
        self.document = document
        self.lines = lines
        super().__init__("selftest failed")


def _set_freq(handle: DeviceHandle, args):
    adopt_plans(handle)
    plan = set_frequency(handle, args.channel, args.hz)
    text = (
        f"channel {plan.channel}: {format_hz(plan.f_achieved)} "
        f"(feedback {plan.feedback}, output {plan.output}, VCO {format_hz(plan.f_vco)}, "
        f"error {float(plan.rel_error):.3g})"
    )
    return plan_document(plan), [text]


def _set_phase(handle: DeviceHandle, args):
    adopt_plans(handle)
    if args.degrees is not None:
        phase = set_phase(handle, args.channel, args.degrees, degrees=True)
    else:
        phase = set_phase(handle, args.channel, args.seconds)
    document = {
        "channel": args.channel,
        "steps": phase.steps,
        "quantum": exact(phase.quantum),
        "offset_requested": exact(phase.offset_requested),
        "offset_achieved": exact(phase.offset_achieved),
        "residual": exact(phase.residual),
    }
    text = (
        f"channel {args.channel}: {phase.steps} steps of {format_seconds(phase.quantum)} = "
        f"{format_seconds(phase.offset_achieved)} (residual {format_seconds(phase.residual)})"
    )
    return document, [text]


def _toggle(on: bool):
    def command(handle: DeviceHandle, args):
        enable_output(handle, args.channel, on)
        state = "enabled" if on else "disabled"
        return {"channel": args.channel, "enabled": on}, [f"channel {args.channel} {state}"]
    return command


def _set_rail(handle: DeviceHandle, args):
    setting = set_rail_voltage(handle, args.rail, args.volts)
    document = {
        "rail_id": args.rail,
        "code": setting.code,
        "v_predicted": exact(setting.v_predicted),
        "v_error": exact(setting.v_error),
    }
    text = (
        f"rail {args.rail}: code {setting.code}, {float(setting.v_predicted):.4f} V "
        f"({float(setting.v_error) * 1000:+.2f} mV)"
    )
    return document, [text]


def _reg(handle: DeviceHandle, args):
    dev = handle.synth_address if args.dev is None else args.dev
    if args.reg_command == "read":
        value = bridge_read(handle, dev, args.address)
        return {"dev": dev, "address": args.address, "value": value}, [f"0x{value:02X}"]
    bridge_write(handle, dev, args.address, args.value)
    document = {"dev": dev, "address": args.address, "value": args.value}
    return document, [f"0x{dev:02X}:0x{args.address:02X} <- 0x{args.value:02X}"]


def _status(handle: DeviceHandle, args):
    status = read_status(handle)
    return status_document(status), status_lines(status)


def _selftest(handle: DeviceHandle, args):
    adopt_plans(handle)
    report = run_selftest(handle)
    document = {
        "passed": report.passed,
        "commands": report.commands,
        "echoes": [{"pattern": e.pattern, "readback": e.readback} for e in report.echoes],
        "dividers": [
            {"group": d.group, "expected": list(d.expected), "readback": list(d.readback)}
            for d in report.dividers
        ],
    }
    lines = [f"echo 0x{e.pattern:02X} -> 0x{e.readback:02X}" for e in report.echoes]
    lines += [f"{d.group}: {'ok' if d.ok else 'MISMATCH'}" for d in report.dividers]
    lines.append("PASS" if report.passed else "FAIL")
    if not report.passed:
        raise SelftestFailed(document, lines)
    return document, lines


COMMANDS: Dict[str, Callable] = {
    "set-freq": _set_freq,
    "set-phase": _set_phase,
    "enable": _toggle(True),
    "disable": _toggle(False),
    "set-rail": _set_rail,
    "reg": _reg,
    "status": _status,
    "selftest": _selftest,
}


def _emit(out: TextIO, as_json: bool, document, lines) -> None:
    if as_json:
        print(json.dumps(document, indent=2), file=out)
    else:
        for line in lines:
            print(line, file=out)


def _simulate(config: BoardConfig, args, out: TextIO) -> int:
    port = args.port if args.port is not None else resolve_port()
    server = SimulatorServer(Simulator(config=config), (args.host, port))
    print(f"simulator listening on {args.host}:{server.port}", file=out, flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def run(
    argv: Optional[List[str]] = None,
    *,
    simulator: Optional[Simulator] = None,
    stdout: Optional[TextIO] = None,
    stderr: Optional[TextIO] = None,
) -> int:
    """Run one invocation and return its exit status.

    ``simulator`` is used for the ``sim`` transport instead of a fresh one,
    which lets several invocations drive the same simulated board.
    """
    out = stdout or sys.stdout
    err = stderr or sys.stderr

    parser = build_parser()
    try:
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s"
    )

    try:
        config = load_board_config(args.config)
        if args.map is not None:
            config = replace(config, synth_map=args.map)

        if args.command == "simulate":
            return _simulate(config, args, out)

        endpoint = parse_transport(
            args.transport or resolve_transport(),
            simulator_factory=lambda: simulator or Simulator(config=config),
        )
        with bridge_init(SessionConfig(endpoint, config.read_timeout), config) as handle:
            document, lines = COMMANDS[args.command](handle, args)
    except SelftestFailed as exc:
        _emit(out, args.json, exc.document, exc.lines)
        return EXIT_DOMAIN_ERROR
    except ClockGenError as exc:
        logger.debug("%s failed", args.command, exc_info=True)
        print(f"error: {exc}", file=err)
        return EXIT_DOMAIN_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE

    _emit(out, args.json, document, lines)
    return EXIT_OK


def main() -> None:
    sys.exit(run(sys.argv[1:]))
