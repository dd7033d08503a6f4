"""Tests for the command line (src/cli.py).

Invocations share one in-process simulator through ``run(..., simulator=...)``,
so a sequence of commands sees the same board the way a bench script would.
"""

import argparse
import io
import json
import time
from fractions import Fraction

import pytest

from src.cli import (
    EXIT_DOMAIN_ERROR,
    EXIT_OK,
    EXIT_USAGE,
    format_hz,
    format_seconds,
    parse_device,
    parse_frequency,
    parse_seconds,
    run,
)
from src.registers.register_file import RegisterFile
from src.sim.server import Simulator, SimulatorServer


def invoke(simulator, *argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), simulator=simulator, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def invoke_json(simulator, *argv):
    code, out, err = invoke(simulator, "--json", *argv)
    assert code == EXIT_OK, err
    return json.loads(out)


# --- argument parsing --------------------------------------------------------

@pytest.mark.parametrize(
    "text, hz",
    [("200000000", 200_000_000), ("200M", 200_000_000), ("200MHz", 200_000_000),
     ("2.5k", 2_500), ("1.2G", 1_200_000_000), ("1e8", 100_000_000)],
)
def test_frequencies_parse_exactly(text, hz):
    assert parse_frequency(text) == hz


@pytest.mark.parametrize(
    "text, seconds",
    [("1.25e-9", Fraction(125, 10**11)), ("1.25n", Fraction(125, 10**11)),
     ("1.25ns", Fraction(125, 10**11)), ("800p", Fraction(8, 10**10)), ("-3us", Fraction(-3, 10**6))],
)
def test_offsets_parse_exactly(text, seconds):
    assert parse_seconds(text) == seconds


@pytest.mark.parametrize("text", ["fast", "200X", "M", ""])
def test_bad_frequencies_are_argument_errors(text):
    with pytest.raises(argparse.ArgumentTypeError):
        parse_frequency(text)


def test_device_address_is_hex():
    assert parse_device("70") == 0x70
    with pytest.raises(argparse.ArgumentTypeError):
        parse_device("80")


def test_rendering():
    assert format_hz(Fraction(200_000_000)) == "200 MHz"
    assert format_hz(None) == "-"
    assert format_seconds(Fraction(125, 10**11)) == "1.25 ns"
    assert format_seconds(Fraction(0)) == "0 s"


# --- exit codes --------------------------------------------------------------

@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["launch"],
        ["set-freq", "--channel", "0"],
        ["set-freq", "--channel", "0", "--hz", "fast"],
        ["set-phase", "--channel", "0", "--seconds", "1n", "--degrees", "45"],
        ["reg", "write", "0x06", "0x100"],
        ["--transport", "usb", "status"],
    ],
)
def test_malformed_command_lines_exit_two(simulator, argv):
    code, _, err = invoke(simulator, *argv)
    assert code == EXIT_USAGE
    assert err


def test_target_outside_the_band_exits_one(simulator):
    code, out, err = invoke(simulator, "set-freq", "--channel", "0", "--hz", "1M")
    assert code == EXIT_DOMAIN_ERROR
    assert "band" in err
    assert out == ""


def test_missing_map_file_exits_one(simulator, tmp_path):
    code, _, err = invoke(simulator, "--map", str(tmp_path / "none.regmap"), "status")
    assert code == EXIT_DOMAIN_ERROR
    assert "register map" in err


# --- commands ----------------------------------------------------------------

def test_set_freq_then_status_shows_the_frequency(simulator):
    code, out, _ = invoke(simulator, "set-freq", "--channel", "0", "--hz", "200M")
    assert code == EXIT_OK
    assert "200 MHz" in out

    status = invoke_json(simulator, "status")
    channel = status["channels"][0]
    assert channel["valid"] and channel["enabled"]
    assert channel["f_out"] == "200000000"
    assert channel["f_vco"] == "2200000000"
    assert len(status["rails"]) == 5


def test_set_freq_json_carries_the_dividers(simulator):
    plan = invoke_json(simulator, "set-freq", "--channel", "1", "--hz", "100M")
    assert plan["feedback"] == {"a": 88, "b": 0, "c": 1, "value": "88"}
    assert plan["output"]["value"] == "22"
    assert plan["rel_error"] == "0"


def test_phase_in_a_later_invocation_uses_the_running_plan(simulator):
    invoke(simulator, "set-freq", "--channel", "0", "--hz", "100M")
    phase = invoke_json(simulator, "set-phase", "--channel", "0", "--seconds", "1.25ns")
    assert phase["steps"] == 3
    assert Fraction(phase["offset_achieved"]) == Fraction(3, 2_200_000_000)


def test_phase_on_an_unprogrammed_channel_exits_one(simulator):
    code, _, err = invoke(simulator, "set-phase", "--channel", "2", "--degrees", "45")
    assert code == EXIT_DOMAIN_ERROR
    assert "no frequency plan" in err


def test_second_channel_in_a_later_invocation_shares_the_vco(simulator):
    invoke(simulator, "set-freq", "--channel", "0", "--hz", "100M")
    invoke(simulator, "set-freq", "--channel", "1", "--hz", "150000001")
    channels = invoke_json(simulator, "status")["channels"]
    assert channels[0]["f_out"] == "100000000"
    assert channels[1]["f_out"] == "150000001"


def test_disable_and_enable(simulator):
    invoke(simulator, "set-freq", "--channel", "3", "--hz", "10M")
    assert invoke(simulator, "disable", "--channel", "3")[0] == EXIT_OK
    channel = invoke_json(simulator, "status")["channels"][3]
    assert not channel["enabled"]
    assert channel["f_out"] is None
    invoke(simulator, "enable", "--channel", "3")
    assert invoke_json(simulator, "status")["channels"][3]["f_out"] == "10000000"


def test_set_rail(simulator):
    setting = invoke_json(simulator, "set-rail", "--rail", "1", "--volts", "2.5")
    assert setting["code"] == 127
    assert setting["v_predicted"] == "31971/12800"
    assert invoke_json(simulator, "status")["rails"][1]["code"] == 127


def test_unreachable_rail_voltage_exits_one(simulator):
    code, _, err = invoke(simulator, "set-rail", "--rail", "1", "--volts", "5")
    assert code == EXIT_DOMAIN_ERROR
    assert "outside" in err


def test_reg_write_then_read(simulator):
    assert invoke(simulator, "reg", "write", "0x06", "0x5A")[0] == EXIT_OK
    code, out, _ = invoke(simulator, "reg", "read", "0x06")
    assert code == EXIT_OK
    assert out.strip() == "0x5A"


def test_reg_read_from_an_absent_device(simulator):
    code, out, _ = invoke(simulator, "reg", "read", "0x06", "--dev", "11")
    assert code == EXIT_OK
    assert out.strip() == "0xFF"


def test_selftest_passes(simulator):
    invoke(simulator, "set-freq", "--channel", "0", "--hz", "100M")
    code, out, _ = invoke(simulator, "selftest")
    assert code == EXIT_OK
    assert out.strip().endswith("PASS")
    assert "ms0: ok" in out


def test_selftest_failure_exits_one_with_the_report(simulator):
    # A synthesizer whose registers ignore every write fails the echo test.
    simulator.board.devices[0x70] = RegisterFile(bytes(256), bytes(256))
    code, out, _ = invoke(simulator, "--json", "selftest")
    assert code == EXIT_DOMAIN_ERROR
    assert json.loads(out)["passed"] is False


def test_fresh_simulator_per_invocation_without_a_shared_one():
    out = io.StringIO()
    assert run(["reg", "write", "0x06", "0x5A"], stdout=out, stderr=io.StringIO()) == EXIT_OK
    run(["reg", "read", "0x06"], stdout=out, stderr=io.StringIO())
    assert out.getvalue().strip().endswith("0x00")


# --- over TCP ----------------------------------------------------------------

@pytest.mark.integration
def test_cli_against_a_simulator_server():
    with SimulatorServer(Simulator()) as server:
        transport = f"tcp:127.0.0.1:{server.port}"
        code, _, err = invoke(None, "--transport", transport, "set-freq", "--channel", "0", "--hz", "200M")
        assert code == EXIT_OK, err

        deadline = time.monotonic() + 5
        while server.simulator.attached and time.monotonic() < deadline:
            time.sleep(0.01)

        status = invoke_json(None, "--transport", transport, "status")
        assert status["channels"][0]["f_out"] == "200000000"
