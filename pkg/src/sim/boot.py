"""Firmware boot sequence as a LangGraph graph.

    startup -> power_init -> main_loop -> END

There are no edges. Each node returns ``Command(goto=...)`` and LangGraph
takes the legal destinations from the return annotation, so an annotation
that disagrees with what a node returns is a bug.

The graph only sequences. The work happens on the `Board` the nodes close
over; the graph state is a record of what each phase did, which is what the
tests look at when they stream a boot one node at a time.
"""

import logging
from typing import TYPE_CHECKING, List, Literal, TypedDict

from langgraph.graph import END, StateGraph
from langgraph.types import Command

from src.sim.firmware import FirmwarePhase

if TYPE_CHECKING:
    from src.sim.board import Board

logger = logging.getLogger(__name__)


class BootState(TypedDict):
    phase: str
    rails_initialised: List[int]
    dispatched_at_boot: int


def create_boot_state() -> BootState:
    return BootState(
        phase=FirmwarePhase.STARTUP.value,
        rails_initialised=[],
        dispatched_at_boot=0,
    )


class BootSequence:
    """The three boot phases, bound to one board."""

    def __init__(self, board: "Board"):
        self.board = board

    def startup(self, state: BootState) -> Command[Literal["power_init"]]:
        # Registers back to reset values. Bytes already in the endpoint stay:
        # the host may start talking before boot finishes.
        for device in self.board.devices.values():
            device.reset()
        self.board.firmware.state.phase = FirmwarePhase.POWER_INIT
        logger.info("Firmware: startup done, %d devices reset", len(self.board.devices))
        return Command(goto="power_init", update={"phase": FirmwarePhase.POWER_INIT.value})

    def power_init(self, state: BootState) -> Command[Literal["main_loop"]]:
        initialised = self.board.apply_default_rail_codes()
        logger.info("Firmware: rails %s at their default codes", initialised)
        return Command(
            goto="main_loop",
            update={"phase": FirmwarePhase.MAIN_LOOP.value, "rails_initialised": initialised},
        )

    def main_loop(self, state: BootState) -> Command[Literal["__end__"]]:
        firmware = self.board.firmware
        firmware.state.phase = FirmwarePhase.MAIN_LOOP
        before = len(firmware.dispatch_log)
        firmware.run_until_idle()
        dispatched = len(firmware.dispatch_log) - before
        logger.info("Firmware: main loop running, %d buffered commands served", dispatched)
        return Command(goto=END, update={"dispatched_at_boot": dispatched})


def create_boot_graph(board: "Board"):
    sequence = BootSequence(board)

    workflow = StateGraph(BootState)
    workflow.add_node("startup", sequence.startup)
    workflow.add_node("power_init", sequence.power_init)
    workflow.add_node("main_loop", sequence.main_loop)
    workflow.set_entry_point("startup")

    return workflow.compile()


def run_boot(board: "Board") -> BootState:
    return create_boot_graph(board).invoke(create_boot_state())
