"""The root of every exception this package raises on purpose.

Each module defines its own errors next to the code that raises them. They all
derive from `ClockGenError`, which is how the CLI tells a domain failure (exit
1) from a bug (a traceback).
"""


class ClockGenError(Exception):
    """A request the board, the protocol, or the planner cannot satisfy."""
