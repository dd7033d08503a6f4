"""Byte sessions to a bridge: in-process to a simulator, or over TCP.

A session moves raw protocol bytes and nothing else. It does not frame, retry,
or reconnect. Two guarantees matter to the layers above:

* ``write_bytes`` delivers every byte once, in order.
* ``read_bytes(n)`` returns exactly ``n`` bytes or raises `TransportTimeout`.
  Bytes that arrived toward an incomplete read are kept for the next call,
  never handed back short.

One session is open per simulator at a time, and one call is in flight per
session at a time. A second concurrent call raises `SessionBusyError` rather
than interleaving its bytes with the first.
"""

import logging
import socket
import threading
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Optional, Union

from src.config import DEFAULT_PORT, DEFAULT_READ_TIMEOUT
from src.errors import ClockGenError
from src.planning.rational import Number, as_fraction

if TYPE_CHECKING:
    from src.sim.server import Simulator

logger = logging.getLogger(__name__)

RECV_CHUNK = 4096


class TransportError(ClockGenError):
    """The byte channel failed."""


class TransportConnectionError(TransportError):
    """Could not connect, or the peer went away."""


class SessionAlreadyOpenError(TransportError):
    """The simulator already has a session."""


class SessionClosedError(TransportError):
    """Use of a session after `close`."""


class TransportTimeout(TransportError):
    """Fewer bytes than requested arrived before the deadline."""


class SessionBusyError(TransportError):
    """Another call is already using this session."""


@dataclass(frozen=True)
class InProcessEndpoint:
    simulator: "Simulator"


@dataclass(frozen=True)
class TcpEndpoint:
    host: str
    port: int = DEFAULT_PORT

    def __str__(self):
        return f"tcp:{self.host}:{self.port}"


Endpoint = Union[InProcessEndpoint, TcpEndpoint]


@dataclass(frozen=True)
class SessionConfig:
    endpoint: Endpoint
    read_timeout: Fraction = DEFAULT_READ_TIMEOUT

    def __post_init__(self):
        timeout = as_fraction(self.read_timeout)
        if timeout <= 0:
            raise ValueError(f"read_timeout must be positive, got {timeout}")
        object.__setattr__(self, "read_timeout", timeout)


class _InProcessChannel:
    """Runs the simulator synchronously on every call.

    Once the firmware has gone idle nothing else can arrive, so a short read
    fails at once instead of sleeping out its timeout.
    """

    def __init__(self, simulator: "Simulator"):
        self.simulator = simulator
        simulator.attach()

    def send(self, data: bytes) -> None:
        self.simulator.receive(data)

    def receive(self, n: int, timeout: Fraction) -> bytes:
        self.simulator.pump()
        available = self.simulator.responses_pending
        if available < n:
            raise TransportTimeout(
                f"wanted {n} bytes, the simulator has {available} and is idle"
            )
        return self.simulator.take_responses(n)

    def close(self) -> None:
        self.simulator.detach()


class _TcpChannel:
    def __init__(self, endpoint: TcpEndpoint, timeout: Fraction):
        try:
            self.sock = socket.create_connection(
                (endpoint.host, endpoint.port), timeout=float(timeout)
            )
        except OSError as exc:
            raise TransportConnectionError(
                f"cannot connect to {endpoint}: {exc.strerror or exc}"
            ) from exc
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.endpoint = endpoint
        self._buffer = bytearray()

    def send(self, data: bytes) -> None:
        try:
            self.sock.sendall(data)
        except OSError as exc:
            raise TransportConnectionError(f"send to {self.endpoint} failed: {exc}") from exc

    def receive(self, n: int, timeout: Fraction) -> bytes:
        deadline = time.monotonic() + float(timeout)
        while len(self._buffer) < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TransportTimeout(
                    f"wanted {n} bytes from {self.endpoint}, got {len(self._buffer)} "
                    f"in {float(timeout):g} s"
                )
            self.sock.settimeout(remaining)
            try:
                chunk = self.sock.recv(RECV_CHUNK)
            except socket.timeout:
                continue
            except OSError as exc:
                raise TransportConnectionError(
                    f"receive from {self.endpoint} failed: {exc}"
                ) from exc
            if not chunk:
                raise TransportConnectionError(f"{self.endpoint} closed the connection")
            self._buffer.extend(chunk)

        data = bytes(self._buffer[:n])
        del self._buffer[:n]
        return data

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class Session:
    def __init__(self, config: SessionConfig):
        self.config = config
        self._lock = threading.Lock()
        self._closed = False
        if isinstance(config.endpoint, InProcessEndpoint):
            self._channel = _InProcessChannel(config.endpoint.simulator)
        else:
            self._channel = _TcpChannel(config.endpoint, config.read_timeout)
        logger.info("Session opened to %s", self.describe())

    def describe(self) -> str:
        if isinstance(self.config.endpoint, InProcessEndpoint):
            return "in-process simulator"
        return str(self.config.endpoint)

    @property
    def closed(self) -> bool:
        return self._closed

    def _claim(self) -> None:
        if self._closed:
            raise SessionClosedError("the session is closed")
        if not self._lock.acquire(blocking=False):
            raise SessionBusyError("another call is using this session")

    def write_bytes(self, data: bytes) -> None:
        self._claim()
        try:
            logger.debug("-> %s", bytes(data).hex(" "))
            self._channel.send(bytes(data))
        finally:
            self._lock.release()

    def read_bytes(self, n: int, timeout: Optional[Number] = None) -> bytes:
        if n < 0:
            raise ValueError(f"cannot read {n} bytes")
        timeout = self.config.read_timeout if timeout is None else as_fraction(timeout)
        if timeout <= 0:
            raise ValueError(f"timeout must be positive, got {timeout}")
        self._claim()
        try:
            data = self._channel.receive(n, timeout)
            logger.debug("<- %s", data.hex(" "))
            return data
        finally:
            self._lock.release()

    def close(self) -> None:
        """Idempotent."""
        if self._closed:
            return
        self._closed = True
        self._channel.close()
        logger.info("Session to %s closed", self.describe())

    def __enter__(self) -> "Session":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def open_session(config: SessionConfig) -> Session:
    """Open a session.

    Raises:
        SessionAlreadyOpenError: the in-process simulator already has one.
        TransportConnectionError: nothing accepted the TCP connection.
    """
    return Session(config)


def write_bytes(session: Session, data: bytes) -> None:
    session.write_bytes(data)


def read_bytes(session: Session, n: int, timeout: Optional[Number] = None) -> bytes:
    return session.read_bytes(n, timeout)


def close(session: Session) -> None:
    session.close()


def parse_transport(text: str, simulator_factory=None) -> Endpoint:
    """``sim`` or ``tcp:HOST:PORT`` (port optional) to an endpoint.

    ``sim`` needs ``simulator_factory``, a zero-argument callable returning
    the simulator to attach to.
    """
    text = text.strip()
    if text == "sim":
        if simulator_factory is None:
            raise ValueError("'sim' transport needs a simulator")
        return InProcessEndpoint(simulator_factory())
    if text.startswith("tcp:"):
        host, _, port = text[len("tcp:"):].rpartition(":")
        if not host:
            host, port = port, ""
        if not host:
            raise ValueError(f"no host in transport {text!r}")
        try:
            return TcpEndpoint(host, int(port) if port else DEFAULT_PORT)
        except ValueError:
            raise ValueError(f"bad port in transport {text!r}") from None
    raise ValueError(f"transport must be 'sim' or 'tcp:HOST:PORT', got {text!r}")
