"""The simulator as something a session can talk to, in-process or over TCP."""

import logging
import socket
import socketserver
import threading
from typing import Optional, Tuple

from src.config import BoardConfig
from src.sim.board import Board
from src.transport.session import SessionAlreadyOpenError

logger = logging.getLogger(__name__)

# A client that reconnects can arrive before the old handler thread has seen
# the close.
SESSION_HANDOFF_WAIT = 0.5


class Simulator:
    """A booted board plus the one-session-at-a-time rule.

    Every method takes the board lock, so the TCP handler thread and a test
    inspecting registers never see a half-applied step.
    """

    def __init__(self, board: Optional[Board] = None, config: Optional[BoardConfig] = None):
        self.board = board or Board(config)
        self.board.boot()
        self._session = threading.Lock()
        self.lock = threading.RLock()

    @property
    def firmware(self):
        return self.board.firmware

    def attach(self, wait: Optional[float] = None) -> None:
        """Claim the session, waiting up to ``wait`` seconds for the last one to end."""
        acquired = (
            self._session.acquire(blocking=False) if wait is None
            else self._session.acquire(timeout=wait)
        )
        if not acquired:
            raise SessionAlreadyOpenError("the simulator already has an open session")
        logger.info("Simulator: session attached")

    def detach(self) -> None:
        """End the session. Queues are dropped, registers are kept."""
        with self.lock:
            self.firmware.clear_queues()
        self._session.release()
        logger.info("Simulator: session detached")

    @property
    def attached(self) -> bool:
        return self._session.locked()

    def receive(self, data: bytes) -> None:
        with self.lock:
            self.firmware.ingest(data)
            self.firmware.run_until_idle()

    def pump(self) -> int:
        with self.lock:
            return self.firmware.run_until_idle()

    @property
    def responses_pending(self) -> int:
        return self.firmware.responses_pending

    def take_responses(self, count: int) -> bytes:
        with self.lock:
            return self.firmware.take_responses(count)

    def query_outputs(self):
        with self.lock:
            return self.board.query_outputs()

    def query_rails(self):
        with self.lock:
            return self.board.query_rails()


class _BridgeHandler(socketserver.BaseRequestHandler):
    def handle(self):
        simulator: Simulator = self.server.simulator
        peer = "%s:%s" % self.client_address[:2]
        try:
            simulator.attach(wait=SESSION_HANDOFF_WAIT)
        except SessionAlreadyOpenError:
            logger.warning("Simulator server: refused %s, a session is already open", peer)
            return

        logger.info("Simulator server: client %s connected", peer)
        try:
            while True:
                try:
                    data = self.request.recv(4096)
                except OSError:
                    break
                if not data:
                    break
                simulator.receive(data)
                pending = simulator.responses_pending
                if pending:
                    self.request.sendall(simulator.take_responses(pending))
        finally:
            simulator.detach()
            logger.info("Simulator server: client %s disconnected", peer)


class SimulatorServer(socketserver.ThreadingTCPServer):
    """Serves one simulator on a TCP port, one client at a time.

    A client that arrives while another is connected waits up to
    `SESSION_HANDOFF_WAIT` for the session, then is closed, which it sees as
    the connection dropping on first use.
    """

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, simulator: Simulator, address: Tuple[str, int] = ("127.0.0.1", 0)):
        self.simulator = simulator
        self._thread: Optional[threading.Thread] = None
        super().__init__(address, _BridgeHandler)

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start(self) -> "SimulatorServer":
        self._thread = threading.Thread(
            target=self.serve_forever, name="simulator-server", daemon=True
        )
        self._thread.start()
        logger.info("Simulator server listening on %s:%d", *self.server_address[:2])
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
        logger.info("Simulator server stopped")

    def shutdown_request(self, request):
        try:
            request.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.close_request(request)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc_info):
        self.stop()
