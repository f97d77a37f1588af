"""Socket plumbing shared by master and worker nodes.

Each connection owns exactly one writer thread; any thread may enqueue a
batch of encoded frames and batches are written intact, in order, so the
frames of one payload never interleave with another batch's frames. Reading
happens on the caller's thread via iter_frames().
"""

from __future__ import annotations

import queue
import socket
import threading

from .errors import ConnectionClosedError
from .protocol import Frame, FrameParser

_RECV_SIZE = 64 * 1024


class Connection:
    def __init__(self, sock: socket.socket, label: str = "peer"):
        self.sock = sock
        self.label = label
        self.closed = threading.Event()
        self._send_queue: queue.Queue[bytes | None] = queue.Queue()
        self._writer = threading.Thread(
            target=self._write_loop, name=f"writer-{label}", daemon=True
        )
        self._writer.start()

    def send(self, frames: bytes | list[bytes]) -> None:
        """Enqueue one batch; a list is concatenated and written contiguously."""
        if isinstance(frames, list):
            frames = b"".join(frames)
        if self.closed.is_set():
            raise ConnectionClosedError(f"connection to {self.label} is closed")
        self._send_queue.put(frames)

    def _write_loop(self) -> None:
        while True:
            batch = self._send_queue.get()
            if batch is None:
                return
            try:
                self.sock.sendall(batch)
            except OSError:
                self.closed.set()
                return

    def iter_frames(self):
        """Yield frames until the peer closes; raises ConnectionClosedError on
        a mid-frame truncation."""
        parser = FrameParser()
        while True:
            try:
                data = self.sock.recv(_RECV_SIZE)
            except OSError:
                break
            if not data:
                parser.finish()
                break
            yield from parser.feed(data)

    def close(self) -> None:
        if not self.closed.is_set():
            self.closed.set()
        self._send_queue.put(None)
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


def connect_with_retry(host: str, port: int, timeout_s: float) -> socket.socket:
    """Dial until the listener is up or the deadline passes."""
    import time

    deadline = time.monotonic() + timeout_s
    last_error: OSError | None = None
    while time.monotonic() < deadline:
        try:
            sock = socket.create_connection((host, port), timeout=5.0)
            sock.settimeout(None)
            return sock
        except OSError as exc:
            last_error = exc
            time.sleep(0.1)
    raise ConnectionClosedError(f"could not reach {host}:{port}: {last_error}")


__all__ = ["Connection", "Frame", "connect_with_retry"]
