"""Worker node: receive videos, analyze them, return results.

The worker dials the master, answers the hardware handshake, and then loops:
every paired ANALYSE/SEGMENT file that completes goes onto the processing
queue (wait time accrues while queued; one video analyzes at a time), and the
finished result is sent back with a RETURN transfer. Outbound transfers obey
the one-in-flight rule: the next RETURN starts only when the master's
COMPLETE acknowledgement for the previous one arrives.

Timing events recorded on the worker's clock (received_by_processor,
processing_start, processing_end) are shipped to the master as event frames
immediately before the corresponding result transfer, so the master's ledger
is complete by the time the result lands.
"""

from __future__ import annotations

import logging
import queue
import threading
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .analysis import AnalysisConfig, analyze_video, serialize_result
from .connection import Connection, connect_with_retry
from .errors import ConnectionClosedError, DashPipeError
from .metrics import LedgerEvent, now_ms
from .model import Command, HardwareInfo, manifest_from_json
from .protocol import (
    CommandMessage,
    HardwareMessage,
    PairingTable,
    ReadyFile,
    TAG_BYTE,
    TAG_EVENT,
    TAG_FILE_CHUNK,
    TAG_FILE_END,
    decode_byte_payload,
    encode_byte_frame,
    encode_byte_payload,
    encode_event_frame,
    encode_file_frames,
    encode_hw_info,
    payload_id_counter,
)

log = logging.getLogger(__name__)


@dataclass
class WorkerSettings:
    name: str
    master_host: str
    master_port: int
    hw: HardwareInfo
    analysis: AnalysisConfig
    connect_timeout_s: float = 30.0
    event_log: str | None = None


class WorkerNode:
    def __init__(self, settings: WorkerSettings):
        self.settings = settings
        self.name = settings.name
        self._payload_ids = payload_id_counter()
        self._work: queue.Queue = queue.Queue()
        self._outbound: deque = deque()
        self._in_flight: str | None = None
        self._send_lock = threading.Lock()
        self._stopping = threading.Event()
        self._events: list[LedgerEvent] = []
        self.conn: Connection | None = None

    # -- event helpers ------------------------------------------------------

    def _event(self, video: str, event: str) -> LedgerEvent:
        entry = LedgerEvent(now_ms(), self.name, video, event)
        self._events.append(entry)
        return entry

    def _flush_event_log(self) -> None:
        if self.settings.event_log:
            Path(self.settings.event_log).write_text(
                "".join(e.to_json() + "\n" for e in self._events)
            )

    # -- outbound result transfers ------------------------------------------

    def _queue_result(self, video: str, content: bytes, events: list[LedgerEvent]) -> None:
        with self._send_lock:
            self._outbound.append((video, content, events))
            self._kick_locked()

    def _on_complete(self) -> None:
        with self._send_lock:
            self._in_flight = None
            self._kick_locked()

    def _kick_locked(self) -> None:
        if self._in_flight is not None or not self._outbound:
            return
        video, content, events = self._outbound.popleft()
        self._in_flight = video
        payload_id = next(self._payload_ids)
        batch = [encode_event_frame(e.to_json().encode()) for e in events]
        batch.append(
            encode_byte_frame(encode_byte_payload(Command.RETURN, payload_id, f"{video}.json"))
        )
        batch.extend(encode_file_frames(payload_id, content))
        try:
            self.conn.send(batch)
        except ConnectionClosedError:
            # Master left; queued results are discarded on exit anyway.
            log.info("%s: dropping result for %s, master is gone", self.name, video)

    # -- processing ---------------------------------------------------------

    def _processing_loop(self) -> None:
        while True:
            item = self._work.get()
            if item is None:
                return
            video, manifest = item
            start = self._event(video, "processing_start")
            try:
                result, stats = analyze_video(manifest, self.settings.analysis)
            except DashPipeError as exc:
                log.error("%s: analysis of %s failed: %s", self.name, video, exc)
                continue
            end = self._event(video, "processing_end")
            received = next(
                e for e in self._events
                if e.video == video and e.event == "received_by_processor"
            )
            self._queue_result(video, serialize_result(result), [received, start, end])

    # -- inbound ------------------------------------------------------------

    def _handle_ready(self, ready: ReadyFile) -> None:
        # COMPLETE goes back immediately: the transfer is done.
        try:
            self.conn.send(encode_byte_frame(encode_byte_payload(Command.COMPLETE)))
        except ConnectionClosedError:
            return
        if ready.command not in (Command.ANALYSE, Command.SEGMENT):
            log.warning("%s: unexpected file-paired command %s", self.name, ready.command)
            return
        try:
            manifest = manifest_from_json(ready.content)
        except DashPipeError as exc:
            log.error("%s: bad manifest %s: %s", self.name, ready.filename, exc)
            return
        self._event(manifest.name, "received_by_processor")
        self._work.put((manifest.name, manifest))

    def _handle_command(self, message: CommandMessage) -> None:
        if message.command is Command.HW_INFO_REQUEST:
            self.conn.send(
                encode_byte_frame(encode_hw_info(self.settings.hw, node_name=self.name))
            )
        elif message.command is Command.COMPLETE:
            self._on_complete()
        else:
            log.warning("%s: unhandled command %s", self.name, message.command)

    def run(self) -> int:
        sock = connect_with_retry(
            self.settings.master_host, self.settings.master_port, self.settings.connect_timeout_s
        )
        self.conn = Connection(sock, label="master")
        processor = threading.Thread(
            target=self._processing_loop, name=f"{self.name}-processing", daemon=True
        )
        processor.start()
        pairing = PairingTable()
        log.info(
            "%s connected to %s:%s",
            self.name, self.settings.master_host, self.settings.master_port,
        )
        try:
            for frame in self.conn.iter_frames():
                if frame.tag == TAG_BYTE:
                    decoded = decode_byte_payload(frame.body)
                    if isinstance(decoded, HardwareMessage):
                        continue  # workers do not consume hardware info
                    if decoded.payload_id is not None:
                        ready = pairing.on_byte_payload(decoded)
                        if ready is not None:
                            self._handle_ready(ready)
                    else:
                        self._handle_command(decoded)
                elif frame.tag == TAG_FILE_CHUNK:
                    pairing.on_file_chunk(frame.payload_id, frame.body)
                elif frame.tag == TAG_FILE_END:
                    ready = pairing.on_file_end(frame.payload_id)
                    if ready is not None:
                        self._handle_ready(ready)
                elif frame.tag == TAG_EVENT:
                    pass  # masters do not send event records
        except ConnectionClosedError as exc:
            log.warning("%s: connection lost: %s", self.name, exc)
        finally:
            # Master is gone: discard queued work and leave.
            self._stopping.set()
            self._work.put(None)
            self.conn.close()
            self._flush_event_log()
        log.info("%s: master disconnected, exiting", self.name)
        return 0


def run_worker(settings: WorkerSettings) -> int:
    return WorkerNode(settings).run()
