"""Master node: download, schedule, dispatch, collect, account.

One event loop owns every piece of mutable state (device table, transfer
queues, unit registry, ledger bookkeeping). Per-connection reader threads,
the downloader, and the local processing thread communicate with it through
a single queue of messages. Transfers to each worker are serialized: the
next file leaves only after the COMPLETE acknowledgement for the previous
one arrives from that worker.
"""

from __future__ import annotations

import logging
import queue
import socket
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import AnalysisConfig, analyze_video, parse_result, serialize_result
from .connection import Connection
from .dashcam import DownloadLoop, PairResult, ServiceSource, SimulatedSource
from .errors import (
    ConnectionClosedError,
    DashPipeError,
    DownloadError,
    MetricsError,
    ProtocolError,
)
from .metrics import (
    LedgerEvent,
    MetricsLedger,
    VideoMeta,
    aggregate_to_json,
    compute_metrics,
    now_ms,
    rows_to_csv,
)
from .model import (
    Command,
    Endpoint,
    HardwareInfo,
    VideoKind,
    WorkloadManifest,
    manifest_to_json,
)
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
    encode_file_frames,
    payload_id_counter,
)
from .scheduler import (
    Assignment,
    DeviceState,
    on_worker_result,
    pick_device,
    schedule_pair,
)
from .segmenter import merge_results, segment_offsets, split_video

log = logging.getLogger(__name__)

_GHOST = "__missing__"


@dataclass
class SourceSettings:
    mode: str = "simulated"  # or "service"
    catalog_dir: str = "catalog"
    url: str = ""
    simulated_download_ms: int = 350
    enqueue_overhead_ms: int = 500


@dataclass
class MasterSettings:
    name: str = "master"
    listen_host: str = "127.0.0.1"
    listen_port: int = 0
    expected_workers: int = 0
    pair_count: int = 1
    inter_pair_wait_ms: int = 1000
    segmentation: bool = False
    segment_count: int = 2
    download_mode: str = "test"
    results_dir: str = "results"
    report_dir: str = "report"
    connect_timeout_s: float = 30.0
    run_timeout_s: float | None = None
    source: SourceSettings = field(default_factory=SourceSettings)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    hw: HardwareInfo = field(
        default_factory=lambda: HardwareInfo(2000, 8, 8192, 4096, 65536, 32768, 100)
    )


@dataclass
class UnitInfo:
    """One schedulable piece of work: a whole video or one segment."""

    name: str
    kind: VideoKind
    manifest: WorkloadManifest
    command: Command
    parent: str | None = None
    target_id: str | None = None
    target_name: str = ""


@dataclass
class SegmentPlan:
    parent: str
    expected: list[str]
    offsets: dict[str, int]
    received: dict[str, object] = field(default_factory=dict)


@dataclass
class WorkerLink:
    endpoint: Endpoint
    conn: Connection
    hw: HardwareInfo | None = None
    transfer_queue: deque = field(default_factory=deque)
    in_flight: str | None = None  # unit name currently being transferred

    @property
    def endpoint_id(self) -> str:
        return self.endpoint.id

    @property
    def name(self) -> str:
        return self.endpoint.name


class MasterNode:
    def __init__(self, settings: MasterSettings):
        self.settings = settings
        self.name = settings.name
        self.ledger = MetricsLedger()
        self.events: queue.Queue = queue.Queue()
        self.devices: list[DeviceState] = [
            DeviceState(name=settings.name, hw=settings.hw, endpoint_id=None)
        ]
        self.links: dict[str, WorkerLink] = {}
        self.units: dict[str, UnitInfo] = {}
        self.plans: dict[str, SegmentPlan] = {}
        self.outstanding: set[str] = set()
        self.videos_done: set[str] = set()
        self._payload_ids = payload_id_counter()
        self._endpoint_seq = 0
        self._downloads_done = False
        self._work: queue.Queue = queue.Queue()
        self._listener: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._downloader: DownloadLoop | None = None
        self.bound_port: int | None = None
        self.report: object | None = None

    # ------------------------------------------------------------------
    # wiring
    # ------------------------------------------------------------------

    def _start_listener(self) -> None:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.settings.listen_host, self.settings.listen_port))
        listener.listen()
        self._listener = listener
        self.bound_port = listener.getsockname()[1]
        thread = threading.Thread(target=self._accept_loop, name="acceptor", daemon=True)
        thread.start()
        self._threads.append(thread)

    def _accept_loop(self) -> None:
        while True:
            try:
                sock, _addr = self._listener.accept()
            except OSError:
                return
            self._endpoint_seq += 1
            endpoint_id = f"ep-{self._endpoint_seq:02d}"
            conn = Connection(sock, label=endpoint_id)
            link = WorkerLink(endpoint=Endpoint(id=endpoint_id, name=endpoint_id), conn=conn)
            self.links[endpoint_id] = link
            conn.send(encode_byte_frame(encode_byte_payload(Command.HW_INFO_REQUEST)))
            reader = threading.Thread(
                target=self._reader_loop, args=(link,), name=f"reader-{endpoint_id}", daemon=True
            )
            reader.start()
            self._threads.append(reader)

    def _reader_loop(self, link: WorkerLink) -> None:
        pairing = PairingTable()
        try:
            for frame in link.conn.iter_frames():
                if frame.tag == TAG_BYTE:
                    decoded = decode_byte_payload(frame.body)
                    if isinstance(decoded, HardwareMessage):
                        self.events.put(("hello", link.endpoint_id, decoded))
                    elif decoded.payload_id is not None:
                        if decoded.command is Command.RETURN:
                            self.ledger.record(
                                self.name, _strip_json(decoded.filename), "result_return_start"
                            )
                        ready = pairing.on_byte_payload(decoded)
                        if ready is not None:
                            self._on_ready(link, ready)
                    else:
                        # Stamp receipt on the reader so transfer_end reflects
                        # when COMPLETE actually arrived, not loop latency.
                        self.events.put(("command", link.endpoint_id, decoded, now_ms()))
                elif frame.tag == TAG_FILE_CHUNK:
                    pairing.on_file_chunk(frame.payload_id, frame.body)
                elif frame.tag == TAG_FILE_END:
                    ready = pairing.on_file_end(frame.payload_id)
                    if ready is not None:
                        self._on_ready(link, ready)
                elif frame.tag == TAG_EVENT:
                    self.ledger.append(LedgerEvent.from_json(frame.body.decode("utf-8")))
        except (DashPipeError, OSError) as exc:
            log.warning("reader for %s stopped: %s", link.endpoint_id, exc)
        finally:
            self.events.put(("disconnect", link.endpoint_id))

    def _on_ready(self, link: WorkerLink, ready: ReadyFile) -> None:
        """Reader-thread half of result receipt: timestamps + the COMPLETE
        obligation happen at emission time; bookkeeping goes to the loop."""
        unit = _strip_json(ready.filename)
        if ready.command is Command.RETURN:
            self.ledger.record(self.name, unit, "result_return_end")
            self.ledger.record(self.name, unit, "result_received_by_master")
        try:
            link.conn.send(encode_byte_frame(encode_byte_payload(Command.COMPLETE)))
        except ConnectionClosedError:
            pass
        self.events.put(("ready_file", link.endpoint_id, ready))

    def _processing_loop(self) -> None:
        while True:
            item = self._work.get()
            if item is None:
                return
            unit_name, manifest = item
            self.ledger.record(self.name, unit_name, "processing_start")
            try:
                result, _stats = analyze_video(manifest, self.settings.analysis)
            except DashPipeError as exc:
                self.events.put(("local_failed", unit_name, str(exc)))
                continue
            self.ledger.record(self.name, unit_name, "processing_end")
            self.events.put(("local_done", unit_name, result))

    def _make_source(self):
        src = self.settings.source
        if src.mode == "simulated":
            return SimulatedSource(src.catalog_dir, src.simulated_download_ms)
        if src.mode == "service":
            # Enqueue overhead makes real downloads of sub-two-second videos
            # slower than they are produced; short granularities must simulate.
            if self.settings.inter_pair_wait_ms < 2000:
                raise DownloadError(
                    "service downloads need a granularity of at least 2000 ms; "
                    "use the simulated source for shorter videos"
                )
            return ServiceSource(src.url, src.enqueue_overhead_ms)
        raise DownloadError(f"unknown source mode {src.mode!r}")

    # ------------------------------------------------------------------
    # run
    # ------------------------------------------------------------------

    def run(self) -> int:
        settings = self.settings
        deadline = (
            time.monotonic() + settings.run_timeout_s if settings.run_timeout_s else None
        )
        Path(settings.results_dir).mkdir(parents=True, exist_ok=True)
        Path(settings.report_dir).mkdir(parents=True, exist_ok=True)
        self._start_listener()
        log.info("%s listening on %s:%s", self.name, settings.listen_host, self.bound_port)

        try:
            if not self._await_fleet():
                self._shutdown()
                return 1
            source = self._make_source()
        except DashPipeError as exc:
            log.error("%s: %s", self.name, exc)
            self._shutdown()
            return 1

        processor = threading.Thread(
            target=self._processing_loop, name="processing", daemon=True
        )
        processor.start()
        self._threads.append(processor)

        self._downloader = DownloadLoop(
            source,
            self.ledger,
            self.name,
            settings.inter_pair_wait_ms,
            mode=settings.download_mode,
            pair_count=settings.pair_count,
            on_pair=lambda pair: self.events.put(("pair", pair)),
        )

        def download_thread():
            count = self._downloader.run()
            self.events.put(("downloads_done", count))

        downloader = threading.Thread(target=download_thread, name="downloader", daemon=True)
        downloader.start()
        self._threads.append(downloader)

        exit_code = 0
        try:
            self._event_loop(deadline)
        except DashPipeError as exc:
            log.error("%s: run failed: %s", self.name, exc)
            exit_code = 1
        finally:
            try:
                self._write_reports()
            except (DashPipeError, OSError) as exc:
                log.error("%s: could not write reports: %s", self.name, exc)
                exit_code = 1
            self._shutdown()
        return exit_code

    def _await_fleet(self) -> bool:
        """Collect HW_INFO handshakes until the expected fleet is assembled."""
        needed = self.settings.expected_workers
        deadline = time.monotonic() + self.settings.connect_timeout_s
        while sum(1 for d in self.devices if not d.is_self) < needed:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                log.error(
                    "%s: only %d of %d workers connected before timeout",
                    self.name, len(self.devices) - 1, needed,
                )
                return False
            try:
                event = self.events.get(timeout=remaining)
            except queue.Empty:
                continue
            self._dispatch(event)
        return True

    def _event_loop(self, deadline: float | None) -> None:
        while not self._finished():
            if deadline is not None and time.monotonic() > deadline:
                raise MetricsError(
                    f"run timed out with {len(self.outstanding)} units outstanding"
                )
            try:
                event = self.events.get(timeout=0.2)
            except queue.Empty:
                continue
            self._dispatch(event)

    def _finished(self) -> bool:
        return self._downloads_done and not self.outstanding

    def _dispatch(self, event: tuple) -> None:
        kind = event[0]
        if kind == "hello":
            self._on_hello(event[1], event[2])
        elif kind == "pair":
            self._on_pair(event[1])
        elif kind == "command":
            self._on_command(event[1], event[2], event[3])
        elif kind == "ready_file":
            self._on_result(event[1], event[2])
        elif kind == "local_done":
            self._on_local_done(event[1], event[2])
        elif kind == "local_failed":
            log.error("%s: local analysis of %s failed: %s", self.name, event[1], event[2])
            self._abandon_unit(event[1])
        elif kind == "downloads_done":
            self._downloads_done = True
            log.info("%s: downloads finished (%d pairs)", self.name, event[1])
        elif kind == "disconnect":
            self._on_disconnect(event[1])

    # ------------------------------------------------------------------
    # event handlers
    # ------------------------------------------------------------------

    def _on_hello(self, endpoint_id: str, hello: HardwareMessage) -> None:
        link = self.links.get(endpoint_id)
        if link is None:
            return
        link.hw = hello.hw
        name = hello.node_name or endpoint_id
        if any(d.name == name for d in self.devices):
            log.warning("%s: duplicate node name %s; using %s", self.name, name, endpoint_id)
            name = endpoint_id
        link.endpoint.name = name
        self.devices.append(
            DeviceState(name=name, hw=hello.hw, endpoint_id=endpoint_id)
        )
        log.info("%s: worker %s (%s) joined", self.name, name, endpoint_id)

    def _on_pair(self, pair: PairResult) -> None:
        for slot, reason in pair.errors.items():
            log.warning("%s: pair %d %s download failed: %s", self.name, pair.pair_index, slot, reason)
        outer, inner = pair.outer, pair.inner
        if outer is None and inner is None:
            return
        outer_name = outer.name if outer is not None else _GHOST
        inner_name = inner.name if inner is not None else _GHOST
        use_segmentation = self.settings.segmentation and inner is not None
        assignments = schedule_pair(
            self.devices,
            outer_name,
            inner_name,
            segmentation_enabled=use_segmentation,
            segment_count=self.settings.segment_count,
        )
        segments_by_name: dict[str, WorkloadManifest] = {}
        if inner is not None:
            seg_assignments = [a for a in assignments if a.command is Command.SEGMENT]
            if seg_assignments:
                segments = split_video(inner, seg_assignments[0].segment_count)
                segments_by_name = {s.name: s for s in segments}
                self.plans[inner.name] = SegmentPlan(
                    parent=inner.name,
                    expected=[s.name for s in segments],
                    offsets=segment_offsets(segments),
                )
                self.ledger.register_video(
                    VideoMeta(
                        name=inner.name,
                        kind=inner.kind,
                        duration_ms=inner.duration_ms,
                        frames_total=len(inner.frames),
                        segmented=True,
                    )
                )
        for assignment in assignments:
            if assignment.command is Command.SEGMENT:
                base = assignment.video_name.rsplit("_", 1)[0]
                if base == _GHOST:
                    continue
                self._dispatch_assignment(assignment, segments_by_name[assignment.video_name], base)
            else:
                if assignment.video_name == _GHOST:
                    continue
                manifest = outer if assignment.video_name == outer_name else inner
                self._dispatch_assignment(assignment, manifest, None)

    def _dispatch_assignment(
        self, assignment: Assignment, manifest: WorkloadManifest, parent: str | None
    ) -> None:
        device = next(d for d in self.devices if d.endpoint_id == assignment.target_id)
        device.queue_len += 1
        device.busy = True
        role = "master" if assignment.is_local else "worker"
        unit = UnitInfo(
            name=manifest.name,
            kind=manifest.kind,
            manifest=manifest,
            command=assignment.command,
            parent=parent,
            target_id=assignment.target_id,
            target_name=assignment.target_name,
        )
        self.units[manifest.name] = unit
        self.outstanding.add(manifest.name)
        self.ledger.register_video(
            VideoMeta(
                name=manifest.name,
                kind=manifest.kind,
                duration_ms=manifest.duration_ms,
                frames_total=len(manifest.frames),
                node=assignment.target_name,
                role=role,
                parent=parent,
            )
        )
        self._send_to_target(unit)

    def _send_to_target(self, unit: UnitInfo) -> None:
        if unit.target_id is None:
            self.ledger.record(self.name, unit.name, "received_by_processor")
            self._work.put((unit.name, unit.manifest))
            return
        link = self.links[unit.target_id]
        link.transfer_queue.append(unit.name)
        self._kick_transfers(link)

    def _kick_transfers(self, link: WorkerLink) -> None:
        if link.in_flight is not None or not link.transfer_queue:
            return
        unit_name = link.transfer_queue.popleft()
        unit = self.units[unit_name]
        link.in_flight = unit_name
        payload_id = next(self._payload_ids)
        self.ledger.record(self.name, unit_name, "transfer_start")
        batch = [
            encode_byte_frame(
                encode_byte_payload(unit.command, payload_id, f"{unit_name}.json")
            )
        ]
        batch.extend(encode_file_frames(payload_id, manifest_to_json(unit.manifest)))
        try:
            link.conn.send(batch)
        except ConnectionClosedError:
            pass  # the reader's disconnect event will trigger reassignment

    def _on_command(self, endpoint_id: str, message: CommandMessage, t_ms: int) -> None:
        if message.command is Command.COMPLETE:
            link = self.links.get(endpoint_id)
            if link is None or link.in_flight is None:
                return
            self.ledger.record(self.name, link.in_flight, "transfer_end", t_ms)
            link.in_flight = None
            self._kick_transfers(link)
        else:
            log.warning("%s: unhandled command %s from %s", self.name, message.command, endpoint_id)

    def _on_result(self, endpoint_id: str, ready: ReadyFile) -> None:
        if ready.command is not Command.RETURN:
            log.warning("%s: unexpected %s file from %s", self.name, ready.command, endpoint_id)
            return
        unit_name = _strip_json(ready.filename)
        unit = self.units.get(unit_name)
        if unit is None:
            log.warning("%s: result for unknown unit %s", self.name, unit_name)
            return
        if unit_name not in self.outstanding:
            log.warning("%s: duplicate result for %s ignored", self.name, unit_name)
            return
        try:
            result = parse_result(ready.content, unit_name, unit.kind)
        except DashPipeError as exc:
            log.error("%s: unparseable result for %s: %s", self.name, unit_name, exc)
            self._abandon_unit(unit_name)
            return
        try:
            on_worker_result(self.devices, endpoint_id)
        except ProtocolError as exc:
            log.warning("%s: %s", self.name, exc)
        self._complete_unit(unit, result)

    def _on_local_done(self, unit_name: str, result) -> None:
        if unit_name not in self.outstanding:
            return
        self.ledger.record(self.name, unit_name, "result_received_by_master")
        unit = self.units[unit_name]
        try:
            on_worker_result(self.devices, None)
        except ProtocolError as exc:
            log.warning("%s: %s", self.name, exc)
        self._complete_unit(unit, result)

    def _complete_unit(self, unit: UnitInfo, result) -> None:
        self.ledger.set_processed(unit.name, len(result.body))
        self.outstanding.discard(unit.name)
        if unit.parent is None:
            self._write_result(result)
            self.videos_done.add(unit.name)
            return
        plan = self.plans[unit.parent]
        plan.received[unit.name] = result
        if set(plan.received) >= set(plan.expected):
            merged = merge_results(
                [plan.received[name] for name in plan.expected], plan.parent, plan.offsets
            )
            self.ledger.record(self.name, plan.parent, "result_received_by_master")
            self._write_result(merged)
            self.videos_done.add(plan.parent)

    def _write_result(self, result) -> None:
        path = Path(self.settings.results_dir) / f"{result.name}.json"
        path.write_bytes(serialize_result(result))

    def _abandon_unit(self, unit_name: str) -> None:
        self.outstanding.discard(unit_name)

    def _on_disconnect(self, endpoint_id: str) -> None:
        link = self.links.pop(endpoint_id, None)
        if link is None:
            return
        link.endpoint.connected = False
        self.devices = [d for d in self.devices if d.endpoint_id != endpoint_id]
        if self._downloads_done and not self.outstanding:
            return
        stranded = [u for u in self.units.values() if u.target_id == endpoint_id and u.name in self.outstanding]
        if not stranded:
            return
        log.warning(
            "%s: %s disconnected with %d unit(s) outstanding; reassigning",
            self.name, link.name or endpoint_id, len(stranded),
        )
        for unit in stranded:
            # The dead attempt's wire timings no longer describe this unit.
            self.ledger.discard(unit.name, (
                "transfer_start", "transfer_end", "result_return_start", "result_return_end",
            ))
            self._reassign(unit)

    def _reassign(self, unit: UnitInfo) -> None:
        device = pick_device(self.devices)
        device.queue_len += 1
        device.busy = True
        unit.target_id = device.endpoint_id
        unit.target_name = device.name
        meta = self.ledger.videos[unit.name]
        meta.node = device.name
        meta.role = "master" if device.is_self else "worker"
        log.info("%s: reassigned %s to %s", self.name, unit.name, device.name)
        self._send_to_target(unit)

    # ------------------------------------------------------------------
    # teardown
    # ------------------------------------------------------------------

    def _write_reports(self) -> None:
        report_dir = Path(self.settings.report_dir)
        (report_dir / "events.jsonl").write_text(self.ledger.to_jsonl())
        report = compute_metrics(self.ledger)
        self.report = report
        (report_dir / "metrics.csv").write_text(rows_to_csv(report.rows))
        (report_dir / "aggregate.json").write_text(aggregate_to_json(report) + "\n")
        log.info(
            "%s: %d unit rows, skip rate %.1f%%, avg turnaround %.0f ms, near-real-time %.0f%%",
            self.name,
            len(report.rows),
            report.skip_rate * 100,
            report.avg_turnaround_ms,
            report.near_real_time_fraction * 100,
        )

    def _shutdown(self) -> None:
        if self._downloader is not None:
            self._downloader.stop()
        self._work.put(None)
        for link in list(self.links.values()):
            link.conn.close()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass


def _strip_json(filename: str) -> str:
    return filename[:-5] if filename.endswith(".json") else filename


def run_master(settings: MasterSettings) -> int:
    return MasterNode(settings).run()
