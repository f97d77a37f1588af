"""Timestamped event ledger and the time/skip-rate accounting derived from it.

Each node records events against its own monotonic clock; no metric ever
subtracts timestamps taken on different nodes. Download, transfer, return,
and turnaround intervals live on the master's clock (transfer ends when the
COMPLETE acknowledgement arrives; return spans the RETURN byte payload through
the result file's completion). Processing and wait intervals live on the
clock of whichever node ran the analysis. Overhead is defined as a remainder:

    overhead = turnaround - (download + transfer + return + processing + wait)

so the accounting identity holds exactly, in integer milliseconds, for every
completed video. Locally processed videos have no transfer or return interval
and those terms are simply excluded from the sum.
"""

from __future__ import annotations

import csv
import io
import json
import threading
import time
from dataclasses import dataclass, field

from .errors import MetricsError
from .model import VideoKind

EVENT_NAMES = (
    "download_start",
    "download_end",
    "transfer_start",
    "transfer_end",
    "result_return_start",
    "result_return_end",
    "received_by_processor",
    "processing_start",
    "processing_end",
    "result_received_by_master",
)

CSV_HEADER = (
    "video,node,role,kind,download_ms,transfer_ms,return_ms,processing_ms,"
    "wait_ms,overhead_ms,turnaround_ms,frames_total,frames_skipped"
)

_COMPONENTS = ("download", "transfer", "return", "processing", "wait", "overhead")


def now_ms() -> int:
    return time.monotonic_ns() // 1_000_000


@dataclass(frozen=True)
class LedgerEvent:
    t_ms: int
    node: str
    video: str
    event: str

    def to_json(self) -> str:
        return json.dumps(
            {"t_ms": self.t_ms, "node": self.node, "video": self.video, "event": self.event}
        )

    @classmethod
    def from_json(cls, text: str) -> "LedgerEvent":
        try:
            doc = json.loads(text)
            return cls(
                t_ms=int(doc["t_ms"]),
                node=str(doc["node"]),
                video=str(doc["video"]),
                event=str(doc["event"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MetricsError(f"malformed ledger event: {exc}") from None


@dataclass
class VideoMeta:
    """Bookkeeping the master holds per video or segment."""

    name: str
    kind: VideoKind
    duration_ms: int
    frames_total: int
    node: str = ""
    role: str = ""
    parent: str | None = None
    segmented: bool = False  # True for originals that were split; no unit row
    frames_processed: int | None = None


class MetricsLedger:
    """Append-only event record plus per-video metadata; thread-safe."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.events: list[LedgerEvent] = []
        self.videos: dict[str, VideoMeta] = {}

    def record(self, node: str, video: str, event: str, t_ms: int | None = None) -> LedgerEvent:
        if event not in EVENT_NAMES:
            raise MetricsError(f"unknown ledger event {event!r}")
        entry = LedgerEvent(t_ms if t_ms is not None else now_ms(), node, video, event)
        self.append(entry)
        return entry

    def append(self, entry: LedgerEvent) -> None:
        with self._lock:
            self.events.append(entry)

    def register_video(self, meta: VideoMeta) -> None:
        with self._lock:
            self.videos[meta.name] = meta

    def set_processed(self, video: str, frames_processed: int) -> None:
        with self._lock:
            self.videos[video].frames_processed = frames_processed

    def first(self, video: str, event: str) -> int | None:
        with self._lock:
            for entry in self.events:
                if entry.video == video and entry.event == event:
                    return entry.t_ms
        return None

    def discard(self, video: str, event_names: tuple[str, ...]) -> None:
        """Drop events for a video, used when a failed attempt is retried."""
        with self._lock:
            self.events = [
                e for e in self.events
                if not (e.video == video and e.event in event_names)
            ]

    def to_jsonl(self) -> str:
        with self._lock:
            return "".join(entry.to_json() + "\n" for entry in self.events)

    @classmethod
    def from_jsonl(cls, text: str) -> "MetricsLedger":
        ledger = cls()
        for line in text.splitlines():
            if line.strip():
                ledger.append(LedgerEvent.from_json(line))
        return ledger


@dataclass(frozen=True)
class VideoRow:
    video: str
    node: str
    role: str
    kind: str
    download_ms: int | None
    transfer_ms: int | None
    return_ms: int | None
    processing_ms: int
    wait_ms: int
    overhead_ms: int
    turnaround_ms: int
    frames_total: int
    frames_skipped: int
    near_real_time: bool


@dataclass
class MetricsReport:
    rows: list[VideoRow]
    skip_rate: float
    avg_turnaround_ms: float
    near_real_time_fraction: float
    per_node: dict[str, dict] = field(default_factory=dict)
    video_turnarounds: dict[str, int] = field(default_factory=dict)


def _interval(
    ledger: MetricsLedger, video: str, start: str, end: str, required: bool
) -> int | None:
    t0 = ledger.first(video, start)
    t1 = ledger.first(video, end)
    if t0 is None and t1 is None:
        if required:
            raise MetricsError(f"{video}: missing event {start}")
        return None
    if t0 is None or t1 is None:
        missing = start if t0 is None else end
        raise MetricsError(f"{video}: missing event {missing}")
    return t1 - t0


def compute_metrics(ledger: MetricsLedger) -> MetricsReport:
    """Derive per-video rows and run aggregates from a complete ledger."""
    rows: list[VideoRow] = []
    video_turnarounds: dict[str, int] = {}
    video_deadlines: dict[str, int] = {}

    for meta in ledger.videos.values():
        parent = ledger.videos.get(meta.parent) if meta.parent else None
        download_owner = meta.name if ledger.first(meta.name, "download_start") is not None else (
            parent.name if parent else meta.name
        )
        if meta.segmented:
            # merged original: its turnaround is recorded at merge completion
            download_start = ledger.first(meta.name, "download_start")
            received = ledger.first(meta.name, "result_received_by_master")
            if download_start is None:
                raise MetricsError(f"{meta.name}: missing event download_start")
            if received is None:
                raise MetricsError(f"{meta.name}: missing event result_received_by_master")
            video_turnarounds[meta.name] = received - download_start
            video_deadlines[meta.name] = meta.duration_ms
            continue

        download = _interval(ledger, download_owner, "download_start", "download_end", required=True)
        transfer = _interval(ledger, meta.name, "transfer_start", "transfer_end", required=False)
        ret = _interval(ledger, meta.name, "result_return_start", "result_return_end", required=False)
        processing = _interval(ledger, meta.name, "processing_start", "processing_end", required=True)
        received_by_processor = ledger.first(meta.name, "received_by_processor")
        if received_by_processor is None:
            raise MetricsError(f"{meta.name}: missing event received_by_processor")
        wait = ledger.first(meta.name, "processing_start") - received_by_processor

        received = ledger.first(meta.name, "result_received_by_master")
        if received is None:
            raise MetricsError(f"{meta.name}: missing event result_received_by_master")
        download_start = ledger.first(download_owner, "download_start")
        turnaround = received - download_start
        overhead = turnaround - sum(
            v for v in (download, transfer, ret, processing, wait) if v is not None
        )
        if meta.frames_processed is None:
            raise MetricsError(f"{meta.name}: processed frame count never recorded")
        deadline = parent.duration_ms if parent else meta.duration_ms
        row = VideoRow(
            video=meta.name,
            node=meta.node,
            role=meta.role,
            kind=meta.kind.value,
            download_ms=download,
            transfer_ms=transfer,
            return_ms=ret,
            processing_ms=processing,
            wait_ms=wait,
            overhead_ms=overhead,
            turnaround_ms=turnaround,
            frames_total=meta.frames_total,
            frames_skipped=meta.frames_total - meta.frames_processed,
            near_real_time=turnaround < deadline,
        )
        rows.append(row)
        if parent is None:
            video_turnarounds[meta.name] = turnaround
            video_deadlines[meta.name] = meta.duration_ms

    rows.sort(key=lambda r: r.video)
    total_frames = sum(r.frames_total for r in rows)
    total_skipped = sum(r.frames_skipped for r in rows)
    skip_rate = total_skipped / total_frames if total_frames else 0.0
    turnarounds = list(video_turnarounds.values())
    avg_turnaround = sum(turnarounds) / len(turnarounds) if turnarounds else 0.0
    nrt = (
        sum(
            1
            for name, t in video_turnarounds.items()
            if t < video_deadlines[name]
        )
        / len(video_turnarounds)
        if video_turnarounds
        else 0.0
    )
    return MetricsReport(
        rows=rows,
        skip_rate=skip_rate,
        avg_turnaround_ms=avg_turnaround,
        near_real_time_fraction=nrt,
        per_node=_per_node_averages(rows),
        video_turnarounds=video_turnarounds,
    )


def _per_node_averages(rows: list[VideoRow]) -> dict[str, dict]:
    per_node: dict[str, dict] = {}
    for row in rows:
        stats = per_node.setdefault(
            row.node,
            {
                "role": row.role,
                "videos": 0,
                "frames_total": 0,
                "frames_skipped": 0,
                **{f"avg_{c}_ms": None for c in _COMPONENTS},
                "avg_turnaround_ms": None,
                "_sums": {c: [0, 0] for c in (*_COMPONENTS, "turnaround")},
            },
        )
        stats["videos"] += 1
        stats["frames_total"] += row.frames_total
        stats["frames_skipped"] += row.frames_skipped
        values = {
            "download": row.download_ms,
            "transfer": row.transfer_ms,
            "return": row.return_ms,
            "processing": row.processing_ms,
            "wait": row.wait_ms,
            "overhead": row.overhead_ms,
            "turnaround": row.turnaround_ms,
        }
        for component, value in values.items():
            if value is not None:
                stats["_sums"][component][0] += value
                stats["_sums"][component][1] += 1
    for stats in per_node.values():
        sums = stats.pop("_sums")
        for component, (total, count) in sums.items():
            key = f"avg_{component}_ms"
            stats[key] = total / count if count else None
        total = stats["frames_total"]
        stats["skip_rate"] = stats["frames_skipped"] / total if total else 0.0
    return per_node


def rows_to_csv(rows: list[VideoRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(CSV_HEADER.split(","))
    for row in rows:
        writer.writerow(
            [
                row.video,
                row.node,
                row.role,
                row.kind,
                _cell(row.download_ms),
                _cell(row.transfer_ms),
                _cell(row.return_ms),
                row.processing_ms,
                row.wait_ms,
                row.overhead_ms,
                row.turnaround_ms,
                row.frames_total,
                row.frames_skipped,
            ]
        )
    return out.getvalue()


def _cell(value: int | None) -> str:
    return "" if value is None else str(value)


def aggregate_to_json(report: MetricsReport) -> str:
    return json.dumps(
        {
            "per_node": report.per_node,
            "skip_rate": report.skip_rate,
            "avg_turnaround_ms": report.avg_turnaround_ms,
            "near_real_time_fraction": report.near_real_time_fraction,
        },
        indent=2,
    )


def parse_csv_rows(text: str, source: str = "<csv>") -> list[dict]:
    """Parse a metrics CSV back into dict rows; errors carry line numbers."""
    lines = text.splitlines()
    if not lines:
        raise MetricsError(f"{source}: empty file")
    reader = csv.reader(lines)
    header = next(reader)
    if header != CSV_HEADER.split(","):
        raise MetricsError(f"{source} line 1: unexpected header {header!r}")
    rows = []
    expected_fields = len(header)
    for lineno, record in enumerate(reader, start=2):
        if not record:
            continue
        if len(record) != expected_fields:
            raise MetricsError(
                f"{source} line {lineno}: expected {expected_fields} fields, got {len(record)}"
            )
        row = dict(zip(header, record))
        try:
            for key in ("download_ms", "transfer_ms", "return_ms"):
                row[key] = int(row[key]) if row[key] != "" else None
            for key in (
                "processing_ms",
                "wait_ms",
                "overhead_ms",
                "turnaround_ms",
                "frames_total",
                "frames_skipped",
            ):
                row[key] = int(row[key])
        except ValueError as exc:
            raise MetricsError(f"{source} line {lineno}: {exc}") from None
        rows.append(row)
    if not rows:
        raise MetricsError(f"{source}: no data rows")
    return rows
