"""Shared domain types: commands, workload manifests, hardware descriptors.

A workload manifest is this pipeline's stand-in for a video file: instead of
pixel data it records, per frame, the raw model outputs (object detections for
outer videos, pose keypoints for inner videos) plus duration/fps metadata.
Manifests are the unit of download, transfer, and analysis.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

from .errors import AnalysisError, ProtocolError


class Command(enum.Enum):
    """Instructions exchanged between nodes."""

    ANALYSE = "ANALYSE"
    SEGMENT = "SEGMENT"
    COMPLETE = "COMPLETE"
    RETURN = "RETURN"
    HW_INFO_REQUEST = "HW_INFO_REQUEST"
    HW_INFO = "HW_INFO"


def command_to_string(command: Command) -> str:
    return command.name


def parse_command(name: str) -> Command:
    try:
        return Command[name]
    except KeyError:
        raise ProtocolError(f"unknown command {name!r}") from None


class VideoKind(enum.Enum):
    OUTER = "outer"
    INNER = "inner"


def parse_kind(name: str) -> VideoKind:
    try:
        return VideoKind(name.lower())
    except ValueError:
        raise ValueError(f"unknown video kind {name!r}") from None


# Single-person pose convention: 17 named body parts.
KEYPOINT_PARTS = (
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)

_KEYPOINT_PART_SET = frozenset(KEYPOINT_PARTS)


@dataclass(frozen=True)
class RawDetection:
    """One detected object: label, confidence, and pixel-edge bounding box."""

    category: str
    score: float
    bbox: tuple[int, int, int, int]  # (left, top, right, bottom)

    def clamped(self, width: int, height: int) -> "RawDetection":
        left, top, right, bottom = self.bbox
        clamped = (
            min(max(left, 0), width),
            min(max(top, 0), height),
            min(max(right, 0), width),
            min(max(bottom, 0), height),
        )
        if clamped == self.bbox:
            return self
        return RawDetection(self.category, self.score, clamped)


@dataclass(frozen=True)
class RawKeypoint:
    """One body-part estimate. Coordinates may fall outside the frame; pose
    models routinely emit off-screen guesses, so bounds are not enforced."""

    part: str
    score: float
    x: int
    y: int


@dataclass(frozen=True)
class FrameRecord:
    """Raw model output for one frame; exactly one payload side is set."""

    index: int
    detections: tuple[RawDetection, ...] | None = None
    keypoints: tuple[RawKeypoint, ...] | None = None


@dataclass(frozen=True)
class WorkloadManifest:
    name: str
    kind: VideoKind
    duration_ms: int
    fps: int
    width: int
    height: int
    frames: tuple[FrameRecord, ...]
    origin_frame_offset: int = 0

    def validate(self) -> "WorkloadManifest":
        """Check structural invariants; raises AnalysisError on violation."""
        if self.duration_ms <= 0 or self.fps <= 0:
            raise AnalysisError(f"{self.name}: duration_ms and fps must be positive")
        if self.origin_frame_offset < 0:
            raise AnalysisError(f"{self.name}: negative origin_frame_offset")
        expected = round(self.duration_ms / 1000 * self.fps)
        if len(self.frames) != expected:
            raise AnalysisError(
                f"{self.name}: {len(self.frames)} frames, expected {expected} "
                f"for {self.duration_ms}ms at {self.fps}fps"
            )
        for i, frame in enumerate(self.frames):
            if frame.index != i:
                raise AnalysisError(
                    f"{self.name}: frame indices not contiguous at position {i} "
                    f"(got {frame.index})"
                )
            if self.kind is VideoKind.OUTER:
                if frame.detections is None or frame.keypoints is not None:
                    raise AnalysisError(
                        f"{self.name}: outer manifest frame {i} must carry "
                        "detections and no keypoints"
                    )
            else:
                if frame.keypoints is None or frame.detections is not None:
                    raise AnalysisError(
                        f"{self.name}: inner manifest frame {i} must carry "
                        "keypoints and no detections"
                    )
            for det in frame.detections or ():
                left, top, right, bottom = det.bbox
                if not (left < right and top < bottom):
                    raise AnalysisError(
                        f"{self.name}: frame {i} has degenerate bbox {det.bbox}"
                    )
            for kp in frame.keypoints or ():
                if kp.part not in _KEYPOINT_PART_SET:
                    raise AnalysisError(
                        f"{self.name}: frame {i} has unknown body part {kp.part!r}"
                    )
        return self


def manifest_to_json(manifest: WorkloadManifest) -> bytes:
    """Serialize a manifest to its catalog/wire JSON form."""
    frames = []
    for frame in manifest.frames:
        entry: dict = {"index": frame.index}
        if frame.detections is not None:
            entry["detections"] = [
                {"category": d.category, "score": d.score, "bbox": list(d.bbox)}
                for d in frame.detections
            ]
        if frame.keypoints is not None:
            entry["keypoints"] = [
                {"part": k.part, "score": k.score, "x": k.x, "y": k.y}
                for k in frame.keypoints
            ]
        frames.append(entry)
    doc = {
        "name": manifest.name,
        "kind": manifest.kind.value,
        "duration_ms": manifest.duration_ms,
        "fps": manifest.fps,
        "width": manifest.width,
        "height": manifest.height,
        "origin_frame_offset": manifest.origin_frame_offset,
        "frames": frames,
    }
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


def manifest_from_json(data: bytes) -> WorkloadManifest:
    """Parse and validate a manifest document. Detection boxes are clamped to
    the frame bounds before the edge-ordering check."""
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise AnalysisError(f"manifest is not valid JSON: {exc}") from None
    try:
        width = int(doc["width"])
        height = int(doc["height"])
        kind = parse_kind(doc["kind"])
        frames = []
        for entry in doc["frames"]:
            detections = None
            keypoints = None
            if "detections" in entry:
                detections = tuple(
                    RawDetection(
                        category=str(d["category"]),
                        score=float(d["score"]),
                        bbox=tuple(int(v) for v in d["bbox"]),
                    ).clamped(width, height)
                    for d in entry["detections"]
                )
            if "keypoints" in entry:
                keypoints = tuple(
                    RawKeypoint(
                        part=str(k["part"]),
                        score=float(k["score"]),
                        x=int(k["x"]),
                        y=int(k["y"]),
                    )
                    for k in entry["keypoints"]
                )
            frames.append(
                FrameRecord(index=int(entry["index"]), detections=detections, keypoints=keypoints)
            )
        manifest = WorkloadManifest(
            name=str(doc["name"]),
            kind=kind,
            duration_ms=int(doc["duration_ms"]),
            fps=int(doc["fps"]),
            width=width,
            height=height,
            frames=tuple(frames),
            origin_frame_offset=int(doc.get("origin_frame_offset", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise AnalysisError(f"malformed manifest field: {exc}") from None
    return manifest.validate()


@dataclass(frozen=True)
class HardwareInfo:
    """A node's capacity descriptor, exchanged during the connection handshake."""

    cpu_freq_mhz: int
    cpu_cores: int
    total_ram_mb: int
    avail_ram_mb: int
    total_storage_mb: int
    avail_storage_mb: int
    battery_pct: int

    def __post_init__(self) -> None:
        if self.avail_ram_mb > self.total_ram_mb:
            raise ValueError("avail_ram_mb exceeds total_ram_mb")
        if self.avail_storage_mb > self.total_storage_mb:
            raise ValueError("avail_storage_mb exceeds total_storage_mb")
        if not 0 <= self.battery_pct <= 100:
            raise ValueError("battery_pct outside [0, 100]")

    def to_json(self) -> str:
        return json.dumps(
            {
                "cpu_freq_mhz": self.cpu_freq_mhz,
                "cpu_cores": self.cpu_cores,
                "total_ram_mb": self.total_ram_mb,
                "avail_ram_mb": self.avail_ram_mb,
                "total_storage_mb": self.total_storage_mb,
                "avail_storage_mb": self.avail_storage_mb,
                "battery_pct": self.battery_pct,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "HardwareInfo":
        try:
            doc = json.loads(text)
            return cls(**{k: int(doc[k]) for k in (
                "cpu_freq_mhz",
                "cpu_cores",
                "total_ram_mb",
                "avail_ram_mb",
                "total_storage_mb",
                "avail_storage_mb",
                "battery_pct",
            )})
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed hardware info: {exc}") from None


def capacity_score(hw: HardwareInfo) -> tuple[int, int, int, int]:
    """Totally ordered processing-capacity key; compare lexicographically.

    Primary key is headline frequency times core count; RAM, available RAM,
    and battery break ties. Heterogeneous core clusters are summarized by the
    highest cluster frequency in cpu_freq_mhz.
    """
    return (
        hw.cpu_freq_mhz * hw.cpu_cores,
        hw.total_ram_mb,
        hw.avail_ram_mb,
        hw.battery_pct,
    )


@dataclass
class Endpoint:
    """A connected peer: runtime-assigned opaque id plus a fleet-unique name."""

    id: str
    name: str
    connected: bool = True


@dataclass(frozen=True)
class ResultFile:
    """Per-frame classification output for one video or segment.

    body is the parsed result document: a tuple of typed frame results
    (see analysis module) whose serialized form is the pinned JSON schema.
    """

    name: str
    kind: VideoKind
    body: tuple = field(default_factory=tuple)
