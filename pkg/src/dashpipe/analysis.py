"""Frame classification, the compute-cost simulator, and result files.

Outer frames are scanned for road hazards: any non-vehicle object whose box
center falls in the road region, or any vehicle filling enough of the frame to
indicate tailgating, is flagged as a danger. Inner frames are scanned for
driver distraction: a confident wrist raised into the top band of the image
(e.g. a phone held to the ear), or confident eyes sitting below the ears
(glancing down), flags the frame.

Real model inference is replaced by a per-frame cost simulator: each frame
"costs" frame_cost_ms of wall-clock sleep. Early stopping divides the video
length by the early-stop divisor to get a time budget; once the accumulated
frame cost reaches the budget, remaining frames are discarded. The stop
decision uses the deterministic accumulated cost rather than the wall clock so
that identical inputs always skip identical frames.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace

from .errors import AnalysisError
from .model import (
    FrameRecord,
    RawKeypoint,
    ResultFile,
    VideoKind,
    WorkloadManifest,
)

DEFAULT_VEHICLE_CATEGORIES = frozenset({"car", "truck", "bus", "motorcycle"})

# Fractions of frame width/height bounding the road area: lower-middle strip.
DEFAULT_ROAD_REGION = (0.25, 0.75, 0.667, 1.0)  # (x_min, x_max, y_min, y_max)

_WRIST_PARTS = frozenset({"left_wrist", "right_wrist"})
_EYE_PARTS = frozenset({"left_eye", "right_eye"})
_EAR_PARTS = frozenset({"left_ear", "right_ear"})


@dataclass(frozen=True)
class AnalysisConfig:
    esd: float = 0.0
    frame_cost_ms: float = 0.0
    road_region: tuple[float, float, float, float] = DEFAULT_ROAD_REGION
    tailgate_area_fraction: float = 0.10
    keypoint_min_score: float = 0.3
    hand_height_fraction: float = 0.25
    vehicle_categories: frozenset[str] = DEFAULT_VEHICLE_CATEGORIES

    def __post_init__(self) -> None:
        if self.esd < 0:
            raise ValueError("esd must be >= 0 (0 disables early stopping)")
        if self.frame_cost_ms < 0:
            raise ValueError("frame_cost_ms must be >= 0")
        x_min, x_max, y_min, y_max = self.road_region
        if not (0 <= x_min <= x_max <= 1 and 0 <= y_min <= y_max <= 1):
            raise ValueError(f"road_region {self.road_region} outside [0,1] or misordered")
        if not 0 < self.tailgate_area_fraction <= 1:
            raise ValueError("tailgate_area_fraction must be in (0, 1]")
        if not 0 <= self.keypoint_min_score <= 1:
            raise ValueError("keypoint_min_score must be in [0, 1]")

    @classmethod
    def from_dict(cls, values: dict) -> "AnalysisConfig":
        known = {}
        for key in (
            "esd",
            "frame_cost_ms",
            "tailgate_area_fraction",
            "keypoint_min_score",
            "hand_height_fraction",
        ):
            if key in values:
                known[key] = float(values[key])
        if "road_region" in values:
            known["road_region"] = tuple(float(v) for v in values["road_region"])
        if "vehicle_categories" in values:
            known["vehicle_categories"] = frozenset(str(v) for v in values["vehicle_categories"])
        return cls(**known)


@dataclass(frozen=True)
class FlaggedDetection:
    category: str
    danger: bool
    score: float
    bbox: tuple[int, int, int, int]  # (left, top, right, bottom)


@dataclass(frozen=True)
class OuterFrameResult:
    frame: int
    detections: tuple[FlaggedDetection, ...]


@dataclass(frozen=True)
class InnerFrameResult:
    frame: int
    distracted: bool
    keypoints: tuple[RawKeypoint, ...]


FrameResult = OuterFrameResult | InnerFrameResult


@dataclass(frozen=True)
class ProcessingStats:
    processed_frames: int
    skipped_frames: int
    processing_ms: int


def classify_outer_frame(
    frame: FrameRecord, cfg: AnalysisConfig, width: int, height: int
) -> OuterFrameResult:
    """Flag road hazards in one outer frame; every detection is echoed."""
    if frame.detections is None:
        raise AnalysisError(f"frame {frame.index} carries no detections")
    x_min, x_max, y_min, y_max = cfg.road_region
    region = (x_min * width, x_max * width, y_min * height, y_max * height)
    area_threshold = cfg.tailgate_area_fraction * width * height
    flagged = []
    for det in frame.detections:
        left, top, right, bottom = det.bbox
        if det.category in cfg.vehicle_categories:
            danger = (right - left) * (bottom - top) >= area_threshold
        else:
            cx = (left + right) / 2
            cy = (top + bottom) / 2
            danger = region[0] <= cx <= region[1] and region[2] <= cy <= region[3]
        flagged.append(FlaggedDetection(det.category, danger, det.score, det.bbox))
    return OuterFrameResult(frame=frame.index, detections=tuple(flagged))


def classify_inner_frame(
    frame: FrameRecord, cfg: AnalysisConfig, width: int, height: int
) -> InnerFrameResult:
    """Flag driver distraction in one inner frame; every keypoint is echoed.

    Coordinates are top-origin, so a "raised" hand means a small y. The eye
    rule compares mean eye y against mean ear y over confident keypoints and
    needs at least one confident eye and one confident ear to apply.
    """
    if frame.keypoints is None:
        raise AnalysisError(f"frame {frame.index} carries no keypoints")
    confident = [kp for kp in frame.keypoints if kp.score >= cfg.keypoint_min_score]
    hand_line = cfg.hand_height_fraction * height
    distracted = any(kp.part in _WRIST_PARTS and kp.y < hand_line for kp in confident)
    if not distracted:
        eye_ys = [kp.y for kp in confident if kp.part in _EYE_PARTS]
        ear_ys = [kp.y for kp in confident if kp.part in _EAR_PARTS]
        if eye_ys and ear_ys:
            distracted = sum(eye_ys) / len(eye_ys) > sum(ear_ys) / len(ear_ys)
    return InnerFrameResult(
        frame=frame.index, distracted=distracted, keypoints=frame.keypoints
    )


def analyze_video(
    manifest: WorkloadManifest, cfg: AnalysisConfig
) -> tuple[ResultFile, ProcessingStats]:
    """Run the frame loop over a manifest, honoring the early-stop budget.

    With esd > 0 the time budget is duration_ms / esd; the loop stops before
    any frame whose accumulated simulated cost has already reached the budget,
    and the rest of the video is discarded. processing_ms spans the start of
    the frame loop through result serialization.
    """
    manifest.validate()
    budget_ms = manifest.duration_ms / cfg.esd if cfg.esd > 0 else None
    classify = classify_outer_frame if manifest.kind is VideoKind.OUTER else classify_inner_frame
    sleep_s = cfg.frame_cost_ms / 1000.0

    started_ns = time.monotonic_ns()
    results: list[FrameResult] = []
    for frame in manifest.frames:
        if budget_ms is not None and len(results) * cfg.frame_cost_ms >= budget_ms:
            break
        if sleep_s > 0:
            time.sleep(sleep_s)
        results.append(classify(frame, cfg, manifest.width, manifest.height))

    result = ResultFile(name=manifest.name, kind=manifest.kind, body=tuple(results))
    serialize_result(result)
    processing_ms = (time.monotonic_ns() - started_ns) // 1_000_000
    stats = ProcessingStats(
        processed_frames=len(results),
        skipped_frames=len(manifest.frames) - len(results),
        processing_ms=int(processing_ms),
    )
    return result, stats


def shift_frame_index(entry: FrameResult, offset: int) -> FrameResult:
    return replace(entry, frame=entry.frame + offset)


# ---------------------------------------------------------------------------
# Result file serialization: pinned JSON schemas
# ---------------------------------------------------------------------------

def _outer_entry(entry: OuterFrameResult) -> dict:
    return {
        "frame": entry.frame,
        "detections": [
            {
                "category": det.category,
                "danger": det.danger,
                "score": det.score,
                "bbox": {
                    "bottom": det.bbox[3],
                    "left": det.bbox[0],
                    "right": det.bbox[2],
                    "top": det.bbox[1],
                },
            }
            for det in entry.detections
        ],
    }


def _inner_entry(entry: InnerFrameResult) -> dict:
    return {
        "frame": entry.frame,
        "distracted": entry.distracted,
        "keypoints": [
            {"part": kp.part, "score": kp.score, "x": kp.x, "y": kp.y}
            for kp in entry.keypoints
        ],
    }


def serialize_result(result: ResultFile) -> bytes:
    """Result document: a top-level JSON array of frame entries, 2-space indent."""
    if result.kind is VideoKind.OUTER:
        doc = [_outer_entry(e) for e in result.body]
    else:
        doc = [_inner_entry(e) for e in result.body]
    return json.dumps(doc, indent=2).encode("utf-8")


def _parse_outer_entry(entry: dict, pos: int) -> OuterFrameResult:
    try:
        detections = []
        for j, det in enumerate(entry["detections"]):
            try:
                bbox = det["bbox"]
                detections.append(
                    FlaggedDetection(
                        category=str(det["category"]),
                        danger=bool(det["danger"]),
                        score=float(det["score"]),
                        bbox=(
                            int(bbox["left"]),
                            int(bbox["top"]),
                            int(bbox["right"]),
                            int(bbox["bottom"]),
                        ),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise AnalysisError(
                    f"entry {pos} detection {j}: bad field {exc}"
                ) from None
        return OuterFrameResult(frame=int(entry["frame"]), detections=tuple(detections))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, AnalysisError):
            raise
        raise AnalysisError(f"entry {pos}: bad field {exc}") from None


def _parse_inner_entry(entry: dict, pos: int) -> InnerFrameResult:
    try:
        keypoints = []
        for j, kp in enumerate(entry["keypoints"]):
            try:
                keypoints.append(
                    RawKeypoint(
                        part=str(kp["part"]),
                        score=float(kp["score"]),
                        x=int(kp["x"]),
                        y=int(kp["y"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise AnalysisError(f"entry {pos} keypoint {j}: bad field {exc}") from None
        return InnerFrameResult(
            frame=int(entry["frame"]),
            distracted=bool(entry["distracted"]),
            keypoints=tuple(keypoints),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, AnalysisError):
            raise
        raise AnalysisError(f"entry {pos}: bad field {exc}") from None


def parse_result(data: bytes, name: str, kind: VideoKind) -> ResultFile:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise AnalysisError(f"result is not valid JSON: {exc}") from None
    if not isinstance(doc, list):
        raise AnalysisError("result document must be a top-level array")
    parse_entry = _parse_outer_entry if kind is VideoKind.OUTER else _parse_inner_entry
    body = tuple(parse_entry(entry, i) for i, entry in enumerate(doc))
    return ResultFile(name=name, kind=kind, body=body)
