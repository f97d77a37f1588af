"""Synthetic catalog generation: paired outer/inner manifests from a seed.

Content is drawn from a seeded RNG so a given spec always produces
byte-identical catalogs. Hazard and distraction situations are injected at
configurable rates so the classifiers have positives to find.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .model import (
    FrameRecord,
    KEYPOINT_PARTS,
    RawDetection,
    RawKeypoint,
    VideoKind,
    WorkloadManifest,
    manifest_to_json,
)

_NON_VEHICLES = ("person", "bicycle", "dog", "traffic light", "stop sign")
_VEHICLES = ("car", "truck", "bus", "motorcycle")

# Rough upper-body anchor positions for a seated driver, as frame fractions.
_DRIVER_POSE = {
    "nose": (0.50, 0.38),
    "left_eye": (0.46, 0.34),
    "right_eye": (0.54, 0.34),
    "left_ear": (0.42, 0.37),
    "right_ear": (0.58, 0.37),
    "left_shoulder": (0.38, 0.55),
    "right_shoulder": (0.62, 0.55),
    "left_elbow": (0.33, 0.72),
    "right_elbow": (0.67, 0.72),
    "left_wrist": (0.36, 0.85),
    "right_wrist": (0.64, 0.85),
    "left_hip": (0.42, 0.95),
    "right_hip": (0.58, 0.95),
    "left_knee": (0.40, 1.10),
    "right_knee": (0.60, 1.10),
    "left_ankle": (0.40, 1.35),
    "right_ankle": (0.60, 1.35),
}


@dataclass(frozen=True)
class WorkloadSpec:
    pairs: int
    duration_ms: int = 1000
    fps: int = 30
    width: int = 1280
    height: int = 720
    seed: int = 0
    detections_per_frame: float = 3.0
    hazard_rate: float = 0.2
    distraction_rate: float = 0.2
    out_dir: str = "catalog"

    def __post_init__(self) -> None:
        if self.pairs < 1:
            raise ConfigError("pairs must be >= 1")
        if self.duration_ms <= 0 or self.fps <= 0:
            raise ConfigError("duration_ms and fps must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("frame dimensions must be positive")
        if self.detections_per_frame < 0:
            raise ConfigError("detections_per_frame must be >= 0")
        for rate in (self.hazard_rate, self.distraction_rate):
            if not 0 <= rate <= 1:
                raise ConfigError("injection rates must be within [0, 1]")

    @classmethod
    def from_dict(cls, values: dict) -> "WorkloadSpec":
        known = {f: values[f] for f in cls.__dataclass_fields__ if f in values}
        unknown = set(values) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown workload spec keys: {sorted(unknown)}")
        try:
            return cls(**known)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def _frame_count(spec: WorkloadSpec) -> int:
    return round(spec.duration_ms / 1000 * spec.fps)


def _random_bbox(rng: random.Random, spec: WorkloadSpec) -> tuple[int, int, int, int]:
    w = rng.randint(spec.width // 32, spec.width // 4)
    h = rng.randint(spec.height // 32, spec.height // 4)
    left = rng.randint(0, spec.width - w)
    top = rng.randint(0, spec.height - h)
    return (left, top, left + w, top + h)


def _hazard_bbox(rng: random.Random, spec: WorkloadSpec, vehicle: bool) -> tuple[int, int, int, int]:
    if vehicle:
        # Big enough to read as tailgating: at least a third of each dimension.
        w = rng.randint(spec.width // 2, int(spec.width * 0.9))
        h = rng.randint(spec.height // 3, int(spec.height * 0.9))
        left = rng.randint(0, spec.width - w)
        top = rng.randint(0, spec.height - h)
        return (left, top, left + w, top + h)
    # Non-vehicle centered inside the default road region.
    cx = rng.randint(int(spec.width * 0.30), int(spec.width * 0.70))
    cy = rng.randint(int(spec.height * 0.70), int(spec.height * 0.95))
    w = rng.randint(spec.width // 24, spec.width // 8)
    h = rng.randint(spec.height // 24, spec.height // 8)
    left = max(0, cx - w // 2)
    top = max(0, cy - h // 2)
    return (left, top, min(spec.width, left + w), min(spec.height, top + h))


def _outer_frames(rng: random.Random, spec: WorkloadSpec) -> tuple[FrameRecord, ...]:
    frames = []
    for index in range(_frame_count(spec)):
        detections = []
        count = max(0, round(rng.gauss(spec.detections_per_frame, 1.0)))
        for _ in range(count):
            if rng.random() < 0.5:
                category = rng.choice(_VEHICLES)
            else:
                category = rng.choice(_NON_VEHICLES)
            detections.append(
                RawDetection(category, round(rng.uniform(0.3, 0.99), 4), _random_bbox(rng, spec))
            )
        if rng.random() < spec.hazard_rate:
            vehicle = rng.random() < 0.5
            category = rng.choice(_VEHICLES if vehicle else _NON_VEHICLES)
            detections.append(
                RawDetection(
                    category, round(rng.uniform(0.5, 0.99), 4), _hazard_bbox(rng, spec, vehicle)
                )
            )
        frames.append(FrameRecord(index=index, detections=tuple(detections)))
    return tuple(frames)


def _inner_frames(rng: random.Random, spec: WorkloadSpec) -> tuple[FrameRecord, ...]:
    frames = []
    for index in range(_frame_count(spec)):
        distracted = rng.random() < spec.distraction_rate
        phone_to_ear = distracted and rng.random() < 0.5
        keypoints = []
        for part in KEYPOINT_PARTS:
            fx, fy = _DRIVER_POSE[part]
            x = round(fx * spec.width + rng.gauss(0, spec.width * 0.02))
            y = round(fy * spec.height + rng.gauss(0, spec.height * 0.02))
            score = round(rng.uniform(0.4, 0.99), 4)
            if part.endswith("knee") or part.endswith("ankle"):
                # Off-frame lower body: the pose model guesses with low confidence.
                score = round(rng.uniform(0.0, 0.4), 4)
            if distracted:
                if phone_to_ear and part == "right_wrist":
                    y = round(rng.uniform(0.05, 0.20) * spec.height)
                    score = round(rng.uniform(0.6, 0.99), 4)
                elif not phone_to_ear and part.endswith("eye"):
                    # Glancing down: eyes drop below the ears.
                    y = round(0.45 * spec.height + rng.gauss(0, spec.height * 0.01))
                    score = round(rng.uniform(0.6, 0.99), 4)
            keypoints.append(RawKeypoint(part, score, x, y))
        frames.append(FrameRecord(index=index, keypoints=tuple(keypoints)))
    return tuple(frames)


def generate_catalog(spec: WorkloadSpec, out_dir: str | Path | None = None) -> list[Path]:
    """Write paired out_NNNN/in_NNNN manifests; returns the written paths."""
    directory = Path(out_dir if out_dir is not None else spec.out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    rng = random.Random(spec.seed)
    written = []
    for pair in range(spec.pairs):
        outer = WorkloadManifest(
            name=f"out_{pair:04d}",
            kind=VideoKind.OUTER,
            duration_ms=spec.duration_ms,
            fps=spec.fps,
            width=spec.width,
            height=spec.height,
            frames=_outer_frames(rng, spec),
        ).validate()
        inner = WorkloadManifest(
            name=f"in_{pair:04d}",
            kind=VideoKind.INNER,
            duration_ms=spec.duration_ms,
            fps=spec.fps,
            width=spec.width,
            height=spec.height,
            frames=_inner_frames(rng, spec),
        ).validate()
        for manifest in (outer, inner):
            path = directory / f"{manifest.name}.json"
            path.write_bytes(manifest_to_json(manifest))
            written.append(path)
    return written
