"""Shared fixture builders for the test suite."""

from __future__ import annotations

import random

from dashpipe.model import (
    FrameRecord,
    HardwareInfo,
    RawDetection,
    RawKeypoint,
    KEYPOINT_PARTS,
    VideoKind,
    WorkloadManifest,
)

# Hardware profiles mirroring the evaluated handsets: headline cluster
# frequency, core count, and RAM distinguish the low/medium/high tiers.
PIXEL3 = HardwareInfo(2500, 8, 4096, 2048, 65536, 32768, 90)
PIXEL6 = HardwareInfo(2800, 8, 8192, 4096, 131072, 65536, 90)
ONEPLUS8 = HardwareInfo(2840, 8, 8192, 4096, 131072, 65536, 90)
FINDX2PRO = HardwareInfo(2840, 8, 12288, 6144, 262144, 131072, 90)


def make_outer_manifest(
    name: str = "out_0000",
    frame_count: int = 30,
    duration_ms: int = 1000,
    fps: int = 30,
    width: int = 1280,
    height: int = 720,
    rng: random.Random | None = None,
) -> WorkloadManifest:
    rng = rng or random.Random(0)
    frames = []
    for i in range(frame_count):
        detections = []
        for _ in range(rng.randint(0, 4)):
            left = rng.randint(0, width - 40)
            top = rng.randint(0, height - 40)
            detections.append(
                RawDetection(
                    category=rng.choice(["car", "person", "truck", "dog", "bicycle"]),
                    score=round(rng.uniform(0.2, 1.0), 4),
                    bbox=(left, top, left + rng.randint(20, 400), top + rng.randint(20, 300)),
                )
            )
        frames.append(FrameRecord(index=i, detections=tuple(
            d.clamped(width, height) for d in detections
        )))
    return WorkloadManifest(
        name=name,
        kind=VideoKind.OUTER,
        duration_ms=duration_ms,
        fps=fps,
        width=width,
        height=height,
        frames=tuple(frames),
    ).validate()


def make_inner_manifest(
    name: str = "in_0000",
    frame_count: int = 30,
    duration_ms: int = 1000,
    fps: int = 30,
    width: int = 1280,
    height: int = 720,
    rng: random.Random | None = None,
) -> WorkloadManifest:
    rng = rng or random.Random(1)
    frames = []
    for i in range(frame_count):
        keypoints = tuple(
            RawKeypoint(
                part=part,
                score=round(rng.uniform(0.0, 1.0), 4),
                x=rng.randint(-50, width + 50),
                y=rng.randint(-50, height + 50),
            )
            for part in rng.sample(KEYPOINT_PARTS, rng.randint(3, len(KEYPOINT_PARTS)))
        )
        frames.append(FrameRecord(index=i, keypoints=keypoints))
    return WorkloadManifest(
        name=name,
        kind=VideoKind.INNER,
        duration_ms=duration_ms,
        fps=fps,
        width=width,
        height=height,
        frames=tuple(frames),
    ).validate()


def make_manifest_pair(index: int, duration_ms: int = 1000, fps: int = 30, seed: int = 0):
    rng = random.Random(seed * 10_000 + index)
    outer = make_outer_manifest(
        name=f"out_{index:04d}",
        frame_count=round(duration_ms / 1000 * fps),
        duration_ms=duration_ms,
        fps=fps,
        rng=rng,
    )
    inner = make_inner_manifest(
        name=f"in_{index:04d}",
        frame_count=round(duration_ms / 1000 * fps),
        duration_ms=duration_ms,
        fps=fps,
        rng=rng,
    )
    return outer, inner
