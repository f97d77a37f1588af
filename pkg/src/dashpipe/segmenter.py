"""Splitting a workload into equal segments and merging segment results.

Segments are named "<video>_<i>" with i counting from 0, frames are
re-indexed from 0 within each segment, and the global start index rides in
origin_frame_offset so merging never depends on parsing names for positions.
"""

from __future__ import annotations

from dataclasses import replace

from .analysis import shift_frame_index
from .errors import MergeError, SegmentationError
from .model import ResultFile, WorkloadManifest


def segment_name(parent: str, index: int) -> str:
    return f"{parent}_{index}"


def split_video(manifest: WorkloadManifest, count: int) -> list[WorkloadManifest]:
    """Partition frames contiguously into `count` segments.

    The first (frames mod count) segments receive one extra frame. Durations
    are split proportionally to frame counts via cumulative rounding so the
    segment durations always sum to the original duration.
    """
    total = len(manifest.frames)
    if count < 1:
        raise SegmentationError(f"segment count {count} must be >= 1")
    if count > total:
        raise SegmentationError(
            f"cannot split {total} frames of {manifest.name} into {count} segments"
        )
    base, extra = divmod(total, count)
    segments = []
    start = 0
    boundary_ms = 0
    for i in range(count):
        size = base + (1 if i < extra else 0)
        end = start + size
        next_boundary_ms = round(manifest.duration_ms * end / total)
        frames = tuple(
            replace(frame, index=j) for j, frame in enumerate(manifest.frames[start:end])
        )
        segments.append(
            WorkloadManifest(
                name=segment_name(manifest.name, i),
                kind=manifest.kind,
                duration_ms=next_boundary_ms - boundary_ms,
                fps=manifest.fps,
                width=manifest.width,
                height=manifest.height,
                frames=frames,
                origin_frame_offset=manifest.origin_frame_offset + start,
            ).validate()
        )
        start = end
        boundary_ms = next_boundary_ms
    return segments


def merge_results(
    parts: list[ResultFile], original_name: str, offsets: dict[str, int]
) -> ResultFile:
    """Combine segment results into one result named after the original video.

    `offsets` maps each segment name to its origin_frame_offset (taken from
    the split manifests); local frame indices are shifted by it. Parts must
    form a complete contiguous suffix set _0.._{n-1} of the original name.
    """
    if not parts:
        raise MergeError(f"no segment results supplied for {original_name}")
    prefix = original_name + "_"
    indexed: dict[int, ResultFile] = {}
    for part in parts:
        if not part.name.startswith(prefix):
            raise MergeError(f"{part.name} is not a segment of {original_name}")
        suffix = part.name[len(prefix):]
        try:
            index = int(suffix)
        except ValueError:
            raise MergeError(f"{part.name} has non-numeric segment suffix {suffix!r}") from None
        if index in indexed:
            raise MergeError(f"duplicate segment suffix {index} for {original_name}")
        indexed[index] = part
    missing = sorted(set(range(len(indexed))) - set(indexed))
    if missing:
        raise MergeError(f"missing segment suffixes for {original_name}: {missing}")
    kinds = {part.kind for part in indexed.values()}
    if len(kinds) != 1:
        raise MergeError(f"segments of {original_name} disagree on video kind")

    entries = []
    for index in sorted(indexed):
        part = indexed[index]
        if part.name not in offsets:
            raise MergeError(f"no frame offset known for segment {part.name}")
        offset = offsets[part.name]
        entries.extend(shift_frame_index(entry, offset) for entry in part.body)
    return ResultFile(name=original_name, kind=kinds.pop(), body=tuple(entries))


def segment_offsets(segments: list[WorkloadManifest]) -> dict[str, int]:
    """Offset map for merge_results, as recorded by split_video."""
    return {segment.name: segment.origin_frame_offset for segment in segments}
