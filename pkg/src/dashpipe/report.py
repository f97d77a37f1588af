"""Aggregation of metrics CSVs into per-node summary tables."""

from __future__ import annotations

from pathlib import Path

from .errors import MetricsError
from .metrics import parse_csv_rows

_COMPONENT_KEYS = (
    "download_ms",
    "transfer_ms",
    "return_ms",
    "processing_ms",
    "wait_ms",
    "overhead_ms",
    "turnaround_ms",
)


def aggregate_rows(rows: list[dict], granularity_ms: int | None = None) -> dict:
    per_node: dict[str, dict] = {}
    for row in rows:
        node = per_node.setdefault(
            row["node"],
            {
                "role": row["role"],
                "videos": 0,
                "frames_total": 0,
                "frames_skipped": 0,
                "_sums": {key: [0, 0] for key in _COMPONENT_KEYS},
            },
        )
        node["videos"] += 1
        node["frames_total"] += row["frames_total"]
        node["frames_skipped"] += row["frames_skipped"]
        for key in _COMPONENT_KEYS:
            value = row[key]
            if value is not None:
                node["_sums"][key][0] += value
                node["_sums"][key][1] += 1
    for node in per_node.values():
        sums = node.pop("_sums")
        for key, (total, count) in sums.items():
            node[f"avg_{key}"] = total / count if count else None
        node["skip_rate"] = (
            node["frames_skipped"] / node["frames_total"] if node["frames_total"] else 0.0
        )

    total_frames = sum(r["frames_total"] for r in rows)
    skipped = sum(r["frames_skipped"] for r in rows)
    turnarounds = [r["turnaround_ms"] for r in rows]
    summary = {
        "per_node": per_node,
        "videos": len(rows),
        "skip_rate": skipped / total_frames if total_frames else 0.0,
        "avg_turnaround_ms": sum(turnarounds) / len(turnarounds) if turnarounds else 0.0,
        "near_real_time_fraction": None,
    }
    if granularity_ms is not None:
        summary["near_real_time_fraction"] = (
            sum(1 for t in turnarounds if t < granularity_ms) / len(turnarounds)
            if turnarounds
            else 0.0
        )
    return summary


def aggregate_files(paths: list[str], granularity_ms: int | None = None) -> dict:
    rows: list[dict] = []
    for path in paths:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise MetricsError(f"cannot read {path}: {exc}") from None
        rows.extend(parse_csv_rows(text, source=str(path)))
    return aggregate_rows(rows, granularity_ms=granularity_ms)


def render_table(summary: dict) -> str:
    headers = (
        "node", "role", "videos", "download", "transfer", "return",
        "processing", "wait", "overhead", "turnaround", "skip rate",
    )
    lines = ["  ".join(f"{h:>11}" for h in headers)]
    for name, node in sorted(summary["per_node"].items()):
        cells = [
            name,
            node["role"],
            str(node["videos"]),
            _fmt(node["avg_download_ms"]),
            _fmt(node["avg_transfer_ms"]),
            _fmt(node["avg_return_ms"]),
            _fmt(node["avg_processing_ms"]),
            _fmt(node["avg_wait_ms"]),
            _fmt(node["avg_overhead_ms"]),
            _fmt(node["avg_turnaround_ms"]),
            f"{node['skip_rate'] * 100:.1f}%",
        ]
        lines.append("  ".join(f"{c:>11}" for c in cells))
    lines.append(
        f"overall: {summary['videos']} rows, "
        f"avg turnaround {summary['avg_turnaround_ms']:.0f} ms, "
        f"skip rate {summary['skip_rate'] * 100:.1f}%, "
        f"near-real-time "
        + (
            f"{summary['near_real_time_fraction'] * 100:.1f}%"
            if summary["near_real_time_fraction"] is not None
            else "n/a (pass --granularity-ms)"
        )
    )
    return "\n".join(lines)


def _fmt(value) -> str:
    return f"{value:.0f}" if value is not None else "n/a"
