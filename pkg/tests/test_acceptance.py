"""Acceptance suite: one test per exit criterion, at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to get one PASS line per
criterion on stdout in addition to pytest's own verdict lines.
"""

import json
import random
import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest

from dashpipe.analysis import AnalysisConfig, analyze_video, classify_inner_frame, classify_outer_frame, serialize_result
from dashpipe.model import Command, capacity_score
from dashpipe.protocol import (
    BytePayload,
    CommandMessage,
    EventRecord,
    FilePayload,
    PairingTable,
    decode_byte_payload,
    frame_stream_decode,
    frame_stream_encode,
)
from dashpipe.scheduler import DeviceState, schedule_pair
from dashpipe.segmenter import merge_results, segment_offsets, split_video
from dashpipe.workloads import WorkloadSpec, generate_catalog
from fleet import (
    FleetHarness,
    assert_accounting_identity,
    make_catalog,
    master_settings,
    read_report,
)
from helpers import (
    FINDX2PRO,
    ONEPLUS8,
    PIXEL3,
    PIXEL6,
    make_inner_manifest,
    make_outer_manifest,
)
from test_analysis import GOLDEN, golden_frame
from test_scheduler import oracle_schedule, random_fleet, targets


def _pass(criterion: str) -> None:
    print(f"ACCEPTANCE PASS: {criterion}")


class TestAccountingIdentity:
    """download+transfer+return+processing+wait+overhead = turnaround, exactly,
    for every completed video, across three fleet configurations."""

    def _run_fleet(self, tmp_path, workers, segmentation):
        catalog_dir = make_catalog(tmp_path, pairs=2)
        harness = FleetHarness(
            master_settings(
                tmp_path, catalog_dir, pair_count=2,
                expected_workers=len(workers), segmentation=segmentation,
            )
        ).start()
        for name, hw in workers:
            harness.add_worker(name, hw)
        assert harness.wait() == 0
        rows, _, _ = read_report(tmp_path)
        assert rows
        assert_accounting_identity(rows)
        return rows

    def test_identity_across_three_fleet_configs(self, tmp_path):
        self._run_fleet(tmp_path / "solo", workers=[], segmentation=False)
        self._run_fleet(tmp_path / "duo", workers=[("w-p6", PIXEL6)], segmentation=False)
        self._run_fleet(
            tmp_path / "trio",
            workers=[("w-op8", ONEPLUS8), ("w-p6", PIXEL6)],
            segmentation=True,
        )
        _pass("accounting identity holds exactly on 3 fleet configs")


class TestEarlyStopBudget:
    def test_esd_2_8_thirty_frames(self):
        manifest = make_outer_manifest(frame_count=30, duration_ms=1000, fps=30)
        cfg = AnalysisConfig(esd=2.8, frame_cost_ms=30.0)
        started = time.monotonic()
        result, stats = analyze_video(manifest, cfg)
        elapsed = time.monotonic() - started
        assert stats.processed_frames == 12
        assert stats.skipped_frames == 18
        assert stats.skipped_frames / len(manifest.frames) == pytest.approx(0.60)
        assert elapsed * 1000 <= 1000 / 2.8 + 30 + 50  # budget + frame cost + slack
        assert elapsed < 1.0
        _pass("early-stop budget: 12 frames processed, 60% skip, loop within budget+slack")


class TestMonotonicity:
    def test_skips_non_decreasing_over_esd_grid(self):
        manifest = make_inner_manifest(frame_count=30, duration_ms=1000, fps=30)
        cfg_grid = [0, 1, 2, 2.8, 4, 6]
        skipped = []
        for esd in cfg_grid:
            _, stats = analyze_video(manifest, AnalysisConfig(esd=esd, frame_cost_ms=30.0))
            skipped.append(stats.skipped_frames)
        assert skipped == sorted(skipped), dict(zip(cfg_grid, skipped))
        assert skipped[0] == 0
        _pass(f"monotonicity: skips {skipped} non-decreasing over esd {cfg_grid}")


class TestMergeSplitOracle:
    def test_fifty_random_manifests(self):
        rng = random.Random(2024)
        cfg = AnalysisConfig(esd=0.0)
        started = time.monotonic()
        checked = 0
        for i in range(50):
            frames = rng.randint(10, 120)
            fps = rng.choice([25, 30, 60])
            duration = round(frames / fps * 1000)
            if rng.random() < 0.5:
                manifest = make_outer_manifest(
                    name=f"out_{i:03d}", frame_count=frames, duration_ms=duration,
                    fps=fps, rng=rng,
                )
            else:
                manifest = make_inner_manifest(
                    name=f"in_{i:03d}", frame_count=frames, duration_ms=duration,
                    fps=fps, rng=rng,
                )
            whole, _ = analyze_video(manifest, cfg)
            whole_bytes = serialize_result(whole)
            for count in (2, 3, 5):
                segments = split_video(manifest, count)
                parts = [analyze_video(s, cfg)[0] for s in segments]
                merged = merge_results(parts, manifest.name, segment_offsets(segments))
                assert serialize_result(merged) == whole_bytes, (manifest.name, count)
                checked += 1
        elapsed = time.monotonic() - started
        assert elapsed < 10.0
        _pass(f"merge-split oracle: {checked} split/merge runs field-identical in {elapsed:.1f}s")


class TestProtocolInterleaving:
    def _streams(self):
        contents = {1: b"alpha" * 211, 2: b"", 3: b"gamma" * 1511}
        filenames = {1: "out_0001.json", 2: "in_0001_0.json", 3: "in_0001_1.json"}
        streams = {}
        for payload_id, body in contents.items():
            items = [("byte", f"ANALYSE:{payload_id}:{filenames[payload_id]}".encode())]
            items += [
                ("chunk", (payload_id, body[i:i + 256]))
                for i in range(0, len(body), 256)
            ]
            items += [("end", payload_id)]
            streams[payload_id] = items
        return streams

    def _run(self, arrivals):
        table = PairingTable()
        emitted = []
        for kind, payload in arrivals:
            if kind == "byte":
                ready = table.on_byte_payload(decode_byte_payload(payload))
            elif kind == "chunk":
                table.on_file_chunk(*payload)
                ready = None
            else:
                ready = table.on_file_end(payload)
            if ready is not None:
                emitted.append(ready)
        return sorted(emitted, key=lambda r: r.payload_id)

    def test_two_hundred_randomized_arrival_orders(self):
        started = time.monotonic()
        baseline = self._run(
            [item for pid in (1, 2, 3) for item in self._streams()[pid]]
        )
        assert [r.payload_id for r in baseline] == [1, 2, 3]
        rng = random.Random(77)
        for _ in range(200):
            streams = self._streams()
            pending = list(streams.values())
            order = []
            while any(pending):
                stream = rng.choice([s for s in pending if s])
                order.append(stream.pop(0))
            assert self._run(order) == baseline
        elapsed = time.monotonic() - started
        assert elapsed < 10.0
        _pass(f"protocol interleaving: 200 arrival orders equal the in-order baseline ({elapsed:.1f}s)")

    def test_framing_round_trips_including_empty_files(self):
        rng = random.Random(13)
        for _ in range(40):
            events = []
            next_id = 1
            for _ in range(rng.randint(0, 10)):
                choice = rng.randrange(3)
                if choice == 0:
                    events.append(
                        BytePayload(bytes(rng.randrange(256) for _ in range(rng.randint(0, 64))))
                    )
                elif choice == 1:
                    size = rng.choice([0, 1, 100, 5_000, 70 * 1024])
                    events.append(
                        FilePayload(next_id, bytes(rng.randrange(256) for _ in range(size)))
                    )
                    next_id += 1
                else:
                    events.append(EventRecord(b'{"t_ms": 0}'))
            chunk_size = rng.choice([64, 1024, 32 * 1024])
            assert frame_stream_decode(frame_stream_encode(events, chunk_size)) == events
        _pass("framing round-trips random event sequences including 0-byte files")


class TestSchedulerConformance:
    def test_four_decision_branches_on_fixture_fleets(self):
        def master(hw, **kw):
            return DeviceState(name="master", hw=hw, endpoint_id=None, **kw)

        def worker(hw, name, **kw):
            return DeviceState(name=name, hw=hw, endpoint_id=f"ep-{name}", **kw)

        # branch 1: master alone processes everything itself
        got = targets(schedule_pair([master(PIXEL6)], "out", "in", False))
        assert got == {"out": "master", "in": "master"}

        # branch 2: one worker; the stronger device takes the outer video
        got = targets(
            schedule_pair([master(FINDX2PRO), worker(PIXEL6, "w-p6")], "out", "in", False)
        )
        assert got == {"out": "master", "in": "w-p6"}
        got = targets(
            schedule_pair([master(PIXEL3), worker(ONEPLUS8, "w-op8")], "out", "in", False)
        )
        assert got == {"out": "w-op8", "in": "master"}

        # branch 3: two workers, no segmentation; idle-best placement
        got = targets(
            schedule_pair(
                [master(FINDX2PRO), worker(PIXEL6, "w-p6"), worker(ONEPLUS8, "w-op8")],
                "out", "in", False,
            )
        )
        assert got == {"out": "master", "in": "w-op8"}
        # ... and queueing once everyone is occupied
        got = targets(
            schedule_pair(
                [
                    master(FINDX2PRO, busy=True, queue_len=1),
                    worker(PIXEL6, "w-p6", busy=True, queue_len=2),
                    worker(ONEPLUS8, "w-op8", busy=True, queue_len=1),
                ],
                "out", "in", False,
            )
        )
        assert got == {"out": "w-op8", "in": "w-op8"}

        # branch 4: two workers with segmentation; outer to the strongest,
        # segments to the two strongest remaining devices
        result = schedule_pair(
            [master(FINDX2PRO), worker(PIXEL6, "w-p6"), worker(ONEPLUS8, "w-op8")],
            "out", "in", True,
        )
        assert targets(result) == {"out": "master", "in_0": "w-op8", "in_1": "w-p6"}
        assert [a.command for a in result] == [Command.ANALYSE, Command.SEGMENT, Command.SEGMENT]
        assert len(result) == 1 + 2
        _pass("scheduler: all four decision branches match on hardware-profile fixtures")

    def test_thousand_randomized_tables(self):
        rng = random.Random(31337)
        for _ in range(1000):
            fleet = random_fleet(rng)
            got = targets(schedule_pair(fleet, "out", "in", False))
            assert got == oracle_schedule(fleet, "out", "in")
            by_name = {d.name: d for d in fleet}
            assert capacity_score(by_name[got["out"]].hw) >= capacity_score(by_name[got["in"]].hw)
        _pass("scheduler: outer-priority invariant and rule oracle over 1000 random tables")


class TestEndToEndNearRealTime:
    """Master + 2 workers over loopback as separate processes, 20 one-second
    pairs, simulated download 350 ms, frame cost 5 ms, esd 0."""

    def test_twenty_pairs_near_real_time(self, tmp_path):
        port = _free_port()
        catalog_dir = tmp_path / "catalog"
        generate_catalog(
            WorkloadSpec(pairs=20, duration_ms=1000, fps=30, seed=42), out_dir=catalog_dir
        )
        results_dir = tmp_path / "results"
        report_dir = tmp_path / "report"
        master_toml = tmp_path / "master.toml"
        master_toml.write_text(
            f"""
[master]
name = "master"
listen_port = {port}
expected_workers = 2
pair_count = 20
inter_pair_wait_ms = 1000
segmentation = true
results_dir = "{results_dir}"
report_dir = "{report_dir}"
run_timeout_s = 120.0

[source]
mode = "simulated"
catalog_dir = "{catalog_dir}"
simulated_download_ms = 350

[analysis]
esd = 0.0
frame_cost_ms = 5.0

[hardware]
cpu_freq_mhz = 2840
cpu_cores = 8
total_ram_mb = 12288
avail_ram_mb = 6144
total_storage_mb = 262144
avail_storage_mb = 131072
battery_pct = 90
"""
        )
        worker_tomls = []
        for name, freq, ram in (("w-op8", 2840, 8192), ("w-p6", 2800, 8192)):
            path = tmp_path / f"{name}.toml"
            path.write_text(
                f"""
[worker]
name = "{name}"
master_host = "127.0.0.1"
master_port = {port}

[analysis]
esd = 0.0
frame_cost_ms = 5.0

[hardware]
cpu_freq_mhz = {freq}
cpu_cores = 8
total_ram_mb = {ram}
avail_ram_mb = 4096
total_storage_mb = 131072
avail_storage_mb = 65536
battery_pct = 90
"""
            )
            worker_tomls.append(path)

        started = time.monotonic()
        master_proc = subprocess.Popen(
            [sys.executable, "-m", "dashpipe", "master", "--config", str(master_toml)]
        )
        worker_procs = [
            subprocess.Popen([sys.executable, "-m", "dashpipe", "worker", "--config", str(p)])
            for p in worker_tomls
        ]
        try:
            assert master_proc.wait(timeout=110) == 0
        finally:
            for proc in worker_procs:
                try:
                    proc.wait(timeout=15)
                except subprocess.TimeoutExpired:
                    proc.kill()
            if master_proc.poll() is None:
                master_proc.kill()
        elapsed = time.monotonic() - started

        outer_results = sorted(p.name for p in results_dir.glob("out_*.json"))
        inner_results = sorted(p.name for p in results_dir.glob("in_*.json"))
        assert len(outer_results) == 20
        assert inner_results == [f"in_{i:04d}.json" for i in range(20)]  # merged names only

        rows, aggregate, _ = read_report(tmp_path)
        assert_accounting_identity(rows)
        assert aggregate["near_real_time_fraction"] == 1.0
        assert all(row["turnaround_ms"] < 1000 for row in rows)
        outer_rows = [row for row in rows if row["kind"] == "outer"]
        assert len(outer_rows) == 20
        assert all(row["node"] == "master" for row in outer_rows)
        segment_rows = [row for row in rows if row["kind"] == "inner"]
        assert len(segment_rows) == 40  # two segments per pair
        assert all(row["node"] in ("w-op8", "w-p6") for row in segment_rows)
        assert aggregate["skip_rate"] == 0.0
        _pass(
            "end-to-end: 20 outer + 20 merged inner results, 100% near-real-time, "
            f"master kept all outer videos ({elapsed:.0f}s wall)"
        )


class TestClassifierRules:
    def test_golden_frame_suite(self):
        assert len(GOLDEN) == 12
        for case in GOLDEN:
            frame = golden_frame(case)
            if case["kind"] == "outer":
                result = classify_outer_frame(frame, AnalysisConfig(), case["width"], case["height"])
                assert [d.danger for d in result.detections] == case["expected_danger"], case["id"]
            else:
                result = classify_inner_frame(frame, AnalysisConfig(), case["width"], case["height"])
                assert result.distracted is case["expected_distracted"], case["id"]
        _pass("classifier rules: 12 golden frames match hand-evaluated flags")


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]
