"""In-process fleet harness shared by runtime and acceptance tests."""

from __future__ import annotations

import json
import threading
import time

from dashpipe.analysis import AnalysisConfig
from dashpipe.master import MasterNode, MasterSettings, SourceSettings
from dashpipe.metrics import parse_csv_rows
from dashpipe.worker import WorkerNode, WorkerSettings
from dashpipe.workloads import WorkloadSpec, generate_catalog
from helpers import FINDX2PRO


def make_catalog(tmp_path, pairs, duration_ms=1000, fps=30, seed=21):
    catalog_dir = tmp_path / "catalog"
    generate_catalog(
        WorkloadSpec(pairs=pairs, duration_ms=duration_ms, fps=fps, seed=seed),
        out_dir=catalog_dir,
    )
    return catalog_dir


def master_settings(tmp_path, catalog_dir, source_kwargs=None, **kwargs):
    source = dict(mode="simulated", catalog_dir=str(catalog_dir), simulated_download_ms=30)
    source.update(source_kwargs or {})
    defaults = dict(
        name="master",
        listen_port=0,
        pair_count=2,
        inter_pair_wait_ms=120,
        results_dir=str(tmp_path / "results"),
        report_dir=str(tmp_path / "report"),
        connect_timeout_s=10.0,
        run_timeout_s=60.0,
        source=SourceSettings(**source),
        analysis=AnalysisConfig(frame_cost_ms=1.0),
        hw=FINDX2PRO,
    )
    defaults.update(kwargs)
    return MasterSettings(**defaults)


class FleetHarness:
    """Master in one thread, workers in others, with exit-code capture."""

    def __init__(self, settings: MasterSettings):
        self.node = MasterNode(settings)
        self.exit_code = None
        self.master_thread = threading.Thread(target=self._run_master, daemon=True)
        self.workers: list[tuple[WorkerNode, threading.Thread]] = []

    def _run_master(self):
        self.exit_code = self.node.run()

    def start(self):
        self.master_thread.start()
        deadline = time.monotonic() + 5
        while self.node.bound_port is None:
            if time.monotonic() > deadline:
                raise RuntimeError("master never bound a port")
            time.sleep(0.01)
        return self

    def add_worker(self, name, hw, analysis=None, connect_timeout_s=10.0):
        settings = WorkerSettings(
            name=name,
            master_host="127.0.0.1",
            master_port=self.node.bound_port,
            hw=hw,
            analysis=analysis or AnalysisConfig(frame_cost_ms=1.0),
            connect_timeout_s=connect_timeout_s,
        )
        worker = WorkerNode(settings)
        thread = threading.Thread(target=worker.run, daemon=True)
        thread.start()
        self.workers.append((worker, thread))
        return worker

    def wait(self, timeout=90.0):
        self.master_thread.join(timeout)
        if self.master_thread.is_alive():
            raise RuntimeError("master did not finish in time")
        for _, thread in self.workers:
            thread.join(10.0)
        return self.exit_code


def read_report(tmp_path):
    report_dir = tmp_path / "report"
    rows = parse_csv_rows((report_dir / "metrics.csv").read_text())
    aggregate = json.loads((report_dir / "aggregate.json").read_text())
    events = [
        json.loads(line)
        for line in (report_dir / "events.jsonl").read_text().splitlines()
        if line
    ]
    return rows, aggregate, events


def assert_accounting_identity(rows):
    for row in rows:
        total = sum(
            v for v in (
                row["download_ms"], row["transfer_ms"], row["return_ms"],
                row["processing_ms"], row["wait_ms"], row["overhead_ms"],
            ) if v is not None
        )
        assert total == row["turnaround_ms"], row
