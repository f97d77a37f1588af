"""TOML configuration for the master, worker, and workload generator.

One file per role. CLI --override key=value pairs (dotted paths) are applied
on top of the parsed document before validation, so experiment matrices can
be scripted without editing files.
"""

from __future__ import annotations

import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .analysis import AnalysisConfig
from .errors import ConfigError
from .master import MasterSettings, SourceSettings
from .model import HardwareInfo
from .worker import WorkerSettings
from .workloads import WorkloadSpec

DEFAULT_HARDWARE = {
    "cpu_freq_mhz": 2000,
    "cpu_cores": 8,
    "total_ram_mb": 8192,
    "avail_ram_mb": 4096,
    "total_storage_mb": 65536,
    "avail_storage_mb": 32768,
    "battery_pct": 100,
}


def _load_toml(path: str | Path) -> dict:
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _coerce(text: str):
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for converter in (int, float):
        try:
            return converter(text)
        except ValueError:
            continue
    return text


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, value = item.split("=", 1)
        node = doc
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {dotted!r} crosses a non-table value")
        node[leaf] = _coerce(value)
    return doc


def _hardware(values: dict | None) -> HardwareInfo:
    merged = {**DEFAULT_HARDWARE, **(values or {})}
    unknown = set(merged) - set(DEFAULT_HARDWARE)
    if unknown:
        raise ConfigError(f"unknown hardware keys: {sorted(unknown)}")
    try:
        return HardwareInfo(**{k: int(v) for k, v in merged.items()})
    except ValueError as exc:
        raise ConfigError(f"bad hardware values: {exc}") from None


def _analysis(values: dict | None) -> AnalysisConfig:
    try:
        return AnalysisConfig.from_dict(values or {})
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad analysis values: {exc}") from None


def load_master_settings(path: str | Path, overrides: list[str] | None = None) -> MasterSettings:
    doc = apply_overrides(_load_toml(path), overrides or [])
    section = doc.get("master", {})
    source = doc.get("source", {})
    try:
        settings = MasterSettings(
            name=str(section.get("name", "master")),
            listen_host=str(section.get("listen_host", "127.0.0.1")),
            listen_port=int(section.get("listen_port", 0)),
            expected_workers=int(section.get("expected_workers", 0)),
            pair_count=int(section.get("pair_count", 1)),
            inter_pair_wait_ms=int(section.get("inter_pair_wait_ms", 1000)),
            segmentation=bool(section.get("segmentation", False)),
            segment_count=int(section.get("segment_count", 2)),
            download_mode=str(section.get("download_mode", "test")),
            results_dir=str(section.get("results_dir", "results")),
            report_dir=str(section.get("report_dir", "report")),
            connect_timeout_s=float(section.get("connect_timeout_s", 30.0)),
            run_timeout_s=(
                float(section["run_timeout_s"]) if "run_timeout_s" in section else None
            ),
            source=SourceSettings(
                mode=str(source.get("mode", "simulated")),
                catalog_dir=str(source.get("catalog_dir", "catalog")),
                url=str(source.get("url", "")),
                simulated_download_ms=int(source.get("simulated_download_ms", 350)),
                enqueue_overhead_ms=int(source.get("enqueue_overhead_ms", 500)),
            ),
            analysis=_analysis(doc.get("analysis")),
            hw=_hardware(doc.get("hardware")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if settings.pair_count < 1:
        raise ConfigError("pair_count must be >= 1")
    if settings.download_mode not in ("test", "latest"):
        raise ConfigError(f"unknown download_mode {settings.download_mode!r}")
    if settings.source.mode not in ("simulated", "service"):
        raise ConfigError(f"unknown source mode {settings.source.mode!r}")
    if settings.source.mode == "service" and not settings.source.url:
        raise ConfigError("service source requires source.url")
    return settings


def load_worker_settings(path: str | Path, overrides: list[str] | None = None) -> WorkerSettings:
    doc = apply_overrides(_load_toml(path), overrides or [])
    section = doc.get("worker", {})
    try:
        return WorkerSettings(
            name=str(section.get("name", "worker")),
            master_host=str(section.get("master_host", "127.0.0.1")),
            master_port=int(section["master_port"]),
            connect_timeout_s=float(section.get("connect_timeout_s", 30.0)),
            event_log=section.get("event_log"),
            analysis=_analysis(doc.get("analysis")),
            hw=_hardware(doc.get("hardware")),
        )
    except KeyError:
        raise ConfigError(f"{path}: worker.master_port is required") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_workload_spec(path: str | Path, overrides: list[str] | None = None) -> WorkloadSpec:
    doc = apply_overrides(_load_toml(path), overrides or [])
    return WorkloadSpec.from_dict(doc.get("workloads", {}))
