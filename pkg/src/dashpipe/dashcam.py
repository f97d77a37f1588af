"""Dash-cam emulation: catalog service, download client, and the pair loop.

The recording device is emulated as a small HTTP file service over a
preloaded catalog of workload manifests:

    GET /videos         ->  UTF-8 lines "name<SP>kind<SP>sequence\n"
    GET /videos/<name>  ->  raw manifest JSON bytes

The master downloads videos in concurrent outer/inner pairs, oldest first,
spacing pair initiations by the video length. One-second granularity uses the
simulated source (content read locally, completion delayed by a configured
download time); the service source models the enqueue overhead observed
between queuing a download and the transfer actually starting.
"""

from __future__ import annotations

import re
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .errors import DownloadError
from .metrics import MetricsLedger
from .model import VideoKind, WorkloadManifest, manifest_from_json

_PAIR_INDEX_RE = re.compile(r"_(\d+)$")


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    kind: VideoKind
    sequence: int


@dataclass
class DashCamCatalog:
    """Ordered video listing plus manifest bytes, as stored on the dash cam."""

    entries: list[CatalogEntry] = field(default_factory=list)
    contents: dict[str, bytes] = field(default_factory=dict)

    @classmethod
    def from_dir(cls, path: str | Path) -> "DashCamCatalog":
        """Load every manifest in a directory; outer/inner pairs share a pair
        index taken from the trailing _NNNN in the name, outer listed first."""
        directory = Path(path)
        if not directory.is_dir():
            raise DownloadError(f"catalog directory {directory} does not exist")
        records = []
        for file in sorted(directory.glob("*.json")):
            data = file.read_bytes()
            manifest = manifest_from_json(data)
            match = _PAIR_INDEX_RE.search(manifest.name)
            pair_index = int(match.group(1)) if match else 0
            records.append((pair_index, manifest, data))
        records.sort(key=lambda r: (r[0], 0 if r[1].kind is VideoKind.OUTER else 1, r[1].name))
        catalog = cls()
        for sequence, (_, manifest, data) in enumerate(records):
            catalog.entries.append(CatalogEntry(manifest.name, manifest.kind, sequence))
            catalog.contents[manifest.name] = data
        return catalog

    def listing_text(self) -> str:
        return "".join(
            f"{e.name} {e.kind.value} {e.sequence}\n" for e in self.entries
        )


def parse_listing(text: str) -> list[CatalogEntry]:
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(" ")
        if len(parts) != 3:
            raise DownloadError(f"listing line {lineno} malformed: {line!r}")
        try:
            entries.append(CatalogEntry(parts[0], VideoKind(parts[1]), int(parts[2])))
        except ValueError as exc:
            raise DownloadError(f"listing line {lineno}: {exc}") from None
    return entries


@dataclass
class DownloadRecord:
    """Names already fetched this run; grows monotonically."""

    downloaded_names: set[str] = field(default_factory=set)

    def mark(self, name: str) -> None:
        self.downloaded_names.add(name)

    def __contains__(self, name: str) -> bool:
        return name in self.downloaded_names


def new_videos(entries: list[CatalogEntry], record: DownloadRecord) -> list[str]:
    """Catalog names not yet downloaded, oldest first."""
    fresh = [e for e in entries if e.name not in record]
    fresh.sort(key=lambda e: e.sequence)
    return [e.name for e in fresh]


# ---------------------------------------------------------------------------
# Emulated dash-cam file service
# ---------------------------------------------------------------------------

class _DashCamHandler(BaseHTTPRequestHandler):
    catalog: DashCamCatalog

    def do_GET(self):  # noqa: N802 (http.server API)
        if self.path == "/videos":
            body = self.server.catalog.listing_text().encode("utf-8")
            self._reply(200, "text/plain; charset=utf-8", body)
        elif self.path.startswith("/videos/"):
            name = self.path[len("/videos/"):]
            content = self.server.catalog.contents.get(name)
            if content is None:
                self._reply(404, "text/plain", b"no such video\n")
            else:
                self._reply(200, "application/json", content)
        else:
            self._reply(404, "text/plain", b"unknown path\n")

    def _reply(self, status: int, content_type: str, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):  # quiet by default
        pass


class DashCamService:
    """Threaded HTTP server over a catalog; port 0 binds an ephemeral port."""

    def __init__(self, catalog: DashCamCatalog, host: str = "127.0.0.1", port: int = 0):
        self._server = ThreadingHTTPServer((host, port), _DashCamHandler)
        self._server.catalog = catalog
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "DashCamService":
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()


# ---------------------------------------------------------------------------
# Video sources as seen from the master
# ---------------------------------------------------------------------------

class SimulatedSource:
    """Catalog preloaded on the master; completion delayed by a fixed time."""

    def __init__(self, catalog_dir: str | Path, simulated_download_ms: int = 350):
        self._catalog = DashCamCatalog.from_dir(catalog_dir)
        self.simulated_download_ms = simulated_download_ms

    def list_entries(self) -> list[CatalogEntry]:
        return list(self._catalog.entries)

    def fetch(self, name: str) -> bytes:
        content = self._catalog.contents.get(name)
        if content is None:
            raise DownloadError(f"video {name} not in catalog")
        if self.simulated_download_ms > 0:
            time.sleep(self.simulated_download_ms / 1000.0)
        return content


class ServiceSource:
    """Remote dash-cam service; each fetch pays the enqueue overhead first."""

    def __init__(self, url: str, enqueue_overhead_ms: int = 500, timeout_s: float = 10.0):
        self.url = url.rstrip("/")
        self.enqueue_overhead_ms = enqueue_overhead_ms
        self.timeout_s = timeout_s

    def list_entries(self) -> list[CatalogEntry]:
        return parse_listing(self._get("/videos").decode("utf-8"))

    def fetch(self, name: str) -> bytes:
        if self.enqueue_overhead_ms > 0:
            time.sleep(self.enqueue_overhead_ms / 1000.0)
        return self._get(f"/videos/{name}")

    def _get(self, path: str) -> bytes:
        try:
            with urllib.request.urlopen(self.url + path, timeout=self.timeout_s) as response:
                return response.read()
        except urllib.error.HTTPError as exc:
            raise DownloadError(f"dash-cam service returned {exc.code} for {path}") from None
        except (urllib.error.URLError, OSError) as exc:
            raise DownloadError(f"dash-cam service unreachable: {exc}") from None


def list_videos(source) -> list[CatalogEntry]:
    """Catalog listing in recording order."""
    return source.list_entries()


# ---------------------------------------------------------------------------
# Pair downloads
# ---------------------------------------------------------------------------

@dataclass
class PairResult:
    pair_index: int
    outer: WorkloadManifest | None = None
    inner: WorkloadManifest | None = None
    errors: dict[str, str] = field(default_factory=dict)  # name/kind -> reason


def download_pair(
    source,
    outer_name: str | None,
    inner_name: str | None,
    ledger: MetricsLedger,
    node: str,
    pair_index: int = 0,
) -> PairResult:
    """Fetch both pair members concurrently, recording download intervals."""
    result = PairResult(pair_index=pair_index)

    def fetch(name: str, slot: str):
        ledger.record(node, name, "download_start")
        try:
            data = source.fetch(name)
            manifest = manifest_from_json(data)
        except DownloadError as exc:
            result.errors[slot] = str(exc)
            return
        ledger.record(node, name, "download_end")
        setattr(result, slot, manifest)

    with ThreadPoolExecutor(max_workers=2) as pool:
        futures = []
        if outer_name is not None:
            futures.append(pool.submit(fetch, outer_name, "outer"))
        else:
            result.errors["outer"] = "missing pair member"
        if inner_name is not None:
            futures.append(pool.submit(fetch, inner_name, "inner"))
        else:
            result.errors["inner"] = "missing pair member"
        for future in futures:
            future.result()
    return result


def pair_up(entries: list[CatalogEntry]) -> list[tuple[str | None, str | None]]:
    """Group a listing into (outer, inner) name pairs by shared pair index."""
    pairs: dict[int, dict[VideoKind, str]] = {}
    order: list[int] = []
    for entry in sorted(entries, key=lambda e: e.sequence):
        match = _PAIR_INDEX_RE.search(entry.name)
        index = int(match.group(1)) if match else entry.sequence // 2
        if index not in pairs:
            pairs[index] = {}
            order.append(index)
        pairs[index][entry.kind] = entry.name
    return [
        (pairs[i].get(VideoKind.OUTER), pairs[i].get(VideoKind.INNER))
        for i in order
    ]


class DownloadLoop:
    """Paced pair-download driver feeding the master's scheduler.

    Test mode walks a predefined pair list; latest mode re-lists the catalog
    each cycle and downloads whatever has not been seen yet. Successive pair
    initiations are spaced by at least inter_pair_wait_ms; the fetches
    themselves run on background threads so a slow download never delays the
    cadence.
    """

    def __init__(
        self,
        source,
        ledger: MetricsLedger,
        node: str,
        inter_pair_wait_ms: int,
        mode: str = "test",
        pair_count: int | None = None,
        on_pair=None,
    ):
        if mode not in ("test", "latest"):
            raise ValueError(f"unknown download mode {mode!r}")
        self.source = source
        self.ledger = ledger
        self.node = node
        self.inter_pair_wait_ms = inter_pair_wait_ms
        self.mode = mode
        self.pair_count = pair_count
        self.on_pair = on_pair
        self.record = DownloadRecord()
        self._stop = threading.Event()
        self._fetchers: list[threading.Thread] = []

    def stop(self) -> None:
        self._stop.set()

    def run(self) -> int:
        """Blocking loop; returns the number of pairs initiated."""
        initiated = 0
        last_start: float | None = None
        while not self._stop.is_set():
            if self.pair_count is not None and initiated >= self.pair_count:
                break
            pair = self._next_pair()
            if pair is None:
                if self.mode == "test":
                    break
                self._sleep_from(last_start)
                last_start = time.monotonic()
                continue
            self._sleep_from(last_start)
            if self._stop.is_set():
                break
            last_start = time.monotonic()
            outer_name, inner_name = pair
            for name in (outer_name, inner_name):
                if name is not None:
                    self.record.mark(name)
            fetcher = threading.Thread(
                target=self._fetch_pair, args=(outer_name, inner_name, initiated), daemon=True
            )
            fetcher.start()
            self._fetchers.append(fetcher)
            initiated += 1
        for fetcher in self._fetchers:
            fetcher.join()
        return initiated

    def _fetch_pair(self, outer_name, inner_name, pair_index):
        result = download_pair(
            self.source, outer_name, inner_name, self.ledger, self.node, pair_index
        )
        if self.on_pair is not None:
            self.on_pair(result)

    def _sleep_from(self, last_start: float | None) -> None:
        if last_start is None:
            return
        remaining = self.inter_pair_wait_ms / 1000.0 - (time.monotonic() - last_start)
        if remaining > 0:
            self._stop.wait(remaining)

    def _next_pair(self):
        if self.mode == "test":
            if not hasattr(self, "_test_pairs"):
                self._test_pairs = pair_up(self.source.list_entries())
                if self.pair_count is not None:
                    self._test_pairs = self._test_pairs[: self.pair_count]
            if self._test_pairs:
                return self._test_pairs.pop(0)
            return None
        entries = [e for e in self.source.list_entries() if e.name not in self.record]
        fresh = pair_up(entries)
        return fresh[0] if fresh else None
