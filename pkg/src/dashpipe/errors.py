"""Exception hierarchy shared across the pipeline."""


class DashPipeError(Exception):
    """Base class for all errors raised by this package."""


class ProtocolError(DashPipeError):
    """Malformed or out-of-contract wire traffic."""


class ConnectionClosedError(ProtocolError):
    """Stream ended mid-frame or the peer went away with payloads in flight."""


class DownloadError(DashPipeError):
    """Dash-cam source unreachable or a requested video is missing."""


class AnalysisError(DashPipeError):
    """Manifest cannot be analyzed (kind/payload mismatch, invalid frames)."""


class SegmentationError(DashPipeError):
    """Invalid split request (more segments than frames)."""


class MergeError(DashPipeError):
    """Segment result set is incomplete or inconsistent."""


class MetricsError(DashPipeError):
    """Ledger is missing events needed to derive a metric."""


class ConfigError(DashPipeError):
    """Bad configuration file or generation spec."""
