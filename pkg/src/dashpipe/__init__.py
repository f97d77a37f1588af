"""dashpipe: distributed dash-cam analytics with early stopping and latency accounting."""

__version__ = "0.1.0"
