"""Delay bounds for FIFO networks with token-bucket flows and rate-latency servers."""

__version__ = "0.1.0"
