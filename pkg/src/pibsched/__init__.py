"""Prioritized information-bottleneck camera scheduling: simulation and analysis toolkit."""

__version__ = "0.1.0"
