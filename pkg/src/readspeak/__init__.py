"""Incremental text-to-speech scheduling: environment, agent, baselines."""

__version__ = "0.1.0"
