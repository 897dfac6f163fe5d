"""Replay-buffer stochastic processes: buffers, second-moment transfer, estimators and a linear actor-critic."""

__version__ = "0.1.0"
