"""Online versus replay-buffer estimators of the average reward.

Both use the 1/t step. The online estimator tracks the last reward; the
RB estimator tracks the mean of a uniform batch of ``min(K, fill)`` rewards
drawn from a FIFO buffer of size N.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import PreconditionError
from .markov_env import MarkovChain, _rng, sample_path
from .replay_core import batch_uniform_count
from .seeding import env_stream, sampler_stream


@dataclass(frozen=True)
class EstimatorTrace:
    eta: np.ndarray
    method: str
    n: int | None = None
    k: int | None = None
    seed: int | None = None
    chain_descriptor: str = ""

    def __post_init__(self):
        if not np.all(np.isfinite(self.eta)):
            raise ValueError("estimator trace contains non-finite values")

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, len(self.eta) + 1)

    def __len__(self) -> int:
        return len(self.eta)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "eta"])
            for t, v in zip(self.times, self.eta):
                writer.writerow([int(t), repr(float(v))])


@dataclass(frozen=True)
class VarianceCurve:
    variance: np.ndarray
    num_seeds: int
    method: str
    n: int | None = None
    k: int | None = None
    extras: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, len(self.variance) + 1)

    def window_mean(self, t0: int, t1: int) -> float:
        """Mean variance over 1-based times ``t0..t1`` inclusive."""
        return float(self.variance[t0 - 1:t1].mean())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "variance", "num_seeds"])
            for t, v in zip(self.times, self.variance):
                writer.writerow([int(t), repr(float(v)), self.num_seeds])


def run_online(path, eta0: float = 0.0) -> EstimatorTrace:
    rewards = np.ascontiguousarray(path, dtype=float)
    if rewards.size == 0:
        raise PreconditionError("reward path is empty")
    return EstimatorTrace(_kernels.online_estimator(rewards, float(eta0)), "online")


def run_rb(chain_path, n: int, k: int, eta0: float = 0.0, seed=None) -> EstimatorTrace:
    """Replay-buffer estimator over a reward path; ``seed`` drives only the batches."""
    if n < 1 or not 1 <= k <= n:
        raise PreconditionError(f"need n >= 1 and 1 <= k <= n, got n={n}, k={k}")
    rewards = np.ascontiguousarray(chain_path, dtype=float)
    if rewards.size == 0:
        raise PreconditionError("reward path is empty")
    u = _rng(seed).random(batch_uniform_count(len(rewards), n, k))
    eta = _kernels.rb_estimator(rewards, int(n), int(k), float(eta0), u)
    return EstimatorTrace(eta, "rb", n, k, seed if isinstance(seed, int) else None)


def simulate_traces(chain: MarkovChain, method: str, horizon: int, num_seeds: int, base_seed: int,
                    n: int | None = None, k: int | None = None, eta0: float = 0.0,
                    initial_state: int | None = None, experiment: int = 0, grid_index: int = 0,
                    seed_offset: int = 0) -> np.ndarray:
    """Estimator traces for seeds ``seed_offset .. seed_offset + num_seeds - 1`` (rows).

    The environment path of seed ``i`` comes from ``env_stream(base_seed, i)``
    and is shared by every method and grid point (common random numbers);
    the batch stream is unique per (experiment, grid point, seed).
    """
    if method not in ("online", "rb"):
        raise PreconditionError(f"unknown method {method!r}")
    out = np.empty((num_seeds, horizon))
    for row in range(num_seeds):
        i = seed_offset + row
        _, rewards = sample_path(chain, horizon, env_stream(base_seed, i), initial_state)
        if method == "online":
            out[row] = run_online(rewards, eta0).eta
        else:
            out[row] = run_rb(rewards, n, k, eta0, sampler_stream(base_seed, experiment, grid_index, i)).eta
    return out


def variance_from_traces(traces: np.ndarray) -> np.ndarray:
    return traces.var(axis=0, ddof=1)


def variance_across_seeds(chain: MarkovChain, method: str, horizon: int, num_seeds: int, base_seed: int,
                          n: int | None = None, k: int | None = None, eta0: float = 0.0,
                          initial_state: int | None = None, experiment: int = 0,
                          grid_index: int = 0) -> VarianceCurve:
    if num_seeds < 2:
        raise PreconditionError("need at least two seeds for a variance")
    traces = simulate_traces(chain, method, horizon, num_seeds, base_seed, n, k, eta0, initial_state,
                             experiment, grid_index)
    return VarianceCurve(variance_from_traces(traces), num_seeds, method, n, k)


def smoothness_metric(trace, window: tuple[int, int]) -> float:
    """Mean squared successive difference ``(1/(t1-t0)) sum_{t=t0}^{t1-1} (eta_{t+1} - eta_t)^2``.

    Times are 1-based; accepts an :class:`EstimatorTrace` or a plain array.
    """
    eta = trace.eta if isinstance(trace, EstimatorTrace) else np.asarray(trace, dtype=float)
    t0, t1 = window
    if not 1 <= t0 < t1 <= len(eta):
        raise PreconditionError(f"window {window} outside 1..{len(eta)}")
    seg = eta[t0 - 1:t1]
    return float(np.sum(np.diff(seg) ** 2) / (t1 - t0))


def smoothness_of_traces(traces: np.ndarray, window: tuple[int, int]) -> np.ndarray:
    """Per-row smoothness metric of a (seeds x T) trace matrix."""
    t0, t1 = window
    if not 1 <= t0 < t1 <= traces.shape[1]:
        raise PreconditionError(f"window {window} outside 1..{traces.shape[1]}")
    seg = traces[:, t0 - 1:t1]
    return np.sum(np.diff(seg, axis=1) ** 2, axis=1) / (t1 - t0)
