"""Second moments of the batch-average process.

Sampling two independent uniform K-batches from a buffer of size N yields a
time offset between one element of each batch whose law is triangular,
``P(d) = (N - |d|) / N**2``, whatever K is. Autocorrelation and
autocovariance of the batch average are therefore the triangular smoothing of
those of the raw process. This module provides the kernel, an exhaustive
enumeration that checks it, the transfer formula, and the empirical
estimators used to validate it on simulated chains.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .errors import CoverageError, PreconditionError, SizeError
from .markov_env import MarkovChain, _rng, sample_path, stationary_distribution

BRUTEFORCE_MAX_N = 10
NUM_BATCH_MEANS = 30


@dataclass(frozen=True)
class TriangularKernel:
    n: int
    weights: dict  # offset d -> Fraction

    def __post_init__(self):
        if sum(self.weights.values()) != 1:
            raise ValueError("kernel weights must sum to 1")

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.n + 1, self.n)

    def as_array(self) -> np.ndarray:
        return np.array([float(self.weights[d]) for d in range(-self.n + 1, self.n)])

    def shifted(self, tau: int) -> dict:
        return {tau + d: w for d, w in self.weights.items()}


def triangular_kernel(n: int) -> TriangularKernel:
    if n < 1:
        raise PreconditionError("n must be >= 1")
    return TriangularKernel(n, {d: Fraction(n - abs(d), n * n) for d in range(-n + 1, n)})


@dataclass(frozen=True)
class TauPrimeDistribution:
    base_lag: int
    probs: dict  # tau' -> Fraction
    enumeration_count: int

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tau_prime", "prob_num", "prob_den"])
            for tp in sorted(self.probs):
                writer.writerow([tp, self.probs[tp].numerator, self.probs[tp].denominator])


def tau_prime_bruteforce(n: int, k: int, tau: int) -> TauPrimeDistribution:
    """Exact law of ``tau + i - j`` over every ordered pair of K-subsets and every
    element ``i`` of the first and ``j`` of the second (positions 1..n)."""
    if n > BRUTEFORCE_MAX_N:
        raise SizeError(f"enumeration is capped at n <= {BRUTEFORCE_MAX_N}, got {n}")
    if not 1 <= k <= n:
        raise PreconditionError(f"need 1 <= k <= n, got k={k}, n={n}")
    subsets = list(combinations(range(1, n + 1), k))
    counts: Counter = Counter()
    for first in subsets:
        for second in subsets:
            for i in first:
                for j in second:
                    counts[tau + i - j] += 1
    total = k * k * comb(n, k) ** 2
    assert sum(counts.values()) == total
    return TauPrimeDistribution(tau, {tp: Fraction(c, total) for tp, c in sorted(counts.items())}, total)


@dataclass(frozen=True)
class LagSeries:
    lags: np.ndarray
    values: np.ndarray
    kind: str = "C"
    standard_errors: np.ndarray | None = None

    def __post_init__(self):
        lags = np.asarray(self.lags, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        if lags.shape != values.shape:
            raise ValueError("lags and values must have the same length")
        if np.any(np.diff(lags) <= 0):
            raise ValueError("lags must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("lag series values must be finite")
        if self.kind not in ("R", "C"):
            raise ValueError("kind must be 'R' or 'C'")
        object.__setattr__(self, "lags", lags)
        object.__setattr__(self, "values", values)
        if self.standard_errors is not None:
            object.__setattr__(self, "standard_errors", np.asarray(self.standard_errors, dtype=float))

    def value_at(self, lag: int) -> float:
        idx = np.searchsorted(self.lags, lag)
        if idx < len(self.lags) and self.lags[idx] == lag:
            return float(self.values[idx])
        raise KeyError(lag)

    def stderr_at(self, lag: int) -> float:
        idx = int(np.searchsorted(self.lags, lag))
        return float(self.standard_errors[idx])

    def to_csv(self, path) -> None:
        se = self.standard_errors if self.standard_errors is not None else [float("nan")] * len(self.lags)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lag", "value", "stderr", "kind"])
            for lag, v, s in zip(self.lags, self.values, se):
                writer.writerow([int(lag), repr(float(v)), repr(float(s)), self.kind])


def predict_second_moment(kernel: TriangularKernel, z_series: LagSeries, tau: int) -> float:
    """Triangular smoothing ``sum_d w(d) z(tau + d)``; negative lags use ``z(-l) = z(l)``."""
    needed = {abs(tau + d) for d in range(-kernel.n + 1, kernel.n)}
    available = set(int(x) for x in z_series.lags)
    missing = needed - available
    if missing:
        raise CoverageError(missing)
    table = dict(zip((int(x) for x in z_series.lags), z_series.values))
    total = 0.0
    for d, w in kernel.weights.items():
        total += float(w) * table[abs(tau + d)]
    return total


def _state_values(chain: MarkovChain, f) -> np.ndarray:
    if callable(f):
        return np.array([float(f(s)) for s in range(chain.num_states)])
    values = np.asarray(f, dtype=float)
    if values.shape != (chain.num_states,):
        raise PreconditionError("f must give one value per state")
    return values


def analytic_autocov_markov(chain: MarkovChain, f, tau: int) -> float:
    """Stationary autocovariance of ``f(X_t)`` at lag ``tau`` from matrix powers."""
    if tau < 0:
        raise PreconditionError("tau must be nonnegative")
    mu = stationary_distribution(chain).probs
    fv = _state_values(chain, f)
    p_tau = np.linalg.matrix_power(chain.transition, tau)
    mean = mu @ fv
    return float((mu * fv) @ (p_tau @ fv) - mean * mean)


def _batch_means_se(products: np.ndarray, num_batches: int = NUM_BATCH_MEANS) -> float:
    """Standard error of the mean of ``products`` from contiguous batch means."""
    usable = len(products) - len(products) % num_batches
    means = products[:usable].reshape(num_batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(num_batches))


def _autocov_from_pairs(pairs_at: Callable[[int], tuple[np.ndarray, np.ndarray]], lags: Sequence[int],
                        mean: float, length: int, kind: str) -> LagSeries:
    values, errors = [], []
    for lag in lags:
        a, b = pairs_at(lag)
        if kind == "C":
            prod = (a - mean) * (b - mean)
        else:
            prod = a * b
        values.append(prod.sum() / length)
        errors.append(_batch_means_se(prod))
    return LagSeries(np.asarray(lags), np.asarray(values), kind, np.asarray(errors))


def empirical_autocov_z(path, lags: Sequence[int], burn_in: int = 0, kind: str = "C") -> LagSeries:
    """Biased (1/T) empirical autocovariance of a sequence after ``burn_in``.

    Standard errors come from 30 contiguous batch means of the lagged products.
    """
    x = np.asarray(path, dtype=float)[burn_in:]
    lags = sorted(int(x_) for x_ in lags)
    if not lags or lags[0] < 0:
        raise PreconditionError("lags must be nonnegative")
    if len(x) <= lags[-1] + NUM_BATCH_MEANS:
        raise PreconditionError(f"sequence of length {len(x)} after burn-in is too short for lag {lags[-1]}")
    length = len(x)
    return _autocov_from_pairs(lambda lag: (x[:length - lag], x[lag:]), lags, x.mean(), length, kind)


def empirical_autocov_y(chain: MarkovChain, f, n: int, k: int, horizon: int, lags: Sequence[int],
                        seed, burn_in: int = 0, kind: str = "C",
                        initial_state: int | None = None) -> LagSeries:
    """Empirical second moments of the batch average ``Y_t``.

    The chain is pushed through a buffer of capacity ``n``. From the first
    step with a full buffer (plus ``burn_in``), each time point gets two
    independent K-batches ``A_t`` and ``B_t``. Lag 0 pairs ``A_t`` with ``B_t``;
    lag ``tau >= 1`` pairs ``A_t`` with ``A_{t+tau}``. Batches at distinct times
    are independent draws either way.
    """
    if not 1 <= k <= n:
        raise PreconditionError(f"need 1 <= k <= n, got k={k}, n={n}")
    lags = sorted(int(x) for x in lags)
    if not lags or lags[0] < 0:
        raise PreconditionError("lags must be nonnegative")
    rng = _rng(seed)
    states, _ = sample_path(chain, horizon, rng, initial_state)
    z = _state_values(chain, f)[states]
    start = n - 1 + burn_in
    count = horizon - start
    if count <= lags[-1] + NUM_BATCH_MEANS:
        raise PreconditionError("horizon too short for the requested lags")
    u = rng.random(2 * k * count)
    ya, yb = _kernels.two_batch_means(z, n, k, start, u)
    mean = ya.mean()

    def pairs(lag):
        if lag == 0:
            return ya, yb
        return ya[:count - lag], ya[lag:]

    return _autocov_from_pairs(pairs, lags, mean, count, kind)


def predicted_series(chain: MarkovChain, f, n: int, lags: Sequence[int]) -> np.ndarray:
    """Transfer formula applied to the exact autocovariance of ``f(X)``."""
    lags = list(lags)
    max_needed = max(lags) + n - 1
    cz = LagSeries(np.arange(max_needed + 1),
                   [analytic_autocov_markov(chain, f, t) for t in range(max_needed + 1)], "C")
    kernel = triangular_kernel(n)
    return np.array([predict_second_moment(kernel, cz, tau) for tau in lags])
