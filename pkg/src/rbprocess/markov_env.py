"""Markov chains, MDPs, the block Markov reward process and path simulation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import ConfigurationError, ErgodicityError

logger = logging.getLogger(__name__)

STOCHASTIC_TOL = 1e-12
LINEAR_SOLVE_MAX_STATES = 200


def _check_stochastic(rows: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(rows)):
        raise ConfigurationError(f"{what} has non-finite entries")
    if np.any(rows < 0.0) or np.any(rows > 1.0):
        raise ConfigurationError(f"{what} has entries outside [0, 1]")
    sums = rows.sum(axis=-1)
    bad = np.abs(sums - 1.0) > STOCHASTIC_TOL
    if np.any(bad):
        where = np.argwhere(bad)[0].tolist()
        raise ConfigurationError(f"{what} row {where} sums to {sums[tuple(where)]!r}, not 1")


@dataclass(frozen=True)
class MarkovChain:
    """Finite Markov reward process: a row-stochastic kernel plus a reward per state."""

    transition: np.ndarray
    state_reward: np.ndarray

    def __post_init__(self):
        p = np.array(self.transition, dtype=float)
        r = np.array(self.state_reward, dtype=float).reshape(-1)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 1:
            raise ConfigurationError(f"transition must be a non-empty square matrix, got shape {p.shape}")
        if r.shape[0] != p.shape[0]:
            raise ConfigurationError("state_reward length must equal num_states")
        if not np.all(np.isfinite(r)):
            raise ConfigurationError("state_reward must be finite")
        _check_stochastic(p, "transition")
        p.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "state_reward", r)

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    def to_text(self) -> str:
        lines = [str(self.num_states)]
        lines += [" ".join(repr(float(x)) for x in row) for row in self.transition]
        lines.append(" ".join(repr(float(x)) for x in self.state_reward))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MarkovChain":
        rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
        try:
            n = int(rows[0][0])
            transition = [[float(x) for x in row] for row in rows[1:n + 1]]
            reward = [float(x) for x in rows[n + 1]]
        except (IndexError, ValueError) as exc:
            raise ConfigurationError(f"malformed chain text: {exc}") from exc
        return cls(np.array(transition), np.array(reward))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "MarkovChain":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class BlockMrpConfig:
    num_blocks: int = 3
    states_per_block: int = 10
    p_out: float = 0.01
    block_rewards: Sequence[float] = (0.0, 1.0, 2.0)

    def __post_init__(self):
        if int(self.num_blocks) != self.num_blocks or self.num_blocks < 2:
            raise ConfigurationError(f"num_blocks must be an integer >= 2, got {self.num_blocks}")
        if int(self.states_per_block) != self.states_per_block or self.states_per_block < 1:
            raise ConfigurationError(f"states_per_block must be a positive integer, got {self.states_per_block}")
        if not 0.0 < self.p_out < 1.0:
            raise ConfigurationError(f"p_out must lie strictly inside (0, 1), got {self.p_out}")
        if len(self.block_rewards) != self.num_blocks:
            raise ConfigurationError("block_rewards needs one entry per block")
        object.__setattr__(self, "block_rewards", tuple(float(x) for x in self.block_rewards))


def build_block_mrp(config: BlockMrpConfig) -> MarkovChain:
    """Block MRP: mass ``1 - p_out`` spread uniformly over the own block (self included),
    mass ``p_out`` spread uniformly over every state of the other blocks."""
    m = config.states_per_block
    num_states = config.num_blocks * m
    block = np.arange(num_states) // m
    same = block[:, None] == block[None, :]
    p = np.where(same, (1.0 - config.p_out) / m, config.p_out / (num_states - m))
    rewards = np.asarray(config.block_rewards)[block]
    return MarkovChain(p, rewards)


@dataclass(frozen=True)
class Mdp:
    """Finite MDP with kernel ``transition[s, a, s']`` and reward ``reward[s, a]``.

    ``bounded_reward`` enforces |r| <= 1; switch it off for worked examples that
    use larger rewards.
    """

    transition: np.ndarray
    reward: np.ndarray
    bounded_reward: bool = True

    def __post_init__(self):
        p = np.array(self.transition, dtype=float)
        r = np.array(self.reward, dtype=float)
        if p.ndim != 3 or p.shape[0] != p.shape[2]:
            raise ConfigurationError(f"transition must have shape (S, A, S), got {p.shape}")
        if r.shape != p.shape[:2]:
            raise ConfigurationError(f"reward must have shape {p.shape[:2]}, got {r.shape}")
        _check_stochastic(p, "transition")
        if not np.all(np.isfinite(r)):
            raise ConfigurationError("reward must be finite")
        if self.bounded_reward and np.any(np.abs(r) > 1.0):
            raise ConfigurationError("rewards must satisfy |r| <= 1")
        p.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "reward", r)

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    def induced_chain(self, action_probs: np.ndarray) -> MarkovChain:
        """Chain under a stationary policy ``action_probs[s, a]``."""
        pi = np.asarray(action_probs, dtype=float)
        p = np.einsum("sa,sat->st", pi, self.transition)
        # re-normalise rounding so the strict row check passes
        p = p / p.sum(axis=1, keepdims=True)
        return MarkovChain(p, np.sum(pi * self.reward, axis=1))

    def to_text(self) -> str:
        s, a = self.num_states, self.num_actions
        lines = [f"{s} {a}"]
        for si in range(s):
            for ai in range(a):
                lines.append(" ".join(repr(float(x)) for x in self.transition[si, ai]))
        for si in range(s):
            lines.append(" ".join(repr(float(x)) for x in self.reward[si]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, bounded_reward: bool = True) -> "Mdp":
        rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
        try:
            s, a = int(rows[0][0]), int(rows[0][1])
            flat = [[float(x) for x in row] for row in rows[1:1 + s * a]]
            reward = [[float(x) for x in row] for row in rows[1 + s * a:1 + s * a + s]]
        except (IndexError, ValueError) as exc:
            raise ConfigurationError(f"malformed MDP text: {exc}") from exc
        return cls(np.array(flat).reshape(s, a, s), np.array(reward), bounded_reward)


@dataclass(frozen=True)
class StationaryDistribution:
    probs: np.ndarray
    residual: float
    method: str = field(default="linear")


def _residual(mu: np.ndarray, p: np.ndarray) -> float:
    return float(np.max(np.abs(mu @ p - mu)))


def stationary_distribution(chain: MarkovChain, tol: float = 1e-10, method: str = "auto",
                            max_iter: int = 200_000) -> StationaryDistribution:
    """Stationary law ``mu`` with ``max|mu P - mu| <= tol``.

    ``method="auto"`` solves the linear system up to 200 states and falls back
    to power iteration above that.
    """
    p = chain.transition
    n = chain.num_states
    if method == "auto":
        method = "linear" if n <= LINEAR_SOLVE_MAX_STATES else "power"
    if method == "linear":
        a = p.T - np.eye(n)
        a[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        try:
            mu = np.linalg.solve(a, b)
        except np.linalg.LinAlgError as exc:
            raise ErgodicityError("stationary system is singular; chain is not irreducible") from exc
        if np.any(mu < -1e-10):
            raise ErgodicityError("stationary solve produced negative mass; chain is not irreducible")
        mu = np.clip(mu, 0.0, None)
    elif method == "power":
        mu = np.full(n, 1.0 / n)
        for _ in range(max_iter):
            nxt = mu @ p
            if np.max(np.abs(nxt - mu)) <= tol * 0.5:
                mu = nxt
                break
            mu = nxt
        else:
            raise ErgodicityError(f"power iteration did not converge in {max_iter} iterations")
    else:
        raise ConfigurationError(f"unknown method {method!r}")
    mu = mu / mu.sum()
    res = _residual(mu, p)
    if res > tol:
        raise ErgodicityError(f"stationary residual {res:.3g} exceeds tolerance {tol:.3g}")
    mu.setflags(write=False)
    return StationaryDistribution(mu, res, method)


def average_reward(chain: MarkovChain) -> float:
    mu = stationary_distribution(chain).probs
    return float(mu @ chain.state_reward)


def spectral_gap(chain: MarkovChain, tol: float = 1e-12, max_iter: int = 10_000,
                 return_info: bool = False):
    """``1 - |lambda_2|`` by power iteration on ``P - 1 mu^T``.

    Deflation removes the unit eigenvalue, leaving the second-largest modulus as
    the dominant one. The modulus is read off two-step norm growth so complex
    conjugate pairs do not make the estimate oscillate. With
    ``return_info=True`` also returns ``(modulus, converged)``.
    """
    mu = stationary_distribution(chain).probs
    n = chain.num_states
    deflated = chain.transition - np.outer(np.ones(n), mu)
    x = np.random.default_rng(0).standard_normal(n)
    x /= np.linalg.norm(x)
    modulus, converged = 0.0, False
    for _ in range(max_iter):
        y = deflated @ (deflated @ x)
        norm = np.linalg.norm(y)
        if norm < 1e-300:
            modulus, converged = 0.0, True
            break
        estimate = np.sqrt(norm)
        x = y / norm
        if abs(estimate - modulus) <= tol * max(1.0, estimate):
            modulus, converged = estimate, True
            break
        modulus = estimate
    if not converged:
        logger.warning("spectral gap power iteration stopped at %d iterations", max_iter)
    modulus = min(modulus, 1.0)
    gap = 1.0 - modulus
    if return_info:
        return gap, modulus, converged
    return gap


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_path(chain: MarkovChain, horizon: int, seed, initial_state: int | None = None):
    """Simulate ``horizon`` steps; returns ``(states, rewards)`` arrays.

    The start is uniform over states unless ``initial_state`` is given. Exactly
    ``horizon`` uniforms are drawn from the generator either way.
    """
    if horizon < 1:
        raise ConfigurationError("horizon must be >= 1")
    if initial_state is not None and not 0 <= initial_state < chain.num_states:
        raise ConfigurationError(f"initial_state {initial_state} out of range")
    u = _rng(seed).random(horizon)
    cdf = np.cumsum(chain.transition, axis=1)
    states = _kernels.simulate_chain(cdf, -1 if initial_state is None else int(initial_state), u)
    return states, chain.state_reward[states]
