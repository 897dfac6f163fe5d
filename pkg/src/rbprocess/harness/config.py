"""Strict JSON experiment configuration.

Unknown keys are rejected, every missing key takes the per-experiment
default from :data:`DEFAULTS`, and every (N, K) pair of the Cartesian grid
must satisfy ``K <= N``.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass
from pathlib import Path

from ..errors import ConfigurationError

EXPERIMENTS = ("kernel-check", "autocov", "diff-n", "diff-k", "diff-p", "variance", "ac-train", "ac-verify")
VERIFY_EXPERIMENTS = ("kernel-check", "autocov", "ac-verify")

CORE_KEYS = ("experiment", "blocks", "states_per_block", "p_out", "p_out_grid", "block_rewards",
             "n_grid", "k_grid", "horizon", "num_seeds", "base_seed")
EXTRA_KEYS = ("initial_state", "n_max", "max_lag", "mdp", "actor_scale", "stride")

_COMMON = {
    "blocks": 3,
    "states_per_block": 10,
    "p_out": 0.01,
    "p_out_grid": None,
    "block_rewards": [0.0, 1.0, 2.0],
    "horizon": 10_000,
    "num_seeds": 100,
    "base_seed": 0,
    "initial_state": 0,
    "n_max": 7,
    "max_lag": 20,
    "mdp": "improvement",
    "actor_scale": 5.0,
    "stride": 1000,
}

DEFAULTS = {
    "kernel-check": {"n_grid": [], "k_grid": [], "num_seeds": 1},
    # two-state chain with p = q = 0.1, reward = indicator of the second state
    "autocov": {"blocks": 2, "states_per_block": 1, "p_out": 0.1, "block_rewards": [0.0, 1.0],
                "n_grid": [10], "k_grid": [1, 3, 10], "horizon": 200_000, "num_seeds": 1,
                "initial_state": None},
    "diff-k": {"n_grid": [10, 50, 100, 500], "k_grid": [5]},
    "diff-n": {"n_grid": [500], "k_grid": [1, 5, 20, 50]},
    "diff-p": {"n_grid": [500], "k_grid": [5], "p_out_grid": [0.1, 0.01, 0.001]},
    "variance": {"n_grid": [10, 50, 100, 500], "k_grid": [5]},
    "ac-train": {"n_grid": [100], "k_grid": [5], "horizon": 200_000, "num_seeds": 5, "initial_state": None},
    "ac-verify": {"n_grid": [100], "k_grid": [5], "horizon": 200_000, "num_seeds": 20,
                  "initial_state": None},
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    blocks: int
    states_per_block: int
    p_out: float
    p_out_grid: list | None
    block_rewards: list
    n_grid: list
    k_grid: list
    horizon: int
    num_seeds: int
    base_seed: int
    initial_state: int | None
    n_max: int
    max_lag: int
    mdp: str
    actor_scale: float
    stride: int

    def echo(self) -> dict:
        return asdict(self)

    @property
    def p_values(self) -> list:
        return list(self.p_out_grid) if self.p_out_grid else [self.p_out]

    def grid_pairs(self) -> list[tuple[int, int]]:
        return [(n, k) for n in self.n_grid for k in self.k_grid]


def _line_of(text: str, key: str) -> str:
    if not text:
        return ""
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    if not m:
        return ""
    return f" (line {text.count(chr(10), 0, m.start()) + 1})"


def _int(value, key, text, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"{key} must be an integer{_line_of(text, key)}")
    if minimum is not None and value < minimum:
        raise ConfigurationError(f"{key} must be >= {minimum}, got {value}{_line_of(text, key)}")
    return value


def _int_list(value, key, text, minimum=1):
    if not isinstance(value, list):
        raise ConfigurationError(f"{key} must be a list{_line_of(text, key)}")
    return [_int(v, key, text, minimum) for v in value]


def build_config(raw: dict, experiment: str | None = None, text: str = "") -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a JSON object")
    unknown = sorted(set(raw) - set(CORE_KEYS) - set(EXTRA_KEYS))
    if unknown:
        raise ConfigurationError(f"unknown config key(s) {unknown}{_line_of(text, unknown[0])}")
    kind = raw.get("experiment", experiment)
    if kind not in EXPERIMENTS:
        raise ConfigurationError(f"experiment must be one of {EXPERIMENTS}, got {kind!r}{_line_of(text, 'experiment')}")
    if experiment is not None and kind != experiment:
        raise ConfigurationError(f"config is for {kind!r} but subcommand is {experiment!r}")
    if "p_out" in raw and "p_out_grid" in raw:
        raise ConfigurationError("give either p_out or p_out_grid, not both")

    merged = {**_COMMON, **DEFAULTS[kind], **raw, "experiment": kind}
    if "p_out" in raw and kind == "diff-p":
        merged["p_out_grid"] = None

    blocks = _int(merged["blocks"], "blocks", text, 2)
    spb = _int(merged["states_per_block"], "states_per_block", text, 1)
    p_values = merged["p_out_grid"] if merged["p_out_grid"] is not None else [merged["p_out"]]
    if not isinstance(p_values, list) or not p_values:
        raise ConfigurationError(f"p_out_grid must be a nonempty list{_line_of(text, 'p_out_grid')}")
    for p in p_values:
        if isinstance(p, bool) or not isinstance(p, (int, float)) or not 0.0 < p < 1.0:
            raise ConfigurationError(f"p_out values must lie in (0, 1), got {p!r}{_line_of(text, 'p_out')}")
    rewards = merged["block_rewards"]
    if not isinstance(rewards, list) or len(rewards) != blocks:
        raise ConfigurationError(f"block_rewards needs {blocks} entries{_line_of(text, 'block_rewards')}")
    n_grid = _int_list(merged["n_grid"], "n_grid", text)
    k_grid = _int_list(merged["k_grid"], "k_grid", text)
    if kind != "kernel-check" and (not n_grid or not k_grid):
        raise ConfigurationError("n_grid and k_grid must be nonempty")
    for n in n_grid:
        for k in k_grid:
            if k > n:
                raise ConfigurationError(f"grid pair (N={n}, K={k}) has K > N{_line_of(text, 'k_grid')}")
    horizon = _int(merged["horizon"], "horizon", text, 2)
    num_seeds = _int(merged["num_seeds"], "num_seeds", text, 1)
    if kind == "variance" and num_seeds < 2:
        raise ConfigurationError("variance needs num_seeds >= 2")
    base_seed = _int(merged["base_seed"], "base_seed", text, 0)
    initial_state = merged["initial_state"]
    if initial_state is not None:
        _int(initial_state, "initial_state", text, 0)
        if kind not in ("ac-train", "ac-verify") and initial_state >= blocks * spb:
            raise ConfigurationError(f"initial_state {initial_state} out of range{_line_of(text, 'initial_state')}")
    n_max = _int(merged["n_max"], "n_max", text, 1)
    if n_max > 10:
        raise ConfigurationError("n_max is capped at 10")
    max_lag = _int(merged["max_lag"], "max_lag", text, 1)
    mdp = merged["mdp"]
    if not isinstance(mdp, str) or not (mdp == "improvement" or re.fullmatch(r"random:\d+:\d+:\d+", mdp)):
        raise ConfigurationError(f"mdp must be 'improvement' or 'random:S:A:seed', got {mdp!r}")
    actor_scale = merged["actor_scale"]
    if isinstance(actor_scale, bool) or not isinstance(actor_scale, (int, float)) or actor_scale < 0:
        raise ConfigurationError("actor_scale must be a nonnegative number")
    stride = _int(merged["stride"], "stride", text, 1)

    return ExperimentConfig(
        experiment=kind, blocks=blocks, states_per_block=spb,
        p_out=float(merged["p_out"]),
        p_out_grid=[float(p) for p in merged["p_out_grid"]] if merged["p_out_grid"] is not None else None,
        block_rewards=[float(r) for r in rewards], n_grid=n_grid, k_grid=k_grid, horizon=horizon,
        num_seeds=num_seeds, base_seed=base_seed, initial_state=initial_state, n_max=n_max,
        max_lag=max_lag, mdp=mdp, actor_scale=float(actor_scale), stride=stride,
    )


def load_config(path, experiment: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Parse and validate a config file; ``overrides`` (e.g. CLI flags) win over file values."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if isinstance(raw, dict) and overrides:
        raw = {**raw, **overrides}
    return build_config(raw, experiment, text)


def default_config(experiment: str) -> ExperimentConfig:
    return build_config({"experiment": experiment})
