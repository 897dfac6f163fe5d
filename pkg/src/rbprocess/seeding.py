"""Counter-based stream derivation.

Every generator is ``np.random.Generator(PCG64(SeedSequence(base_seed, spawn_key=key)))``
with one of two key shapes:

* environment paths: ``(0, seed_index)``; shared across grid points so that
  configurations are compared on identical chain realisations;
* batch sampling and algorithm runs: ``(1, experiment, grid_index, seed_index)``.

Stream ids are the string renderings of these keys and are what the run
manifest records.
"""

import numpy as np

ENV = 0
SAMPLER = 1

EXPERIMENT_IDS = {
    "library": 0,
    "kernel-check": 1,
    "autocov": 2,
    "diff-n": 3,
    "diff-k": 4,
    "diff-p": 5,
    "variance": 6,
    "ac-train": 7,
    "ac-verify": 8,
}


def _generator(base_seed: int, key: tuple) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(base_seed), spawn_key=key)))


def env_key(seed_index: int) -> tuple:
    return (ENV, int(seed_index))


def sampler_key(experiment: int, grid_index: int, seed_index: int) -> tuple:
    return (SAMPLER, int(experiment), int(grid_index), int(seed_index))


def env_stream(base_seed: int, seed_index: int) -> np.random.Generator:
    return _generator(base_seed, env_key(seed_index))


def sampler_stream(base_seed: int, experiment: int, grid_index: int, seed_index: int) -> np.random.Generator:
    return _generator(base_seed, sampler_key(experiment, grid_index, seed_index))


def stream_id(key: tuple) -> str:
    return "/".join(str(x) for x in key)
