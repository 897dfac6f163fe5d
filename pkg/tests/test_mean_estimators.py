import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from rbprocess.errors import PreconditionError
from rbprocess.markov_env import BlockMrpConfig, MarkovChain, average_reward, build_block_mrp, sample_path
from rbprocess.mean_estimators import (EstimatorTrace, run_online, run_rb, simulate_traces, smoothness_metric,
                                       smoothness_of_traces, variance_across_seeds)
from rbprocess.replay_core import ReplayBuffer, sample_batch


def test_online_arithmetic():
    assert_allclose(run_online([1.0, 2.0, 3.0], 0.0).eta, [1.0, 1.5, 2.0])


def test_constant_rewards():
    assert_allclose(run_online(np.full(50, 0.3), eta0=7.0).eta, 0.3)
    assert_allclose(run_rb(np.full(50, 0.3), 10, 4, eta0=-2.0, seed=1).eta, 0.3)


def test_rb_reduces_to_online_bitwise():
    rng = np.random.default_rng(0)
    for _ in range(20):
        path = rng.normal(size=200)
        assert_array_equal(run_rb(path, 1, 1, seed=int(rng.integers(1 << 30))).eta, run_online(path).eta)


def _rb_reference(rewards, n, k, eta0, rng):
    # pure-Python replay of the compiled estimator, same uniform stream
    buf = ReplayBuffer(n)
    eta, out = eta0, []
    for t, r in enumerate(rewards, start=1):
        buf.push(r)
        idx = sample_batch(buf, min(k, buf.fill), rng)
        y = sum(buf[p] for p in idx.positions) / idx.k
        eta = eta + (y - eta) / float(t)
        out.append(eta)
    return np.array(out)


@pytest.mark.parametrize("n,k", [(1, 1), (5, 2), (8, 8), (30, 7)])
def test_rb_matches_pure_python_reference(n, k):
    rewards = np.random.default_rng(4).uniform(-1, 1, 300)
    compiled = run_rb(rewards, n, k, 0.0, seed=11).eta
    reference = _rb_reference(rewards, n, k, 0.0, np.random.default_rng(11))
    assert_allclose(compiled, reference, rtol=0, atol=1e-13)


def test_rb_preconditions():
    with pytest.raises(PreconditionError):
        run_rb([1.0], 3, 4)
    with pytest.raises(PreconditionError):
        run_online([])


def test_trace_rejects_non_finite():
    with pytest.raises(ValueError):
        EstimatorTrace(np.array([1.0, np.inf]), "online")


def test_trace_csv(tmp_path):
    path = tmp_path / "t.csv"
    run_online([1.0, 3.0]).to_csv(path)
    assert path.read_text().splitlines() == ["t,eta", "1,1.0", "2,2.0"]


def test_smoothness_metric_examples():
    assert smoothness_metric(np.full(20, 3.0), (1, 20)) == 0.0
    assert smoothness_metric(0.5 * np.arange(20.0), (3, 15)) == pytest.approx(0.25)
    with pytest.raises(PreconditionError):
        smoothness_metric(np.zeros(10), (5, 11))
    traces = np.vstack([0.5 * np.arange(20.0), np.zeros(20)])
    assert_allclose(smoothness_of_traces(traces, (3, 15)), [0.25, 0.0])


def test_constant_chain_zero_variance():
    chain = MarkovChain(np.full((3, 3), 1 / 3), np.full(3, 0.4))
    curve = variance_across_seeds(chain, "rb", 200, 5, 0, 10, 3)
    assert_allclose(curve.variance, 0.0, atol=1e-28)


def test_online_variance_slope_minus_one():
    chain = build_block_mrp(BlockMrpConfig(3, 10, 1 / 3, (0, 1, 2)))
    curve = variance_across_seeds(chain, "online", 10_000, 400, 3)
    t = curve.times[999:]
    slope = np.polyfit(np.log(t), np.log(curve.variance[999:]), 1)[0]
    assert abs(slope + 1) < 0.15


def test_simulate_traces_common_paths_and_offsets():
    chain = build_block_mrp(BlockMrpConfig())
    full = simulate_traces(chain, "rb", 300, 4, 2, 20, 3, grid_index=1)
    tail = simulate_traces(chain, "rb", 300, 2, 2, 20, 3, grid_index=1, seed_offset=2)
    assert_array_equal(full[2:], tail)
    # online traces depend on the environment stream only
    on = simulate_traces(chain, "online", 300, 2, 2)
    _, rewards = sample_path(chain, 300, np.random.Generator(np.random.PCG64(np.random.SeedSequence(2, spawn_key=(0, 1)))))
    assert_array_equal(on[1], run_online(rewards).eta)


@pytest.mark.slow
@pytest.mark.parametrize("method,n,k", [("online", None, None), ("rb", 500, 5)])
def test_consistency_long_run(method, n, k):
    chain = build_block_mrp(BlockMrpConfig())
    target = average_reward(chain)
    finals = simulate_traces(chain, method, 100_000, 9, 0, n, k)[:, -1]
    assert abs(np.median(finals) - target) < 0.05
