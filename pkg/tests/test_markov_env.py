import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from rbprocess.errors import ConfigurationError, ErgodicityError
from rbprocess.markov_env import (BlockMrpConfig, MarkovChain, Mdp, average_reward, build_block_mrp, sample_path,
                                  spectral_gap, stationary_distribution)

TWO_STATE = np.array([[0.9, 0.1], [0.2, 0.8]])


def test_block_mrp_entries():
    chain = build_block_mrp(BlockMrpConfig(3, 10, 0.01, (0, 1, 2)))
    p = chain.transition
    assert p.shape == (30, 30)
    assert_allclose(p[0, :10], 0.099)
    assert_allclose(p[0, 10:], 0.0005)
    assert_allclose(p[15, 10:20], 0.099)
    assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert_array_equal(chain.state_reward, np.repeat([0.0, 1.0, 2.0], 10))


def test_two_state_symmetric_block():
    chain = build_block_mrp(BlockMrpConfig(2, 1, 0.5, (0, 1)))
    assert_allclose(chain.transition, [[0.5, 0.5], [0.5, 0.5]])


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_p_out_boundaries_rejected(p):
    with pytest.raises(ConfigurationError):
        BlockMrpConfig(3, 10, p, (0, 1, 2))


def test_block_config_validation():
    with pytest.raises(ConfigurationError):
        BlockMrpConfig(1, 10, 0.1, (0,))
    with pytest.raises(ConfigurationError):
        BlockMrpConfig(3, 10, 0.1, (0, 1))


def test_chain_rejects_bad_rows():
    with pytest.raises(ConfigurationError):
        MarkovChain(np.array([[0.5, 0.4], [0.5, 0.5]]), np.zeros(2))
    with pytest.raises(ConfigurationError):
        MarkovChain(np.array([[1.2, -0.2], [0.5, 0.5]]), np.zeros(2))
    with pytest.raises(ConfigurationError):
        MarkovChain(np.eye(2), np.zeros(3))


def test_stationary_two_state():
    mu = stationary_distribution(MarkovChain(TWO_STATE, [0.0, 3.0]))
    assert_allclose(mu.probs, [2 / 3, 1 / 3], atol=1e-12)
    assert mu.residual <= 1e-10


def test_stationary_singleton():
    assert_allclose(stationary_distribution(MarkovChain([[1.0]], [5.0])).probs, [1.0])
    assert average_reward(MarkovChain([[1.0]], [5.0])) == pytest.approx(5.0)


def test_symmetric_block_mrp_uniform_and_average():
    chain = build_block_mrp(BlockMrpConfig())
    mu = stationary_distribution(chain).probs
    assert_allclose(mu, 1 / 30, atol=1e-12)
    assert average_reward(chain) == pytest.approx(1.0, abs=1e-12)


def test_average_reward_two_state():
    assert average_reward(MarkovChain(TWO_STATE, [0.0, 3.0])) == pytest.approx(1.0, abs=1e-12)


def test_linear_and_power_agree():
    rng = np.random.default_rng(3)
    for size in (5, 20, 50):
        p = rng.dirichlet(np.ones(size), size=size)
        chain = MarkovChain(p, np.zeros(size))
        a = stationary_distribution(chain, method="linear").probs
        b = stationary_distribution(chain, method="power").probs
        assert_allclose(a, b, atol=1e-8)


def test_power_path_above_threshold():
    chain = build_block_mrp(BlockMrpConfig(3, 70, 0.1, (0, 1, 2)))
    mu = stationary_distribution(chain)
    assert mu.method == "power"
    assert_allclose(mu.probs, 1 / 210, atol=1e-9)


def test_reducible_chain_raises():
    chain = MarkovChain(np.eye(2), np.zeros(2))
    with pytest.raises(ErgodicityError):
        stationary_distribution(chain, method="linear")


def test_power_iteration_cap_raises():
    chain = MarkovChain(np.array([[0.999, 0.001], [0.5, 0.5]]), np.zeros(2))
    with pytest.raises(ErgodicityError):
        stationary_distribution(chain, method="power", max_iter=3)


def test_spectral_gap_examples():
    assert spectral_gap(MarkovChain(np.full((2, 2), 0.5), np.zeros(2))) == pytest.approx(1.0, abs=1e-12)
    p = 0.1
    chain = MarkovChain(np.array([[1 - p, p], [p, 1 - p]]), np.zeros(2))
    assert spectral_gap(chain) == pytest.approx(0.2, abs=1e-9)


def test_spectral_gap_increasing_in_p_out():
    gaps = [spectral_gap(build_block_mrp(BlockMrpConfig(p_out=p))) for p in (0.001, 0.01, 0.1)]
    assert gaps[0] < gaps[1] < gaps[2]
    # eigenvalue oracle
    for p, g in zip((0.001, 0.01, 0.1), gaps):
        ev = np.sort(np.abs(np.linalg.eigvals(build_block_mrp(BlockMrpConfig(p_out=p)).transition)))[::-1]
        assert g == pytest.approx(1 - ev[1], abs=1e-8)


def test_sample_path_deterministic_and_consistent():
    chain = build_block_mrp(BlockMrpConfig())
    s1, r1 = sample_path(chain, 500, 42)
    s2, r2 = sample_path(chain, 500, 42)
    assert_array_equal(s1, s2)
    assert_array_equal(r1, chain.state_reward[s1])
    assert len(s1) == 500


def test_sample_path_singleton():
    states, _ = sample_path(MarkovChain([[1.0]], [0.0]), 4, 0)
    assert_array_equal(states, [0, 0, 0, 0])


def test_sample_path_transitions_follow_kernel():
    chain = MarkovChain(TWO_STATE, [0.0, 1.0])
    states, _ = sample_path(chain, 200_000, 1, initial_state=0)
    a, b = states[:-1], states[1:]
    for s in (0, 1):
        freq = np.mean(b[a == s] == 1)
        n = np.sum(a == s)
        se = np.sqrt(TWO_STATE[s, 1] * (1 - TWO_STATE[s, 1]) / n)
        assert abs(freq - TWO_STATE[s, 1]) < 4 * se


def test_sample_path_ergodic_frequencies():
    chain = build_block_mrp(BlockMrpConfig())
    states, _ = sample_path(chain, 1_000_000, 7)
    freq = np.bincount(states, minlength=30) / len(states)
    assert np.max(np.abs(freq - stationary_distribution(chain).probs)) < 0.01


def test_initial_state_uniform():
    chain = MarkovChain(np.eye(4)[[1, 2, 3, 0]] * 0.5 + 0.125, np.zeros(4))
    starts = [sample_path(chain, 1, s)[0][0] for s in range(4000)]
    counts = np.bincount(starts, minlength=4)
    assert counts.min() > 850


def test_text_roundtrip(tmp_path):
    chain = build_block_mrp(BlockMrpConfig(2, 3, 0.1, (0, 1)))
    path = tmp_path / "chain.txt"
    chain.save(path)
    back = MarkovChain.load(path)
    assert_array_equal(back.transition, chain.transition)
    assert_array_equal(back.state_reward, chain.state_reward)


def test_mdp_roundtrip_and_induced_chain():
    rng = np.random.default_rng(0)
    p = rng.dirichlet(np.ones(3), size=(3, 2))
    r = rng.uniform(-1, 1, size=(3, 2))
    mdp = Mdp(p, r)
    back = Mdp.from_text(mdp.to_text())
    assert_array_equal(back.transition, mdp.transition)
    assert_array_equal(back.reward, mdp.reward)
    pi = np.array([[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]])
    chain = mdp.induced_chain(pi)
    assert_allclose(chain.transition[0], p[0, 0])
    assert_allclose(chain.transition[1], 0.5 * (p[1, 0] + p[1, 1]))
    assert_allclose(chain.state_reward, [r[0, 0], r[1].mean(), r[2, 1]])


def test_mdp_reward_bound():
    p = np.ones((2, 1, 2)) / 2
    with pytest.raises(ConfigurationError):
        Mdp(p, np.array([[0.0], [3.0]]))
    assert Mdp(p, np.array([[0.0], [3.0]]), bounded_reward=False).num_actions == 1
