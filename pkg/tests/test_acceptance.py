"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances are pinned here, not imported from the package, so a change in the
library defaults cannot silently loosen a criterion.
"""

import json
import time

import numpy as np
import pytest

from rbprocess.actor_critic import (Schedules, critic_fixed_point, expected_actor_update, expected_critic_update,
                                    expected_update_matrices, five_state_setup, gradient_identity_check,
                                    monte_carlo_batch_updates, run_actor_critic, three_state_setup)
from rbprocess.harness.config import build_config
from rbprocess.harness.experiments import run_experiment
from rbprocess.markov_env import MarkovChain
from rbprocess.mean_estimators import run_online, run_rb
from rbprocess.second_moments import (analytic_autocov_markov, empirical_autocov_y, predicted_series,
                                      tau_prime_bruteforce, triangular_kernel)
from rbprocess.seeding import sampler_stream

SE_BAND = 4.0
LAGS = range(1, 21)


def two_state(p=0.1, q=0.1):
    return MarkovChain(np.array([[1 - p, p], [q, 1 - q]]), np.array([0.0, 1.0]))


def checks_by_name(manifest):
    return {c["name"]: c for c in manifest.checks}


def test_criterion_01_kernel_oracle(report):
    start = time.perf_counter()
    bad = []
    for n in range(1, 8):
        kernel = triangular_kernel(n)
        for k in range(1, n + 1):
            for tau in (0, 3):
                if tau_prime_bruteforce(n, k, tau).probs != kernel.shifted(tau):
                    bad.append((n, k, tau))
    elapsed = time.perf_counter() - start
    report(1, not bad and elapsed < 60,
           f"brute-force time-gap law equals triangular kernel for n<=7, tau in {{0,3}} "
           f"(mismatches={bad}, {elapsed:.1f}s < 60s)")


def test_criterion_02_prediction_matches_empirical(report):
    chain = two_state()
    start = time.perf_counter()
    pred = predicted_series(chain, chain.state_reward, 10, LAGS)
    y = empirical_autocov_y(chain, chain.state_reward, 10, 3, 200_000, LAGS, seed=sampler_stream(0, 0, 2, 0))
    elapsed = time.perf_counter() - start
    inside = int(np.sum(np.abs(y.values - pred) <= SE_BAND * y.standard_errors))
    # the prediction must come from the exact raw-process autocovariance
    c = [analytic_autocov_markov(chain, chain.state_reward, t) for t in range(30)]
    manual = sum((10 - abs(d)) / 100 * c[abs(5 + d)] for d in range(-9, 10))
    assert pred[4] == pytest.approx(manual, rel=1e-12)
    report(2, inside >= 19 and elapsed < 120,
           f"two-state chain N=10 K=3: {inside}/20 lags within 4 SE of prediction ({elapsed:.1f}s)")


def test_criterion_03_k_independence(report):
    chain = two_state()
    a = empirical_autocov_y(chain, chain.state_reward, 10, 1, 200_000, LAGS, seed=sampler_stream(0, 0, 3, 0))
    b = empirical_autocov_y(chain, chain.state_reward, 10, 10, 200_000, LAGS, seed=sampler_stream(0, 0, 3, 1))
    se = np.hypot(a.standard_errors, b.standard_errors)
    inside = int(np.sum(np.abs(a.values - b.values) <= SE_BAND * se))
    report(3, inside >= 19, f"K=1 vs K=10 at N=10: {inside}/20 lags within 4 combined SE")


def test_criterion_04_lag0_decorrelation(report):
    # rows identical, so the reward sequence is i.i.d. Bernoulli(1/2)
    iid = MarkovChain(np.full((2, 2), 0.5), np.array([0.0, 1.0]))
    sigma2 = 0.25
    details, ok = [], True
    for j, (n, k) in enumerate(((5, 2), (20, 5))):
        y = empirical_autocov_y(iid, iid.state_reward, n, k, 200_000, [0], seed=sampler_stream(0, 0, 4, j))
        z = abs(y.values[0] - sigma2 / n) / y.standard_errors[0]
        ok &= z <= SE_BAND
        details.append(f"N={n}: C_Y(0)={y.values[0]:.5f} vs {sigma2 / n:.5f} ({z:.2f} SE)")
    report(4, ok, "; ".join(details))


def test_criterion_05_batch_update_mean(report):
    mdp, features, policy = five_state_setup()
    mats = expected_update_matrices(mdp, policy, features)
    w_pi = critic_fixed_point(mats)
    worst, ok = 0.0, True
    for j, w in enumerate((np.zeros(features.d), w_pi + 0.5)):
        mc = monte_carlo_batch_updates(mdp, policy, features, w, mats.eta, 20, 5, 100_000,
                                       seed=sampler_stream(0, 0, 5, j))
        z = np.abs(mc.critic_mean - expected_critic_update(mats, w)) / mc.critic_se
        za = np.abs(mc.actor_mean - expected_actor_update(mdp, policy, features, w, mats.eta)) / mc.actor_se
        worst = max(worst, float(z.max()))
        ok &= bool(np.all(z <= 3.0))
        assert np.all(za <= 3.0)
    report(5, ok, f"critic batch update mean at two w values, worst coordinate {worst:.2f} SE (<= 3)")


def test_criterion_06_gradient_identity(report):
    mdp, features, policy = three_state_setup()
    res = gradient_identity_check(mdp, policy, features, h=1e-4).max_abs_residual
    report(6, res < 1e-3, f"finite-difference gradient minus expected actor update minus bias: {res:.2e} (< 1e-3)")


def test_criterion_07_critic_convergence(report):
    mdp, features, policy = five_state_setup()
    mats = expected_update_matrices(mdp, policy, features)
    w_pi = critic_fixed_point(mats)
    start = time.perf_counter()
    w_err, eta_err = [], []
    for i in range(20):
        tr = run_actor_critic(mdp, features, policy, Schedules.frozen_actor(), 100, 5, 200_000,
                              seed=sampler_stream(0, 0, 7, i), stride=200_000)
        w_err.append(np.max(np.abs(tr.w[-1] - w_pi)))
        eta_err.append(abs(tr.eta[-1] - mats.eta))
    elapsed = time.perf_counter() - start
    mw, me = float(np.median(w_err)), float(np.median(eta_err))
    report(7, mw < 0.05 and me < 0.01 and elapsed < 180,
           f"frozen-actor critic, 20 seeds: median w error {mw:.4f} (< 0.05), "
           f"median eta error {me:.4f} (< 0.01), {elapsed:.1f}s")


def _variance(tmp_path, name, n_grid, k_grid):
    cfg = build_config({"experiment": "variance", "n_grid": n_grid, "k_grid": k_grid, "p_out": 0.01,
                        "horizon": 10_000, "num_seeds": 100})
    return checks_by_name(run_experiment(cfg, tmp_path / name, svg=False))


def test_criterion_08_variance_orderings(tmp_path, report):
    by_n = _variance(tmp_path, "n", [10, 50, 500], [5])
    by_k = _variance(tmp_path, "k", [500], [1, 5, 50])
    dec_n = by_n["window variance strictly decreasing in N at K=5"]
    dec_k = by_k["window variance strictly decreasing in K at N=500"]
    below = by_n["RB below online window variance (rb_n500_k5)"]
    ratios = [c for c in by_n.values() if c["name"].startswith("late variance")]
    parts = {
        "decreasing in N": dec_n["passed"],
        "decreasing in K": dec_k["passed"],
        "RB below online": below["passed"],
        "late/early < 0.1": all(c["passed"] for c in ratios),
    }
    detail = ", ".join(f"{k}={'ok' if v else 'no'}" for k, v in parts.items())
    detail += (f"; N window means {[round(v, 4) for v in dec_n['value']]}, "
               f"K window means {[round(v, 4) for v in dec_k['value']]}")
    report(8, all(parts.values()), detail)


def _smoothness(tmp_path, experiment, **raw):
    cfg = build_config({"experiment": experiment, "horizon": 10_000, "num_seeds": 100, **raw})
    return checks_by_name(run_experiment(cfg, tmp_path / experiment, svg=False))


def test_criterion_09_smoothness(tmp_path, report):
    dk = _smoothness(tmp_path, "diff-k", n_grid=[10, 50, 100, 500], k_grid=[5])
    dn = _smoothness(tmp_path, "diff-n", n_grid=[500], k_grid=[1, 5, 50])
    in_n = dk["smoothness strictly decreasing in N at K=5"]
    spread = dn["relative smoothness spread across K at N=500"]
    report(9, in_n["passed"] and spread["passed"],
           f"strictly decreasing in N={'ok' if in_n['passed'] else 'no'} "
           f"{[f'{v:.3g}' for v in in_n['value']]}; relative spread across K={spread['value']:.3f} (< 0.25)")


def test_criterion_10_mixing_contrast(tmp_path, report):
    dp = _smoothness(tmp_path, "diff-p", n_grid=[500], k_grid=[5], p_out_grid=[0.1, 0.01, 0.001])
    gap = dp["online-RB gap increasing as p_out decreases (N=500, K=5)"]
    report(10, gap["passed"], f"online minus RB smoothness for p_out 0.1, 0.01, 0.001: "
                              f"{[f'{v:.3g}' for v in gap['value']]} (must increase)")


def test_criterion_11_reduction_law(report):
    rng = np.random.default_rng(2024)
    mismatches = 0
    for i in range(100):
        path = rng.normal(size=int(rng.integers(1, 2000)))
        if not np.array_equal(run_rb(path, 1, 1, seed=i).eta, run_online(path).eta):
            mismatches += 1
    report(11, mismatches == 0, f"N=K=1 replay estimator bitwise equal to online on 100 paths ({mismatches} differ)")


SUBCOMMANDS = ("kernel-check", "autocov", "ac-verify", "diff-n", "diff-k", "diff-p", "variance", "ac-train")


def _csv_digests(out):
    man = json.loads((out / "manifest.json").read_text())
    return {f["path"]: f["sha256"] for f in man["files"] if f["path"].endswith(".csv")}


def test_criterion_12_determinism(tmp_path, report):
    from rbprocess.harness.cli import main

    differing = []
    for name in SUBCOMMANDS:
        runs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{name}_{rep}"
            code = main([name, "--out", str(out), "--base-seed", "7", "--svg", "false"])
            assert code in (0, 3), f"{name} exited {code}"
            runs.append(_csv_digests(out))
        if not runs[0] or runs[0] != runs[1]:
            differing.append(name)
    report(12, not differing, f"{len(SUBCOMMANDS)} subcommands rerun with base seed 7, "
                              f"CSV digests identical (differing: {differing})")
