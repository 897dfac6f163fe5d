"""Experiment runners behind the CLI subcommands.

Each runner writes CSVs (and optional SVG charts) into an output directory
and returns a :class:`RunManifest`. Randomness is keyed by
``(base_seed, experiment, grid index, seed index)`` through
:mod:`rbprocess.seeding`, so results do not depend on ``--jobs``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..actor_critic import (Schedules, SoftmaxPolicy, StepSchedule, critic_fixed_point, expected_actor_update,
                            expected_critic_update, expected_update_matrices, five_state_setup,
                            gradient_identity_check, improvement_mdp, indicator_psi, monte_carlo_batch_updates,
                            random_mdp, run_actor_critic, tabular_minus_anchor, three_state_setup)
from ..errors import NumericalError
from ..markov_env import BlockMrpConfig, average_reward, build_block_mrp, sample_path
from ..mean_estimators import simulate_traces, smoothness_of_traces, variance_from_traces
from ..second_moments import (analytic_autocov_markov, empirical_autocov_y, empirical_autocov_z, predicted_series,
                              tau_prime_bruteforce, triangular_kernel)
from ..seeding import EXPERIMENT_IDS, env_key, env_stream, sampler_key, sampler_stream, stream_id
from . import plotting
from .config import ExperimentConfig

SMOOTHNESS_WINDOW = (100, 5000)
VARIANCE_WINDOW = (100, 1000)
SE_MULTIPLIER = 4.0
BATCH_MEAN_SE = 3.0


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    experiment: str
    config: dict
    version: str = __version__
    status: str = "ok"
    streams: list = field(default_factory=list)
    files: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    wall_clock_seconds: float = 0.0
    error: str | None = None

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def add_check(self, name: str, value, tolerance, passed: bool, **extra) -> None:
        self.checks.append({"name": name, "value": value, "tolerance": tolerance, "passed": bool(passed), **extra})

    def to_json(self) -> dict:
        return {
            "experiment": self.experiment, "version": self.version, "status": self.status, "error": self.error,
            "config": self.config, "streams": self.streams, "files": self.files, "checks": self.checks,
            "wall_clock_seconds": self.wall_clock_seconds,
        }


class Emitter:
    """Writes files into ``out_dir`` and keeps the listing for the manifest."""

    def __init__(self, out_dir, svg: bool = True):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.svg = svg
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.written.append(p)
        return p

    def csv(self, name: str, header, rows) -> Path:
        p = self.path(name)
        with open(p, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        return p

    def listing(self) -> list:
        return [{"path": p.name, "sha256": sha256_of(p), "bytes": p.stat().st_size}
                for p in sorted(set(self.written)) if p.exists()]


def _fmt(x) -> str:
    return repr(float(x))


def _map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
        return list(pool.map(fn, tasks))


def _chain(cfg: ExperimentConfig, p_out: float):
    return build_block_mrp(BlockMrpConfig(cfg.blocks, cfg.states_per_block, p_out, tuple(cfg.block_rewards)))


# ---------------------------------------------------------------- kernel-check

def _run_kernel_check(cfg: ExperimentConfig, em: Emitter, man: RunManifest, jobs: int) -> None:
    summary = []
    for n in range(1, cfg.n_max + 1):
        kernel = triangular_kernel(n)
        for k in range(1, n + 1):
            for tau in (0, 3):
                dist = tau_prime_bruteforce(n, k, tau)
                ok = dist.probs == kernel.shifted(tau)
                dist.to_csv(em.path(f"kernel_n{n}_k{k}_tau{tau}.csv"))
                summary.append([n, k, tau, dist.enumeration_count, int(ok)])
                man.add_check(f"kernel n={n} k={k} tau={tau}", "exact" if ok else "mismatch", "exact", ok)
    em.csv("kernel_summary.csv", ["n", "k", "tau", "enumeration_count", "exact_match"], summary)


# ---------------------------------------------------------------- autocov

def _autocov_task(args):
    cfg, n, k, grid_index, seed_index = args
    chain = _chain(cfg, cfg.p_values[0])
    rng = sampler_stream(cfg.base_seed, EXPERIMENT_IDS["autocov"], grid_index, seed_index)
    return empirical_autocov_y(chain, chain.state_reward, n, k, cfg.horizon, range(cfg.max_lag + 1), rng,
                               initial_state=cfg.initial_state)


def _run_autocov(cfg: ExperimentConfig, em: Emitter, man: RunManifest, jobs: int) -> None:
    chain = _chain(cfg, cfg.p_values[0])
    lags = np.arange(cfg.max_lag + 1)
    exp_id = EXPERIMENT_IDS["autocov"]
    needed = math.ceil(0.95 * cfg.max_lag)

    # raw process against its exact autocovariance
    exact_z = np.array([analytic_autocov_markov(chain, chain.state_reward, int(t)) for t in lags])
    em.csv("lags_z_exact.csv", ["lag", "value", "stderr", "kind"],
           [[int(t), _fmt(v), "nan", "C"] for t, v in zip(lags, exact_z)])
    for i in range(cfg.num_seeds):
        _, rewards = sample_path(chain, cfg.horizon, env_stream(cfg.base_seed, i), cfg.initial_state)
        z = empirical_autocov_z(rewards, lags)
        z.to_csv(em.path(f"lags_z_seed{i}.csv"))
        man.streams.append({"label": f"z seed {i}", "stream": stream_id(env_key(i))})

    tasks, meta = [], []
    for n in cfg.n_grid:
        for k in cfg.k_grid:
            grid_index = len(meta)
            meta.append((n, k, grid_index))
            for i in range(cfg.num_seeds):
                tasks.append((cfg, n, k, grid_index, i))
                man.streams.append({"label": f"y n={n} k={k} seed {i}",
                                    "stream": stream_id(sampler_key(exp_id, grid_index, i))})
    results = dict(zip(((t[1], t[2], t[4]) for t in tasks), _map(_autocov_task, tasks, jobs)))

    predicted = {}
    for n in cfg.n_grid:
        predicted[n] = predicted_series(chain, chain.state_reward, n, lags)
        em.csv(f"lags_pred_n{n}.csv", ["lag", "value", "stderr", "kind"],
               [[int(t), _fmt(v), "nan", "C"] for t, v in zip(lags, predicted[n])])

    for n, k, _ in meta:
        for i in range(cfg.num_seeds):
            series = results[(n, k, i)]
            series.to_csv(em.path(f"lags_y_n{n}_k{k}_seed{i}.csv"))
            z = np.abs(series.values[1:] - predicted[n][1:]) / series.standard_errors[1:]
            inside = int(np.sum(z <= SE_MULTIPLIER))
            man.add_check(f"prediction n={n} k={k} seed={i}", inside, f">= {needed} of {cfg.max_lag} lags", inside >= needed)
        ref_k = cfg.k_grid[0]
        if k != ref_k:
            for i in range(cfg.num_seeds):
                a, b = results[(n, ref_k, i)], results[(n, k, i)]
                se = np.hypot(a.standard_errors[1:], b.standard_errors[1:])
                inside = int(np.sum(np.abs(a.values[1:] - b.values[1:]) <= SE_MULTIPLIER * se))
                man.add_check(f"k-independence n={n} k={ref_k} vs k={k} seed={i}", inside,
                              f">= {needed} of {cfg.max_lag} lags", inside >= needed)

    if em.svg:
        for n in cfg.n_grid:
            emp = {f"K={k}": (results[(n, k, 0)].values, results[(n, k, 0)].standard_errors) for k in cfg.k_grid}
            plotting.lag_chart(em.path(f"autocov_n{n}.svg"), lags, emp,
                               {"predicted": predicted[n], "raw process": exact_z},
                               title=f"batch-average autocovariance, N={n}")


# ---------------------------------------------------------------- figure sweeps

@dataclass(frozen=True)
class _Point:
    label: str
    method: str
    n: int | None
    k: int | None
    p_out: float
    grid_index: int


def _figure_points(cfg: ExperimentConfig) -> list[_Point]:
    points = []
    grid_index = 0
    multi_p = len(cfg.p_values) > 1
    for p in cfg.p_values:
        suffix = f"_p{p:g}" if multi_p else ""
        points.append(_Point(f"online{suffix}", "online", None, None, p, -1))
        for n, k in cfg.grid_pairs():
            points.append(_Point(f"rb_n{n}_k{k}{suffix}", "rb", n, k, p, grid_index))
            grid_index += 1
    return points


def _traces_task(args):
    cfg, point, experiment, lo, hi = args
    chain = _chain(cfg, point.p_out)
    return simulate_traces(chain, point.method, cfg.horizon, hi - lo, cfg.base_seed, point.n, point.k,
                           initial_state=cfg.initial_state, experiment=experiment,
                           grid_index=max(point.grid_index, 0), seed_offset=lo)


def _chunks(num_seeds: int, jobs: int) -> list[tuple[int, int]]:
    parts = max(1, min(num_seeds, jobs))
    edges = np.linspace(0, num_seeds, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _sweep(cfg: ExperimentConfig, man: RunManifest, jobs: int):
    exp_id = EXPERIMENT_IDS[cfg.experiment]
    points = _figure_points(cfg)
    tasks = [(cfg, pt, exp_id, lo, hi) for pt in points for lo, hi in _chunks(cfg.num_seeds, jobs)]
    parts = _map(_traces_task, tasks, jobs)
    traces: dict[str, list] = {}
    for (_, pt, _, _, _), block in zip(tasks, parts):
        traces.setdefault(pt.label, []).append(block)
    traces = {label: np.vstack(blocks) for label, blocks in traces.items()}
    for pt in points:
        rec = {"label": pt.label, "env_streams": [stream_id(env_key(i)) for i in range(cfg.num_seeds)]}
        if pt.method == "rb":
            rec["sampler_streams"] = [stream_id(sampler_key(exp_id, pt.grid_index, i)) for i in range(cfg.num_seeds)]
        man.streams.append(rec)
    return points, traces


def _smoothness_rows(cfg, points, traces, window):
    rows, stats = [], {}
    for pt in points:
        per_seed = smoothness_of_traces(traces[pt.label], window)
        mean = float(per_seed.mean())
        se = float(per_seed.std(ddof=1) / np.sqrt(len(per_seed))) if len(per_seed) > 1 else float("nan")
        stats[pt.label] = mean
        rows.append([pt.method, pt.n if pt.n is not None else "", pt.k if pt.k is not None else "",
                     _fmt(pt.p_out), _fmt(mean), _fmt(se), len(per_seed), window[0], window[1]])
    return rows, stats


def _strictly_decreasing(values) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def _run_figure(cfg: ExperimentConfig, em: Emitter, man: RunManifest, jobs: int) -> None:
    points, traces = _sweep(cfg, man, jobs)
    window = (SMOOTHNESS_WINDOW[0], min(SMOOTHNESS_WINDOW[1], cfg.horizon))
    if window[0] >= window[1]:
        window = (1, cfg.horizon)
    times = np.arange(1, cfg.horizon + 1)
    for pt in points:
        em.csv(f"trace_{pt.label}.csv", ["t", "eta"], ([int(t), _fmt(v)] for t, v in zip(times, traces[pt.label][0])))
    rows, stats = _smoothness_rows(cfg, points, traces, window)
    em.csv("smoothness.csv", ["method", "n", "k", "p_out", "smoothness", "stderr", "num_seeds", "t0", "t1"], rows)

    rb = [pt for pt in points if pt.method == "rb"]
    if cfg.experiment == "diff-k" and len(cfg.n_grid) > 1:
        for k in cfg.k_grid:
            vals = [stats[pt.label] for pt in rb if pt.k == k]
            man.add_check(f"smoothness strictly decreasing in N at K={k}", vals, "strict", _strictly_decreasing(vals))
    if cfg.experiment == "diff-n" and len(cfg.k_grid) > 1:
        for n in cfg.n_grid:
            vals = [stats[pt.label] for pt in rb if pt.n == n]
            spread = (max(vals) - min(vals)) / min(vals)
            man.add_check(f"relative smoothness spread across K at N={n}", spread, "< 0.25", spread < 0.25)
    if cfg.experiment == "diff-p":
        gap_rows = []
        for n, k in cfg.grid_pairs():
            gaps = []
            for p in sorted(cfg.p_values, reverse=True):
                on = next(pt for pt in points if pt.method == "online" and pt.p_out == p)
                r = next(pt for pt in rb if pt.n == n and pt.k == k and pt.p_out == p)
                gap = stats[on.label] - stats[r.label]
                gaps.append(gap)
                gap_rows.append([_fmt(p), n, k, _fmt(stats[on.label]), _fmt(stats[r.label]), _fmt(gap)])
            man.add_check(f"online-RB gap increasing as p_out decreases (N={n}, K={k})", gaps, "strict",
                          all(b > a for a, b in zip(gaps, gaps[1:])))
        em.csv("smoothness_gap.csv", ["p_out", "n", "k", "online", "rb", "gap"], gap_rows)



def _run_variance(cfg: ExperimentConfig, em: Emitter, man: RunManifest, jobs: int) -> None:
    points, traces = _sweep(cfg, man, jobs)
    times = np.arange(1, cfg.horizon + 1)
    curves = {pt.label: variance_from_traces(traces[pt.label]) for pt in points}

    def long_rows():
        for pt in points:
            for t, v in zip(times, curves[pt.label]):
                yield [int(t), _fmt(v), pt.method, pt.n if pt.n is not None else "", pt.k if pt.k is not None else ""]

    em.csv("variance.csv", ["t", "variance", "method", "n", "k"], long_rows())
    t0, t1 = VARIANCE_WINDOW[0], min(VARIANCE_WINDOW[1], cfg.horizon)
    summary, window_means = [], {}
    for pt in points:
        c = curves[pt.label]
        wm = float(c[t0 - 1:t1].mean()) if t1 > t0 else float("nan")
        window_means[pt.label] = wm
        early = c[min(100, cfg.horizon) - 1]
        summary.append([pt.method, pt.n if pt.n is not None else "", pt.k if pt.k is not None else "", _fmt(pt.p_out),
                        _fmt(wm), _fmt(early), _fmt(c[-1]), _fmt(c[-1] / early)])
        man.add_check(f"late variance below 10% of variance at t=100 ({pt.label})", float(c[-1] / early), "< 0.1",
                      c[-1] < 0.1 * early)
    em.csv("variance_summary.csv", ["method", "n", "k", "p_out", "window_mean", "var_t100", "var_final", "ratio"],
           summary)
    rb = [pt for pt in points if pt.method == "rb"]
    for k in cfg.k_grid:
        vals = [window_means[pt.label] for pt in rb if pt.k == k]
        if len(vals) > 1:
            man.add_check(f"window variance strictly decreasing in N at K={k}", vals, "strict", _strictly_decreasing(vals))
    for n in cfg.n_grid:
        vals = [window_means[pt.label] for pt in rb if pt.n == n]
        if len(vals) > 1:
            man.add_check(f"window variance strictly decreasing in K at N={n}", vals, "strict", _strictly_decreasing(vals))
    online = next(pt for pt in points if pt.method == "online")
    for pt in rb:
        man.add_check(f"RB below online window variance ({pt.label})", window_means[pt.label], "< online",
                      window_means[pt.label] < window_means[online.label])


# ---------------------------------------------------------------- actor-critic

def _mdp_from(cfg: ExperimentConfig):
    if cfg.mdp == "improvement":
        return improvement_mdp()
    _, s, a, seed = cfg.mdp.split(":")
    return random_mdp(int(s), int(a), int(seed))


def _ac_train_task(args):
    cfg, seed_index = args
    mdp = _mdp_from(cfg)
    schedules = (Schedules.frozen_actor() if cfg.actor_scale == 0
                 else Schedules(theta=StepSchedule(cfg.actor_scale, 1.0, 0.9)))
    rng = sampler_stream(cfg.base_seed, EXPERIMENT_IDS["ac-train"], 0, seed_index)
    return run_actor_critic(mdp, tabular_minus_anchor(mdp.num_states), SoftmaxPolicy.uniform(mdp.num_states, mdp.num_actions),
                            schedules, cfg.n_grid[0], cfg.k_grid[0], cfg.horizon, rng, stride=cfg.stride,
                            initial_state=cfg.initial_state)


def _run_ac_train(cfg: ExperimentConfig, em: Emitter, man: RunManifest, jobs: int) -> None:
    mdp = _mdp_from(cfg)
    psi = indicator_psi(mdp.num_states, mdp.num_actions)
    exp_id = EXPERIMENT_IDS["ac-train"]
    for i in range(cfg.num_seeds):
        man.streams.append({"label": f"run seed {i}", "stream": stream_id(sampler_key(exp_id, 0, i))})
    trajs = _map(_ac_train_task, [(cfg, i) for i in range(cfg.num_seeds)], jobs)
    summary = []
    for i, tr in enumerate(trajs):
        tr.to_csv(em.path(f"ac_seed{i}.csv"))
        eta, _, theta = tr.final()
        true_eta = average_reward(mdp.induced_chain(SoftmaxPolicy(theta, psi).probs()))
        summary.append([i, _fmt(eta), _fmt(true_eta), _fmt(tr.theta_norm[-1]), int(tr.projection_active.any())])
    em.csv("ac_summary.csv", ["seed", "final_eta", "policy_eta", "theta_norm", "projection_hit"], summary)
    if em.svg:
        series = {f"seed {i}": (tr.t, tr.eta) for i, tr in enumerate(trajs)}
        plotting.line_chart(em.path("ac_train.svg"), series, "step", "average-reward estimate",
                            title="actor-critic training")


def _convergence_task(args):
    cfg, seed_index = args
    mdp, features, policy = five_state_setup()
    rng = sampler_stream(cfg.base_seed, EXPERIMENT_IDS["ac-verify"], 0, seed_index)
    return run_actor_critic(mdp, features, policy, Schedules.frozen_actor(), cfg.n_grid[0], cfg.k_grid[0],
                            cfg.horizon, rng, stride=cfg.stride, initial_state=cfg.initial_state)


def _run_ac_verify(cfg: ExperimentConfig, em: Emitter, man: RunManifest, jobs: int) -> None:
    exp_id = EXPERIMENT_IDS["ac-verify"]
    mdp, features, policy = five_state_setup()
    mats = expected_update_matrices(mdp, policy, features)
    w_pi = critic_fixed_point(mats)
    residual = float(np.max(np.abs(expected_critic_update(mats, w_pi))))
    man.add_check("critic fixed-point residual", residual, "<= 1e-10", residual <= 1e-10)

    rows = []
    for j, w in enumerate((np.zeros(features.d), w_pi + 0.5)):
        key = sampler_key(exp_id, 1, j)
        man.streams.append({"label": f"expected-update Monte Carlo w#{j}", "stream": stream_id(key)})
        mc = monte_carlo_batch_updates(mdp, policy, features, w, mats.eta, 20, 5, 100_000,
                                       sampler_stream(cfg.base_seed, exp_id, 1, j))
        zc = np.abs(mc.critic_mean - expected_critic_update(mats, w)) / mc.critic_se
        za = np.abs(mc.actor_mean - expected_actor_update(mdp, policy, features, w, mats.eta)) / mc.actor_se
        man.add_check(f"critic batch update mean vs closed form (w#{j})", float(zc.max()), "<= 3 SE",
                      bool(np.all(zc <= BATCH_MEAN_SE)))
        man.add_check(f"actor batch update mean vs closed form (w#{j})", float(za.max()), "<= 3 SE",
                      bool(np.all(za <= BATCH_MEAN_SE)))
        rows.append([f"critic_mc_w{j}", _fmt(zc.max()), "3", int(np.all(zc <= BATCH_MEAN_SE))])
        rows.append([f"actor_mc_w{j}", _fmt(za.max()), "3", int(np.all(za <= BATCH_MEAN_SE))])

    mdp3, f3, pol3 = three_state_setup()
    gid = gradient_identity_check(mdp3, pol3, f3, h=1e-4)
    man.add_check("policy-gradient identity residual", gid.max_abs_residual, "< 1e-3", gid.max_abs_residual < 1e-3)
    rows.append(["gradient_identity", _fmt(gid.max_abs_residual), "0.001", int(gid.max_abs_residual < 1e-3)])

    for i in range(cfg.num_seeds):
        man.streams.append({"label": f"critic run seed {i}", "stream": stream_id(sampler_key(exp_id, 0, i))})
    trajs = _map(_convergence_task, [(cfg, i) for i in range(cfg.num_seeds)], jobs)
    w_err = np.array([np.max(np.abs(tr.w[-1] - w_pi)) for tr in trajs])
    eta_err = np.array([abs(tr.eta[-1] - mats.eta) for tr in trajs])
    em.csv("ac_convergence.csv", ["seed", "w_error", "eta_error"],
           [[i, _fmt(a), _fmt(b)] for i, (a, b) in enumerate(zip(w_err, eta_err))])
    trajs[0].to_csv(em.path("ac_seed0.csv"))
    mw, me = float(np.median(w_err)), float(np.median(eta_err))
    man.add_check("median critic error", mw, "< 0.05", mw < 0.05)
    man.add_check("median average-reward error", me, "< 0.01", me < 0.01)
    rows.append(["median_w_error", _fmt(mw), "0.05", int(mw < 0.05)])
    rows.append(["median_eta_error", _fmt(me), "0.01", int(me < 0.01)])
    em.csv("ac_verify.csv", ["check", "value", "tolerance", "passed"], rows)
    if em.svg:
        tr = trajs[0]
        series = {f"w_{c}": (tr.t, tr.w[:, c]) for c in range(features.d)}
        series.update({f"w_pi_{c}": (tr.t, np.full(len(tr.t), w_pi[c])) for c in range(features.d)})
        plotting.line_chart(em.path("ac_verify.svg"), series, "step", "critic weight",
                            title="frozen-policy critic against its fixed point")


RUNNERS = {
    "kernel-check": _run_kernel_check,
    "autocov": _run_autocov,
    "diff-n": _run_figure,
    "diff-k": _run_figure,
    "diff-p": _run_figure,
    "variance": _run_variance,
    "ac-train": _run_ac_train,
    "ac-verify": _run_ac_verify,
}


def run_experiment(cfg: ExperimentConfig, out_dir, jobs: int = 1, svg: bool = True) -> RunManifest:
    """Run one experiment and write ``manifest.json`` next to its outputs.

    On a numerical failure the manifest is still written, with
    ``status = "numerical_failure"``, before the error propagates.
    """
    em = Emitter(out_dir, svg)
    man = RunManifest(cfg.experiment, cfg.echo())
    start = time.perf_counter()
    try:
        RUNNERS[cfg.experiment](cfg, em, man, jobs)
        listing = {"experiment": cfg.experiment, "files": [{"path": q.name} for q in em.written]}
        em.written.extend(emit_plot_data(listing, em.out_dir, svg))
    except NumericalError as exc:
        man.status = "numerical_failure"
        man.error = str(exc)
        raise
    finally:
        man.wall_clock_seconds = round(time.perf_counter() - start, 3)
        man.files = em.listing()
        with open(em.out_dir / "manifest.json", "w") as fh:
            json.dump(man.to_json(), fh, indent=2, default=_json_default)
            fh.write("\n")
    return man


def _read_columns(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return rows


def emit_plot_data(manifest, out_dir, svg: bool = True) -> list[Path]:
    """Tidy per-figure CSV plus an optional SVG chart from a manifest's file listing.

    ``manifest`` is a :class:`RunManifest`, its JSON dict, or a path to
    ``manifest.json``. Trace-based figures get ``plot_<experiment>.csv`` with
    one row per (t, series); the variance CSV is already long-format and is
    only charted. A manifest without files writes nothing.
    """
    if isinstance(manifest, (str, Path)):
        manifest = json.loads(Path(manifest).read_text())
    elif isinstance(manifest, RunManifest):
        manifest = manifest.to_json()
    out_dir = Path(out_dir)
    names = [f["path"] for f in manifest.get("files", [])]
    experiment = manifest.get("experiment", "")
    written: list[Path] = []
    if not names:
        return written

    traces = sorted(n for n in names if n.startswith("trace_") and n.endswith(".csv"))
    if traces:
        series = {}
        for name in traces:
            rows = _read_columns(out_dir / name)
            series[name[len("trace_"):-len(".csv")]] = ([int(r["t"]) for r in rows], [float(r["eta"]) for r in rows])
        tidy = out_dir / f"plot_{experiment}.csv"
        with open(tidy, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "eta", "series"])
            for label, (ts, vs) in series.items():
                writer.writerows([t, repr(v), label] for t, v in zip(ts, vs))
        written.append(tidy)
        if svg:
            chart = out_dir / f"{experiment}.svg"
            plotting.line_chart(chart, series, "t", "estimate", logx=True, title=f"estimator traces ({experiment}, seed 0)")
            written.append(chart)

    if "variance.csv" in names and svg:
        series = {}
        for r in _read_columns(out_dir / "variance.csv"):
            label = r["method"] if r["method"] == "online" else f"rb_n{r['n']}_k{r['k']}"
            ts, vs = series.setdefault(label, ([], []))
            ts.append(int(r["t"]))
            vs.append(float(r["variance"]))
        chart = out_dir / "variance.svg"
        plotting.line_chart(chart, series, "t", "variance across seeds", logx=True, logy=True, title="estimator variance")
        written.append(chart)
    return written


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj))
