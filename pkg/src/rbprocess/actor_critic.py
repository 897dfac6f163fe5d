"""Linear actor-critic driven by replay-buffer batches, plus closed-form evaluators.

The learner keeps an average-reward estimate ``eta``, linear critic weights
``w`` over state features ``phi`` and a softmax-linear policy ``theta`` over
state-action features ``psi``. Each step acts, pushes the transition, draws a
uniform batch from the buffer and applies the batch-mean updates. All batch
TD errors use the pre-update ``eta`` and ``w``; ``theta`` is clamped into a
box after its update.

The expected-update helpers work from the stationary law of the chain
induced by a frozen policy::

    C = D (P - I),   b = D (r - eta e),   D = diag(mu)

and give ``Phi^T C Phi w + Phi^T b`` for the critic and the score-weighted
mean TD error for the actor.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import DegeneracyError, NumericalDivergenceError, PreconditionError
from .markov_env import Mdp, _rng, stationary_distribution
from .replay_core import ReplayBuffer, batch_uniform_count, sample_batch

DEFAULT_RADIUS = 10.0
SINGULAR_COND = 1e12
SPAN_TOL = 1e-8
NUM_BATCH_MEANS = 30


@dataclass(frozen=True)
class Transition:
    s: int
    a: int
    r: float
    s_next: int

    def __post_init__(self):
        if min(self.s, self.a, self.s_next) < 0:
            raise PreconditionError("state and action ids must be nonnegative")
        if abs(self.r) > 1.0:
            raise PreconditionError(f"reward {self.r} outside [-1, 1]")

    def check_ids(self, mdp: Mdp) -> None:
        if self.s >= mdp.num_states or self.s_next >= mdp.num_states or self.a >= mdp.num_actions:
            raise PreconditionError(f"transition {self} does not fit the MDP")


@dataclass(frozen=True)
class CriticFeatures:
    """State features ``phi[s]``; full column rank and ``e`` outside the span.

    ``check=False`` skips both checks, which is only useful for demonstrating
    what goes wrong downstream.
    """

    phi: np.ndarray
    check: bool = True

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim != 2 or phi.shape[1] < 1:
            raise PreconditionError(f"phi must be a |S| x d matrix, got shape {phi.shape}")
        if not np.all(np.isfinite(phi)):
            raise PreconditionError("phi must be finite")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        if self.check:
            if np.linalg.matrix_rank(phi) != phi.shape[1]:
                raise DegeneracyError("feature matrix is not full column rank")
            e = np.ones(phi.shape[0])
            coef, *_ = np.linalg.lstsq(phi, e, rcond=None)
            if np.linalg.norm(e - phi @ coef) <= SPAN_TOL:
                raise DegeneracyError("the all-ones vector lies in the feature span")

    @property
    def d(self) -> int:
        return self.phi.shape[1]

    @property
    def num_states(self) -> int:
        return self.phi.shape[0]


def tabular_minus_anchor(num_states: int, anchor: int = 0) -> CriticFeatures:
    """Indicators of every state except ``anchor``, which keeps value 0."""
    if not 0 <= anchor < num_states or num_states < 2:
        raise PreconditionError("need num_states >= 2 and a valid anchor")
    phi = np.delete(np.eye(num_states), anchor, axis=1)
    return CriticFeatures(phi)


def indicator_psi(num_states: int, num_actions: int) -> np.ndarray:
    """State-action indicator features, shape (S, A, S*A)."""
    return np.eye(num_states * num_actions).reshape(num_states, num_actions, num_states * num_actions)


@dataclass(frozen=True)
class SoftmaxPolicy:
    theta: np.ndarray
    psi: np.ndarray  # (S, A, p)

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        psi = np.array(self.psi, dtype=float)
        if psi.ndim != 3 or psi.shape[2] != theta.shape[0]:
            raise PreconditionError("psi must have shape (S, A, p) with p = len(theta)")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "psi", psi)

    @classmethod
    def uniform(cls, num_states: int, num_actions: int) -> "SoftmaxPolicy":
        return cls(np.zeros(num_states * num_actions), indicator_psi(num_states, num_actions))

    def with_theta(self, theta) -> "SoftmaxPolicy":
        return replace(self, theta=np.asarray(theta, dtype=float))

    def probs(self) -> np.ndarray:
        s, a, _ = self.psi.shape
        out = np.empty((s, a))
        for si in range(s):
            _kernels.softmax_row(self.psi[si], self.theta, out[si])
        return out

    def grad_log(self) -> np.ndarray:
        """Score ``psi(s, a) - sum_b pi(b|s) psi(s, b)``, shape (S, A, p)."""
        pi = self.probs()
        return self.psi - np.einsum("sb,sbp->sp", pi, self.psi)[:, None, :]


@dataclass(frozen=True)
class StepSchedule:
    """``alpha_t = scale / (t + offset) ** exponent`` with 0-based ``t``.

    ``scale = 0`` is allowed and freezes the parameter it drives.
    """

    scale: float = 1.0
    offset: float = 1.0
    exponent: float = 0.6

    def __post_init__(self):
        if self.scale < 0:
            raise PreconditionError("schedule scale must be nonnegative")
        if self.offset < 1:
            raise PreconditionError("schedule offset must be >= 1")
        if not 0.5 < self.exponent <= 1.0:
            raise PreconditionError("schedule exponent must lie in (0.5, 1]")

    @property
    def frozen(self) -> bool:
        return self.scale == 0

    def rate(self, t: int) -> float:
        return self.scale / (t + self.offset) ** self.exponent

    def as_row(self) -> tuple[float, float, float]:
        return (float(self.scale), float(self.offset), float(self.exponent))


@dataclass(frozen=True)
class Schedules:
    eta: StepSchedule = field(default_factory=lambda: StepSchedule(1.0, 1.0, 0.6))
    w: StepSchedule = field(default_factory=lambda: StepSchedule(1.0, 1.0, 0.6))
    theta: StepSchedule = field(default_factory=lambda: StepSchedule(1.0, 1.0, 0.9))

    def __post_init__(self):
        if self.eta.frozen or self.w.frozen:
            raise PreconditionError("eta and critic schedules must have positive scale")
        if not self.theta.frozen and self.theta.exponent <= self.w.exponent:
            raise PreconditionError("actor exponent must exceed the critic exponent (two timescales)")

    def as_array(self) -> np.ndarray:
        return np.array([self.eta.as_row(), self.w.as_row(), self.theta.as_row()])

    @classmethod
    def frozen_actor(cls, eta: StepSchedule | None = None, w: StepSchedule | None = None) -> "Schedules":
        return cls(eta or StepSchedule(1.0, 1.0, 0.6), w or StepSchedule(1.0, 1.0, 0.6),
                   StepSchedule(0.0, 1.0, 1.0))


@dataclass(frozen=True)
class ActorCriticState:
    theta: np.ndarray
    w: np.ndarray
    eta: float
    t: int
    schedules: Schedules
    theta_box: float = DEFAULT_RADIUS
    env_state: int = 0
    projection_active: bool = False

    def __post_init__(self):
        if self.theta_box <= 0:
            raise PreconditionError("theta_box must be positive")


def td_error(o: Transition, eta: float, w, features: CriticFeatures) -> float:
    w = np.asarray(w, dtype=float)
    return float(o.r - eta + features.phi[o.s_next] @ w - features.phi[o.s] @ w)


def project_theta(theta, radius: float) -> np.ndarray:
    if radius <= 0:
        raise PreconditionError("radius must be positive")
    return np.clip(np.asarray(theta, dtype=float), -radius, radius)


def _inverse_cdf(row: np.ndarray, u: float) -> int:
    return int(_kernels.inverse_cdf(np.cumsum(row), u))


def ac_step(state: ActorCriticState, mdp: Mdp, features: CriticFeatures, psi: np.ndarray,
            buffer: ReplayBuffer, k: int, rng, actor_sign: float = 1.0):
    """One learner step; returns ``(new_state, transition)``.

    Consumes two uniforms (action, next state) and then ``min(k, fill)`` batch
    uniforms from ``rng``, the same order as the compiled loop.
    """
    rng = _rng(rng)
    s = state.env_state
    probs = np.empty(mdp.num_actions)
    _kernels.softmax_row(psi[s], state.theta, probs)
    ua, us = rng.random(2)
    a = _inverse_cdf(probs, ua)
    sn = _inverse_cdf(mdp.transition[s, a], us)
    o = Transition(s, a, float(mdp.reward[s, a]), sn)
    buffer.push(o)

    batch = sample_batch(buffer, min(k, buffer.fill), rng)
    ke = batch.k
    phi = features.phi
    grad_w = np.zeros(features.d)
    grad_theta = np.zeros(state.theta.shape[0])
    r_mean = 0.0
    probs_j = np.empty(mdp.num_actions)
    for pos in batch.positions:
        oj = buffer[pos]
        delta = td_error(oj, state.eta, state.w, features)
        r_mean += oj.r
        grad_w += delta * phi[oj.s]
        _kernels.softmax_row(psi[oj.s], state.theta, probs_j)
        grad_theta += delta * (psi[oj.s, oj.a] - probs_j @ psi[oj.s])

    sch = state.schedules
    t = state.t
    eta = state.eta + sch.eta.rate(t) * (r_mean / ke - state.eta)
    w = state.w + sch.w.rate(t) * (grad_w / ke)
    raw = state.theta + actor_sign * sch.theta.rate(t) * (grad_theta / ke)
    theta = project_theta(raw, state.theta_box)
    active = bool(np.any(theta != raw))
    return replace(state, theta=theta, w=w, eta=float(eta), t=t + 1, env_state=sn,
                   projection_active=active), o


@dataclass(frozen=True)
class ExpectedUpdateMatrices:
    c_theta: np.ndarray  # Phi^T D (P - I) Phi
    b_theta_vec: np.ndarray  # Phi^T D (r - eta e)
    eta: float = 0.0
    mu: np.ndarray | None = None

    def __post_init__(self):
        if not (np.all(np.isfinite(self.c_theta)) and np.all(np.isfinite(self.b_theta_vec))):
            raise DegeneracyError("expected-update matrices are not finite")


def _induced(mdp: Mdp, policy: SoftmaxPolicy):
    pi = policy.probs()
    chain = mdp.induced_chain(pi)
    mu = stationary_distribution(chain).probs
    return pi, chain, mu


def expected_update_matrices(mdp: Mdp, policy: SoftmaxPolicy, features: CriticFeatures) -> ExpectedUpdateMatrices:
    _, chain, mu = _induced(mdp, policy)
    phi = features.phi
    eta = float(mu @ chain.state_reward)
    dm = np.diag(mu)
    c = dm @ (chain.transition - np.eye(chain.num_states))
    b = dm @ (chain.state_reward - eta)
    return ExpectedUpdateMatrices(phi.T @ c @ phi, phi.T @ b, eta, mu)


def expected_critic_update(mats: ExpectedUpdateMatrices, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != mats.b_theta_vec.shape:
        raise PreconditionError(f"w has shape {w.shape}, expected {mats.b_theta_vec.shape}")
    return mats.c_theta @ w + mats.b_theta_vec


def critic_fixed_point(mats: ExpectedUpdateMatrices) -> np.ndarray:
    """Unique zero of the expected critic update."""
    c = mats.c_theta
    if np.linalg.cond(c) > SINGULAR_COND:
        raise DegeneracyError("critic matrix is singular; is e in the feature span?")
    try:
        w = np.linalg.solve(c, -mats.b_theta_vec)
    except np.linalg.LinAlgError as exc:
        raise DegeneracyError("critic matrix is singular") from exc
    residual = np.max(np.abs(c @ w + mats.b_theta_vec))
    if residual > 1e-10:
        raise DegeneracyError(f"fixed-point residual {residual:.3g} exceeds 1e-10")
    return w


def expected_actor_update(mdp: Mdp, policy: SoftmaxPolicy, features: CriticFeatures, w, eta: float) -> np.ndarray:
    """``sum_s mu(s) sum_a pi(a|s) delta_bar(s, a) grad log pi(a|s)``."""
    pi, _, mu = _induced(mdp, policy)
    v = features.phi @ np.asarray(w, dtype=float)
    delta_bar = mdp.reward - eta + mdp.transition @ v - v[:, None]
    return np.einsum("s,sa,sa,sap->p", mu, pi, delta_bar, policy.grad_log())


@dataclass(frozen=True)
class GradientIdentityCheck:
    grad_eta: np.ndarray
    actor_update: np.ndarray
    xi: np.ndarray

    @property
    def residual(self) -> np.ndarray:
        return self.grad_eta - self.actor_update - self.xi

    @property
    def max_abs_residual(self) -> float:
        return float(np.max(np.abs(self.residual)))


def _eta_w_vbar(mdp: Mdp, policy: SoftmaxPolicy, features: CriticFeatures):
    mats = expected_update_matrices(mdp, policy, features)
    w = critic_fixed_point(mats)
    v = features.phi @ w
    q = mdp.reward - mats.eta + mdp.transition @ v
    vbar = np.sum(policy.probs() * q, axis=1)
    return mats.eta, w, vbar, mats.mu


def gradient_identity_check(mdp: Mdp, policy: SoftmaxPolicy, features: CriticFeatures,
                            h: float = 1e-4) -> GradientIdentityCheck:
    """Finite-difference check that the expected actor update at the critic
    fixed point equals ``grad eta`` minus the critic-bias term
    ``xi = sum_s mu(s) (phi(s)^T grad w - grad Vbar(s))``.

    ``grad eta``, ``grad w`` and ``grad Vbar`` all come from central
    differences, re-solving the fixed point at each perturbed ``theta``.
    """
    eta, w, _, mu = _eta_w_vbar(mdp, policy, features)
    p = policy.theta.shape[0]
    grad_eta = np.empty(p)
    grad_w = np.empty((features.d, p))
    grad_vbar = np.empty((mdp.num_states, p))
    for i in range(p):
        step = np.zeros(p)
        step[i] = h
        eta_p, w_p, vb_p, _ = _eta_w_vbar(mdp, policy.with_theta(policy.theta + step), features)
        eta_m, w_m, vb_m, _ = _eta_w_vbar(mdp, policy.with_theta(policy.theta - step), features)
        grad_eta[i] = (eta_p - eta_m) / (2 * h)
        grad_w[:, i] = (w_p - w_m) / (2 * h)
        grad_vbar[:, i] = (vb_p - vb_m) / (2 * h)
    xi = mu @ (features.phi @ grad_w - grad_vbar)
    actor = expected_actor_update(mdp, policy, features, w, eta)
    return GradientIdentityCheck(grad_eta, actor, xi)


@dataclass(frozen=True)
class MonteCarloUpdates:
    critic_mean: np.ndarray
    critic_se: np.ndarray
    actor_mean: np.ndarray
    actor_se: np.ndarray
    draws: int


def _batch_means(x: np.ndarray, num_batches: int = NUM_BATCH_MEANS):
    usable = len(x) - len(x) % num_batches
    means = x[:usable].reshape(num_batches, -1, x.shape[1]).mean(axis=1)
    return x.mean(axis=0), means.std(axis=0, ddof=1) / np.sqrt(num_batches)


def monte_carlo_batch_updates(mdp: Mdp, policy: SoftmaxPolicy, features: CriticFeatures, w, eta: float,
                              n: int, k: int, draws: int, seed) -> MonteCarloUpdates:
    """Mean batch critic and actor updates with ``w``, ``eta`` and the policy frozen.

    The chain starts from its stationary law; one batch is drawn at each
    step once the buffer is full. Standard errors come from 30 batch means,
    since successive batches share buffer contents.
    """
    if not 1 <= k <= n:
        raise PreconditionError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = _rng(seed)
    pi, _, mu = _induced(mdp, policy)
    s0 = int(_kernels.inverse_cdf(np.cumsum(mu), rng.random()))
    horizon = draws + n - 1
    u = rng.random((horizon, 2))
    s_arr, a_arr, sn_arr = _kernels.frozen_transitions(np.cumsum(pi, axis=1), np.cumsum(mdp.transition, axis=2),
                                                       s0, u)
    ub = rng.random(draws * k)
    critic, actor = _kernels.batch_update_means(s_arr, a_arr, sn_arr, np.ascontiguousarray(mdp.reward),
                                                np.ascontiguousarray(features.phi), policy.grad_log(),
                                                np.asarray(w, dtype=float), float(eta), n, k, ub)
    cm, cse = _batch_means(critic)
    am, ase = _batch_means(actor)
    return MonteCarloUpdates(cm, cse, am, ase, draws)


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    eta: np.ndarray
    w: np.ndarray
    theta: np.ndarray
    projection_active: np.ndarray
    final_env_state: int
    seed: object = None

    @property
    def theta_norm(self) -> np.ndarray:
        return np.max(np.abs(self.theta), axis=1)

    def final(self) -> tuple[float, np.ndarray, np.ndarray]:
        return float(self.eta[-1]), self.w[-1].copy(), self.theta[-1].copy()

    def to_csv(self, path) -> None:
        d = self.w.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "eta", *(f"w_{i}" for i in range(d)), "theta_norm", "projection_active"])
            for i in range(len(self.t)):
                writer.writerow([int(self.t[i]), repr(float(self.eta[i])),
                                 *(repr(float(x)) for x in self.w[i]),
                                 repr(float(self.theta_norm[i])), int(self.projection_active[i])])


def run_actor_critic(mdp: Mdp, features: CriticFeatures, policy_init: SoftmaxPolicy, schedules: Schedules,
                     n: int, k: int, horizon: int, seed, *, radius: float = DEFAULT_RADIUS,
                     actor_sign: float = 1.0, stride: int = 1000, w0=None, eta0: float = 0.0,
                     initial_state: int | None = None) -> Trajectory:
    """Full actor-critic loop over ``horizon`` steps with snapshots every ``stride`` steps.

    Draws one uniform for the start state (used only when ``initial_state`` is
    None) and then the whole step stream up front; see :func:`ac_step` for the
    per-step order.
    """
    if not 1 <= k <= n:
        raise PreconditionError(f"need 1 <= k <= n, got k={k}, n={n}")
    if horizon < 1 or stride < 1:
        raise PreconditionError("horizon and stride must be positive")
    if features.num_states != mdp.num_states or policy_init.psi.shape[:2] != mdp.transition.shape[:2]:
        raise PreconditionError("features or policy do not match the MDP")
    if initial_state is not None and not 0 <= initial_state < mdp.num_states:
        raise PreconditionError(f"initial_state {initial_state} out of range")
    rng = _rng(seed)
    u0 = rng.random()
    s0 = min(int(u0 * mdp.num_states), mdp.num_states - 1) if initial_state is None else int(initial_state)
    u = rng.random(2 * horizon + batch_uniform_count(horizon, n, k))
    w_init = np.zeros(features.d) if w0 is None else np.asarray(w0, dtype=float)
    theta0 = project_theta(policy_init.theta, radius)
    snap_t, snap_eta, snap_w, snap_theta, snap_active, s_final, failed = _kernels.actor_critic_loop(
        np.cumsum(mdp.transition, axis=2), np.ascontiguousarray(mdp.reward), np.ascontiguousarray(features.phi),
        np.ascontiguousarray(policy_init.psi), theta0, w_init.copy(), float(eta0), s0,
        schedules.as_array(), float(radius), float(actor_sign), int(n), int(k), int(horizon), u, int(stride))
    if failed >= 0:
        raise NumericalDivergenceError(int(failed))
    return Trajectory(snap_t, snap_eta, snap_w, snap_theta, snap_active, int(s_final),
                      seed if isinstance(seed, int) else None)


def eta_grid(mdp: Mdp, psi: np.ndarray, values) -> np.ndarray:
    """Exact average reward for every theta in the Cartesian grid ``values ** p``."""
    p = psi.shape[2]
    out = []
    for theta in itertools.product(values, repeat=p):
        chain = mdp.induced_chain(SoftmaxPolicy(np.array(theta), psi).probs())
        out.append(stationary_distribution(chain).probs @ chain.state_reward)
    return np.array(out)


# Small deterministic test MDPs.

def random_mdp(num_states: int, num_actions: int, seed: int, reward_scale: float = 1.0) -> Mdp:
    """Dense random MDP: Dirichlet(1) rows mixed with 10% uniform mass, rewards in [-scale, scale]."""
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(num_states), size=(num_states, num_actions))
    p = 0.9 * p + 0.1 / num_states
    p /= p.sum(axis=2, keepdims=True)
    r = rng.uniform(-reward_scale, reward_scale, size=(num_states, num_actions))
    return Mdp(p, r)


def improvement_mdp() -> Mdp:
    """Three states, two actions; action 1 pays more everywhere and steers toward the best state."""
    p = np.array([
        [[0.6, 0.3, 0.1], [0.2, 0.3, 0.5]],
        [[0.5, 0.4, 0.1], [0.1, 0.3, 0.6]],
        [[0.4, 0.4, 0.2], [0.1, 0.2, 0.7]],
    ])
    r = np.array([[0.0, 0.4], [0.1, 0.6], [0.2, 1.0]])
    return Mdp(p, r)


def five_state_setup():
    """5-state 2-action random MDP, tabular-minus-anchor critic, a fixed non-uniform softmax policy."""
    mdp = random_mdp(5, 2, seed=7)
    policy = SoftmaxPolicy(np.random.default_rng(5).normal(0.0, 0.5, 10), indicator_psi(5, 2))
    return mdp, tabular_minus_anchor(5), policy


def three_state_setup():
    mdp = random_mdp(3, 2, seed=11)
    policy = SoftmaxPolicy(np.random.default_rng(3).normal(0.0, 0.5, 6), indicator_psi(3, 2))
    return mdp, tabular_minus_anchor(3), policy
