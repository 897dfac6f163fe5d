"""Compiled inner loops.

Every kernel consumes pre-drawn uniforms so that the numpy ``Generator``
stays the single source of randomness. The uniform-consumption order of
each kernel matches its pure-Python counterpart one to one, which is what
lets tests compare the two paths bitwise.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def inverse_cdf(cdf_row, u):
    # smallest j with u < cdf[j]; last index guards against cdf[-1] < 1 by rounding
    last = cdf_row.shape[0] - 1
    for j in range(last):
        if u < cdf_row[j]:
            return j
    return last


@numba.njit(cache=True)
def simulate_chain(cdf, initial_state, u):
    """States of a chain path. ``u[0]`` picks the start when ``initial_state < 0``."""
    horizon = u.shape[0]
    num_states = cdf.shape[0]
    states = np.empty(horizon, dtype=np.int64)
    if initial_state < 0:
        s = min(int(u[0] * num_states), num_states - 1)
    else:
        s = initial_state
    for t in range(horizon):
        if t > 0:
            s = inverse_cdf(cdf[s], u[t])
        states[t] = s
    return states


@numba.njit(cache=True)
def fisher_yates(fill, k, u, scratch):
    """Partial Fisher-Yates over positions 1..fill; writes the draw into scratch[:k]."""
    for i in range(fill):
        scratch[i] = i + 1
    for i in range(k):
        j = i + int(u[i] * (fill - i))
        tmp = scratch[i]
        scratch[i] = scratch[j]
        scratch[j] = tmp


@numba.njit(cache=True)
def online_estimator(rewards, eta0):
    horizon = rewards.shape[0]
    eta = eta0
    out = np.empty(horizon)
    for t in range(horizon):
        eta = eta + (rewards[t] - eta) / float(t + 1)
        out[t] = eta
    return out


@numba.njit(cache=True)
def rb_estimator(rewards, n, k, eta0, u):
    """Running average of batch means; ``u`` is the flat stream of batch uniforms.

    At 0-based step t the buffer position p holds ``rewards[t - p + 1]``.
    """
    horizon = rewards.shape[0]
    scratch = np.empty(n, dtype=np.int64)
    out = np.empty(horizon)
    eta = eta0
    cursor = 0
    for t in range(horizon):
        fill = min(t + 1, n)
        ke = min(k, fill)
        fisher_yates(fill, ke, u[cursor:cursor + ke], scratch)
        cursor += ke
        s = 0.0
        for i in range(ke):
            s += rewards[t - scratch[i] + 1]
        eta = eta + (s / ke - eta) / float(t + 1)
        out[t] = eta
    return out


@numba.njit(cache=True)
def two_batch_means(z, n, k, start, u):
    """Means of two independent K-batches from a full buffer at each t >= start."""
    horizon = z.shape[0]
    count = horizon - start
    ya = np.empty(count)
    yb = np.empty(count)
    scratch = np.empty(n, dtype=np.int64)
    cursor = 0
    for i in range(count):
        t = start + i
        fisher_yates(n, k, u[cursor:cursor + k], scratch)
        cursor += k
        s = 0.0
        for j in range(k):
            s += z[t - scratch[j] + 1]
        ya[i] = s / k
        fisher_yates(n, k, u[cursor:cursor + k], scratch)
        cursor += k
        s = 0.0
        for j in range(k):
            s += z[t - scratch[j] + 1]
        yb[i] = s / k
    return ya, yb


@numba.njit(cache=True)
def softmax_row(psi_s, theta, out):
    m = -np.inf
    num_actions = psi_s.shape[0]
    for a in range(num_actions):
        v = 0.0
        for i in range(theta.shape[0]):
            v += psi_s[a, i] * theta[i]
        out[a] = v
        if v > m:
            m = v
    z = 0.0
    for a in range(num_actions):
        out[a] = np.exp(out[a] - m)
        z += out[a]
    for a in range(num_actions):
        out[a] /= z


@numba.njit(cache=True)
def frozen_transitions(policy_cdf, kernel_cdf, initial_state, u):
    """(s, a, s') sequence under a fixed policy; two uniforms per step (action, next state)."""
    horizon = u.shape[0]
    s_arr = np.empty(horizon, dtype=np.int64)
    a_arr = np.empty(horizon, dtype=np.int64)
    sn_arr = np.empty(horizon, dtype=np.int64)
    s = initial_state
    for t in range(horizon):
        a = inverse_cdf(policy_cdf[s], u[t, 0])
        sn = inverse_cdf(kernel_cdf[s, a], u[t, 1])
        s_arr[t] = s
        a_arr[t] = a
        sn_arr[t] = sn
        s = sn
    return s_arr, a_arr, sn_arr


@numba.njit(cache=True)
def batch_update_means(s_arr, a_arr, sn_arr, reward, phi, grad_log, w, eta, n, k, u):
    """Batch critic and actor updates at every t >= n - 1 (full buffer), frozen w and eta.

    ``grad_log[s, a]`` is the policy score. Returns per-draw critic (draws x d)
    and actor (draws x p) batch means.
    """
    horizon = s_arr.shape[0]
    draws = horizon - (n - 1)
    d = phi.shape[1]
    p = grad_log.shape[2]
    critic = np.zeros((draws, d))
    actor = np.zeros((draws, p))
    scratch = np.empty(n, dtype=np.int64)
    for i in range(draws):
        t = n - 1 + i
        fisher_yates(n, k, u[i * k:(i + 1) * k], scratch)
        for j in range(k):
            idx = t - scratch[j] + 1
            s = s_arr[idx]
            a = a_arr[idx]
            sn = sn_arr[idx]
            delta = reward[s, a] - eta
            for c in range(d):
                delta += (phi[sn, c] - phi[s, c]) * w[c]
            for c in range(d):
                critic[i, c] += delta * phi[s, c] / k
            for c in range(p):
                actor[i, c] += delta * grad_log[s, a, c] / k
    return critic, actor


@numba.njit(cache=True)
def actor_critic_loop(kernel_cdf, reward, phi, psi, theta0, w0, eta0, s0,
                      sched, radius, actor_sign, n, k, horizon_steps, u, stride):
    """Linear actor-critic with replay-buffer batches.

    ``sched`` rows are (scale, offset, exponent) for eta, w, theta. Per step
    the stream ``u`` provides one action uniform, one next-state uniform and
    then min(k, fill) batch uniforms. Returns snapshot arrays and the failing
    step (or -1).
    """
    num_actions = reward.shape[1]
    d = phi.shape[1]
    p = theta0.shape[0]

    theta = theta0.copy()
    w = w0.copy()
    eta = eta0
    s = s0

    buf_s = np.empty(n, dtype=np.int64)
    buf_a = np.empty(n, dtype=np.int64)
    buf_sn = np.empty(n, dtype=np.int64)
    head = 0
    fill = 0
    scratch = np.empty(n, dtype=np.int64)
    probs = np.empty(num_actions)
    probs_j = np.empty(num_actions)
    grad_theta = np.empty(p)
    grad_w = np.empty(d)

    num_snaps = (horizon_steps + stride - 1) // stride + 1
    snap_t = np.empty(num_snaps, dtype=np.int64)
    snap_eta = np.empty(num_snaps)
    snap_w = np.empty((num_snaps, d))
    snap_theta = np.empty((num_snaps, p))
    snap_active = np.zeros(num_snaps, dtype=np.bool_)
    snap_t[0] = 0
    snap_eta[0] = eta
    snap_w[0] = w
    snap_theta[0] = theta
    ns = 1
    failed = -1

    cursor = 0
    for t in range(horizon_steps):
        # act and push
        softmax_row(psi[s], theta, probs)
        cdf = 0.0
        a = num_actions - 1
        ua = u[cursor]
        for b in range(num_actions - 1):
            cdf += probs[b]
            if ua < cdf:
                a = b
                break
        sn = inverse_cdf(kernel_cdf[s, a], u[cursor + 1])
        cursor += 2
        head = (head - 1) % n
        buf_s[head] = s
        buf_a[head] = a
        buf_sn[head] = sn
        fill = min(fill + 1, n)

        # sample batch
        ke = min(k, fill)
        fisher_yates(fill, ke, u[cursor:cursor + ke], scratch)
        cursor += ke

        # TD errors and all three updates use pre-update eta, w and theta
        r_mean = 0.0
        for c in range(d):
            grad_w[c] = 0.0
        for c in range(p):
            grad_theta[c] = 0.0
        for i in range(ke):
            slot = (head + scratch[i] - 1) % n
            sj = buf_s[slot]
            aj = buf_a[slot]
            snj = buf_sn[slot]
            rj = reward[sj, aj]
            delta = rj - eta
            for c in range(d):
                delta += (phi[snj, c] - phi[sj, c]) * w[c]
            r_mean += rj
            for c in range(d):
                grad_w[c] += delta * phi[sj, c]
            softmax_row(psi[sj], theta, probs_j)
            for c in range(p):
                score = psi[sj, aj, c]
                for b in range(num_actions):
                    score -= probs_j[b] * psi[sj, b, c]
                grad_theta[c] += delta * score
        tf = float(t)
        a_eta = sched[0, 0] / (tf + sched[0, 1]) ** sched[0, 2]
        a_w = sched[1, 0] / (tf + sched[1, 1]) ** sched[1, 2]
        a_th = sched[2, 0] / (tf + sched[2, 1]) ** sched[2, 2]
        eta_new = eta + a_eta * (r_mean / ke - eta)
        for c in range(d):
            w[c] = w[c] + a_w * (grad_w[c] / ke)
        active = False
        for c in range(p):
            v = theta[c] + actor_sign * a_th * (grad_theta[c] / ke)
            if v > radius:
                v = radius
                active = True
            elif v < -radius:
                v = -radius
                active = True
            theta[c] = v
        eta = eta_new
        s = sn

        finite = np.isfinite(eta)
        for c in range(d):
            finite = finite and np.isfinite(w[c])
        for c in range(p):
            finite = finite and np.isfinite(theta[c])
        if not finite:
            failed = t
            break

        if (t + 1) % stride == 0 or t + 1 == horizon_steps:
            snap_t[ns] = t + 1
            snap_eta[ns] = eta
            snap_w[ns] = w
            snap_theta[ns] = theta
            snap_active[ns] = active
            ns += 1
    return (snap_t[:ns], snap_eta[:ns], snap_w[:ns], snap_theta[:ns],
            snap_active[:ns], s, failed)
