"""Hot numeric loops, each with a numba version and a numpy fallback.

Dispatch happens once at import (see ``_accel``). Every pair performs the
same float64 operations in the same order, so the choice of path does not
change results apart from libm rounding in ``cartpole_step``.
"""
from __future__ import annotations

import math

import numpy as np

from ._accel import kernel

# ---------------------------------------------------------------------------
# dense layer with a fixed, row-independent summation order
#
# BLAS gemm results for a row depend on the batch it is evaluated in. The
# forward pass must give bit-identical logits for a state whether it is
# evaluated alone at collection time or inside a minibatch later, so it
# accumulates over the input dimension strictly left to right.


def _dense_numpy(x, w, b):
    out = np.zeros((x.shape[0], w.shape[1]))
    for k in range(w.shape[0]):
        out += x[:, k : k + 1] * w[k]
    return out + b


@kernel(_dense_numpy)
def dense(x, w, b):
    n, d = x.shape
    m = w.shape[1]
    out = np.zeros((n, m))
    for i in range(n):
        for k in range(d):
            xik = x[i, k]
            for j in range(m):
                out[i, j] += xik * w[k, j]
        for j in range(m):
            out[i, j] += b[j]
    return out


# ---------------------------------------------------------------------------
# left-to-right summation


def _ordered_sum_numpy(x):
    if x.shape[0] == 0:
        return 0.0
    # cumsum is strictly sequential, unlike np.sum's pairwise reduction
    return float(np.cumsum(x)[-1])


@kernel(_ordered_sum_numpy)
def ordered_sum(x):
    acc = 0.0
    for i in range(x.shape[0]):
        acc += x[i]
    return acc


# ---------------------------------------------------------------------------
# GAE backward recursion over (actors, horizon) streams


def _gae_numpy(rewards, values, dones, bootstrap, gamma, lam):
    n, h = rewards.shape
    adv = np.empty((n, h))
    next_value = bootstrap.copy()
    next_adv = np.zeros(n)
    for t in range(h - 1, -1, -1):
        live = 1.0 - dones[:, t]
        delta = rewards[:, t] + gamma * next_value * live - values[:, t]
        next_adv = delta + gamma * lam * live * next_adv
        adv[:, t] = next_adv
        next_value = values[:, t]
    return adv


@kernel(_gae_numpy)
def gae(rewards, values, dones, bootstrap, gamma, lam):
    """Advantages for ``(n_actors, horizon)`` arrays; ``dones`` as 0.0/1.0."""
    n, h = rewards.shape
    adv = np.empty((n, h))
    for a in range(n):
        next_value = bootstrap[a]
        next_adv = 0.0
        for t in range(h - 1, -1, -1):
            live = 1.0 - dones[a, t]
            delta = rewards[a, t] + gamma * next_value * live - values[a, t]
            next_adv = delta + gamma * lam * live * next_adv
            adv[a, t] = next_adv
            next_value = values[a, t]
    return adv


# ---------------------------------------------------------------------------
# cart-pole Euler step

GRAVITY = 9.8
CART_MASS = 1.0
POLE_MASS = 0.1
HALF_LENGTH = 0.5
FORCE_MAG = 10.0
TAU = 0.02
THETA_LIMIT = 12 * 2 * math.pi / 360
X_LIMIT = 2.4


def _cartpole_step_numpy(states, actions):
    x, x_dot, theta, theta_dot = states[:, 0], states[:, 1], states[:, 2], states[:, 3]
    total_mass = POLE_MASS + CART_MASS
    polemass_length = POLE_MASS * HALF_LENGTH
    force = np.where(actions == 1, FORCE_MAG, -FORCE_MAG)
    costheta = np.cos(theta)
    sintheta = np.sin(theta)
    temp = (force + polemass_length * theta_dot * theta_dot * sintheta) / total_mass
    thetaacc = (GRAVITY * sintheta - costheta * temp) / (
        HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * costheta * costheta / total_mass)
    )
    xacc = temp - polemass_length * thetaacc * costheta / total_mass
    out = np.empty_like(states)
    out[:, 0] = x + TAU * x_dot
    out[:, 1] = x_dot + TAU * xacc
    out[:, 2] = theta + TAU * theta_dot
    out[:, 3] = theta_dot + TAU * thetaacc
    failed = (
        (out[:, 0] < -X_LIMIT)
        | (out[:, 0] > X_LIMIT)
        | (out[:, 2] < -THETA_LIMIT)
        | (out[:, 2] > THETA_LIMIT)
    )
    return out, failed


@kernel(_cartpole_step_numpy)
def cartpole_step(states, actions):
    """Advance (n, 4) states ``(x, x_dot, theta, theta_dot)`` one Euler step.

    Action 1 pushes right, 0 pushes left. Returns new states and failure mask.
    """
    n = states.shape[0]
    total_mass = POLE_MASS + CART_MASS
    polemass_length = POLE_MASS * HALF_LENGTH
    out = np.empty_like(states)
    failed = np.empty(n, dtype=np.bool_)
    for i in range(n):
        x = states[i, 0]
        x_dot = states[i, 1]
        theta = states[i, 2]
        theta_dot = states[i, 3]
        force = FORCE_MAG if actions[i] == 1 else -FORCE_MAG
        costheta = math.cos(theta)
        sintheta = math.sin(theta)
        temp = (force + polemass_length * theta_dot * theta_dot * sintheta) / total_mass
        thetaacc = (GRAVITY * sintheta - costheta * temp) / (
            HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * costheta * costheta / total_mass)
        )
        xacc = temp - polemass_length * thetaacc * costheta / total_mass
        nx = x + TAU * x_dot
        ntheta = theta + TAU * theta_dot
        out[i, 0] = nx
        out[i, 1] = x_dot + TAU * xacc
        out[i, 2] = ntheta
        out[i, 3] = theta_dot + TAU * thetaacc
        failed[i] = nx < -X_LIMIT or nx > X_LIMIT or ntheta < -THETA_LIMIT or ntheta > THETA_LIMIT
    return out, failed
