"""Multi-actor trajectory collection and GAE annotation.

Batches are laid out actor-major: slot ``actor * horizon + t`` holds step
``t`` of actor ``actor``, so each actor's stream is a contiguous block and
``gae_annotate`` can reshape to ``(actors, horizon)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .envs import Environment
from .errors import DPPOError, InputError
from .network import PolicySnapshot, action_distribution, forward, log_softmax


@dataclass
class TrajectoryBatch:
    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    old_log_probs: np.ndarray
    old_values: np.ndarray
    bootstrap_values: np.ndarray
    n_actors: int
    horizon: int
    advantages: np.ndarray | None = None
    value_targets: np.ndarray | None = None

    def __len__(self):
        return self.actions.shape[0]

    @property
    def annotated(self) -> bool:
        return self.advantages is not None


@dataclass
class EpisodeStats:
    window: int = 100
    returns: list = field(default_factory=list)

    def append(self, ret: float) -> None:
        self.returns.append(float(ret))

    def rolling_mean(self) -> float:
        if not self.returns:
            return float("nan")
        recent = self.returns[-self.window :]
        return float(kernels.ordered_sum(np.asarray(recent)) / len(recent))


class ActorPool:
    """N environments with private RNG streams and in-progress episodes.

    Each actor owns a ``numpy.random.Generator`` spawned from ``seed``; action
    sampling and episode reset seeds come only from that stream, so a batch
    does not depend on the order actors are stepped in.
    """

    def __init__(self, envs: list[Environment], seed: int, stats: EpisodeStats | None = None):
        if not envs:
            raise InputError("need at least one environment")
        self.envs = envs
        children = np.random.SeedSequence(seed).spawn(len(envs))
        self.rngs = [np.random.default_rng(c) for c in children]
        self.stats = stats if stats is not None else EpisodeStats()
        self.obs = np.stack([self._reset(i) for i in range(len(envs))])
        self.running = np.zeros(len(envs))

    def _reset(self, i: int) -> np.ndarray:
        try:
            return self.envs[i].reset(int(self.rngs[i].integers(0, 2**63)))
        except DPPOError as exc:
            raise type(exc)(f"actor {i}: {exc}") from exc

    def __len__(self):
        return len(self.envs)


def sample_actions(probs: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling, one uniform per row."""
    cdf = np.cumsum(probs, axis=1)
    idx = np.sum(cdf <= uniforms[:, None], axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def collect(snapshot: PolicySnapshot, pool: ActorPool, horizon: int) -> TrajectoryBatch:
    """Roll every actor forward ``horizon`` steps under ``snapshot``.

    Finished episodes are reset in place so every actor contributes exactly
    ``horizon`` transitions; completed returns go to ``pool.stats``.
    """
    if horizon < 1:
        raise InputError(f"horizon must be >= 1, got {horizon}")
    n = len(pool)
    obs_dim = pool.obs.shape[1]
    obs = np.empty((n, horizon, obs_dim))
    actions = np.empty((n, horizon), dtype=np.int64)
    rewards = np.empty((n, horizon))
    dones = np.empty((n, horizon), dtype=bool)
    logp = np.empty((n, horizon))
    values = np.empty((n, horizon))

    for t in range(horizon):
        logits, v = forward(snapshot, pool.obs)
        probs = action_distribution(logits)
        u = np.array([rng.random() for rng in pool.rngs])
        a = sample_actions(probs, u)
        lp = log_softmax(logits)[np.arange(n), a]
        obs[:, t] = pool.obs
        actions[:, t] = a
        logp[:, t] = lp
        values[:, t] = v
        for i, env in enumerate(pool.envs):
            try:
                next_obs, r, done = env.step(int(a[i]))
            except DPPOError as exc:
                raise type(exc)(f"actor {i}: {exc}") from exc
            rewards[i, t] = r
            dones[i, t] = done
            pool.running[i] += r
            if done:
                pool.stats.append(pool.running[i])
                pool.running[i] = 0.0
                next_obs = pool._reset(i)
            pool.obs[i] = next_obs

    _, bootstrap = forward(snapshot, pool.obs)
    return TrajectoryBatch(
        observations=obs.reshape(n * horizon, obs_dim),
        actions=actions.reshape(-1),
        rewards=rewards.reshape(-1),
        dones=dones.reshape(-1),
        old_log_probs=logp.reshape(-1),
        old_values=values.reshape(-1),
        bootstrap_values=bootstrap,
        n_actors=n,
        horizon=horizon,
    )


def gae_annotate(batch: TrajectoryBatch, lam: float, gamma: float) -> TrajectoryBatch:
    """Fill ``advantages`` and ``value_targets`` by the backward GAE recursion.

    ``delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)`` and
    ``A_t = delta_t + gamma * lam * (1 - done_t) * A_{t+1}``; the value past
    the last stored step of each actor is its bootstrap value.
    """
    if not (0.0 <= lam <= 1.0 and 0.0 <= gamma <= 1.0):
        raise InputError(f"lambda and gamma must lie in [0, 1], got {lam}, {gamma}")
    shape = (batch.n_actors, batch.horizon)
    adv = kernels.gae(
        np.ascontiguousarray(batch.rewards.reshape(shape), dtype=np.float64),
        np.ascontiguousarray(batch.old_values.reshape(shape), dtype=np.float64),
        np.ascontiguousarray(batch.dones.reshape(shape), dtype=np.float64),
        np.ascontiguousarray(batch.bootstrap_values, dtype=np.float64),
        float(gamma),
        float(lam),
    ).reshape(-1)
    batch.advantages = adv
    batch.value_targets = adv + batch.old_values
    return batch
