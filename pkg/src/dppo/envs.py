"""Desk-scale environments and exact finite-MDP enumeration.

Three environment families are provided:

* ``CartPole`` -- classic-control pole balancing with Euler integration.
* ``ChainMDP`` -- a deterministic corridor; reaching the right end pays 1.
* ``FiniteMdpEnv`` over a seeded random MDP (``random_finite_mdp``).

Finite MDPs emit one-hot observations so that the same dense network serves
every environment. ``enumerate_tables`` and ``exact_visitation`` compute exact
quantities on a :class:`FiniteMdpSpec` by dynamic programming; they back the
variance identity checks.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .kernels import cartpole_step
from .errors import InputError, UsageError

_PROB_TOL = 1e-12


@dataclass(frozen=True)
class EnvSpec:
    observation_dim: int
    action_count: int
    horizon_cap: int

    def __post_init__(self):
        if self.observation_dim < 1:
            raise InputError(f"observation_dim must be >= 1, got {self.observation_dim}")
        if self.action_count < 2:
            raise InputError(f"action_count must be >= 2, got {self.action_count}")
        if self.horizon_cap < 1:
            raise InputError(f"horizon_cap must be >= 1, got {self.horizon_cap}")


@dataclass(frozen=True)
class Transition:
    observation: np.ndarray
    action: int
    reward: float
    done: bool
    next_observation: np.ndarray


@dataclass(frozen=True, eq=False)
class FiniteMdpSpec:
    """Tabular MDP: ``transition[s, a, s']``, ``reward[s, a]``, start distribution."""

    transition: np.ndarray
    reward: np.ndarray
    initial_dist: np.ndarray
    horizon: int

    def __post_init__(self):
        P = np.array(self.transition, dtype=np.float64)
        R = np.array(self.reward, dtype=np.float64)
        rho = np.array(self.initial_dist, dtype=np.float64)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise InputError(f"transition must have shape (S, A, S), got {P.shape}")
        S, A, _ = P.shape
        if R.shape != (S, A):
            raise InputError(f"reward must have shape {(S, A)}, got {R.shape}")
        if rho.shape != (S,):
            raise InputError(f"initial_dist must have shape {(S,)}, got {rho.shape}")
        if np.any(P < 0) or np.any(P > 1) or np.any(rho < 0) or np.any(rho > 1):
            raise InputError("probabilities must lie in [0, 1]")
        if np.max(np.abs(P.sum(axis=2) - 1.0)) > _PROB_TOL:
            raise InputError("every transition row must sum to 1")
        if abs(rho.sum() - 1.0) > _PROB_TOL:
            raise InputError("initial_dist must sum to 1")
        if not np.all(np.isfinite(R)):
            raise InputError("rewards must be finite")
        if self.horizon < 1:
            raise InputError(f"horizon must be >= 1, got {self.horizon}")
        for name, arr in (("transition", P), ("reward", R), ("initial_dist", rho)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def state_count(self) -> int:
        return self.transition.shape[0]

    @property
    def action_count(self) -> int:
        return self.transition.shape[1]


@dataclass(frozen=True, eq=False)
class FiniteMdpTables:
    q_values: np.ndarray
    v_values: np.ndarray
    advantage: np.ndarray


# ---------------------------------------------------------------------------
# Environment base


class Environment:
    """Single-threaded episodic environment.

    Subclasses implement ``_reset(rng)`` and ``_step(action)``; the base class
    owns step counting, the horizon cap and the terminal-state guard.
    """

    spec: EnvSpec

    def __init__(self):
        self._t = 0
        self._done = True
        self._rng = None

    @property
    def steps(self) -> int:
        return self._t

    @property
    def done(self) -> bool:
        return self._done

    def reset(self, seed: int) -> np.ndarray:
        self._rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self._t = 0
        self._done = False
        return self._reset(self._rng)

    def step(self, action):
        if self._done:
            raise UsageError("step() called on a terminal environment; call reset() first")
        a = int(action)
        if a != action or not 0 <= a < self.spec.action_count:
            raise InputError(f"action {action!r} outside [0, {self.spec.action_count})")
        obs, reward, terminal = self._step(a)
        self._t += 1
        self._done = bool(terminal or self._t >= self.spec.horizon_cap)
        return obs, float(reward), self._done

    def _reset(self, rng):
        raise NotImplementedError

    def _step(self, action):
        raise NotImplementedError


# ---------------------------------------------------------------------------
# CartPole

CARTPOLE_CAP = 500


class CartPole(Environment):
    """Pole balancing; reward 1 per step, capped at 500 steps."""

    def __init__(self, horizon_cap: int = CARTPOLE_CAP):
        super().__init__()
        self.spec = EnvSpec(observation_dim=4, action_count=2, horizon_cap=horizon_cap)
        self._state = np.zeros((1, 4))
        self._action_buf = np.zeros(1, dtype=np.int64)

    @property
    def state(self) -> np.ndarray:
        return self._state[0].copy()

    def set_state(self, state) -> None:
        """Place the pole at an arbitrary state (testing hook)."""
        self._state = np.asarray(state, dtype=np.float64).reshape(1, 4).copy()
        self._done = False

    def _reset(self, rng):
        self._state = rng.uniform(-0.05, 0.05, size=(1, 4))
        return self._state[0].copy()

    def _step(self, action):
        self._action_buf[0] = action
        self._state, failed = cartpole_step(self._state, self._action_buf)
        return self._state[0].copy(), 1.0, bool(failed[0])


# ---------------------------------------------------------------------------
# Finite MDPs


def _one_hot(index: int, size: int) -> np.ndarray:
    v = np.zeros(size)
    v[index] = 1.0
    return v


class FiniteMdpEnv(Environment):
    """Sampled episodes of a :class:`FiniteMdpSpec` with one-hot observations.

    ``terminal_states`` end the episode on arrival. The episode is also cut at
    ``mdp.horizon`` steps, which keeps the environment consistent with the
    finite-horizon tables of :func:`enumerate_tables`.
    """

    def __init__(self, mdp: FiniteMdpSpec, terminal_states=()):
        super().__init__()
        self.mdp = mdp
        self.terminal_states = frozenset(int(s) for s in terminal_states)
        self.spec = EnvSpec(
            observation_dim=mdp.state_count,
            action_count=mdp.action_count,
            horizon_cap=mdp.horizon,
        )
        self._cdf_init = np.cumsum(mdp.initial_dist)
        self._cdf_next = np.cumsum(mdp.transition, axis=2)
        self.state = 0

    def _draw(self, cdf) -> int:
        u = self._rng.random()
        return int(min(np.searchsorted(cdf, u, side="right"), cdf.shape[0] - 1))

    def _reset(self, rng):
        self.state = self._draw(self._cdf_init)
        return _one_hot(self.state, self.mdp.state_count)

    def _step(self, action):
        reward = self.mdp.reward[self.state, action]
        self.state = self._draw(self._cdf_next[self.state, action])
        return (
            _one_hot(self.state, self.mdp.state_count),
            reward,
            self.state in self.terminal_states,
        )


def chain_mdp(n_states: int, horizon: int | None = None) -> FiniteMdpSpec:
    """Corridor of ``n_states``; action 0 moves left, 1 moves right.

    Entering the last state pays 1 and ends the episode (the goal is encoded
    as absorbing with zero reward for the tabular view).
    """
    if n_states < 2:
        raise InputError(f"chain needs at least 2 states, got {n_states}")
    S = n_states
    P = np.zeros((S, 2, S))
    R = np.zeros((S, 2))
    goal = S - 1
    for s in range(S):
        if s == goal:
            P[s, :, s] = 1.0
            continue
        P[s, 0, max(s - 1, 0)] = 1.0
        P[s, 1, s + 1] = 1.0
        if s + 1 == goal:
            R[s, 1] = 1.0
    rho = _one_hot(0, S)
    return FiniteMdpSpec(P, R, rho, horizon if horizon is not None else 4 * S)


class ChainMDP(FiniteMdpEnv):
    def __init__(self, n_states: int, horizon: int | None = None):
        super().__init__(chain_mdp(n_states, horizon), terminal_states=(n_states - 1,))


def random_finite_mdp(
    n_states: int, n_actions: int, seed: int, horizon: int = 50
) -> FiniteMdpSpec:
    """Dirichlet(1) transition rows and start distribution, rewards U[-1, 1]."""
    if n_states < 1 or n_actions < 2:
        raise InputError("random MDP needs >= 1 state and >= 2 actions")
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    R = rng.uniform(-1.0, 1.0, size=(n_states, n_actions))
    rho = rng.dirichlet(np.ones(n_states))
    # renormalise in float64 so row sums meet the 1e-12 contract exactly enough
    P /= P.sum(axis=2, keepdims=True)
    rho /= rho.sum()
    return FiniteMdpSpec(P, R, rho, horizon)


# ---------------------------------------------------------------------------
# Exact enumeration


def _check_policy(mdp: FiniteMdpSpec, policy) -> np.ndarray:
    pi = np.asarray(policy, dtype=np.float64)
    if pi.shape != (mdp.state_count, mdp.action_count):
        raise InputError(
            f"policy must have shape {(mdp.state_count, mdp.action_count)}, got {pi.shape}"
        )
    if np.any(pi < 0) or np.max(np.abs(pi.sum(axis=1) - 1.0)) > 1e-10:
        raise InputError("policy rows must be probability vectors")
    return pi


def enumerate_tables(mdp: FiniteMdpSpec, policy, discount: float) -> FiniteMdpTables:
    """Finite-horizon Q, V and A at the first step, by backward induction."""
    pi = _check_policy(mdp, policy)
    if not 0.0 <= discount <= 1.0:
        raise InputError(f"discount must lie in [0, 1], got {discount}")
    v = np.zeros(mdp.state_count)
    q = mdp.reward.copy()
    for _ in range(mdp.horizon):
        q = mdp.reward + discount * (mdp.transition @ v)
        v = np.sum(pi * q, axis=1)
    return FiniteMdpTables(q_values=q, v_values=v, advantage=q - v[:, None])


def exact_visitation(mdp: FiniteMdpSpec, policy, horizon: int) -> np.ndarray:
    """Time-averaged occupancy ``(1/H) sum_t Pr(S_t = s)`` for t = 1..H."""
    pi = _check_policy(mdp, policy)
    if horizon < 1:
        raise InputError(f"horizon must be >= 1, got {horizon}")
    # state-to-state kernel under the policy
    kernel_ss = np.einsum("sa,sat->st", pi, mdp.transition)
    dist = mdp.initial_dist.copy()
    total = np.zeros(mdp.state_count)
    for _ in range(horizon):
        total += dist
        dist = dist @ kernel_ss
    return total / horizon


# ---------------------------------------------------------------------------
# Environment ids

_CHAIN_RE = re.compile(r"^chain:(\d+)$")
_RANDMDP_RE = re.compile(r"^randmdp:(\d+)x(\d+):(\d+)$")


def make_env(env_id: str) -> Environment:
    """Build an environment from ``cartpole``, ``chain:<n>`` or
    ``randmdp:<states>x<actions>:<seed>``."""
    env_id = env_id.strip()
    if env_id == "cartpole":
        return CartPole()
    m = _CHAIN_RE.match(env_id)
    if m:
        return ChainMDP(int(m.group(1)))
    m = _RANDMDP_RE.match(env_id)
    if m:
        S, A, seed = (int(g) for g in m.groups())
        return FiniteMdpEnv(random_finite_mdp(S, A, seed))
    raise InputError(
        f"unknown environment id {env_id!r}; expected cartpole, chain:<n> "
        "or randmdp:<states>x<actions>:<seed>"
    )


def finite_mdp_of(env: Environment) -> FiniteMdpSpec | None:
    """Tabular model behind an environment, or None for continuous ones."""
    return getattr(env, "mdp", None)
