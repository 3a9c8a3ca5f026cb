from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dppo.envs import (
    CartPole,
    ChainMDP,
    EnvSpec,
    FiniteMdpEnv,
    FiniteMdpSpec,
    chain_mdp,
    enumerate_tables,
    exact_visitation,
    make_env,
    random_finite_mdp,
)
from dppo.errors import InputError, UsageError


def one_hot(i, n):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def random_policy(rng, S, A):
    return rng.dirichlet(np.ones(A), size=S)


# -- type invariants ----------------------------------------------------------


def test_env_spec_invariants():
    EnvSpec(1, 2, 1)
    with pytest.raises(InputError):
        EnvSpec(0, 2, 1)
    with pytest.raises(InputError):
        EnvSpec(1, 1, 1)
    with pytest.raises(InputError):
        EnvSpec(1, 2, 0)


def test_finite_mdp_spec_rejects_bad_rows():
    P = np.ones((2, 2, 2)) * 0.5
    P[0, 0] = [0.6, 0.5]
    with pytest.raises(InputError):
        FiniteMdpSpec(P, np.zeros((2, 2)), [1.0, 0.0], 3)
    with pytest.raises(InputError):
        FiniteMdpSpec(np.ones((2, 2, 2)) * 0.5, np.zeros((2, 2)), [0.7, 0.7], 3)


# -- reset / step ---------------------------------------------------------------


def test_chain_reset_is_state_zero():
    env = ChainMDP(5)
    np.testing.assert_array_equal(env.reset(7), one_hot(0, 5))


def test_chain_steps():
    env = ChainMDP(3)
    env.reset(0)
    obs, r, done = env.step(1)
    np.testing.assert_array_equal(obs, one_hot(1, 3))
    assert (r, done) == (0.0, False)
    obs, r, done = env.step(1)
    np.testing.assert_array_equal(obs, one_hot(2, 3))
    assert (r, done) == (1.0, True)


def test_step_after_terminal_is_usage_error():
    env = ChainMDP(2)
    env.reset(0)
    env.step(1)
    with pytest.raises(UsageError):
        env.step(0)


def test_out_of_range_action():
    env = CartPole()
    env.reset(0)
    with pytest.raises(InputError):
        env.step(2)
    with pytest.raises(InputError):
        env.step(-1)


def test_cartpole_reset_deterministic_and_bounded():
    a, b = CartPole(), CartPole()
    np.testing.assert_array_equal(a.reset(123), b.reset(123))
    obs = CartPole().reset(0)
    assert obs.shape == (4,)
    assert np.all(np.abs(obs) <= 0.05)


def test_cartpole_euler_step_from_rest():
    # hand-integrated with exact rationals
    g, mc, mp, half, force, tau = (Fraction(x) for x in ("9.8", "1.0", "0.1", "0.5", "10", "0.02"))
    total = mc + mp
    temp = force / total  # sin(0) = 0, cos(0) = 1
    thetaacc = (0 - temp) / (half * (Fraction(4, 3) - mp / total))
    xacc = temp - mp * half * thetaacc / total
    expected = [0.0, float(tau * xacc), 0.0, float(tau * thetaacc)]
    assert float(xacc) == pytest.approx(400 / 41, rel=1e-12)

    env = CartPole()
    env.reset(0)
    env.set_state(np.zeros(4))
    obs, r, done = env.step(1)
    np.testing.assert_allclose(obs, expected, rtol=1e-12, atol=1e-15)
    assert r == 1.0 and not done


def test_same_seed_same_trajectory():
    def run():
        env = CartPole()
        out = [env.reset(99)]
        for a in [0, 1, 1, 0, 1, 0, 0, 1]:
            obs, r, done = env.step(a)
            out.append(np.append(obs, [r, done]))
        return np.concatenate(out)

    assert run().tobytes() == run().tobytes()


def test_cartpole_respects_horizon_cap():
    env = CartPole(horizon_cap=500)
    env.reset(3)
    steps = 0
    done = False
    while not done:
        # alternate pushes keep the pole up for a while; the cap must still bind
        _, _, done = env.step(steps % 2)
        steps += 1
    assert steps <= 500

    env = CartPole(horizon_cap=5)
    env.reset(0)
    for i in range(5):
        _, _, done = env.step(i % 2)
    assert done


def test_make_env_ids():
    assert isinstance(make_env("cartpole"), CartPole)
    chain = make_env("chain:6")
    assert chain.spec.observation_dim == 6 and chain.spec.action_count == 2
    rand = make_env("randmdp:4x3:11")
    assert isinstance(rand, FiniteMdpEnv)
    assert rand.spec.observation_dim == 4 and rand.spec.action_count == 3
    np.testing.assert_array_equal(
        rand.mdp.transition, make_env("randmdp:4x3:11").mdp.transition
    )
    for bad in ("", "chain", "chain:x", "randmdp:4:1", "pong"):
        with pytest.raises(InputError):
            make_env(bad)


def test_random_mdp_env_episode_length():
    env = FiniteMdpEnv(random_finite_mdp(3, 2, seed=0, horizon=7))
    env.reset(1)
    done, n = False, 0
    while not done:
        obs, r, done = env.step(n % 2)
        assert obs.sum() == 1.0 and -1 <= r <= 1
        n += 1
    assert n == 7


# -- enumeration ------------------------------------------------------------


def test_tables_single_step():
    mdp = FiniteMdpSpec(np.ones((1, 2, 1)), [[1.0, 0.0]], [1.0], horizon=1)
    t = enumerate_tables(mdp, [[0.5, 0.5]], discount=0.0)
    assert t.v_values[0] == pytest.approx(0.5, abs=1e-15)
    np.testing.assert_allclose(t.advantage[0], [0.5, -0.5], atol=1e-15)


def test_tables_no_lookahead_equals_reward():
    rng = np.random.default_rng(0)
    mdp = random_finite_mdp(5, 3, seed=4, horizon=1)
    t = enumerate_tables(mdp, random_policy(rng, 5, 3), discount=0.0)
    np.testing.assert_array_equal(t.q_values, mdp.reward)


def test_tables_reject_bad_policy():
    mdp = random_finite_mdp(3, 2, seed=0, horizon=3)
    with pytest.raises(InputError):
        enumerate_tables(mdp, np.full((3, 2), 0.6), 0.9)
    with pytest.raises(InputError):
        enumerate_tables(mdp, np.full((2, 2), 0.5), 0.9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), S=st.integers(1, 6), A=st.integers(2, 4),
       H=st.integers(1, 8), gamma=st.floats(0, 1))
def test_table_invariants(seed, S, A, H, gamma):
    rng = np.random.default_rng(seed)
    mdp = random_finite_mdp(S, A, seed=seed, horizon=H)
    pi = random_policy(rng, S, A)
    t = enumerate_tables(mdp, pi, gamma)
    np.testing.assert_allclose(np.sum(pi * t.q_values, axis=1), t.v_values, atol=1e-10)
    np.testing.assert_allclose(t.advantage, t.q_values - t.v_values[:, None], atol=1e-12)
    np.testing.assert_allclose(np.sum(pi * t.advantage, axis=1), 0.0, atol=1e-10)


GAMMA = 0.9


def _sample_episodes(mdp, pi, rng, n, start=None):
    """Vectorised Monte-Carlo episodes; returns (returns, visit counts per episode)."""
    S, A = pi.shape
    if start is None:
        s = rng.choice(S, size=n, p=mdp.initial_dist)
    else:
        s = np.full(n, start)
    cdf_pi = np.cumsum(pi, axis=1)
    cdf_p = np.cumsum(mdp.transition, axis=2)
    visits = np.zeros((n, S))
    returns = np.zeros(n)
    disc = 1.0
    for _ in range(mdp.horizon):
        visits[np.arange(n), s] += 1
        a = np.minimum((cdf_pi[s] <= rng.random(n)[:, None]).sum(axis=1), A - 1)
        returns += disc * mdp.reward[s, a]
        s = np.minimum((cdf_p[s, a] <= rng.random(n)[:, None]).sum(axis=1), S - 1)
        disc *= GAMMA
    return returns, visits



def test_tables_match_monte_carlo():
    rng = np.random.default_rng(2024)
    mdp = random_finite_mdp(4, 2, seed=5, horizon=6)
    pi = random_policy(rng, 4, 2)
    t = enumerate_tables(mdp, pi, GAMMA)
    for s in range(4):
        rets, _ = _sample_episodes(mdp, pi, rng, 250_000, start=s)
        se = rets.std(ddof=1) / np.sqrt(rets.size)
        assert abs(rets.mean() - t.v_values[s]) < 3 * se, (s, rets.mean(), t.v_values[s], se)


def test_visitation_cycle():
    P = np.zeros((2, 2, 2))
    P[0, :, 1] = 1.0
    P[1, :, 0] = 1.0
    mdp = FiniteMdpSpec(P, np.zeros((2, 2)), [1.0, 0.0], horizon=2)
    np.testing.assert_allclose(exact_visitation(mdp, np.full((2, 2), 0.5), 2), [0.5, 0.5])


def test_visitation_absorbing():
    mdp = FiniteMdpSpec(np.ones((1, 2, 1)), np.zeros((1, 2)), [1.0], horizon=4)
    np.testing.assert_allclose(exact_visitation(mdp, [[0.3, 0.7]], 4), [1.0])


def test_visitation_matches_sampling():
    rng = np.random.default_rng(77)
    mdp = random_finite_mdp(5, 3, seed=8, horizon=6)
    pi = random_policy(rng, 5, 3)
    exact = exact_visitation(mdp, pi, mdp.horizon)
    _, visits = _sample_episodes(mdp, pi, rng, 1_000_000)
    frac = visits / mdp.horizon
    se = frac.std(axis=0, ddof=1) / np.sqrt(frac.shape[0])
    np.testing.assert_array_less(np.abs(frac.mean(axis=0) - exact), 3 * se)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), S=st.integers(1, 8), H=st.integers(1, 12))
def test_visitation_is_distribution(seed, S, H):
    rng = np.random.default_rng(seed)
    mdp = random_finite_mdp(S, 2, seed=seed, horizon=H)
    p = exact_visitation(mdp, random_policy(rng, S, 2), H)
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) <= 1e-10


def test_chain_goal_is_absorbing_in_table_view():
    mdp = chain_mdp(4)
    assert mdp.transition[3, 0, 3] == 1.0 and mdp.transition[3, 1, 3] == 1.0
    assert mdp.reward[2, 1] == 1.0 and mdp.reward.sum() == 1.0
