import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dppo import autodiff as ad
from dppo.errors import InputError, NumericError
from dppo.network import (
    NetworkArchitecture,
    ParameterVector,
    PolicySnapshot,
    action_distribution,
    entropy,
    finite_difference_gradient,
    forward,
    gradient,
    init_params,
    log_prob,
)

ARCH = NetworkArchitecture(4, (8, 8), 3, "tanh")


def test_architecture_validation():
    with pytest.raises(InputError):
        NetworkArchitecture(4, (8, 0), 2)
    with pytest.raises(InputError):
        NetworkArchitecture(4, (8,), 2, "sigmoid")
    assert NetworkArchitecture(2, (3,), 2).param_count == (2 * 3 + 3) + (3 * 2 + 2) + (3 + 1)


def test_parameter_vector_invariants():
    with pytest.raises(InputError):
        ParameterVector(np.zeros(3), ARCH)
    bad = np.zeros(ARCH.param_count)
    bad[5] = np.nan
    with pytest.raises(NumericError):
        ParameterVector(bad, ARCH)
    p = ParameterVector(np.zeros(ARCH.param_count), ARCH)
    with pytest.raises(ValueError):
        p.values[0] = 1.0


def test_snapshot_is_a_frozen_copy():
    p = init_params(ARCH, 0)
    snap = PolicySnapshot.of(p)
    assert snap.values is not p.values
    np.testing.assert_array_equal(snap.values, p.values)
    assert not snap.values.flags.writeable


# -- forward ------------------------------------------------------------------


def test_zero_params_give_zero_outputs():
    p = ParameterVector(np.zeros(ARCH.param_count), ARCH)
    logits, values = forward(p, np.random.default_rng(0).normal(size=(5, 4)))
    np.testing.assert_array_equal(logits, 0.0)
    np.testing.assert_array_equal(values, 0.0)


def test_batch_of_copies_gives_identical_rows():
    p = init_params(ARCH, 3)
    obs = np.tile(np.array([0.1, -0.2, 0.3, 0.05]), (6, 1))
    logits, values = forward(p, obs)
    assert np.all(logits == logits[0]) and np.all(values == values[0])


def test_batched_equals_per_row_and_is_pure():
    p = init_params(ARCH, 4)
    obs = np.random.default_rng(1).normal(size=(9, 4))
    logits, values = forward(p, obs)
    for i in range(9):
        li, vi = forward(p, obs[i])
        np.testing.assert_array_equal(li[0], logits[i])
        assert vi[0] == values[i]
    again = forward(p, obs)
    np.testing.assert_array_equal(again[0], logits)
    np.testing.assert_array_equal(again[1], values)


def test_trunk_weight_couples_both_heads():
    p = init_params(ARCH, 5)
    obs = np.random.default_rng(2).normal(size=(3, 4))
    w0 = ARCH.slices()[0][0]
    v = p.values.copy()
    v[w0.start] += 0.5
    l1, v1 = forward(p, obs)
    l2, v2 = forward(p.with_values(v), obs)
    assert np.any(l1 != l2) and np.any(v1 != v2)


def test_dimension_mismatch():
    with pytest.raises(InputError):
        forward(init_params(ARCH, 0), np.zeros((2, 5)))


def test_initial_policy_is_near_uniform():
    p = init_params(NetworkArchitecture(4, (64, 64), 2), 0)
    probs = action_distribution(forward(p, np.random.default_rng(0).normal(size=(50, 4)))[0])
    assert np.all(np.abs(probs - 0.5) < 0.05)


# -- distribution helpers -------------------------------------------------------


def test_softmax_examples():
    np.testing.assert_allclose(action_distribution([0, 0, 0, 0]), [0.25] * 4, atol=1e-15)
    c = 3.7
    np.testing.assert_allclose(action_distribution([c, c + math.log(2)]), [1 / 3, 2 / 3], atol=1e-15)
    p = action_distribution([1000.0, 0.0])
    assert np.all(np.isfinite(p)) and p[0] == pytest.approx(1.0) and p[1] < 1e-300


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=8))
def test_softmax_properties(logits):
    p = action_distribution(logits)
    assert abs(p.sum() - 1.0) <= 1e-12
    assert np.all(p > 0)
    for a in range(len(logits)):
        assert abs(log_prob(logits, a) - math.log(p[a])) <= 1e-12
    h = entropy(logits)
    assert -1e-12 <= h <= math.log(len(logits)) + 1e-12


def test_log_prob_examples():
    assert log_prob([0.0, 0.0], 1) == pytest.approx(-0.693147, abs=1e-6)
    assert log_prob([2.0, 2.0, 2.0, 2.0], 3) == pytest.approx(math.log(0.25), abs=1e-15)
    logits = [0.3, -1.2, 2.0]
    assert sum(math.exp(log_prob(logits, a)) for a in range(3)) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(InputError):
        log_prob(logits, 3)
    with pytest.raises(InputError):
        log_prob(logits, -1)


def test_entropy_examples():
    assert entropy([0, 0, 0, 0]) == pytest.approx(math.log(4), abs=1e-15)
    near = entropy([40.0, 0.0, 0.0])
    assert 0.0 <= near < 1e-15
    assert entropy([800.0, 0.0]) == 0.0


# -- gradients -------------------------------------------------------------------


def test_gradient_of_sum_of_squares():
    p = init_params(ARCH, 1)
    g = gradient(p, lambda t: ad.sum(ad.square(t)))
    np.testing.assert_allclose(g, 2 * p.values, rtol=1e-15)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_names_minibatch():
    p = init_params(ARCH, 1)
    with pytest.raises(NumericError, match="minibatch 7"):
        gradient(p, lambda t: ad.log(ad.sum(t) * 0.0), minibatch_index=7)


def test_clipped_branch_has_zero_gradient():
    # ratio 1.5 with positive advantage: min picks the clipped constant 1.1 * A
    x = ad.Tensor(np.array([math.log(1.5)]))
    rho = ad.exp(x)
    adv = np.array([2.0])
    obj = ad.sum(ad.minimum(rho * adv, ad.clip(rho, 0.9, 1.1) * adv))
    obj.backward()
    assert obj.value == pytest.approx(2.2)
    assert x.grad[0] == 0.0


def test_unclipped_branch_gradient():
    x = ad.Tensor(np.array([math.log(1.05)]))
    rho = ad.exp(x)
    obj = ad.sum(ad.minimum(rho * 2.0, ad.clip(rho, 0.9, 1.1) * 2.0))
    obj.backward()
    assert x.grad[0] == pytest.approx(2.0 * 1.05)


def test_tie_takes_first_branch():
    a, b = ad.Tensor(np.array([1.0])), ad.Tensor(np.array([1.0]))
    ad.sum(ad.minimum(a, b)).backward()
    assert a.grad[0] == 1.0 and (b.grad is None or b.grad[0] == 0.0)


@pytest.mark.parametrize("activation", ["tanh", "relu"])
def test_network_gradient_matches_finite_differences(activation):
    arch = NetworkArchitecture(3, (5, 4), 3, activation)
    rng = np.random.default_rng(8)
    theta = rng.normal(scale=0.7, size=arch.param_count)
    obs = rng.normal(size=(6, 3))
    acts = rng.integers(0, 3, size=6)
    target = rng.normal(size=6)

    def build(t):
        from dppo.network import forward_graph

        logits, values = forward_graph(t, arch, obs)
        lp = ad.take_rows(ad.log_softmax(logits), acts)
        return -ad.mean(lp) + ad.mean(ad.square(values - target))

    g = gradient(theta, build)
    fd = finite_difference_gradient(lambda x: float(build(ad.Tensor(x)).value), theta)
    rel = np.abs(g - fd) / np.maximum(np.maximum(np.abs(g), np.abs(fd)), 1e-6)
    assert rel.max() < 1e-4
