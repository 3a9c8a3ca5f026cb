import numpy as np
import pytest

from dppo.adam import AdamState, adam_step
from dppo.errors import InputError, NumericError
from dppo.network import NetworkArchitecture, ParameterVector, init_params

ARCH = NetworkArchitecture(2, (3,), 2)


def params(seed=0):
    return init_params(ARCH, seed)


def test_first_step_moves_by_lr_against_sign():
    p = params()
    g = np.random.default_rng(0).normal(size=len(p))
    new, state = adam_step(p, g, AdamState.zeros(len(p)), lr=1e-3)
    np.testing.assert_allclose(new.values - p.values, -1e-3 * np.sign(g), rtol=1e-6)
    assert state.step_count == 1


def test_zero_lr_keeps_params_updates_moments():
    p = params()
    g = np.ones(len(p))
    new, state = adam_step(p, g, AdamState.zeros(len(p)), lr=0.0)
    np.testing.assert_array_equal(new.values, p.values)
    np.testing.assert_allclose(state.first_moment, 0.1)
    np.testing.assert_allclose(state.second_moment, 0.001)


def test_zero_gradient_from_zero_state():
    p = params()
    new, state = adam_step(p, np.zeros(len(p)), AdamState.zeros(len(p)), lr=0.1)
    np.testing.assert_array_equal(new.values, p.values)


def test_step_count_increments_and_matches_reference():
    p = params()
    rng = np.random.default_rng(3)
    state = AdamState.zeros(len(p))
    theta = p.values.copy()
    m = np.zeros(len(p))
    v = np.zeros(len(p))
    for t in range(1, 6):
        g = rng.normal(size=len(p))
        p, state = adam_step(p, g, state, lr=0.01)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        theta = theta - 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        assert state.step_count == t
    np.testing.assert_allclose(p.values, theta, rtol=1e-13)


def test_bit_identical_repeats():
    p = params()
    g = np.random.default_rng(4).normal(size=len(p))
    a, sa = adam_step(p, g, AdamState.zeros(len(p)), 3e-4)
    b, sb = adam_step(p, g, AdamState.zeros(len(p)), 3e-4)
    assert a.values.tobytes() == b.values.tobytes()
    assert sa.second_moment.tobytes() == sb.second_moment.tobytes()


def test_errors():
    p = params()
    with pytest.raises(InputError):
        adam_step(p, np.zeros(3), AdamState.zeros(len(p)), 1e-3)
    with pytest.raises(InputError):
        adam_step(p, np.zeros(len(p)), AdamState.zeros(len(p)), -1.0)
    g = np.zeros(len(p))
    g[2] = np.inf
    with pytest.raises(NumericError):
        adam_step(p, g, AdamState.zeros(len(p)), 1e-3)
