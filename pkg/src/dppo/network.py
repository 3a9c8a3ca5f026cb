"""Shared-trunk actor-critic on a flat float64 parameter vector.

Parameters are stored in one contiguous vector in declared order: for every
trunk layer ``W`` (row-major, in x out) then ``b``; then the policy head
``W, b``; then the value head ``W, b``. Both heads read the last trunk
activation, so trunk weights receive gradient from the policy and the value
losses alike.

``forward`` is the plain numpy evaluation used during rollouts;
``forward_graph`` builds the same computation on the autodiff tape. Both use
the row-independent ``kernels.dense`` product, so the logits of a state do
not depend on which batch it is evaluated in: log-probabilities recomputed
during optimisation match those stored at collection time bit-for-bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .errors import InputError, NumericError
from .kernels import dense

ACTIVATIONS = ("tanh", "relu")


@dataclass(frozen=True)
class NetworkArchitecture:
    input_dim: int
    trunk_layers: tuple[int, ...]
    action_count: int
    activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "trunk_layers", tuple(int(w) for w in self.trunk_layers))
        if self.input_dim < 1 or self.action_count < 1:
            raise InputError("input_dim and action_count must be >= 1")
        if any(w < 1 for w in self.trunk_layers):
            raise InputError(f"trunk widths must be >= 1, got {self.trunk_layers}")
        if self.activation not in ACTIVATIONS:
            raise InputError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) of every dense layer: trunk, policy head, value head."""
        dims = [self.input_dim, *self.trunk_layers]
        shapes = list(zip(dims[:-1], dims[1:]))
        shapes.append((dims[-1], self.action_count))
        shapes.append((dims[-1], 1))
        return shapes

    @property
    def param_count(self) -> int:
        return sum(i * o + o for i, o in self.layer_shapes())

    def slices(self) -> list[tuple[slice, tuple[int, int], slice]]:
        """Weight slice, weight shape and bias slice of every layer."""
        out = []
        pos = 0
        for fan_in, fan_out in self.layer_shapes():
            w = slice(pos, pos + fan_in * fan_out)
            pos += fan_in * fan_out
            b = slice(pos, pos + fan_out)
            pos += fan_out
            out.append((w, (fan_in, fan_out), b))
        return out


@dataclass(frozen=True, eq=False)
class ParameterVector:
    values: np.ndarray
    architecture: NetworkArchitecture

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != (self.architecture.param_count,):
            raise InputError(
                f"parameter vector has length {v.size}, architecture needs "
                f"{self.architecture.param_count}"
            )
        if not np.all(np.isfinite(v)):
            raise NumericError("parameter vector contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def with_values(self, values) -> "ParameterVector":
        return ParameterVector(values, self.architecture)


class PolicySnapshot(ParameterVector):
    """Frozen parameters of the data-collecting policy."""

    @classmethod
    def of(cls, params: ParameterVector) -> "PolicySnapshot":
        return cls(params.values.copy(), params.architecture)


def _orthogonal(rng, fan_in, fan_out, gain):
    a = rng.standard_normal((max(fan_in, fan_out), min(fan_in, fan_out)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if fan_in < fan_out:
        q = q.T
    return gain * q[:fan_in, :fan_out]


def init_params(
    arch: NetworkArchitecture,
    seed: int,
    trunk_gain: float = np.sqrt(2.0),
    policy_gain: float = 0.01,
    value_gain: float = 1.0,
) -> ParameterVector:
    """Orthogonal weights, zero biases; small policy head keeps pi near uniform."""
    rng = np.random.default_rng(seed)
    theta = np.zeros(arch.param_count)
    layers = arch.slices()
    gains = [trunk_gain] * (len(layers) - 2) + [policy_gain, value_gain]
    for (w, shape, _), gain in zip(layers, gains):
        theta[w] = _orthogonal(rng, *shape, gain).ravel()
    return ParameterVector(theta, arch)


def _check_obs(arch, observations):
    obs = np.asarray(observations, dtype=np.float64)
    if obs.ndim == 1:
        obs = obs[None, :]
    if obs.ndim != 2 or obs.shape[1] != arch.input_dim:
        raise InputError(
            f"observations must have {arch.input_dim} columns, got shape {obs.shape}"
        )
    return obs


def forward(params: ParameterVector, observations) -> tuple[np.ndarray, np.ndarray]:
    """Batched logits (n, action_count) and values (n,)."""
    arch = params.architecture
    theta = params.values
    h = _check_obs(arch, observations)
    act = np.tanh if arch.activation == "tanh" else (lambda z: np.where(z > 0, z, 0.0))
    layers = arch.slices()
    for w, shape, b in layers[:-2]:
        h = act(dense(h, theta[w].reshape(shape), theta[b]))
    (pw, pshape, pb), (vw, vshape, vb) = layers[-2:]
    logits = dense(h, theta[pw].reshape(pshape), theta[pb])
    values = dense(h, theta[vw].reshape(vshape), theta[vb])
    return logits, values[:, 0]


def forward_graph(theta: ad.Tensor, arch: NetworkArchitecture, observations):
    """Tape version of :func:`forward`; returns (logits, values) tensors."""
    h = ad.Tensor(_check_obs(arch, observations))
    act = ad.tanh if arch.activation == "tanh" else ad.relu
    layers = arch.slices()
    for w, shape, b in layers[:-2]:
        h = act(ad.linear(h, theta[w].reshape(shape), theta[b]))
    (pw, pshape, pb), (vw, vshape, vb) = layers[-2:]
    logits = ad.linear(h, theta[pw].reshape(pshape), theta[pb])
    values = ad.linear(h, theta[vw].reshape(vshape), theta[vb])
    return logits, values.reshape(-1)


# ---------------------------------------------------------------------------
# Categorical distribution helpers (work on 1-D logits or batches of rows)


def log_softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - np.max(z, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def action_distribution(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - np.max(z, axis=-1, keepdims=True))
    return e / np.sum(e, axis=-1, keepdims=True)


def log_prob(logits, action):
    logits = np.asarray(logits, dtype=np.float64)
    actions = np.asarray(action)
    n_act = logits.shape[-1]
    if np.any(actions < 0) or np.any(actions >= n_act):
        raise InputError(f"action {action!r} outside [0, {n_act})")
    lp = log_softmax(logits)
    if lp.ndim == 1:
        return float(lp[int(actions)])
    return lp[np.arange(lp.shape[0]), actions.astype(np.int64)]


def entropy(logits):
    lp = log_softmax(logits)
    p = np.exp(lp)
    # 0 * log 0 = 0
    terms = np.where(p > 0, p * lp, 0.0)
    h = -np.sum(terms, axis=-1)
    return float(h) if np.ndim(h) == 0 else h


# ---------------------------------------------------------------------------
# Gradients


def gradient(
    params: ParameterVector | np.ndarray,
    loss_builder: Callable[[ad.Tensor], ad.Tensor],
    minibatch_index: int | None = None,
) -> np.ndarray:
    """Exact reverse-mode gradient of ``loss_builder(theta)`` w.r.t. theta.

    ``loss_builder`` receives the flat parameter vector as a tape leaf and
    must return a scalar tensor.
    """
    values = params.values if isinstance(params, ParameterVector) else params
    theta = ad.Tensor(np.array(values, dtype=np.float64))
    loss = loss_builder(theta)
    if not np.isfinite(loss.value).all():
        where = "" if minibatch_index is None else f" in minibatch {minibatch_index}"
        raise NumericError(f"non-finite loss {float(loss.value)!r}{where}")
    loss.backward()
    if theta.grad is None:
        return np.zeros_like(theta.value)
    return theta.grad


def finite_difference_gradient(
    f: Callable[[np.ndarray], float], x: np.ndarray, step: float = 1e-5
) -> np.ndarray:
    """Central differences, one coordinate at a time."""
    x = np.array(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.size):
        old = x[i]
        x[i] = old + step
        fp = f(x)
        x[i] = old - step
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2.0 * step)
    return g


def architecture_from(input_dim: int, action_count: int, trunk: Sequence[int] = (64, 64),
                      activation: str = "tanh") -> NetworkArchitecture:
    return NetworkArchitecture(input_dim, tuple(trunk), action_count, activation)
