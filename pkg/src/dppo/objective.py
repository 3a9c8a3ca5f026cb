"""Importance ratios, surrogate values, PPO-CLIP / fixed-beta penalty
objectives and the combined actor-critic loss."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import InputError, NumericError
from .network import ParameterVector, forward, forward_graph, gradient, log_prob
from .rollout import TrajectoryBatch


@dataclass(frozen=True)
class LossBreakdown:
    policy_loss: float
    value_loss: float
    entropy: float
    combined: float
    c1: float
    c2: float


def ratios(params: ParameterVector, batch: TrajectoryBatch, indices) -> np.ndarray:
    """``pi_theta(a|s) / pi_old(a|s)`` for the selected slots."""
    idx = np.asarray(indices, dtype=np.int64)
    logits, _ = forward(params, batch.observations[idx])
    new_lp = log_prob(logits, batch.actions[idx])
    rho = np.exp(new_lp - batch.old_log_probs[idx])
    bad = np.flatnonzero(~np.isfinite(rho) | (rho <= 0))
    if bad.size:
        raise NumericError(f"invalid importance ratio {rho[bad[0]]!r} at sample {int(idx[bad[0]])}")
    return rho


def surrogate_values(rho, advantages) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.float64)
    adv = np.asarray(advantages, dtype=np.float64)
    if rho.shape != adv.shape:
        raise InputError(f"length mismatch: {rho.shape} vs {adv.shape}")
    return rho * adv


def clip_objective(rho, advantages, epsilon: float) -> np.ndarray:
    """Per-sample ``min(rho*A, clip(rho, 1-eps, 1+eps)*A)``."""
    if not 0.0 < epsilon < 1.0:
        raise InputError(f"epsilon must lie in (0, 1), got {epsilon}")
    rho = np.asarray(rho, dtype=np.float64)
    adv = np.asarray(advantages, dtype=np.float64)
    return np.minimum(rho * adv, np.clip(rho, 1.0 - epsilon, 1.0 + epsilon) * adv)


def kl_estimate(rho) -> float:
    """Non-negative estimator ``mean((rho - 1) - log rho)`` of KL(old || new)."""
    rho = np.asarray(rho, dtype=np.float64)
    return float(np.mean((rho - 1.0) - np.log(rho)))


def penalty_objective(rho, advantages, kl: float, beta: float) -> float:
    """Fixed-coefficient KL-penalised objective ``mean(rho*A) - beta*kl``."""
    if beta < 0:
        raise InputError(f"beta must be >= 0, got {beta}")
    return float(np.mean(surrogate_values(rho, advantages)) - beta * kl)


# ---------------------------------------------------------------------------
# combined loss


def _normalize(adv):
    if adv.size < 2:
        return adv - adv.mean()
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def loss_graph(theta: ad.Tensor, arch, batch: TrajectoryBatch, indices, epsilon, c1, c2,
               normalize_advantages=False):
    """Build ``l = l_p + c1*l_v - c2*l_e`` on the tape.

    Returns the combined tensor and the three component tensors.
    """
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise InputError("combined loss needs a non-empty slice")
    adv = batch.advantages[idx]
    if normalize_advantages:
        adv = _normalize(adv)
    logits, values = forward_graph(theta, arch, batch.observations[idx])
    logp_all = ad.log_softmax(logits)
    new_lp = ad.take_rows(logp_all, batch.actions[idx])
    rho = ad.exp(new_lp - batch.old_log_probs[idx])
    unclipped = rho * adv
    clipped = ad.clip(rho, 1.0 - epsilon, 1.0 + epsilon) * adv
    policy_loss = -ad.mean(ad.minimum(unclipped, clipped))
    value_loss = ad.mean(ad.square(values - batch.value_targets[idx]))
    ent = ad.mean(-ad.sum(ad.exp(logp_all) * logp_all, axis=1))
    combined = policy_loss + value_loss * c1 - ent * c2
    return combined, policy_loss, value_loss, ent


def _breakdown(parts, c1, c2, where=""):
    combined, lp, lv, le = (float(t.value) for t in parts)
    for name, val in (("policy_loss", lp), ("value_loss", lv), ("entropy", le)):
        if not np.isfinite(val):
            raise NumericError(f"non-finite {name} ({val!r}){where}")
    return LossBreakdown(lp, lv, le, combined, c1, c2)


def combined_loss(params: ParameterVector, batch: TrajectoryBatch, indices, epsilon: float,
                  c1: float, c2: float, normalize_advantages: bool = False) -> LossBreakdown:
    theta = ad.Tensor(params.values)
    parts = loss_graph(theta, params.architecture, batch, indices, epsilon, c1, c2,
                       normalize_advantages)
    return _breakdown(parts, c1, c2)


def loss_and_gradient(params: ParameterVector, batch: TrajectoryBatch, indices, epsilon: float,
                      c1: float, c2: float, normalize_advantages: bool = False,
                      minibatch_index: int | None = None):
    """Evaluate the combined loss and its exact gradient in one tape pass."""
    holder = {}

    def build(theta):
        parts = loss_graph(theta, params.architecture, batch, indices, epsilon, c1, c2,
                           normalize_advantages)
        holder["parts"] = parts
        return parts[0]

    where = "" if minibatch_index is None else f" in minibatch {minibatch_index}"
    try:
        grad = gradient(params, build, minibatch_index=minibatch_index)
    except NumericError:
        if "parts" in holder:
            _breakdown(holder["parts"], c1, c2, where)
        raise
    return _breakdown(holder["parts"], c1, c2, where), grad
