"""Exact and empirical variance of the importance-weighted surrogate.

On an enumerated support of (state, action) pairs with probabilities ``P``
and surrogate values ``O`` the variance can be evaluated three ways:

* directly, ``sum P O^2 - (sum P O)^2``;
* through the pairwise decomposition
  ``sum_i P_i [ (1 - P_i) O_i^2 - sum_{j != i} P_j O_i O_j ]``;
* as an upper bound that drops the ``P_i`` in front of ``O_i^2``.

The first two agree exactly and the bound exceeds them by
``sum_i P_i^2 O_i^2``. :func:`verify_identities` checks both facts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import FiniteMdpSpec, enumerate_tables, exact_visitation
from .errors import InputError, VerificationError
from .kernels import ordered_sum

_PROB_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SupportDistribution:
    probabilities: np.ndarray
    surrogate_values: np.ndarray

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=np.float64).ravel()
        o = np.array(self.surrogate_values, dtype=np.float64).ravel()
        if p.shape != o.shape or p.size == 0:
            raise InputError(f"probabilities and values must be equal, non-empty: {p.shape} vs {o.shape}")
        if np.any(p < 0) or abs(ordered_sum(p) - 1.0) > _PROB_TOL:
            raise InputError("probabilities must be non-negative and sum to 1")
        if not np.all(np.isfinite(o)):
            raise InputError("surrogate values must be finite")
        for name, arr in (("probabilities", p), ("surrogate_values", o)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.probabilities.size


@dataclass(frozen=True, eq=False)
class VarianceReport:
    direct_variance: float
    theorem1_value: float
    corollary1_bound: float
    xi_terms: np.ndarray
    max_rel_error: float
    bound_slack: float
    slack_rel_error: float


def empirical_variance(surrogates) -> float:
    """Population variance ``mean(O^2) - mean(O)^2`` of a sample."""
    o = np.ascontiguousarray(surrogates, dtype=np.float64)
    if o.size == 0:
        raise InputError("empirical_variance needs at least one value")
    # centre first so adding a constant to every sample leaves the result intact
    c = o - ordered_sum(o) / o.size
    m1 = ordered_sum(c) / c.size
    m2 = ordered_sum(c * c) / c.size
    return max(m2 - m1 * m1, 0.0)


def direct_variance(dist: SupportDistribution) -> float:
    p, o = dist.probabilities, dist.surrogate_values
    mean = ordered_sum(p * o)
    return ordered_sum(p * o * o) - mean * mean


def _cross_terms(p, o):
    """``sum_{j != i} P_j O_i O_j`` for every i, via the leave-one-out sum."""
    weighted = p * o
    total = ordered_sum(weighted)
    return o * (total - weighted)


def xi_terms(dist: SupportDistribution) -> np.ndarray:
    p, o = dist.probabilities, dist.surrogate_values
    return (1.0 - p) * o * o


def theorem1_variance(dist: SupportDistribution) -> float:
    """Pairwise decomposition ``sum_i P_i (xi_i - cross_i)``."""
    p, o = dist.probabilities, dist.surrogate_values
    return ordered_sum(p * (xi_terms(dist) - _cross_terms(p, o)))


def corollary1_bound(dist: SupportDistribution) -> float:
    """Upper bound ``sum_i P_i (O_i^2 - cross_i)``."""
    p, o = dist.probabilities, dist.surrogate_values
    return ordered_sum(p * (o * o - _cross_terms(p, o)))


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


def verify_identities(dist: SupportDistribution, tolerance: float = 1e-10) -> VarianceReport:
    """Check decomposition == direct variance and bound - variance == sum P^2 O^2.

    Raises :class:`VerificationError` carrying the full distribution when a
    relative error exceeds ``tolerance`` or the bound falls below the variance.
    """
    if tolerance <= 0:
        raise InputError(f"tolerance must be > 0, got {tolerance}")
    p, o = dist.probabilities, dist.surrogate_values
    direct = direct_variance(dist)
    thm = theorem1_variance(dist)
    bound = corollary1_bound(dist)
    slack_expected = ordered_sum(p * p * o * o)
    rel = _rel(thm, direct)
    slack = bound - direct
    slack_rel = _rel(slack, slack_expected)
    report = VarianceReport(
        direct_variance=direct,
        theorem1_value=thm,
        corollary1_bound=bound,
        xi_terms=xi_terms(dist),
        max_rel_error=max(rel, slack_rel),
        bound_slack=slack,
        slack_rel_error=slack_rel,
    )
    problems = []
    if rel > tolerance:
        problems.append(f"decomposition {thm!r} vs direct {direct!r} (rel {rel:.3e})")
    if slack_rel > tolerance:
        problems.append(f"bound slack {slack!r} vs sum P^2 O^2 {slack_expected!r} (rel {slack_rel:.3e})")
    if bound < thm - tolerance * abs(thm):
        problems.append(f"bound {bound!r} below variance {thm!r}")
    if thm < -tolerance * ordered_sum(p * o * o):
        problems.append(f"negative variance {thm!r}")
    if problems:
        raise VerificationError(
            "; ".join(problems)
            + f"\nP = {np.array2string(p, precision=17, separator=', ', threshold=10**6)}"
            + f"\nO = {np.array2string(o, precision=17, separator=', ', threshold=10**6)}"
        )
    return report


def random_support(rng: np.random.Generator, n: int, low: float = -5.0, high: float = 5.0):
    """Dirichlet(1) probabilities and uniform surrogate values."""
    p = rng.dirichlet(np.ones(n))
    p = p / ordered_sum(p)
    return SupportDistribution(p, rng.uniform(low, high, size=n))


def softmax_policy(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def mdp_support(mdp: FiniteMdpSpec, old_logits: np.ndarray, new_logits: np.ndarray,
                gamma: float = 0.99, horizon: int | None = None) -> SupportDistribution:
    """Support over all (s, a) with ``P = P_old(s) * pi_old(a|s)`` and
    ``O = pi_new/pi_old * A_old`` from exact tables."""
    pi_old = softmax_policy(old_logits)
    pi_new = softmax_policy(new_logits)
    h = mdp.horizon if horizon is None else horizon
    visit = exact_visitation(mdp, pi_old, h)
    tables = enumerate_tables(mdp, pi_old, gamma)
    p = (visit[:, None] * pi_old).ravel()
    p = p / ordered_sum(p)
    o = ((pi_new / pi_old) * tables.advantage).ravel()
    return SupportDistribution(p, o)
