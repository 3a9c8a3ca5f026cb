"""Oracle sweeps behind ``dppo verify`` and the acceptance suite.

Every suite returns a :class:`SuiteResult`; none of them raise on a failed
comparison, so callers can report all suites before deciding an exit code.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .dropout import apply_ratio_dropout, phi_values
from .envs import random_finite_mdp
from .errors import VerificationError
from .network import NetworkArchitecture, ParameterVector, finite_difference_gradient, gradient
from .objective import loss_graph
from .rollout import TrajectoryBatch
from .variance import mdp_support, random_support, verify_identities


@dataclass(frozen=True)
class SuiteResult:
    name: str
    instances: int
    worst: float
    tolerance: float
    passed: bool
    seconds: float
    detail: str = ""

    def line(self) -> str:
        status = "ok" if self.passed else "FAILED"
        text = (f"{self.name}: {self.instances} instances, worst {self.worst:.3e} "
                f"(tol {self.tolerance:g}), {self.seconds:.2f}s, {status}")
        if self.detail:
            text += f" [{self.detail}]"
        return text


def _identity_errors(dist, tolerance):
    try:
        rep = verify_identities(dist, tolerance)
    except VerificationError as exc:
        return None, str(exc).splitlines()[0]
    return rep, ""


def variance_sweep(instances: int = 1000, seed: int = 0, max_n: int = 64,
                   tolerance: float = 1e-10) -> SuiteResult:
    """Random supports: decomposition vs direct variance, bound slack."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst, failures, first = 0.0, 0, ""
    for _ in range(instances):
        dist = random_support(rng, int(rng.integers(1, max_n + 1)))
        rep, msg = _identity_errors(dist, tolerance)
        if rep is None:
            failures += 1
            first = first or msg
            continue
        worst = max(worst, rep.max_rel_error)
        if rep.bound_slack < 0:
            failures += 1
            first = first or f"negative slack {rep.bound_slack!r}"
    return SuiteResult("variance identities", instances, worst, tolerance, failures == 0,
                       time.perf_counter() - t0, first)


def mdp_sweep(instances: int = 50, seed: int = 0, max_states: int = 8, max_actions: int = 4,
              tolerance: float = 1e-10, perturbation: float = 0.5) -> SuiteResult:
    """Supports built from exact visitation and exact advantages of random MDPs."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst, failures, first = 0.0, 0, ""
    for k in range(instances):
        S = int(rng.integers(1, max_states + 1))
        A = int(rng.integers(2, max_actions + 1))
        H = int(rng.integers(1, 31))
        mdp = random_finite_mdp(S, A, seed=int(rng.integers(0, 2**32)), horizon=H)
        old = rng.normal(size=(S, A))
        new = old + perturbation * rng.normal(size=(S, A))
        rep, msg = _identity_errors(mdp_support(mdp, old, new, gamma=0.99), tolerance)
        if rep is None:
            failures += 1
            first = first or f"instance {k}: {msg}"
            continue
        worst = max(worst, rep.max_rel_error)
    return SuiteResult("mdp-grounded identities", instances, worst, tolerance, failures == 0,
                       time.perf_counter() - t0, first)


def brute_force_phi(o) -> np.ndarray:
    """O(n^2) reference: correctly rounded sum over j != i of O_i * O_j."""
    o = [float(x) for x in o]
    return np.array([math.fsum(oi * oj for j, oj in enumerate(o) if j != i)
                     for i, oi in enumerate(o)])


def phi_oracle(sizes=(1, 2, 3, 64, 1024, 4096), seed: int = 0,
               tolerance: float = 1e-9) -> SuiteResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in sizes:
        o = rng.normal(size=n)
        fast, slow = phi_values(o), brute_force_phi(o)
        scale = np.maximum(np.abs(fast), np.abs(slow))
        diff = np.abs(fast - slow)
        rel = np.divide(diff, scale, out=np.zeros_like(diff), where=scale > 0)
        worst = max(worst, float(rel.max()))
    return SuiteResult("phi vs brute force", len(sizes), worst, tolerance, worst <= tolerance,
                       time.perf_counter() - t0, "sizes " + ",".join(map(str, sizes)))


def dropout_fraction(instances: int = 200, n: int = 2048, rs=(0.1, 0.2, 0.3, 0.4, 0.5),
                     seed: int = 0) -> SuiteResult:
    """Per-partition dropped fraction within [r - 1/m, r + 2/m] and order consistency.

    ``worst`` is the largest distance outside the allowed band (0 when all pass).
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst, failures, first = 0.0, 0, ""
    idx = np.arange(n)
    for k in range(instances):
        phi = rng.normal(size=n) * rng.exponential(1.0, size=n)
        for r in rs:
            kept = np.zeros(n, dtype=bool)
            kept[apply_ratio_dropout(idx, phi, r).kept_indices] = True
            for mask in (phi >= 0, phi < 0):
                m = int(mask.sum())
                if m == 0:
                    continue
                frac = float((~kept[mask]).sum()) / m
                lo, hi = r - 1.0 / m, r + 2.0 / m
                out = max(lo - frac, frac - hi, 0.0)
                worst = max(worst, out)
                dropped = phi[mask & ~kept]
                kept_part = phi[mask & kept]
                ordered = dropped.size == 0 or kept_part.size == 0 or kept_part.min() > dropped.max()
                if out > 0 or not ordered:
                    failures += 1
                    first = first or f"instance {k}, r={r}: fraction {frac:.5f}, ordered={ordered}"
    return SuiteResult("dropout fraction/order", instances * len(rs), worst, 0.0, failures == 0,
                       time.perf_counter() - t0, first)


def _random_instance(rng):
    input_dim = int(rng.integers(1, 9))
    depth = int(rng.integers(1, 3))
    trunk = tuple(int(rng.integers(1, 17)) for _ in range(depth))
    actions = int(rng.integers(2, 5))
    activation = "tanh" if rng.random() < 0.5 else "relu"
    arch = NetworkArchitecture(input_dim, trunk, actions, activation)
    theta = rng.normal(scale=0.5, size=arch.param_count)
    m = int(rng.integers(1, 33))
    obs = rng.normal(size=(m, input_dim))
    batch = TrajectoryBatch(
        observations=obs,
        actions=rng.integers(0, actions, size=m),
        rewards=np.zeros(m),
        dones=np.zeros(m, dtype=bool),
        # spread the old log-probs so ratios land on both sides of the clip range
        old_log_probs=np.log(rng.uniform(0.05, 1.0, size=m)),
        old_values=np.zeros(m),
        bootstrap_values=np.zeros(1),
        n_actors=1,
        horizon=m,
        advantages=rng.normal(size=m),
        value_targets=rng.normal(size=m),
    )
    return arch, theta, batch


def _near_kink(arch, theta, batch, eps, margin):
    """True if a clip edge or relu hinge lies within ``margin`` of the point."""
    from .network import forward, log_prob

    params = ParameterVector(theta, arch)
    logits, _ = forward(params, batch.observations)
    rho = np.exp(log_prob(logits, batch.actions) - batch.old_log_probs)
    if np.any(np.abs(rho - (1 - eps)) < margin) or np.any(np.abs(rho - (1 + eps)) < margin):
        return True
    if arch.activation == "relu":
        h = batch.observations
        for w_sl, shape, b_sl in arch.slices()[:-2]:
            z = h @ theta[w_sl].reshape(shape) + theta[b_sl]
            if np.any(np.abs(z) < margin):
                return True
            h = np.maximum(z, 0.0)
    return False


def gradient_check(instances: int = 100, seed: int = 0, step: float = 1e-5,
                   tolerance: float = 1e-4, eps: float = 0.1, c1: float = 1.0,
                   c2: float = 0.01) -> SuiteResult:
    """Reverse-mode gradient of the combined loss vs central differences.

    Elementwise error is ``|g - fd| / max(|g|, |fd|, 1e-6)``; the floor keeps
    coordinates whose true derivative is zero (dead units, clipped samples)
    from dividing rounding noise by zero.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst, failures, first, redraws = 0.0, 0, "", 0
    done = 0
    while done < instances:
        arch, theta, batch = _random_instance(rng)
        if _near_kink(arch, theta, batch, eps, 1e-3):
            redraws += 1
            continue
        idx = np.arange(len(batch))

        def build(t):
            return loss_graph(t, arch, batch, idx, eps, c1, c2)[0]

        def value(x):
            return float(build(ad.Tensor(x)).value)

        g = gradient(theta, build)
        fd = finite_difference_gradient(value, theta, step)
        rel = np.abs(g - fd) / np.maximum(np.maximum(np.abs(g), np.abs(fd)), 1e-6)
        err = float(rel.max())
        worst = max(worst, err)
        if err > tolerance:
            failures += 1
            first = first or f"instance {done}: coordinate {int(rel.argmax())} rel {err:.3e}"
        done += 1
    detail = first or f"{redraws} redraws near kinks"
    return SuiteResult("gradient check", instances, worst, tolerance, failures == 0,
                       time.perf_counter() - t0, detail)


def run_all(instances: int = 1000, seed: int = 0) -> list[SuiteResult]:
    """The full ``verify`` battery; ``instances`` sizes the random-support sweep."""
    return [
        variance_sweep(instances, seed),
        mdp_sweep(max(1, instances // 20), seed),
        phi_oracle(seed=seed),
        dropout_fraction(max(1, instances // 5), seed=seed),
        gradient_check(max(1, instances // 10), seed),
    ]
