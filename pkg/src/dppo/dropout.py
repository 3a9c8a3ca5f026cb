"""Sample dropout driven by the cross-term statistic phi.

For surrogate values ``O`` of the live training set, each sample gets

    phi_i = sum_{j != i} O_i * O_j = O_i * (sum_j O_j - O_i)

which is the cross term subtracted in the variance upper bound. Samples are
split by the sign of phi (phi == 0 joins the non-negative side), and within
each side the samples with the smallest phi are discarded, either below
fixed thresholds or below the r-quantile of that side.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .kernels import ordered_sum

log = logging.getLogger(__name__)

MODES = ("ratio", "threshold", "off")


@dataclass(frozen=True)
class DropoutConfig:
    mode: str = "ratio"
    r: float = 0.2
    delta_plus: float = 0.0
    delta_minus: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise InputError(f"dropout mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 <= self.r <= 1.0:
            raise InputError(f"r must lie in [0,1], got {self.r}")
        if np.isnan(self.delta_plus) or np.isnan(self.delta_minus):
            raise InputError("dropout thresholds must not be NaN")


@dataclass(frozen=True, eq=False)
class DropoutReport:
    kept_indices: np.ndarray
    delta_plus_used: float | None
    delta_minus_used: float | None
    dropped_phi_pos_mean: float | None
    dropped_phi_neg_mean: float | None
    kept_count: int
    dropped_count: int


def phi_values(surrogates) -> np.ndarray:
    """Leave-one-out cross products ``O_i * sum_{j != i} O_j`` in O(n)."""
    o = np.ascontiguousarray(surrogates, dtype=np.float64)
    if o.ndim != 1 or o.size == 0:
        raise InputError("phi_values needs a non-empty 1-D vector")
    total = ordered_sum(o)
    # O_i * (S - O_i) rather than O_i*S - O_i**2: same value, one rounding
    # fewer and no cancellation between two large products
    return o * (total - o)


def partition(indices, phi):
    """Split into (phi >= 0, phi < 0) index arrays, preserving input order."""
    idx = np.asarray(indices)
    phi = np.asarray(phi, dtype=np.float64)
    if idx.shape != phi.shape:
        raise InputError(f"length mismatch: {idx.shape} vs {phi.shape}")
    pos = phi >= 0
    return idx[pos], idx[~pos]


def quantile_select(values, r: float) -> float:
    """Element m of M whose below-fraction ``|{x < m}| / |M|`` is closest to r.

    Ties go to the smaller m.
    """
    m = np.asarray(values, dtype=np.float64).ravel()
    if m.size == 0:
        raise InputError("quantile_select needs a non-empty set")
    sorted_vals = np.sort(m, kind="stable")
    distinct, first = np.unique(sorted_vals, return_index=True)
    frac_below = first / m.size
    return float(distinct[int(np.argmin(np.abs(frac_below - r)))])


def _dropped_mean(values) -> float | None:
    if values.size == 0:
        return None
    return ordered_sum(np.ascontiguousarray(values)) / values.size


def _report(idx, phi, keep, delta_plus, delta_minus) -> DropoutReport:
    dropped = phi[~keep]
    return DropoutReport(
        kept_indices=idx[keep],
        delta_plus_used=delta_plus,
        delta_minus_used=delta_minus,
        dropped_phi_pos_mean=_dropped_mean(dropped[dropped >= 0]),
        dropped_phi_neg_mean=_dropped_mean(dropped[dropped < 0]),
        kept_count=int(keep.sum()),
        dropped_count=int((~keep).sum()),
    )


def _as_arrays(indices, phi):
    idx = np.asarray(indices)
    phi = np.asarray(phi, dtype=np.float64)
    if idx.shape != phi.shape or idx.ndim != 1:
        raise InputError(f"indices and phi must be equal-length vectors: {idx.shape} vs {phi.shape}")
    return idx, phi


def apply_threshold_dropout(indices, phi, delta_plus: float, delta_minus: float) -> DropoutReport:
    """Keep ``phi > delta_plus`` on the non-negative side, ``phi > delta_minus`` on the other."""
    idx, phi = _as_arrays(indices, phi)
    pos = phi >= 0
    keep = np.where(pos, phi > delta_plus, phi > delta_minus)
    return _report(idx, phi, keep, float(delta_plus), float(delta_minus))


def apply_ratio_dropout(indices, phi, r: float, keep_constant: bool = True) -> DropoutReport:
    """Drop roughly the lowest r-fraction of phi within each sign partition.

    ``r == 0`` keeps everything (the literal rule would still drop each
    partition's minimum). With ``keep_constant`` a partition whose phi values
    are all equal is kept whole, since its quantile threshold would remove
    every member.
    """
    if not 0.0 <= r <= 1.0:
        raise InputError(f"r must lie in [0,1], got {r}")
    idx, phi = _as_arrays(indices, phi)
    if r == 0.0:
        return _report(idx, phi, np.ones(idx.size, dtype=bool), None, None)
    pos = phi >= 0
    keep = np.ones(idx.size, dtype=bool)
    thresholds = {}
    for name, mask in (("plus", pos), ("minus", ~pos)):
        part = phi[mask]
        if part.size == 0:
            thresholds[name] = None
            continue
        if keep_constant and part.min() == part.max():
            log.warning(
                "dropout: all %d phi values in the %s partition equal %g; keeping the partition",
                part.size, name, part[0],
            )
            thresholds[name] = None
            continue
        delta = quantile_select(part, r)
        thresholds[name] = delta
        keep[mask] = part > delta
    return _report(idx, phi, keep, thresholds["plus"], thresholds["minus"])


def apply_dropout(indices, phi, config: DropoutConfig) -> DropoutReport:
    if config.mode == "off":
        idx, phi = _as_arrays(indices, phi)
        return _report(idx, phi, np.ones(idx.size, dtype=bool), None, None)
    if config.mode == "threshold":
        return apply_threshold_dropout(indices, phi, config.delta_plus, config.delta_minus)
    return apply_ratio_dropout(indices, phi, config.r)
