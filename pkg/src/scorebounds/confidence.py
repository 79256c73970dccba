"""Rectangular confidence regions for the vector of group statistics.

Every region has the form ``g_hat_j - s_j <= g_j <= g_hat_j + s_j``; the
functions here return the half-widths ``s_j``. Asymptotic variants use a
Bonferroni critical value ``z_{1 - alpha/(2J)}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import ndtr, ndtri

from .data import Design, GroupedData, ValidationError

__all__ = [
    "Variant",
    "HalfWidths",
    "norm_cdf",
    "inv_norm_cdf",
    "bonferroni_z",
    "halfwidth_none",
    "halfwidth_finite_fixed",
    "halfwidth_finite_random",
    "halfwidth_asymp_fixed",
    "halfwidth_asymp_random",
    "halfwidth_cluster_finite",
    "halfwidth_cluster_asymp",
    "halfwidths",
]


class Variant(str, Enum):
    FINITE_FIXED = "finite-fixed"
    FINITE_RANDOM = "finite-random"
    ASYMP_FIXED = "asymp-fixed"
    ASYMP_RANDOM = "asymp-random"
    CLUSTER_FINITE_FIXED = "cluster-finite-fixed"
    CLUSTER_FINITE_RANDOM = "cluster-finite-random"
    CLUSTER_ASYMP = "cluster-asymp"
    NONE = "none"


@dataclass(frozen=True, eq=False)
class HalfWidths:
    alpha: float
    variant: Variant
    s: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.s, dtype=float)
        if np.any(s < 0) or np.any(~np.isfinite(s)):
            raise ValueError("half-widths must be finite and nonnegative")
        if self.variant is Variant.NONE and np.any(s != 0):
            raise ValueError("variant NONE requires zero half-widths")
        object.__setattr__(self, "s", s)

    def __len__(self) -> int:
        return self.s.shape[0]


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


# ---------------------------------------------------------------------------
# normal quantiles

def norm_cdf(z):
    """Standard normal CDF."""
    return ndtr(np.asarray(z, dtype=float))


def inv_norm_cdf(p):
    """Quantile function of the standard normal on the open interval (0, 1).

    Accepts scalars or arrays; a scalar input returns a float.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise ValueError("inv_norm_cdf is defined on the open interval (0, 1)")
    out = ndtri(arr)
    return float(out) if out.ndim == 0 else out


def bonferroni_z(alpha: float, J: int) -> float:
    return inv_norm_cdf(1.0 - alpha / (2.0 * J))


# ---------------------------------------------------------------------------
# half-widths


def halfwidth_none(grouped: GroupedData, alpha: float = 0.05) -> HalfWidths:
    """Zero half-widths: treat the estimates as population values."""
    return HalfWidths(alpha, Variant.NONE, np.zeros(grouped.J))


def halfwidth_finite_fixed(grouped: GroupedData, alpha: float) -> HalfWidths:
    """Hoeffding half-widths ``p_j * sqrt(log(2J/alpha) / (2 n_j))``."""
    alpha = _check_alpha(alpha)
    J = grouped.J
    t = np.sqrt(math.log(2.0 * J / alpha) / (2.0 * grouped.counts))
    return HalfWidths(alpha, Variant.FINITE_FIXED, grouped.masses * t)


def halfwidth_finite_random(J: int, n: int, alpha: float) -> HalfWidths:
    """Uniform Hoeffding half-width ``sqrt(log(2J/alpha) / (2n))``."""
    alpha = _check_alpha(alpha)
    if n < 1 or J < 1:
        raise ValidationError("J and n must be positive")
    t = math.sqrt(math.log(2.0 * J / alpha) / (2.0 * n))
    return HalfWidths(alpha, Variant.FINITE_RANDOM, np.full(J, t))


def halfwidth_asymp_fixed(grouped: GroupedData, alpha: float) -> HalfWidths:
    """Bonferroni-normal half-widths ``sqrt(n_j) sigma_j / n * z``.

    A group whose outcomes are all equal has zero estimated variance and so a
    zero half-width.
    """
    alpha = _check_alpha(alpha)
    z = bonferroni_z(alpha, grouped.J)
    s = np.sqrt(grouped.counts) * np.sqrt(grouped.sigma2_hat) / grouped.n * z
    return HalfWidths(alpha, Variant.ASYMP_FIXED, s)


def halfwidth_asymp_random(grouped: GroupedData, alpha: float) -> HalfWidths:
    alpha = _check_alpha(alpha)
    z = bonferroni_z(alpha, grouped.J)
    s = np.sqrt(grouped.s2_hat) / math.sqrt(grouped.n) * z
    return HalfWidths(alpha, Variant.ASYMP_RANDOM, s)


def _require_clusters(grouped: GroupedData) -> None:
    if not grouped.has_cluster_stats:
        raise RuntimeError("cluster statistics are not available for this grouping")


def halfwidth_cluster_finite(
    grouped: GroupedData, alpha: float, design: Design | str
) -> HalfWidths:
    """Hoeffding half-widths with the effective sample size ``1 / sum gamma^2``."""
    alpha = _check_alpha(alpha)
    _require_clusters(grouped)
    design = Design.coerce(design)
    log_term = math.log(2.0 * grouped.J / alpha)
    if design is Design.FIXED:
        ssq = np.array([np.sum(g.cluster_stats.gamma ** 2) for g in grouped.groups])
        t = np.sqrt(ssq / 2.0 * log_term)
        N_j = grouped.weights
        return HalfWidths(alpha, Variant.CLUSTER_FINITE_FIXED, N_j / N_j.sum() * t)
    gamma = grouped.cluster_weight / grouped.N
    t = math.sqrt(float(np.sum(gamma**2)) / 2.0 * log_term)
    return HalfWidths(alpha, Variant.CLUSTER_FINITE_RANDOM, np.full(grouped.J, t))


def halfwidth_cluster_asymp(
    grouped: GroupedData, alpha: float, design: Design | str, raw_moments: bool = False
) -> HalfWidths:
    """Cluster-robust Bonferroni half-widths from an upper bound on the variance.

    The variance of each cluster sum is bounded by its uncentered second
    moment. By default the cluster sums are of ``w (Y - tau)``; with
    ``raw_moments=True`` they are of ``w Y``. Both designs give the same
    half-widths on the same data.
    """
    alpha = _check_alpha(alpha)
    _require_clusters(grouped)
    design = Design.coerce(design)
    z = bonferroni_z(alpha, grouped.J)
    tau = 0.0 if raw_moments else grouped.tau
    sq = np.array([np.sum((g.cluster_stats.wy - tau * g.cluster_stats.weight) ** 2)
                   for g in grouped.groups])
    N = grouped.N
    if design is Design.FIXED:
        N_j = grouped.weights
        V1 = sq / N_j
        s = np.sqrt(N_j) * np.sqrt(V1) / N * z
    else:
        V1 = sq / N
        s = np.sqrt(V1) / math.sqrt(N) * z
    return HalfWidths(alpha, Variant.CLUSTER_ASYMP, s)


def halfwidths(
    grouped: GroupedData,
    alpha: float,
    inference: str,
    design: Design | str,
    cluster: bool = False,
) -> HalfWidths:
    """Dispatch on ``inference`` in {"none", "finite", "asymptotic"}."""
    design = Design.coerce(design)
    if inference == "none":
        return halfwidth_none(grouped, alpha)
    if inference == "finite":
        if cluster:
            return halfwidth_cluster_finite(grouped, alpha, design)
        if design is Design.FIXED:
            return halfwidth_finite_fixed(grouped, alpha)
        return halfwidth_finite_random(grouped.J, grouped.n, alpha)
    if inference == "asymptotic":
        if cluster:
            return halfwidth_cluster_asymp(grouped, alpha, design)
        if design is Design.FIXED:
            return halfwidth_asymp_fixed(grouped, alpha)
        return halfwidth_asymp_random(grouped, alpha)
    raise ValidationError(f"inference must be none, finite or asymptotic, got {inference!r}")
