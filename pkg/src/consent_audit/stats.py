"""Resampling statistics: percentile bootstrap CIs and permutation tests.

Everything is seeded; identical seeds give bit-identical results, which the
report pipeline relies on.
"""

from __future__ import annotations

from itertools import combinations
from math import comb

import numpy as np

from .errors import InputError


def bootstrap_ci(
    values,
    weights=None,
    n_resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for the (token-weighted) mean.

    Domains are resampled with replacement; each resample's statistic is
    sum(w_i * x_i) / sum(w_i) over the drawn domains (plain mean when
    ``weights`` is None). Constant inputs give a zero-width interval.
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise InputError("bootstrap_ci needs at least one value")
    if not 0 < level < 1:
        raise InputError(f"level must be in (0, 1), got {level}")
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != x.shape:
        raise InputError("weights must align with values")
    if np.any(w < 0) or w.sum() <= 0:
        raise InputError("weights must be non-negative with positive total")

    rng = np.random.default_rng(seed)
    idx = rng.integers(0, x.size, size=(n_resamples, x.size))
    wx = (w[idx] * x[idx]).sum(axis=1)
    ws = w[idx].sum(axis=1)
    # A resample could draw only zero-weight domains; its statistic is the
    # full-sample estimate rather than 0/0.
    point = float((w * x).sum() / w.sum())
    stats = np.where(ws > 0, wx / np.where(ws > 0, ws, 1.0), point)
    alpha = (1.0 - level) / 2.0
    lower, upper = np.quantile(stats, [alpha, 1.0 - alpha])
    return float(lower), float(upper)


def permutation_test(
    group_a,
    group_b,
    corrections: int = 1,
    n_resamples: int = 10000,
    seed: int = 0,
    exact_threshold: int = 12,
) -> float:
    """Two-sided permutation test on the difference of group means.

    With a combined size up to ``exact_threshold`` every label assignment is
    enumerated and the p-value is the exact fraction with |mean_a - mean_b|
    at least the observed one; larger samples fall back to seeded Monte
    Carlo with the add-one estimator. Bonferroni correction multiplies by
    ``corrections`` and caps at 1.
    """
    a = np.asarray(group_a, dtype=float)
    b = np.asarray(group_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise InputError("both groups must be non-empty")
    if corrections < 1:
        raise InputError("corrections must be >= 1")
    pooled = np.concatenate([a, b])
    n, na = pooled.size, a.size
    observed = abs(a.mean() - b.mean())
    tol = 1e-12 * max(1.0, float(np.abs(pooled).max()))

    if n <= exact_threshold:
        hits = 0
        total = comb(n, na)
        pooled_sum = pooled.sum()
        for pick in combinations(range(n), na):
            sa = pooled[list(pick)].sum()
            delta = abs(sa / na - (pooled_sum - sa) / (n - na))
            if delta >= observed - tol:
                hits += 1
        p = hits / total
    else:
        rng = np.random.default_rng(seed)
        hits = 0
        for _ in range(n_resamples):
            perm = rng.permutation(pooled)
            delta = abs(perm[:na].mean() - perm[na:].mean())
            if delta >= observed - tol:
                hits += 1
        p = (hits + 1) / (n_resamples + 1)

    return min(1.0, corrections * p)
