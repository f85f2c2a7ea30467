"""NumPy reference implementation of the innovations filter kernel.

The state space is the Harvey ARMA form: transition matrix with the
autoregressive weights down its first column and an identity superdiagonal,
observation vector e1, shock loading (1, theta_1, ...). Structure is
exploited so each step costs O(r^2) instead of O(r^3).

The compiled kernel in _filter_cy.pyx mirrors this exactly; keep the two in
sync.
"""

from __future__ import annotations

import math

import numpy as np


def kalman_filter_parts(tcol, rvec, y, p0, sigma2):
    """One pass of the prediction-form Kalman recursion.

    Returns (sum_log_f, sum_v2_over_f, a_pred, p_pred, ok) where a_pred and
    p_pred are the one-step-ahead state mean and covariance after the final
    observation. ok is False when a prediction variance degenerates.
    """
    tcol = np.asarray(tcol, dtype=float)
    rvec = np.asarray(rvec, dtype=float)
    y = np.asarray(y, dtype=float)
    r = tcol.shape[0]
    a = np.zeros(r)
    p = np.array(p0, dtype=float, copy=True)
    rqr = sigma2 * np.outer(rvec, rvec)

    sum_log_f = 0.0
    sum_v2f = 0.0
    tp = np.empty((r, r))
    tpt = np.empty((r, r))
    for t in range(y.shape[0]):
        f = p[0, 0]
        if not (f > 0.0) or not math.isfinite(f):
            return math.nan, math.nan, a, p, False
        v = y[t] - a[0]

        # tp = T @ p using the companion structure of T.
        tp[: r - 1] = p[1:]
        tp[r - 1] = 0.0
        tp += tcol[:, None] * p[0]

        k = tp[:, 0] / f

        a_next = np.empty(r)
        a_next[: r - 1] = a[1:]
        a_next[r - 1] = 0.0
        a = a_next + tcol * a[0] + k * v

        # tpt = tp @ T.T, same structure on columns.
        tpt[:, : r - 1] = tp[:, 1:]
        tpt[:, r - 1] = 0.0
        tpt += np.outer(tp[:, 0], tcol)

        p = tpt - f * np.outer(k, k) + rqr
        p = 0.5 * (p + p.T)

        sum_log_f += math.log(f)
        sum_v2f += v * v / f

    return sum_log_f, sum_v2f, a, p, True
