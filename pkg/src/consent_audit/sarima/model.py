"""Seasonal ARIMA estimation and forecasting.

The differenced series is cast into the Harvey ARMA state space; the exact
Gaussian log-likelihood comes from a Kalman recursion initialized at the
stationary state covariance (no diffuse states). Fitting maximizes the
scale-concentrated likelihood with Nelder-Mead over partial-autocorrelation
transformed coefficients, which keeps every iterate stationary and
invertible by construction.

Polynomial conventions: the AR operator is 1 - ar_1 B - ... and the MA
operator 1 + ma_1 B + ...; seasonal factors use powers of B^s. Stationarity
and invertibility both mean "all roots outside the unit circle".
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal, stats

from ..errors import DataError, InputError
from .kernel import kalman_filter_parts

LOG_2PI = math.log(2.0 * math.pi)

# Partial autocorrelations are kept this far inside (-1, 1) so fitted roots
# clear the unit circle with margin.
PACF_CLIP = 1.0 - 1e-4


class FitError(DataError):
    """Estimation failed: degenerate input or no start converged."""


@dataclass(frozen=True)
class SarimaSpec:
    p: int = 0
    d: int = 0
    q: int = 0
    P: int = 0
    D: int = 0
    Q: int = 0
    s: int = 1

    def __post_init__(self):
        if min(self.p, self.d, self.q, self.P, self.D, self.Q) < 0 or self.s < 1:
            raise InputError(f"negative order in {self}")
        if (self.P, self.D, self.Q) != (0, 0, 0) and self.s < 2:
            raise InputError("seasonal terms need a period s >= 2")

    @property
    def n_arma_params(self) -> int:
        return self.p + self.q + self.P + self.Q

    @property
    def min_series_length(self) -> int:
        return 3 * (self.d + self.D * self.s + self.p + self.q
                    + self.P * self.s + self.Q * self.s)

    def order_label(self) -> str:
        return f"({self.p},{self.d},{self.q})({self.P},{self.D},{self.Q},{self.s})"


@dataclass(frozen=True)
class SarimaFit:
    spec: SarimaSpec
    ar: tuple[float, ...]
    ma: tuple[float, ...]
    sar: tuple[float, ...]
    sma: tuple[float, ...]
    sigma2: float
    loglik: float
    aic: float
    converged: bool
    drift: float = 0.0
    trend: str = "n"

    @property
    def n_params(self) -> int:
        return self.spec.n_arma_params + 1 + (1 if self.trend == "c" else 0)


@dataclass(frozen=True)
class Forecast:
    horizon: int
    level: float
    mean: tuple[float, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    raw_mean: tuple[float, ...]
    raw_lower: tuple[float, ...]
    raw_upper: tuple[float, ...]
    clamped: tuple[bool, ...]


# ---------------------------------------------------------------------------
# Differencing
# ---------------------------------------------------------------------------

def difference(series, d: int, D: int, s: int = 1) -> np.ndarray:
    """Apply (1-B)^d (1-B^s)^D; output shrinks by d + D*s points."""
    y = np.asarray(series, dtype=float)
    if y.ndim != 1:
        raise InputError("series must be one-dimensional")
    if d < 0 or D < 0 or s < 1:
        raise InputError("differencing orders must be non-negative, s >= 1")
    if y.shape[0] <= d + D * s:
        raise InputError(
            f"series of length {y.shape[0]} too short for d={d}, D={D}, s={s}"
        )
    for _ in range(d):
        y = y[1:] - y[:-1]
    for _ in range(D):
        y = y[s:] - y[:-s]
    return y


def _diff_poly(d: int, D: int, s: int) -> np.ndarray:
    """Ascending coefficients of (1-B)^d (1-B^s)^D."""
    poly = np.array([1.0])
    for _ in range(d):
        poly = np.convolve(poly, [1.0, -1.0])
    seasonal = np.zeros(s + 1)
    seasonal[0], seasonal[s] = 1.0, -1.0
    for _ in range(D):
        poly = np.convolve(poly, seasonal)
    return poly


# ---------------------------------------------------------------------------
# Parameter transforms
# ---------------------------------------------------------------------------

def pacf_to_ar(pacf: np.ndarray) -> np.ndarray:
    """Durbin recursion: partial autocorrelations -> stationary AR weights."""
    coeffs = np.empty(0)
    for rho in pacf:
        nxt = np.empty(coeffs.size + 1)
        nxt[:-1] = coeffs - rho * coeffs[::-1]
        nxt[-1] = rho
        coeffs = nxt
    return coeffs


def ar_to_pacf(coeffs: np.ndarray) -> np.ndarray:
    """Inverse Durbin recursion; requires a stationary weight vector."""
    work = np.asarray(coeffs, dtype=float).copy()
    pacf = []
    for _ in range(work.size, 0, -1):
        rho = work[-1]
        if abs(rho) >= 1.0:
            raise InputError("coefficients are not stationary/invertible")
        pacf.append(rho)
        if work.size > 1:
            work = (work[:-1] + rho * work[-2::-1]) / (1.0 - rho * rho)
        else:
            work = np.empty(0)
    return np.array(pacf[::-1])


def _unconstrained_to_pacf(z: np.ndarray) -> np.ndarray:
    r = z / np.sqrt(1.0 + z * z)
    return np.clip(r, -PACF_CLIP, PACF_CLIP)


def _pacf_to_unconstrained(r: np.ndarray) -> np.ndarray:
    r = np.clip(r, -PACF_CLIP, PACF_CLIP)
    return r / np.sqrt(1.0 - r * r)


@dataclass(frozen=True)
class SarimaParams:
    ar: tuple[float, ...] = ()
    ma: tuple[float, ...] = ()
    sar: tuple[float, ...] = ()
    sma: tuple[float, ...] = ()
    sigma2: float = 1.0


def _unpack_z(z: np.ndarray, spec: SarimaSpec) -> SarimaParams:
    p, q, P, Q = spec.p, spec.q, spec.P, spec.Q
    parts = np.split(np.asarray(z, dtype=float), [p, p + q, p + q + P])
    ar = pacf_to_ar(_unconstrained_to_pacf(parts[0]))
    ma = -pacf_to_ar(_unconstrained_to_pacf(parts[1]))
    sar = pacf_to_ar(_unconstrained_to_pacf(parts[2]))
    sma = -pacf_to_ar(_unconstrained_to_pacf(parts[3]))
    return SarimaParams(tuple(ar), tuple(ma), tuple(sar), tuple(sma), 1.0)


def _pack_z(params: SarimaParams) -> np.ndarray:
    return np.concatenate([
        _pacf_to_unconstrained(ar_to_pacf(np.asarray(params.ar))),
        _pacf_to_unconstrained(ar_to_pacf(-np.asarray(params.ma))),
        _pacf_to_unconstrained(ar_to_pacf(np.asarray(params.sar))),
        _pacf_to_unconstrained(ar_to_pacf(-np.asarray(params.sma))),
    ])


# ---------------------------------------------------------------------------
# State space construction
# ---------------------------------------------------------------------------

def _expand_polys(params: SarimaParams, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Multiply seasonal into non-seasonal operators (ascending coefficients)."""
    ar_poly = np.concatenate([[1.0], -np.asarray(params.ar, dtype=float)])
    ma_poly = np.concatenate([[1.0], np.asarray(params.ma, dtype=float)])
    sar_poly = np.zeros(len(params.sar) * s + 1)
    sar_poly[0] = 1.0
    for i, c in enumerate(params.sar, 1):
        sar_poly[i * s] = -c
    sma_poly = np.zeros(len(params.sma) * s + 1)
    sma_poly[0] = 1.0
    for i, c in enumerate(params.sma, 1):
        sma_poly[i * s] = c
    return np.convolve(ar_poly, sar_poly), np.convolve(ma_poly, sma_poly)


def _roots_outside(poly: np.ndarray, margin: float = 0.0) -> bool:
    """All roots of the ascending-coefficient polynomial outside the circle."""
    trimmed = np.trim_zeros(poly, "b")
    if trimmed.size <= 1:
        return True
    roots = np.roots(trimmed[::-1])
    return bool(np.min(np.abs(roots)) > 1.0 + margin)


def _state_space(params: SarimaParams, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Harvey-form first transition column and shock loading vector."""
    ar_full, ma_full = _expand_polys(params, s)
    p_full = ar_full.size - 1
    q_full = ma_full.size - 1
    r = max(p_full, q_full + 1)
    tcol = np.zeros(r)
    tcol[:p_full] = -ar_full[1:]
    rvec = np.zeros(r)
    rvec[: q_full + 1] = ma_full
    return tcol, rvec


def _dense_transition(tcol: np.ndarray) -> np.ndarray:
    r = tcol.shape[0]
    t = np.zeros((r, r))
    t[:, 0] = tcol
    t[np.arange(r - 1), np.arange(1, r)] = 1.0
    return t


def _stationary_cov(tcol: np.ndarray, rvec: np.ndarray, sigma2: float) -> np.ndarray:
    """Solve P = T P T' + sigma2 R R' by doubling."""
    a = _dense_transition(tcol)
    q = sigma2 * np.outer(rvec, rvec)
    for _ in range(64):
        q = q + a @ q @ a.T
        a = a @ a
        if np.max(np.abs(a)) < 1e-18:
            break
    return 0.5 * (q + q.T)


# ---------------------------------------------------------------------------
# Likelihood
# ---------------------------------------------------------------------------

def _filter_parts(params: SarimaParams, s: int, y: np.ndarray, sigma2: float):
    tcol, rvec = _state_space(params, s)
    p0 = _stationary_cov(tcol, rvec, sigma2)
    return kalman_filter_parts(
        np.ascontiguousarray(tcol),
        np.ascontiguousarray(rvec),
        np.ascontiguousarray(y),
        np.ascontiguousarray(p0),
        sigma2,
    )


def loglikelihood(spec: SarimaSpec, params: SarimaParams, series) -> float:
    """Exact Gaussian log-likelihood of the differenced series.

    Raises on parameters outside the stationary/invertible region or a
    non-positive variance.
    """
    if params.sigma2 <= 0 or not math.isfinite(params.sigma2):
        raise InputError(f"sigma2 must be positive, got {params.sigma2}")
    if len(params.ar) != spec.p or len(params.ma) != spec.q \
            or len(params.sar) != spec.P or len(params.sma) != spec.Q:
        raise InputError("parameter lengths do not match the model orders")
    ar_full, ma_full = _expand_polys(params, spec.s)
    if not _roots_outside(ar_full):
        raise InputError("AR polynomial is not stationary")
    if not _roots_outside(ma_full):
        raise InputError("MA polynomial is not invertible")
    y = difference(series, spec.d, spec.D, spec.s)
    sum_log_f, sum_v2f, _, _, ok = _filter_parts(params, spec.s, y, params.sigma2)
    if not ok:
        raise InputError("filter degenerated; parameters too close to the boundary")
    n = y.shape[0]
    return -0.5 * (n * LOG_2PI + sum_log_f + sum_v2f)


def _concentrated_nll(z: np.ndarray, spec: SarimaSpec, y: np.ndarray) -> float:
    """Negative log-likelihood with the innovation variance profiled out."""
    try:
        params = _unpack_z(z, spec)
    except Exception:
        return math.inf
    sum_log_f, sum_v2f, _, _, ok = _filter_parts(params, spec.s, y, 1.0)
    n = y.shape[0]
    if not ok or not math.isfinite(sum_log_f) or sum_v2f <= 0:
        return math.inf
    sigma2_hat = sum_v2f / n
    return 0.5 * (n * LOG_2PI + sum_log_f + n * math.log(sigma2_hat) + n)


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def _start_grid(k: int) -> list[np.ndarray]:
    return [np.zeros(k), np.full(k, 0.5), np.full(k, -0.5)]


def fit(
    spec: SarimaSpec,
    series,
    trend: str = "n",
    maxiter: int = 2000,
    tol: float = 1e-8,
    starts: list[np.ndarray] | None = None,
) -> SarimaFit:
    """Maximum-likelihood fit via simplex search on transformed coefficients.

    ``trend="c"`` absorbs the mean of the differenced series as a drift
    term. ``converged`` is False when the optimizer hit its iteration budget
    before meeting the relative-likelihood tolerance.
    """
    y_raw = np.asarray(series, dtype=float)
    if y_raw.shape[0] < spec.min_series_length:
        raise InputError(
            f"series length {y_raw.shape[0]} below minimum "
            f"{spec.min_series_length} for {spec.order_label()}"
        )
    if trend not in ("n", "c"):
        raise InputError(f"trend must be 'n' or 'c', got {trend!r}")
    y = difference(y_raw, spec.d, spec.D, spec.s)
    drift = float(np.mean(y)) if trend == "c" else 0.0
    y = y - drift
    if not np.isfinite(y).all():
        raise InputError("series contains non-finite values")
    if np.allclose(y, 0.0, atol=1e-300) or float(np.var(y)) == 0.0:
        raise FitError(
            f"differenced series is degenerate (zero variance) for {spec.order_label()}"
        )
    n = y.shape[0]

    k = spec.n_arma_params
    if k == 0:
        sigma2 = float(np.mean(y * y))
        params = SarimaParams(sigma2=sigma2)
        sum_log_f, sum_v2f, _, _, ok = _filter_parts(params, spec.s, y, sigma2)
        ll = -0.5 * (n * LOG_2PI + sum_log_f + sum_v2f)
        return _build_fit(spec, params, sigma2, ll, True, drift, trend)

    attempts = []
    for z0 in (starts if starts is not None else _start_grid(k)):
        f0 = _concentrated_nll(np.asarray(z0, dtype=float), spec, y)
        if not math.isfinite(f0):
            continue
        res = optimize.minimize(
            _concentrated_nll,
            np.asarray(z0, dtype=float),
            args=(spec, y),
            method="Nelder-Mead",
            options={
                "maxiter": maxiter,
                "maxfev": maxiter,
                "fatol": tol * max(1.0, abs(f0)),
                "xatol": 1e-6,
            },
        )
        if math.isfinite(res.fun):
            attempts.append(res)
    if not attempts:
        raise FitError(
            f"no start point produced a finite likelihood for {spec.order_label()}"
        )
    best = min(attempts, key=lambda rr: rr.fun)
    params = _unpack_z(best.x, spec)
    sum_log_f, sum_v2f, _, _, ok = _filter_parts(params, spec.s, y, 1.0)
    sigma2 = sum_v2f / n
    ll = -0.5 * (n * LOG_2PI + sum_log_f + n * math.log(sigma2) + n)
    params = SarimaParams(params.ar, params.ma, params.sar, params.sma, float(sigma2))
    return _build_fit(spec, params, float(sigma2), float(ll), bool(best.success), drift, trend)


def _build_fit(spec, params, sigma2, ll, converged, drift, trend) -> SarimaFit:
    ar_full, ma_full = _expand_polys(params, spec.s)
    if not (_roots_outside(ar_full, 1e-9) and _roots_outside(ma_full, 1e-9)):
        converged = False
    k = spec.n_arma_params + 1 + (1 if trend == "c" else 0)
    aic = 2.0 * k - 2.0 * ll
    return SarimaFit(
        spec, params.ar, params.ma, params.sar, params.sma,
        sigma2, ll, aic, converged, drift, trend,
    )


def _fit_params(fitted: SarimaFit) -> SarimaParams:
    return SarimaParams(fitted.ar, fitted.ma, fitted.sar, fitted.sma, fitted.sigma2)


# ---------------------------------------------------------------------------
# Order selection
# ---------------------------------------------------------------------------

def default_grid(seasonal_periods=(6, 12)) -> list[SarimaSpec]:
    """Candidate orders: p,q in 0..2, d,D in 0..1, P,Q in 0..1."""
    grid = []
    for d in (0, 1):
        for p in (0, 1, 2):
            for q in (0, 1, 2):
                grid.append(SarimaSpec(p, d, q))
                for s in seasonal_periods:
                    for D in (0, 1):
                        for P in (0, 1):
                            for Q in (0, 1):
                                if (P, D, Q) == (0, 0, 0):
                                    continue
                                grid.append(SarimaSpec(p, d, q, P, D, Q, s))
    return grid


def grid_search(series, grid: list[SarimaSpec], **fit_kwargs):
    """Fit every candidate; unfittable ones yield None."""
    if not grid:
        raise InputError("candidate grid is empty")
    results = []
    for spec in grid:
        try:
            results.append((spec, fit(spec, series, **fit_kwargs)))
        except (FitError, InputError):
            results.append((spec, None))
    return results


def select_order(series, grid: list[SarimaSpec], **fit_kwargs) -> SarimaSpec:
    """Minimum-AIC converged candidate; ties go to fewer parameters."""
    results = grid_search(series, grid, **fit_kwargs)
    best: tuple[float, int, SarimaSpec] | None = None
    for spec, fitted in results:
        if fitted is None or not fitted.converged:
            continue
        key = (fitted.aic, spec.n_arma_params)
        if best is None or key < (best[0], best[1]):
            best = (fitted.aic, spec.n_arma_params, spec)
    if best is None:
        raise FitError("no candidate in the grid converged")
    return best[2]


# ---------------------------------------------------------------------------
# Forecasting
# ---------------------------------------------------------------------------

def _psi_weights(params: SarimaParams, spec: SarimaSpec, horizon: int) -> np.ndarray:
    """Impulse responses of the full (integrated) operator."""
    ar_full, ma_full = _expand_polys(params, spec.s)
    a = np.convolve(ar_full, _diff_poly(spec.d, spec.D, spec.s))
    psi = np.zeros(horizon)
    psi[0] = 1.0
    for j in range(1, horizon):
        acc = ma_full[j] if j < ma_full.size else 0.0
        for k in range(1, min(j, a.size - 1) + 1):
            acc -= a[k] * psi[j - k]
        psi[j] = acc
    return psi


def forecast(
    fitted: SarimaFit,
    series,
    horizon: int,
    level: float = 0.95,
    clamp_unit: bool = False,
) -> Forecast:
    """h-step prediction with symmetric Gaussian intervals.

    Means come from iterating the state prediction beyond the sample and
    undoing the differencing; the step-h error variance is sigma2 times the
    cumulative squared impulse responses. With ``clamp_unit`` the displayed
    values are clipped to [0, 1] (flagged per step); raw values are kept.
    """
    if horizon < 1:
        raise InputError("horizon must be positive")
    if not 0 < level < 1:
        raise InputError(f"level must be in (0, 1), got {level}")
    y_raw = np.asarray(series, dtype=float)
    spec = fitted.spec
    params = _fit_params(fitted)
    y = difference(y_raw, spec.d, spec.D, spec.s) - fitted.drift

    tcol, rvec = _state_space(params, spec.s)
    p0 = _stationary_cov(tcol, rvec, fitted.sigma2)
    _, _, a_pred, _, ok = kalman_filter_parts(
        np.ascontiguousarray(tcol), np.ascontiguousarray(rvec),
        np.ascontiguousarray(y), np.ascontiguousarray(p0), fitted.sigma2,
    )
    if not ok:
        raise FitError("filter degenerated while forecasting")

    t_dense = _dense_transition(tcol)
    diff_means = np.empty(horizon)
    a = a_pred
    for h in range(horizon):
        diff_means[h] = a[0] + fitted.drift
        a = t_dense @ a

    # Undo the differencing: y_t = x_t - sum_j c_j y_{t-j}.
    c = _diff_poly(spec.d, spec.D, spec.s)
    history = list(y_raw)
    means = np.empty(horizon)
    for h in range(horizon):
        val = diff_means[h]
        for j in range(1, c.size):
            val -= c[j] * history[len(history) - j]
        means[h] = val
        history.append(val)

    psi = _psi_weights(params, spec, horizon)
    mse = fitted.sigma2 * np.cumsum(psi * psi)
    z = stats.norm.ppf(0.5 + level / 2.0)
    half = z * np.sqrt(mse)
    lower = means - half
    upper = means + half

    if clamp_unit:
        c_mean = np.clip(means, 0.0, 1.0)
        c_lower = np.clip(lower, 0.0, 1.0)
        c_upper = np.clip(upper, 0.0, 1.0)
        clamped = tuple(
            bool(a != b or c != d or e != f)
            for a, b, c, d, e, f in zip(c_mean, means, c_lower, lower, c_upper, upper)
        )
        return Forecast(
            horizon, level,
            tuple(c_mean), tuple(c_lower), tuple(c_upper),
            tuple(means), tuple(lower), tuple(upper), clamped,
        )
    return Forecast(
        horizon, level,
        tuple(means), tuple(lower), tuple(upper),
        tuple(means), tuple(lower), tuple(upper),
        tuple(False for _ in range(horizon)),
    )


# ---------------------------------------------------------------------------
# Simulation and reporting
# ---------------------------------------------------------------------------

def simulate(
    spec: SarimaSpec,
    params: SarimaParams,
    n: int,
    seed: int = 0,
    burn: int = 200,
) -> np.ndarray:
    """Draw a series from the model: ARMA innovations, then integration."""
    ar_full, ma_full = _expand_polys(params, spec.s)
    rng = np.random.default_rng(seed)
    total = n + burn + spec.d + spec.D * spec.s
    eps = rng.normal(0.0, math.sqrt(params.sigma2), size=total)
    x = signal.lfilter(ma_full, ar_full, eps)
    for _ in range(spec.D):
        acc = x.copy()
        for t in range(spec.s, total):
            acc[t] += acc[t - spec.s]
        x = acc
    for _ in range(spec.d):
        x = np.cumsum(x)
    return x[-n:]


def coefficient_table(fitted: SarimaFit, series) -> list[dict]:
    """Per-coefficient standard errors, z-scores, and two-sided p-values.

    Standard errors come from the inverse negative Hessian of the exact
    log-likelihood, differentiated numerically (the variance is handled on
    the log scale and mapped back). Rows are dicts with name/coef/std_err/
    z/p_value; entries are NaN when the Hessian is not usable.
    """
    spec = fitted.spec
    names = (
        [f"ar.L{i}" for i in range(1, spec.p + 1)]
        + [f"ma.L{i}" for i in range(1, spec.q + 1)]
        + [f"ar.S.L{i * spec.s}" for i in range(1, spec.P + 1)]
        + [f"ma.S.L{i * spec.s}" for i in range(1, spec.Q + 1)]
        + ["sigma2"]
    )
    values = np.array(
        list(fitted.ar) + list(fitted.ma) + list(fitted.sar) + list(fitted.sma)
        + [fitted.sigma2]
    )
    y = np.asarray(series, dtype=float)
    drift = fitted.drift

    def unpack(vec: np.ndarray) -> SarimaParams:
        p, q, P, Q = spec.p, spec.q, spec.P, spec.Q
        parts = np.split(vec[:-1], [p, p + q, p + q + P])
        return SarimaParams(
            tuple(parts[0]), tuple(parts[1]), tuple(parts[2]), tuple(parts[3]),
            math.exp(vec[-1]),
        )

    def ll(vec: np.ndarray) -> float:
        try:
            params = unpack(vec)
            yy = difference(y, spec.d, spec.D, spec.s) - drift
            sum_log_f, sum_v2f, _, _, ok = _filter_parts(
                params, spec.s, yy, params.sigma2
            )
            if not ok:
                return math.nan
            n = yy.shape[0]
            return -0.5 * (n * LOG_2PI + sum_log_f + sum_v2f)
        except Exception:
            return math.nan

    x0 = values.copy()
    x0[-1] = math.log(fitted.sigma2)
    k = x0.size
    hess = np.full((k, k), math.nan)
    steps = 1e-4 * np.maximum(1.0, np.abs(x0))
    f0 = ll(x0)
    for i in range(k):
        for j in range(i, k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = steps[i]
            ej[j] = steps[j]
            if i == j:
                val = (ll(x0 + ei) - 2.0 * f0 + ll(x0 - ei)) / (steps[i] ** 2)
            else:
                val = (
                    ll(x0 + ei + ej) - ll(x0 + ei - ej)
                    - ll(x0 - ei + ej) + ll(x0 - ei - ej)
                ) / (4.0 * steps[i] * steps[j])
            hess[i, j] = hess[j, i] = val

    se = np.full(k, math.nan)
    if np.isfinite(hess).all():
        try:
            cov = np.linalg.inv(-hess)
            diag = np.diag(cov).copy()
            # Delta method: back from log-variance to the variance itself.
            diag[-1] *= fitted.sigma2 ** 2
            se = np.sqrt(np.where(diag > 0, diag, math.nan))
        except np.linalg.LinAlgError:
            pass

    rows = []
    for name, coef, err in zip(names, values, se):
        zval = coef / err if math.isfinite(err) and err > 0 else math.nan
        pval = 2.0 * (1.0 - stats.norm.cdf(abs(zval))) if math.isfinite(zval) else math.nan
        rows.append(
            {"name": name, "coef": float(coef), "std_err": float(err),
             "z": float(zval), "p_value": float(pval)}
        )
    return rows
