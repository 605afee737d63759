"""Scalar Kalman filter and fixed-interval smoother for the random-walk trend.

Model: ``t_n = t_{n-1} + v_n``, ``y_n = t_n + w_n`` with ``v_n ~ N(0, tau2)``
and ``w_n ~ N(0, sigma2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, LengthMismatch, NonFiniteInput

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class TrendParams:
    sigma2: float
    tau2: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise InvalidParameter(f"sigma2 must be > 0, got {self.sigma2!r}")
        if not (np.isfinite(self.tau2) and self.tau2 >= 0):
            raise InvalidParameter(f"tau2 must be >= 0, got {self.tau2!r}")


@dataclass(frozen=True)
class GaussianState:
    mean: float
    var: float

    def __post_init__(self):
        if not (np.isfinite(self.var) and self.var >= 0):
            raise InvalidParameter(f"state variance must be >= 0, got {self.var!r}")


@dataclass
class KalmanResult:
    """Arrays of predicted/filtered moments plus the log-likelihood."""

    pred_mean: np.ndarray
    pred_var: np.ndarray
    filt_mean: np.ndarray
    filt_var: np.ndarray
    loglik: float

    @property
    def predicted(self):
        return [GaussianState(m, v) for m, v in zip(self.pred_mean, self.pred_var)]

    @property
    def filtered(self):
        return [GaussianState(m, v) for m, v in zip(self.filt_mean, self.filt_var)]


def diffuse_init(y):
    """Initial state centred on the first observation with variance 4 Var(y)."""
    y = np.asarray(y, dtype=float)
    var = 4.0 * float(np.var(y)) if y.size > 1 else 1.0
    return GaussianState(float(y[0]), var if var > 0 else 1.0)


def _as_series(y):
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise NonFiniteInput("y must be a nonempty 1-D series")
    if not np.all(np.isfinite(y)):
        raise NonFiniteInput("y contains non-finite values")
    return y


def kalman_filter(y, p, init=None):
    """Run the filter; ``init`` is the prior of the state before ``y[0]``."""
    y = _as_series(y)
    if init is None:
        init = diffuse_init(y)
    n = y.size
    pm, pv, fm, fv = (np.empty(n) for _ in range(4))
    m, v = init.mean, init.var
    loglik = 0.0
    for i in range(n):
        v = v + p.tau2
        pm[i], pv[i] = m, v
        r = p.sigma2 + v
        e = y[i] - m
        loglik -= 0.5 * (_LOG_2PI + math.log(r) + e * e / r)
        k = v / r
        m = m + k * e
        v = (1.0 - k) * v
        fm[i], fv[i] = m, v
    return KalmanResult(pm, pv, fm, fv, loglik)


def kalman_loglik(y, p, init=None):
    return kalman_filter(y, p, init).loglik


def kalman_smoother(run, p=None):
    """Fixed-interval (RTS) smoother; returns ``(means, vars)`` arrays.

    ``p`` is accepted for symmetry with the filter call but is not needed:
    the transition is the identity, so the smoother gain only involves the
    stored predicted and filtered variances.
    """
    fm, fv, pm, pv = run.filt_mean, run.filt_var, run.pred_mean, run.pred_var
    n = fm.size
    if not (fv.size == pm.size == pv.size == n):
        raise LengthMismatch("filtered and predicted arrays differ in length")
    sm, sv = fm.copy(), fv.copy()
    for i in range(n - 2, -1, -1):
        a = fv[i] / pv[i + 1] if pv[i + 1] > 0 else 0.0
        sm[i] = fm[i] + a * (sm[i + 1] - pm[i + 1])
        sv[i] = fv[i] + a * a * (sv[i + 1] - pv[i + 1])
    return sm, sv


def smoothed_states(run):
    sm, sv = kalman_smoother(run)
    return [GaussianState(m, max(v, 0.0)) for m, v in zip(sm, sv)]
