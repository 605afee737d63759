"""Independent reference computations used by several test modules."""

import numpy as np


def kalman_loglik_grid(y, sigma2, tau2, m0=None, v0=None):
    """Random-walk-plus-noise log-likelihood for arrays of (sigma2, tau2).

    Written as a vectorized innovations recursion that shares no code with
    the package.
    """
    y = np.asarray(y, dtype=float)
    s2, t2 = np.broadcast_arrays(np.asarray(sigma2, float), np.asarray(tau2, float))
    m = np.full(s2.shape, y[0] if m0 is None else m0)
    v = np.full(s2.shape, 4.0 * np.var(y) if v0 is None else v0)
    ll = np.zeros(s2.shape)
    for yi in y:
        p = v + t2
        f = p + s2
        e = yi - m
        ll -= 0.5 * (np.log(2 * np.pi * f) + e * e / f)
        g = p / f
        m = m + g * e
        v = p * (1 - g)
    return ll


def grid_search(y, n=21, s2_range=(0.5, 2.0), t2_range=(1e-3, 1e-1)):
    """Best (loglik, sigma2, tau2) on a log-spaced n x n lattice."""
    s2 = np.geomspace(*s2_range, n)
    t2 = np.geomspace(*t2_range, n)
    S, T = np.meshgrid(s2, t2, indexing="ij")
    ll = kalman_loglik_grid(y, S, T)
    i, j = np.unravel_index(np.argmax(ll), ll.shape)
    return float(ll[i, j]), float(s2[i]), float(t2[j])
