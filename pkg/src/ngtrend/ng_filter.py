"""Grid-based non-Gaussian filter and fixed-interval smoother.

The state density is carried on a :class:`~ngtrend.grid_core.Grid` as a
piecewise-linear function (plus an optional atom).  Each step predicts by
convolving with the system-noise kernel, then multiplies by the Gaussian
observation likelihood evaluated analytically at the nodes.  The smoother
runs the backward recursion

    p(x_n | Y_N) = p(x_n | Y_n) * int q(z - x_n) p(z | Y_N) / p(z | Y_n) dz

with the density ratio guarded against underflow in the tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import grid_core as gc
from . import noise_models as nm
from .errors import (InvalidParameter, LengthMismatch, NonFiniteInput,
                     NumericalBlowup, ZeroEvidence)

RATIO_FLOOR = 1e-300
DENSITY_FLOOR = 1e-250

# 0.13, 2.27, 15.87, 50, 84.13, 97.73 and 99.87 percent
BAND_LEVELS = (0.0013, 0.0227, 0.1587, 0.5, 0.8413, 0.9773, 0.9987)
BAND_LABELS = ("p0.13", "p2.27", "p15.87", "p50", "p84.13", "p97.73", "p99.87")

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class NgModel:
    sys_noise: object
    obs_sigma2: float
    grid: gc.Grid

    def __post_init__(self):
        if not (np.isfinite(self.obs_sigma2) and self.obs_sigma2 > 0):
            raise InvalidParameter(f"obs_sigma2 must be > 0, got {self.obs_sigma2!r}")
        if not isinstance(self.sys_noise, nm.NOISE_TYPES):
            raise InvalidParameter(f"sys_noise must be a noise model, got {self.sys_noise!r}")


@dataclass
class NgRunResult:
    predicted: list
    filtered: list
    smoothed: list | None
    loglik: float
    log_evidence: np.ndarray
    clipped_mass: float = 0.0
    kernel: gc.TransitionKernel | None = field(default=None, repr=False)


@dataclass
class PosteriorBands:
    levels: tuple
    values: np.ndarray  # shape (N, len(levels))

    @property
    def median(self):
        return self.values[:, self.levels.index(0.5)]

    def __len__(self):
        return self.values.shape[0]


def default_grid(y, span=4.0, n_nodes=800):
    """``[min(y) - span*sd(y), max(y) + span*sd(y)]`` with ``n_nodes`` nodes."""
    y = np.asarray(y, dtype=float)
    sd = float(np.std(y))
    if not sd > 0:
        sd = 1.0
    return gc.Grid(float(y.min()) - span * sd, float(y.max()) + span * sd, int(n_nodes))


def default_init(y, grid):
    """Gaussian prior at ``y[0]`` with variance ``4 Var(y)``, as in the Kalman path."""
    y = np.asarray(y, dtype=float)
    var = 4.0 * float(np.var(y)) if y.size > 1 else 1.0
    return gc.normalize(gc.gaussian_density(grid, float(y[0]), var if var > 0 else 1.0))


def _check_series(y):
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0 or not np.all(np.isfinite(y)):
        raise NonFiniteInput("y must be a nonempty finite 1-D series")
    return y


def ng_filter(y, m, init=None, method="auto", store=True):
    """Forward pass.  Returns an :class:`NgRunResult` with ``smoothed=None``.

    With ``store=False`` only the log-likelihood terms are kept, which is
    what the optimizer needs.
    """
    y = _check_series(y)
    grid = m.grid
    if init is None:
        init = default_init(y, grid)
    if init.grid != grid:
        raise InvalidParameter("initial density lives on a different grid")
    kernel = gc.transition_kernel(m.sys_noise, grid)
    x = grid.nodes
    h = grid.h
    half_inv_s2 = 0.5 / m.obs_sigma2
    log_norm = -0.5 * (_LOG_2PI + math.log(m.obs_sigma2))

    # log-likelihood of every observation at every node, shifted per row so
    # the peak is 0; the shift is added back to the evidence
    ll_all = -half_inv_s2 * np.square(y[:, None] - x[None, :])
    shifts = ll_all.max(axis=1)
    lik_all = np.exp(ll_all - shifts[:, None])
    del ll_all

    prop = gc.propagator(kernel, method)
    vals, aw, al = init.values, init.atom_weight, init.atom_location
    predicted, filtered = [], []
    log_ev = np.empty(y.size)
    loglik = 0.0
    clipped = 0.0
    for i, yi in enumerate(y):
        pv, pw, pl = gc.convolve_arrays(grid, vals, aw, al, kernel, method, prop)
        total = gc._trapz(pv, h) + pw
        if not total > 0:
            raise ZeroEvidence(f"predicted density vanished at step {i}")
        clipped += max(0.0, 1.0 - total)
        pv = pv / total
        pw = pw / total
        if store:
            predicted.append(gc.GridDensity(grid, pv, pw, pl))

        shift = float(shifts[i])
        fv = pv * lik_all[i]
        fv[fv < gc.FLUSH] = 0.0
        fw = pw * math.exp(-half_inv_s2 * (yi - pl) ** 2 - shift) if pw > 0 else 0.0
        ev = gc._trapz(fv, h) + fw
        if not (ev > 0 and np.isfinite(ev)):
            raise ZeroEvidence(
                f"observation {i} (y={yi:g}) has no support on the grid [{grid.lo:g}, {grid.hi:g}]")
        vals, aw, al = fv / ev, fw / ev, pl
        if store:
            filtered.append(gc.GridDensity(grid, vals, aw, al))
        log_ev[i] = math.log(ev) + shift + log_norm
        loglik += log_ev[i]
    return NgRunResult(predicted, filtered, None, loglik, log_ev, clipped, kernel)


def ng_loglik(y, m, init=None, method="auto"):
    return ng_filter(y, m, init, method, store=False).loglik


def ng_smooth(run, m, method="auto"):
    """Backward pass over a stored filter run; returns smoothed densities."""
    pred, filt = run.predicted, run.filtered
    n = len(filt)
    if len(pred) != n or n == 0:
        raise LengthMismatch("run must hold equally long predicted and filtered arrays")
    grid = m.grid
    if filt[0].grid != grid:
        raise InvalidParameter("run was computed on a different grid")
    kernel = run.kernel if run.kernel is not None and run.kernel.grid == grid else \
        gc.transition_kernel(m.sys_noise, grid)
    h = grid.h
    tw = gc.trapz_weights(grid.n_nodes)

    back_prop = gc.propagator(kernel, method, flip=True)
    smoothed = [None] * n
    smoothed[-1] = filt[-1]
    for i in range(n - 2, -1, -1):
        s_next, p_next, f = smoothed[i + 1], pred[i + 1], filt[i]
        p_vals = p_next.values
        ratio = np.where(p_vals >= RATIO_FLOOR,
                         s_next.values / np.maximum(p_vals, DENSITY_FLOOR), 0.0)
        ratio_atom = 0.0
        if p_next.atom_weight > 0:
            ratio_atom = s_next.atom_weight / max(p_next.atom_weight, DENSITY_FLOOR)
        peak = max(float(ratio.max()), ratio_atom)
        if not np.isfinite(peak):
            raise NumericalBlowup(
                f"smoother density ratio is not finite at step {i + 1}; "
                "the grid is probably too coarse or too narrow for this model")

        back = back_prop(ratio)
        if kernel.delta_weight > 0:
            back += kernel.delta_weight * gc._shift(ratio, grid, -kernel.delta_loc)
        vals = f.values * back

        atom = 0.0
        if f.atom_weight > 0:
            back_atom = 0.0
            if kernel.continuous_weight > 0:
                spread = kernel.atom_spread(f.atom_location)
                back_atom += h * float(np.sum(tw * ratio * spread))
            if kernel.delta_weight > 0:
                back_atom += kernel.delta_weight * ratio_atom
            atom = f.atom_weight * back_atom
        smoothed[i] = gc.normalize(gc.GridDensity(grid, vals, atom, f.atom_location))
    return smoothed


def run_smoother(y, m, init=None, method="auto"):
    """Filter then smooth; returns the completed :class:`NgRunResult`."""
    run = ng_filter(y, m, init, method, store=True)
    run.smoothed = ng_smooth(run, m, method)
    return run


def posterior_bands(smoothed, levels=BAND_LEVELS):
    """Per-step percentile curves of the given marginals."""
    levels = tuple(levels)
    vals = np.array([gc.percentiles(d, levels) for d in smoothed])
    return PosteriorBands(levels, vals.reshape(len(smoothed), len(levels)))
