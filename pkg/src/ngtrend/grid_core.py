"""Piecewise-linear densities on uniform 1-D grids.

A :class:`GridDensity` holds nodal values of a continuous piecewise-linear
density plus an optional point mass (atom).  Integrals use the trapezoid
rule, which is exact for that representation.

Convolution with a noise model goes through :class:`TransitionKernel`, a
Toeplitz weight vector ``K[m]`` indexed by node offset ``m``.  Each weight
is the exact integral of the noise density against the hat basis function
of a node, which keeps arbitrarily peaked kernels (tiny dispersion, cusps,
uniform edges) mass-consistent.  Smooth, well-resolved kernels are instead
point-sampled (``h * q(m h)``), which avoids the excess variance that hat
integration adds per step; the two are blended smoothly in between.  Narrow
Gaussian kernels get their discrete variance corrected back to the exact one.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sp_fft

from . import noise_models as nm
from .errors import (DomainError, InvalidParameter, NotFinite, UnsupportedKernel,
                     ZeroEvidence, ZeroMass)

# Kernel scale, in grid spacings, below which hat integration is used
# exclusively and above which point sampling is.  Trapezoid sums of a
# Gaussian converge like exp(-2 pi^2 (s/h)^2), of a Pearson kernel like
# exp(-2 pi s/h), hence the different bands.
RESOLVE_BANDS = {"gaussian": (0.5, 1.0), "pearson": (1.0, 3.0), "glaplace": (1.0, 3.0)}

FFT_DYNAMIC_RANGE = 1e-8
FFT_MIN_REACH = 128
# offset, as a fraction of the grid width, at which the kernel must still
# carry FFT_DYNAMIC_RANGE of its peak weight for FFT to be chosen
FFT_PROBE_FRACTION = 0.1

# values below this are flushed to zero; keeps products clear of subnormal
# arithmetic, which is two orders of magnitude slower
FLUSH = 1e-150


@dataclass(frozen=True)
class Grid:
    lo: float
    hi: float
    n_nodes: int

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise InvalidParameter("grid bounds must be finite")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 2:
            raise InvalidParameter(f"n_nodes must be an integer >= 2, got {self.n_nodes!r}")
        if not self.lo < self.hi:
            raise InvalidParameter(f"grid requires lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def h(self):
        return (self.hi - self.lo) / (self.n_nodes - 1)

    @property
    def nodes(self):
        return self.lo + np.arange(self.n_nodes) * self.h

    def contains(self, x):
        return self.lo <= x <= self.hi


@dataclass(frozen=True, eq=False)
class GridDensity:
    grid: Grid
    values: np.ndarray
    atom_weight: float = 0.0
    atom_location: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_nodes,):
            raise InvalidParameter(f"expected {self.grid.n_nodes} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NotFinite("density values must be finite")
        if np.any(v < 0):
            raise InvalidParameter("density values must be nonnegative")
        w = float(self.atom_weight)
        if not (np.isfinite(w) and w >= 0):
            raise InvalidParameter(f"atom weight must be >= 0, got {w!r}")
        if w > 0 and not self.grid.contains(self.atom_location):
            raise InvalidParameter("atom location lies outside the grid")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "atom_weight", w)
        object.__setattr__(self, "atom_location", float(self.atom_location))

    def mean(self):
        x = self.grid.nodes
        return (_trapz(x * self.values, self.grid.h) + self.atom_weight * self.atom_location) / trapezoid_integral(self)

    def var(self):
        mu = self.mean()
        x = self.grid.nodes - mu
        second = _trapz(x * x * self.values, self.grid.h)
        second += self.atom_weight * (self.atom_location - mu) ** 2
        return second / trapezoid_integral(self)

    def cdf_nodes(self):
        """Continuous-part CDF at the nodes (atom excluded)."""
        v = self.values
        steps = 0.5 * self.grid.h * (v[1:] + v[:-1])
        return np.concatenate(([0.0], np.cumsum(steps)))


def _trapz(v, h):
    return h * (np.sum(v) - 0.5 * (v[0] + v[-1]))


@functools.lru_cache(maxsize=16)
def trapz_weights(n):
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    w.flags.writeable = False
    return w


# --------------------------------------------------------------------------
# constructors


def from_function(grid, fn, atom_weight=0.0, atom_location=0.0):
    """Sample ``fn`` at the grid nodes."""
    return GridDensity(grid, np.asarray(fn(grid.nodes), dtype=float), atom_weight, atom_location)


def gaussian_density(grid, mean, var):
    x = grid.nodes
    v = np.exp(-0.5 * (x - mean) ** 2 / var) / math.sqrt(2 * math.pi * var)
    return GridDensity(grid, v)


def point_mass(grid, loc):
    return GridDensity(grid, np.zeros(grid.n_nodes), 1.0, loc)


# --------------------------------------------------------------------------
# basic operations


def trapezoid_integral(d):
    """Total mass: trapezoid integral of the values plus the atom weight."""
    if not np.all(np.isfinite(d.values)) or not np.isfinite(d.atom_weight):
        raise NotFinite("density contains non-finite values")
    return float(_trapz(d.values, d.grid.h) + d.atom_weight)


def normalize(d):
    """Rescale values and atom by one positive constant to unit total mass."""
    try:
        total = trapezoid_integral(d)
    except NotFinite as exc:
        raise ZeroMass("cannot normalize a non-finite density") from exc
    if not (total > 0 and np.isfinite(total)):
        raise ZeroMass(f"total mass is {total!r}")
    if total < 1e-290:
        # subnormal totals carry few significant bits; rescale by the peak first
        peak = max(float(d.values.max()), d.atom_weight)
        d = GridDensity(d.grid, d.values / peak, d.atom_weight / peak, d.atom_location)
        total = trapezoid_integral(d)
    if total == 1.0:
        return d
    return GridDensity(d.grid, d.values / total, d.atom_weight / total, d.atom_location)


# --------------------------------------------------------------------------
# transition kernels


def _symmetric_hat_weights(comp, h, n):
    """Exact hat-basis weights K[m], m = 0..n-1, for a symmetric density."""
    m = np.arange(1, n, dtype=float)
    a, c, d = (m - 1) * h, m * h, (m + 1) * h
    left = (comp.moment(a, c) - a * comp.mass(a, c)) / h
    right = (d * comp.mass(c, d) - comp.moment(c, d)) / h
    k0 = 2.0 * (h * comp.mass(0.0, h) - comp.moment(0.0, h)) / h
    out = np.concatenate(([k0], left + right))
    return np.maximum(out, 0.0)


def _match_variance(half, var, h):
    """Move mass between offsets +-1 and 0 so the kernel variance is ``var``.

    Hat weights of a kernel narrower than the spacing have a second moment
    near ``h * E|v|`` rather than ``var``, and blended weights sit in between.
    Mass and symmetry are unchanged.
    """
    if half.size < 2:
        return half
    mass = half[0] + 2.0 * float(np.sum(half[1:]))
    m2 = 2.0 * h * h * float(np.sum(np.arange(1, half.size) ** 2 * half[1:]))
    shift = min(max((m2 - var * mass) / (2.0 * h * h), -0.5 * half[0]), half[1])
    out = half.copy()
    out[1] -= shift
    out[0] += 2.0 * shift
    return out


def _resolution_weight(comp, h):
    if not comp.smooth:
        return 0.0
    lo, hi = RESOLVE_BANDS["gaussian" if getattr(comp, "b", None) == 2.0 else comp.family]
    t = np.clip((comp.scale / h - lo) / (hi - lo), 0.0, 1.0)
    return float(t * t * (3.0 - 2.0 * t))


def _component_weights(comp, h, n):
    """Weights for offsets m = -(n-1)..(n-1), length 2n-1."""
    offsets = np.arange(-(n - 1), n) * h
    if isinstance(comp, nm.Uniform):
        return np.maximum(comp.hat_weights(h, offsets), 0.0)
    half_hat = None
    w_point = _resolution_weight(comp, h)
    if w_point < 1.0:
        half_hat = _symmetric_hat_weights(comp, h, n)
    if w_point > 0.0:
        half_pt = h * comp.pdf(np.arange(n) * h)
        half = half_pt if half_hat is None else w_point * half_pt + (1.0 - w_point) * half_hat
    else:
        half = half_hat
    if isinstance(comp, nm.Gaussian):
        half = _match_variance(half, comp.var, h)
    return np.concatenate((half[:0:-1], half))


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """Discretized ``p(x_n | x_{n-1}) = q(x_n - x_{n-1})`` on a grid.

    ``weights[m + n - 1]`` multiplies the source node value at offset ``m``
    for the continuous part; ``delta_weight`` is carried through unchanged
    (shifted by ``delta_loc``).
    """

    grid: Grid
    weights: np.ndarray
    delta_weight: float
    delta_loc: float
    model: object = None
    _spectrum: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        w = self.weights
        n = self.grid.n_nodes
        nz = np.nonzero(w)[0]
        reach = int(max(n - 1 - nz[0], nz[-1] - (n - 1))) if nz.size else 0
        trimmed = w[n - 1 - reach:n + reach]
        trimmed.flags.writeable = False
        object.__setattr__(self, "reach", reach)
        object.__setattr__(self, "trimmed", trimmed)
        # FFT round-off is ~1e-16 of the peak.  Light tails matter far below
        # that level (a jump is detected through them), so FFT is only used
        # when the kernel is still well above the floor at jump-sized offsets
        probe = max(1, int(round(FFT_PROBE_FRACTION * (n - 1))))
        floor = FFT_DYNAMIC_RANGE * w.max()
        heavy = w.max() > 0 and min(w[n - 1 - probe], w[n - 1 + probe]) > floor
        object.__setattr__(self, "auto_method", "fft" if heavy and reach > FFT_MIN_REACH else "direct")

    @property
    def continuous_weight(self):
        return 1.0 - self.delta_weight

    def fft_spectrum(self, nfft, flip=False):
        spec = self._spectrum.get((nfft, flip))
        if spec is None:
            spec = sp_fft.rfft(self.weights[::-1] if flip else self.weights, nfft)
            self._spectrum[(nfft, flip)] = spec
        return spec

    def atom_spread(self, loc):
        """Continuous density at the nodes produced by a unit atom at ``loc``."""
        g = self.grid
        n = g.n_nodes
        offsets = (g.nodes - loc) / g.h + (n - 1)
        return np.interp(offsets, np.arange(2 * n - 1), self.weights, left=0.0, right=0.0) / g.h


def transition_kernel(model, grid):
    if isinstance(model, TransitionKernel):
        return model
    if not isinstance(model, nm.NOISE_TYPES):
        raise UnsupportedKernel(f"cannot build a transition kernel from {model!r}")
    n, h = grid.n_nodes, grid.h
    weights = np.zeros(2 * n - 1)
    delta_w, delta_loc = nm.atom_mass(model)
    if isinstance(model, nm.Mixture):
        parts = model.continuous_parts()
    else:
        parts = [(1.0, model)]
    for w, comp in parts:
        weights += w * _component_weights(comp, h, n)
    weights[weights < FLUSH * weights.max(initial=0.0)] = 0.0
    weights.flags.writeable = False
    return TransitionKernel(grid, weights, delta_w, delta_loc, model)


def _apply(values, kernel, method, flip=False):
    """Discrete convolution ``out[i] = sum_j values[j] K[i-j]`` (or ``K[j-i]``).

    ``method="auto"`` uses the exact direct sum over the kernel's nonzero
    support unless the kernel is heavy-tailed enough for FFT round-off to be
    negligible everywhere on the grid.
    """
    n = values.shape[0]
    if method == "auto":
        method = kernel.auto_method
    if method == "direct":
        k = kernel.trimmed[::-1] if flip else kernel.trimmed
        r = kernel.reach
        out = np.convolve(values, k)[r:r + n]
        out[out < FLUSH] = 0.0
        return out
    if method == "fft":
        # outputs n-1 .. 2n-2 of the linear convolution are alias-free for
        # any circular length >= 2n - 1
        nfft = sp_fft.next_fast_len(2 * n - 1, real=True)
        spec = kernel.fft_spectrum(nfft, flip)
        full = sp_fft.irfft(sp_fft.rfft(values, nfft) * spec, nfft)[n - 1:2 * n - 1]
        full[full < FLUSH] = 0.0
        return full
    raise InvalidParameter(f"unknown convolution method {method!r}")


def _shift(values, grid, loc):
    if loc == 0.0:
        return values
    x = grid.nodes
    return np.interp(x - loc, x, values, left=0.0, right=0.0)


def propagator(kernel, method="auto", flip=False):
    """Return ``f(values)`` computing the continuous-density part of X + V.

    Equivalent to the node-value part of :func:`convolve_arrays` (or of
    :func:`correlate_arrays` with ``flip``, which omits the delta part), with
    all per-kernel set-up hoisted out of the call.  Used in the filter loop.
    """
    grid = kernel.grid
    n = grid.n_nodes
    tw = trapz_weights(n)
    method = kernel.auto_method if method == "auto" else method
    cw = kernel.continuous_weight
    dw = 0.0 if flip else kernel.delta_weight
    if cw > 0 and method == "fft":
        nfft = sp_fft.next_fast_len(2 * n - 1, real=True)
        spec = kernel.fft_spectrum(nfft, flip)
        rfft, irfft = sp_fft.rfft, sp_fft.irfft

        def cont(v):
            out = irfft(rfft(v * tw, nfft) * spec, nfft)[n - 1:2 * n - 1]
            out[out < FLUSH] = 0.0
            return out
    elif cw > 0:
        if method != "direct":
            raise InvalidParameter(f"unknown convolution method {method!r}")

        def cont(v):
            return _apply(v * tw, kernel, "direct", flip)
    else:
        def cont(v):
            return np.zeros(n)

    if dw == 0:
        return cont
    loc = kernel.delta_loc

    def step(v):
        return cont(v) + dw * _shift(v, grid, loc)
    return step


def convolve_arrays(grid, values, atom_weight, atom_location, kernel, method="auto", prop=None):
    """Array-level core of :func:`convolve`, without normalization.

    Returns ``(values, atom_weight, atom_location)`` of X + V.  ``prop`` is an
    optional precomputed :func:`propagator` for the same kernel.
    """
    cw = kernel.continuous_weight
    out = (prop or propagator(kernel, method))(values)
    atom_w, atom_loc = 0.0, atom_location
    if atom_weight > 0:
        if cw > 0:
            out += atom_weight * kernel.atom_spread(atom_location)
        if kernel.delta_weight > 0:
            atom_w = atom_weight * kernel.delta_weight
            atom_loc = atom_location + kernel.delta_loc
            if not grid.contains(atom_loc):
                atom_w = 0.0
    return out, atom_w, atom_loc


def correlate_arrays(grid, ratio, kernel, method="auto"):
    """Continuous part of ``x -> sum_j ratio_j K[j - i]``, the adjoint of the
    continuous convolution (used by the smoother)."""
    return _apply(ratio * trapz_weights(grid.n_nodes), kernel, method, flip=True)


def convolve_raw(d, kernel, method="auto"):
    """Unnormalized density of X + V; returns ``(values, atom_weight, atom_loc)``."""
    return convolve_arrays(d.grid, d.values, d.atom_weight, d.atom_location, kernel, method)


def convolve(d, kernel, method="auto"):
    """Density of ``X + V`` with ``X ~ d`` and ``V ~ kernel``, renormalized.

    ``kernel`` may be a noise model or a prebuilt :class:`TransitionKernel`.
    Mass pushed outside the grid is dropped and restored by normalization.
    """
    k = transition_kernel(kernel, d.grid)
    if k.grid != d.grid:
        raise InvalidParameter("kernel was built for a different grid")
    values, aw, al = convolve_raw(d, k, method)
    return normalize(GridDensity(d.grid, values, aw, al))


def pointwise_bayes(prior, likelihood_at_nodes, likelihood_at_atom=None):
    """Multiply ``prior`` by a likelihood and renormalize.

    Returns ``(posterior, evidence)`` where evidence is the integral of
    prior times likelihood.  The atom is reweighted by the likelihood at the
    atom location, interpolated from the nodes unless given explicitly.
    """
    lik = np.asarray(likelihood_at_nodes, dtype=float)
    g = prior.grid
    if lik.shape != (g.n_nodes,):
        raise InvalidParameter("likelihood must have one value per grid node")
    if not np.all(np.isfinite(lik)) or np.any(lik < 0):
        raise InvalidParameter("likelihood values must be finite and >= 0")
    values = prior.values * lik
    atom_w = 0.0
    if prior.atom_weight > 0:
        if likelihood_at_atom is None:
            likelihood_at_atom = float(np.interp(prior.atom_location, g.nodes, lik))
        atom_w = prior.atom_weight * likelihood_at_atom
    evidence = float(_trapz(values, g.h) + atom_w)
    if not (evidence > 0 and np.isfinite(evidence)):
        raise ZeroEvidence("observation likelihood has no overlap with the prior on this grid")
    post = GridDensity(g, values / evidence, atom_w / evidence, prior.atom_location)
    return post, evidence


def percentile(d, q):
    """Inverse CDF at ``q``; an atom is a jump returning its location."""
    if not (0.0 < q < 1.0):
        raise DomainError(f"q must lie in (0, 1), got {q!r}")
    x = d.grid.nodes
    cdf = d.cdf_nodes()
    total = cdf[-1] + d.atom_weight
    target = q * total
    if d.atom_weight > 0:
        below = float(np.interp(d.atom_location, x, cdf))
        if below <= target <= below + d.atom_weight:
            return d.atom_location
        if target > below:
            target -= d.atom_weight
    return _invert(x, cdf, target)


def _invert(x, cdf, target):
    i = int(np.searchsorted(cdf, target, side="left"))
    if i <= 0:
        return float(x[0])
    if i >= len(x):
        return float(x[-1])
    c0, c1 = cdf[i - 1], cdf[i]
    if c1 <= c0:
        return float(x[i])
    return float(x[i - 1] + (target - c0) / (c1 - c0) * (x[i] - x[i - 1]))


def percentiles(d, qs):
    return np.array([percentile(d, q) for q in qs])
