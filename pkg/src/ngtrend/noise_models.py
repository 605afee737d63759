"""Symmetric system-noise distributions for the trend model.

Every continuous family exposes its density, influence function
(``-d log p / dx``), random sampling and the two interval integrals
``mass(a, c)`` and ``moment(a, c)`` that the grid convolution needs to
integrate a kernel exactly against piecewise-linear hat functions.

Models are immutable dataclasses.  ``Mixture`` combines two components,
where a ``Delta`` component is a point mass ("no system noise") and is
reported through :func:`atom_mass` rather than through :func:`density`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special

from .errors import InvalidParameter, UndefinedAt

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
PEARSON_B_MIN = 0.5 + 1e-6


def _positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise InvalidParameter(f"{name} must be finite and > 0, got {value!r}")


def _diff_reg(lower, upper, x1, x2):
    """``lower(x2) - lower(x1)`` for a regularized CDF-like pair.

    ``upper`` is the complement of ``lower``; whichever side is smaller is
    differenced so that tail increments keep their relative precision.
    """
    lo2 = lower(x2)
    up2 = upper(x2)
    use_upper = up2 < lo2
    out = lo2 - lower(x1)
    if np.any(use_upper):
        out = np.where(use_upper, upper(x1) - up2, out)
    return out


# --------------------------------------------------------------------------
# components usable both on their own and inside a Mixture


@dataclass(frozen=True)
class Gaussian:
    """Zero-mean normal distribution with variance ``var``."""

    var: float

    family = "gaussian"
    smooth = True

    def __post_init__(self):
        _positive("var", self.var)

    @property
    def scale(self):
        return math.sqrt(self.var)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * x * x / self.var - _LOG_SQRT_2PI - 0.5 * math.log(self.var))

    def dlogpdf(self, x):
        return -np.asarray(x, dtype=float) / self.var

    def mass(self, a, c):
        # P(a < X < c) for 0 <= a < c
        s = math.sqrt(2.0 * self.var)
        a = np.asarray(a, dtype=float) / s
        c = np.asarray(c, dtype=float) / s
        return 0.5 * _diff_reg(special.erf, special.erfc, a, c)

    def moment(self, a, c):
        # integral of x p(x) over (a, c) for 0 <= a < c
        a = np.asarray(a, dtype=float)
        c = np.asarray(c, dtype=float)
        sd = self.scale
        head = sd * np.exp(-0.5 * a * a / self.var - _LOG_SQRT_2PI)
        return -head * np.expm1(-0.5 * (c * c - a * a) / self.var)

    def draw(self, rng, count):
        return rng.normal(0.0, self.scale, size=count)

    def params(self):
        return {"var": self.var}


@dataclass(frozen=True)
class Uniform:
    """Uniform distribution on ``[lo, hi]``."""

    lo: float
    hi: float

    family = "uniform"
    smooth = False

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise InvalidParameter(f"Uniform requires lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def scale(self):
        return (self.hi - self.lo) / math.sqrt(12.0)

    @property
    def symmetric(self):
        return self.lo == -self.hi

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def dlogpdf(self, x):
        x = np.asarray(x, dtype=float)
        if np.any((x <= self.lo) | (x >= self.hi)):
            raise UndefinedAt(x, "outside the open support of the uniform component")
        return np.zeros_like(x)

    def hat_weights(self, h, offsets):
        """Exact integral of the density against a unit hat of half-width h."""
        def ramp(t):
            t = np.clip(t, -h, h)
            return np.where(t < 0, (t + h) ** 2 / (2 * h), h - (h - t) ** 2 / (2 * h))
        return (ramp(offsets - self.lo) - ramp(offsets - self.hi)) / (self.hi - self.lo)

    def draw(self, rng, count):
        return rng.uniform(self.lo, self.hi, size=count)

    def params(self):
        return {"lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Delta:
    """Point mass at ``loc``; contributes an atom, never a density value."""

    loc: float = 0.0

    family = "delta"
    smooth = False

    def __post_init__(self):
        if not np.isfinite(self.loc):
            raise InvalidParameter("Delta location must be finite")

    def draw(self, rng, count):
        return np.full(count, float(self.loc))

    def params(self):
        return {"loc": self.loc}


# --------------------------------------------------------------------------
# heavy-tailed families


@dataclass(frozen=True)
class PearsonVII:
    """Pearson type VII density ``C / (x^2 + tau2)^b`` with ``b > 1/2``.

    ``b = 1`` is the Cauchy law with scale ``sqrt(tau2)`` and
    ``b = (k + 1)/2, tau2 = k`` is Student's t with k degrees of freedom.
    """

    b: float
    tau2: float

    family = "pearson"
    smooth = True

    def __post_init__(self):
        _positive("tau2", self.tau2)
        if not (np.isfinite(self.b) and self.b >= PEARSON_B_MIN):
            raise InvalidParameter(f"Pearson VII requires b > 1/2, got {self.b!r}")

    @property
    def scale(self):
        return math.sqrt(self.tau2)

    @property
    def log_norm(self):
        b = self.b
        return ((2 * b - 1) * 0.5 * math.log(self.tau2) + special.gammaln(b)
                - special.gammaln(0.5) - special.gammaln(b - 0.5))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(self.log_norm - self.b * np.log(x * x + self.tau2))

    def dlogpdf(self, x):
        x = np.asarray(x, dtype=float)
        return -2.0 * self.b * x / (x * x + self.tau2)

    def _half_cdf(self, u):
        # P(0 < X < u)
        u2 = np.asarray(u, dtype=float) ** 2
        return 0.5 * special.betainc(0.5, self.b - 0.5, u2 / (u2 + self.tau2))

    def _half_sf(self, u):
        u2 = np.asarray(u, dtype=float) ** 2
        return 0.5 * special.betainc(self.b - 0.5, 0.5, self.tau2 / (u2 + self.tau2))

    def mass(self, a, c):
        return _diff_reg(self._half_cdf, self._half_sf, a, c)

    def moment(self, a, c):
        a2 = np.asarray(a, dtype=float) ** 2
        c2 = np.asarray(c, dtype=float) ** 2
        base = a2 + self.tau2
        growth = np.log1p((c2 - a2) / base)
        one_minus_b = 1.0 - self.b
        if abs(one_minus_b) < 1e-14:
            return 0.5 * math.exp(self.log_norm) * growth
        head = np.exp(self.log_norm + one_minus_b * np.log(base))
        return head * np.expm1(one_minus_b * growth) / (2.0 * one_minus_b)

    def draw(self, rng, count):
        k = 2.0 * self.b - 1.0
        return rng.standard_t(k, size=count) * (self.scale / math.sqrt(k))

    def params(self):
        return {"b": self.b, "tau2": self.tau2}


@dataclass(frozen=True)
class GeneralizedLaplace:
    """Generalized Laplace density ``C exp(-tau |x|^b)``.

    The normalizing constant is ``C = b tau^(1/b) / (2 Gamma(1/b))`` so that
    ``b = 1`` is the Laplace law and ``b = 2`` is ``N(0, 1/(2 tau))``.
    """

    b: float
    tau: float

    family = "glaplace"

    def __post_init__(self):
        _positive("b", self.b)
        _positive("tau", self.tau)

    @property
    def smooth(self):
        # point sampling is only trusted once the cusp at 0 is gone
        return self.b >= 2.0

    @property
    def scale(self):
        return self.tau ** (-1.0 / self.b)

    @property
    def log_norm(self):
        return math.log(self.b) + math.log(self.tau) / self.b - math.log(2.0) - special.gammaln(1.0 / self.b)

    def pdf(self, x):
        ax = np.abs(np.asarray(x, dtype=float))
        return np.exp(self.log_norm - self.tau * ax ** self.b)

    def dlogpdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.b <= 1 and np.any(x == 0):
            raise UndefinedAt(0.0, "density is not differentiable at the origin for b <= 1")
        ax = np.abs(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -np.sign(x) * self.tau * self.b * ax ** (self.b - 1.0)
        return np.where(x == 0, 0.0, out)

    def mass(self, a, c):
        s = 1.0 / self.b
        xa = self.tau * np.asarray(a, dtype=float) ** self.b
        xc = self.tau * np.asarray(c, dtype=float) ** self.b
        return 0.5 * _diff_reg(lambda z: special.gammainc(s, z),
                               lambda z: special.gammaincc(s, z), xa, xc)

    def moment(self, a, c):
        s = 2.0 / self.b
        xa = self.tau * np.asarray(a, dtype=float) ** self.b
        xc = self.tau * np.asarray(c, dtype=float) ** self.b
        # the prefactor alone can overflow for small b; combine in log space
        log_head = (math.log(0.5) + special.gammaln(s) - special.gammaln(1.0 / self.b)
                    - math.log(self.tau) / self.b)
        diff = _diff_reg(lambda z: special.gammainc(s, z),
                         lambda z: special.gammaincc(s, z), xa, xc)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(diff > 0, np.exp(log_head + np.log(np.maximum(diff, 1e-320))), 0.0)

    def draw(self, rng, count):
        mag = (rng.standard_gamma(1.0 / self.b, size=count) / self.tau) ** (1.0 / self.b)
        return np.where(rng.random(count) < 0.5, -mag, mag)

    def params(self):
        return {"b": self.b, "tau": self.tau}


Component = Union[Gaussian, Uniform, Delta]

# pairings that the model comparison is built around; others are experimental
CERTIFIED_PAIRS = {
    ("gaussian", "gaussian"),
    ("gaussian", "uniform"),
    ("delta", "uniform"),
    ("delta", "gaussian"),
}


@dataclass(frozen=True)
class Mixture:
    """``alpha * f + (1 - alpha) * g`` over Gaussian, Uniform and Delta parts."""

    alpha: float
    f: Component
    g: Component

    family = "mixture"

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and 0.0 <= self.alpha <= 1.0):
            raise InvalidParameter(f"alpha must lie in [0, 1], got {self.alpha!r}")
        for comp in (self.f, self.g):
            if not isinstance(comp, (Gaussian, Uniform, Delta)):
                raise InvalidParameter(f"unsupported mixture component {comp!r}")
        if isinstance(self.f, Delta) and isinstance(self.g, Delta):
            raise InvalidParameter("at most one Delta component is allowed")

    @property
    def certified(self):
        pair = (self.f.family, self.g.family)
        ok = pair in CERTIFIED_PAIRS
        for comp in (self.f, self.g):
            if isinstance(comp, Delta) and comp.loc != 0:
                ok = False
            if isinstance(comp, Uniform) and not comp.symmetric:
                ok = False
        return ok

    @property
    def smooth(self):
        return False

    def parts(self):
        """(weight, component) pairs with nonzero weight."""
        out = []
        for w, comp in ((self.alpha, self.f), (1.0 - self.alpha, self.g)):
            if w > 0:
                out.append((w, comp))
        return out

    def continuous_parts(self):
        return [(w, c) for w, c in self.parts() if not isinstance(c, Delta)]

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for w, comp in self.continuous_parts():
            out = out + w * comp.pdf(x)
        return out

    def dlogpdf(self, x):
        x = np.asarray(x, dtype=float)
        weight, loc = atom_mass(self)
        if weight > 0 and np.any(x == loc):
            raise UndefinedAt(loc, "point mass sits at this location")
        num = np.zeros_like(x)
        den = np.zeros_like(x)
        for w, comp in self.continuous_parts():
            p = comp.pdf(x)
            if isinstance(comp, Uniform):
                # flat inside, absent outside; only the jumps are undefined
                if np.any((x == comp.lo) | (x == comp.hi)):
                    raise UndefinedAt(x, "uniform component jumps here")
            else:
                num = num + w * p * comp.dlogpdf(x)
            den = den + w * p
        if np.any(den <= 0):
            raise UndefinedAt(x, "continuous density is zero")
        return num / den

    def draw(self, rng, count):
        pick_f = rng.random(count) < self.alpha
        return np.where(pick_f, self.f.draw(rng, count), self.g.draw(rng, count))

    def params(self):
        return {"alpha": self.alpha, "f": _component_to_dict(self.f),
                "g": _component_to_dict(self.g)}


NoiseModel = Union[Gaussian, PearsonVII, GeneralizedLaplace, Mixture]
NOISE_TYPES = (Gaussian, PearsonVII, GeneralizedLaplace, Mixture)


# --------------------------------------------------------------------------
# spec-level operations


def _check_model(m):
    if not isinstance(m, NOISE_TYPES):
        raise InvalidParameter(f"not a noise model: {m!r}")


def density(m, x):
    """Continuous-part density of ``m`` at ``x`` (scalar or array)."""
    _check_model(m)
    x_arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x_arr)):
        raise InvalidParameter("x must be finite")
    out = m.pdf(x_arr)
    return float(out) if np.ndim(out) == 0 else out


def atom_mass(m):
    """Return ``(weight, location)`` of the point mass carried by ``m``."""
    _check_model(m)
    if not isinstance(m, Mixture):
        return 0.0, 0.0
    weight, loc = 0.0, 0.0
    if isinstance(m.f, Delta):
        weight, loc = m.alpha, m.f.loc
    elif isinstance(m.g, Delta):
        weight, loc = 1.0 - m.alpha, m.g.loc
    return float(weight), float(loc)


def influence(m, x):
    """Influence function ``-d log p(x) / dx`` of the continuous part."""
    _check_model(m)
    x_arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x_arr)):
        raise InvalidParameter("x must be finite")
    if np.any(m.pdf(x_arr) <= 0):
        raise UndefinedAt(x, "density is zero")
    out = -m.dlogpdf(x_arr)
    return float(out) if np.ndim(out) == 0 else out


def sample(m, rng_seed, count):
    """``count`` i.i.d. draws from ``m`` using a PCG64 stream seeded by ``rng_seed``."""
    _check_model(m)
    if count < 0:
        raise InvalidParameter("count must be >= 0")
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    return np.asarray(m.draw(rng, int(count)), dtype=float)


def scale_proxy(m):
    """A width used to size quadrature windows for ``m``."""
    if isinstance(m, Mixture):
        return max((c.scale for _, c in m.continuous_parts()), default=1.0)
    return m.scale


# --------------------------------------------------------------------------
# JSON serialization: {"family": ..., "params": {...}}

_COMPONENTS = {"gaussian": Gaussian, "uniform": Uniform, "delta": Delta}


def _component_to_dict(c):
    return {"kind": c.family, **c.params()}


def _component_from_dict(d):
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _COMPONENTS:
        raise InvalidParameter(f"unknown mixture component kind {kind!r}")
    return _COMPONENTS[kind](**{k: float(v) for k, v in d.items()})


def to_dict(m):
    _check_model(m)
    return {"family": m.family, "params": m.params()}


def from_dict(d):
    try:
        family = d["family"]
        params = dict(d.get("params", {}))
    except (KeyError, TypeError) as exc:
        raise InvalidParameter(f"malformed noise model object: {d!r}") from exc
    try:
        if family == "gaussian":
            return Gaussian(float(params["var"]))
        if family == "pearson":
            return PearsonVII(float(params["b"]), float(params["tau2"]))
        if family == "glaplace":
            return GeneralizedLaplace(float(params["b"]), float(params["tau"]))
        if family == "mixture":
            return Mixture(float(params["alpha"]), _component_from_dict(params["f"]),
                           _component_from_dict(params["g"]))
    except KeyError as exc:
        raise InvalidParameter(f"missing parameter {exc} for family {family!r}") from exc
    raise InvalidParameter(f"unknown noise family {family!r}")


def to_json(m):
    return json.dumps(to_dict(m), sort_keys=True)


def from_json(text):
    return from_dict(json.loads(text))
