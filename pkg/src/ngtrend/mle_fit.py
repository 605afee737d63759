"""Maximum-likelihood fitting, profiles over a shape parameter, and AIC tables.

Free parameters are optimized by Nelder-Mead in an unconstrained space:
variances and dispersions in log space, mixture weights in logit space,
the Pearson shape as ``log(b - 1/2)`` and the generalized Laplace shape in
log space.  Transformed coordinates are clamped to ``[-CLAMP, CLAMP]``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, special

from . import kalman
from . import noise_models as nm
from .errors import BudgetExhausted, DegenerateData, InvalidSpec, NgTrendError
from .ng_filter import NgModel, default_grid, default_init, ng_loglik

log = logging.getLogger(__name__)

CLAMP = 40.0
SIMPLEX_TOL = 1e-4
PENALTY = 1e300
# restarts ending within this log-likelihood of the incumbent count as agreeing
AGREE_TOL = 1e-4
# spread (transformed units) of restart starts and simplexes around the incumbent
RESTART_JITTER = 0.15


# --------------------------------------------------------------------------
# parameter access


def model_params(m):
    """Named free-able parameters of a noise model."""
    if isinstance(m, nm.Gaussian):
        return {"tau2": m.var}
    if isinstance(m, nm.PearsonVII):
        return {"tau2": m.tau2, "b": m.b}
    if isinstance(m, nm.GeneralizedLaplace):
        return {"tau": m.tau, "b": m.b}
    if isinstance(m, nm.Mixture):
        out = {"alpha": m.alpha}
        if isinstance(m.f, nm.Gaussian):
            out["tau2"] = m.f.var
        return out
    raise InvalidSpec(f"unsupported model {m!r}")


def with_params(m, values):
    if not values:
        return m
    if isinstance(m, nm.Gaussian):
        return nm.Gaussian(values.get("tau2", m.var))
    if isinstance(m, nm.PearsonVII):
        return nm.PearsonVII(values.get("b", m.b), values.get("tau2", m.tau2))
    if isinstance(m, nm.GeneralizedLaplace):
        return nm.GeneralizedLaplace(values.get("b", m.b), values.get("tau", m.tau))
    if isinstance(m, nm.Mixture):
        f = m.f
        if "tau2" in values:
            f = nm.Gaussian(values["tau2"])
        return nm.Mixture(values.get("alpha", m.alpha), f, m.g)
    raise InvalidSpec(f"unsupported model {m!r}")


def _to_free(name, value, m):
    if name == "alpha":
        return float(special.logit(value))
    if name == "b" and isinstance(m, nm.PearsonVII):
        return math.log(value - 0.5)
    return math.log(value)


def _from_free(name, theta, m):
    theta = float(np.clip(theta, -CLAMP, CLAMP))
    if name == "alpha":
        return float(special.expit(theta))
    if name == "b" and isinstance(m, nm.PearsonVII):
        return max(0.5 + math.exp(theta), nm.PEARSON_B_MIN)
    return math.exp(theta)


# coarse 1-D scan ranges (transformed space) used to seed the optimizer
_SCAN = {
    "tau2": np.arange(-30.0, 1.0, 3.0),
    "tau": np.arange(-2.0, 8.5, 1.0),
    "alpha": np.arange(1.0, 11.0, 1.0),
}


# --------------------------------------------------------------------------
# specs and results


@dataclass(frozen=True)
class FitSpec:
    """What to fit: a model template plus which parameters are free.

    Parameter names are ``sigma2`` (observation variance) and those of
    :func:`model_params`.  Fixed parameters keep the template values; a
    ``sigma2`` of ``None`` starts from half the variance of ``diff(y)``.
    """

    model: object
    free: tuple = ("sigma2", "tau2")
    sigma2: float | None = None
    name: str = ""
    budget: int = 400
    restarts: int = 3
    engine: str = "auto"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "free", tuple(self.free))
        known = {"sigma2", *model_params(self.model)}
        unknown = [p for p in self.free if p not in known]
        if unknown:
            raise InvalidSpec(f"unknown free parameters {unknown} for {self.model!r}")
        if len(set(self.free)) != len(self.free):
            raise InvalidSpec("duplicate free parameters")
        if self.budget < 50:
            raise InvalidSpec("optimizer budget must be >= 50 evaluations")
        if self.restarts < 1:
            raise InvalidSpec("restarts must be >= 1")
        if self.engine not in ("auto", "grid", "kalman"):
            raise InvalidSpec(f"unknown engine {self.engine!r}")
        if self.engine == "kalman" and not isinstance(self.model, nm.Gaussian):
            raise InvalidSpec("the Kalman engine only handles Gaussian system noise")
        if not self.name:
            object.__setattr__(self, "name", default_name(self.model, self.free))

    @property
    def k(self):
        return len(self.free)


@dataclass
class FitResult:
    name: str
    model: object
    sigma2: float
    loglik: float
    k: int
    aic: float
    evals: int
    converged: bool
    at_boundary: bool = False
    free: tuple = ()
    error: str = ""
    start_logliks: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.error

    def dispersion(self):
        """(label, value) of the scale parameter shown in comparison tables."""
        m = self.model
        if isinstance(m, nm.GeneralizedLaplace):
            return "tau", m.tau
        p = model_params(m) if m is not None else {}
        if "tau2" in p:
            return "tau2", p["tau2"]
        return "", None

    def shape(self):
        m = self.model
        if isinstance(m, (nm.PearsonVII, nm.GeneralizedLaplace)):
            return m.b
        if isinstance(m, nm.Mixture):
            return m.alpha
        return None


def aic(loglik, k):
    return -2.0 * loglik + 2.0 * k


def default_name(m, free=()):
    if isinstance(m, nm.Gaussian):
        return "Gaussian"
    if isinstance(m, nm.PearsonVII):
        return "Pearson" if "b" in free else f"Pearson(b={m.b:g})"
    if isinstance(m, nm.GeneralizedLaplace):
        return "G-Laplace" if "b" in free else f"G-Laplace(b={m.b:g})"
    if isinstance(m, nm.Mixture):
        return f"{_component_label(m.f)}+{_component_label(m.g)}"
    return type(m).__name__


def _component_label(c):
    if isinstance(c, nm.Delta):
        return f"d({c.loc:g})"
    if isinstance(c, nm.Uniform):
        return f"U[{c.lo:g};{c.hi:g}]"
    return f"G(0,{c.var:g})"


# --------------------------------------------------------------------------
# objective


class _Objective:
    """Negative log-likelihood over the transformed free parameters."""

    def __init__(self, y, spec, grid, init):
        self.y = y
        self.spec = spec
        self.grid = grid
        self.init = init
        self.use_kalman = isinstance(spec.model, nm.Gaussian) and spec.engine in ("auto", "kalman")
        self.kinit = kalman.diffuse_init(y)
        self.model_free = [p for p in spec.free if p != "sigma2"]
        self.evals = 0
        self.last_error = None

    def unpack(self, theta, sigma2_fixed):
        values = {name: _from_free(name, t, self.spec.model) for name, t in zip(self.spec.free, theta)}
        sigma2 = values.pop("sigma2", sigma2_fixed)
        return with_params(self.spec.model, values), sigma2

    def loglik(self, model, sigma2):
        self.evals += 1
        try:
            if self.use_kalman:
                return kalman.kalman_loglik(self.y, kalman.TrendParams(sigma2, model.var), self.kinit)
            return ng_loglik(self.y, NgModel(model, sigma2, self.grid), self.init)
        except (NgTrendError, ArithmeticError, ValueError) as exc:
            log.debug("objective failed at %r, sigma2=%g: %s", model, sigma2, exc)
            self.last_error = exc
            return -math.inf


def _simplex(x0, step):
    k = x0.size
    sim = np.tile(x0, (k + 1, 1))
    for i in range(k):
        sim[i + 1, i] += step if x0[i] + step <= CLAMP else -step
    return sim


def fit(y, spec, grid=None, init=None):
    """Maximum-likelihood fit of ``spec`` to the series ``y``."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size < 10:
        raise DegenerateData("need a 1-D series with at least 10 observations")
    if not np.all(np.isfinite(y)):
        raise DegenerateData("series contains non-finite values")
    if not np.ptp(y) > 0:
        raise DegenerateData("series is constant; the observation variance has no maximum")
    grid = default_grid(y) if grid is None else grid
    init = default_init(y, grid) if init is None else init
    obj = _Objective(y, spec, grid, init)
    sigma2_start = spec.sigma2 if spec.sigma2 is not None else max(0.5 * float(np.var(np.diff(y))), 1e-8)
    start_values = {"sigma2": sigma2_start, **model_params(spec.model)}

    if not spec.free:
        ll = obj.loglik(spec.model, sigma2_start)
        return FitResult(spec.name, spec.model, sigma2_start, ll, 0, aic(ll, 0), obj.evals,
                         True, False, (), "" if np.isfinite(ll) else _failure(obj))

    def negll(theta):
        ll = obj.loglik(*obj.unpack(theta, sigma2_start))
        return -ll if np.isfinite(ll) else PENALTY

    x0 = np.array([_to_free(p, start_values[p], spec.model) for p in spec.free])
    x0 = np.clip(x0, -CLAMP, CLAMP)
    x0 = _scan_start(negll, spec.free, x0)

    rng = np.random.Generator(np.random.PCG64(spec.seed))
    bounds = [(-CLAMP, CLAMP)] * x0.size
    best_x, best_f = x0, negll(x0)
    start_lls = []
    converged = False
    exhausted = False
    for r in range(spec.restarts):
        start = x0 if r == 0 else np.clip(best_x + rng.normal(0.0, RESTART_JITTER, x0.size), -CLAMP, CLAMP)
        step = 1.0 if r == 0 else RESTART_JITTER
        sim = _simplex(start, step)
        res = optimize.minimize(
            negll, start, method="Nelder-Mead", bounds=bounds,
            options={"maxfev": spec.budget, "xatol": SIMPLEX_TOL, "fatol": 1e-7,
                     "initial_simplex": sim})
        start_lls.append(-negll(start) if r else -best_f)
        log.debug("%s restart %d: nfev=%d f=%.6f", spec.name, r, res.nfev, res.fun)
        final = res.final_simplex[0]
        diameter = float(np.max(np.abs(final[1:] - final[0]))) if final.shape[0] > 1 else 0.0
        agrees = r > 0 and diameter < SIMPLEX_TOL and abs(float(res.fun) - best_f) < AGREE_TOL
        if res.fun <= best_f:
            best_x, best_f = res.x, float(res.fun)
            converged = diameter < SIMPLEX_TOL
            exhausted = res.nfev >= spec.budget and not converged
        if agrees:
            # a jittered restart fell back onto the incumbent optimum
            converged = True
            break

    model, sigma2 = obj.unpack(best_x, sigma2_start)
    at_boundary = bool(np.any(np.abs(best_x) >= CLAMP - 1e-3))
    if at_boundary:
        converged = True
    if exhausted and not converged:
        warnings.warn(f"{spec.name}: optimizer budget of {spec.budget} evaluations exhausted",
                      BudgetExhausted, stacklevel=2)
    ll = -best_f if best_f < PENALTY else -math.inf
    err = "" if np.isfinite(ll) else _failure(obj)
    return FitResult(spec.name, model, sigma2, ll, spec.k, aic(ll, spec.k), obj.evals,
                     converged, at_boundary, spec.free, err, start_lls)


def _failure(obj):
    exc = obj.last_error
    if exc is None:
        return "no finite log-likelihood found"
    return f"{type(exc).__name__}: {exc}"


def _scan_start(negll, free, x0):
    """Seed the optimizer with a coarse scan of the leading dispersion parameter."""
    for i, name in enumerate(free):
        if name in _SCAN:
            best = (negll(x0), x0)
            for t in _SCAN[name]:
                x = x0.copy()
                x[i] = t
                f = negll(x)
                if f < best[0]:
                    best = (f, x)
            return best[1]
    return x0


# --------------------------------------------------------------------------
# profiles and comparisons


def _shape_spec(spec, shape, value):
    if math.isinf(value):
        if not isinstance(spec.model, nm.PearsonVII):
            raise InvalidSpec("an infinite shape is only meaningful for Pearson VII")
        free = tuple(p for p in spec.free if p in ("sigma2", "tau2"))
        return replace(spec, model=nm.Gaussian(spec.model.tau2), free=free, name="Gaussian",
                       engine="auto")
    model = with_params(spec.model, {shape: float(value)})
    free = tuple(p for p in spec.free if p != shape)
    return replace(spec, model=model, free=free, name=default_name(model, free))


def _safe_fit(args):
    y, spec, grid = args
    try:
        return fit(y, spec, grid)
    except NgTrendError as exc:
        return FitResult(spec.name, spec.model, float("nan"), float("nan"), spec.k,
                         float("nan"), 0, False, False, spec.free, f"{type(exc).__name__}: {exc}")


def max_workers():
    env = os.environ.get("NGTREND_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer NGTREND_THREADS=%r", env)
    return os.cpu_count() or 1


def _run_all(y, specs, grid, workers):
    y = np.asarray(y, dtype=float)
    grid = default_grid(y) if grid is None else grid
    jobs = [(y, s, grid) for s in specs]
    workers = max_workers() if workers is None else workers
    workers = min(workers, len(jobs))
    if workers <= 1:
        return [_safe_fit(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_safe_fit, jobs))


def profile(y, spec, values, shape="b", grid=None, workers=None):
    """One fit per fixed shape value, in input order.  Failed rows carry ``error``."""
    values = list(values)
    if not values:
        raise InvalidSpec("profile needs at least one shape value")
    specs = [_shape_spec(spec, shape, v) for v in values]
    return _run_all(y, specs, grid, workers)


@dataclass
class ComparisonTable:
    rows: list

    COLUMNS = ("Distribution", "sigma2", "tau2", "b_or_alpha", "loglik", "k", "AIC")

    @property
    def best(self):
        return self.rows[0]

    def _cells(self, r, fmt):
        label, disp = r.dispersion()
        shape = r.shape()
        free_shape = any(p in r.free for p in ("b", "alpha"))
        return [
            r.name,
            fmt(r.sigma2),
            fmt(disp) if disp is not None else "---",
            fmt(shape) if shape is not None and (free_shape or isinstance(r.model, nm.Mixture)) else "---",
            fmt(r.loglik),
            str(r.k),
            fmt(r.aic),
        ]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.rows:
            w.writerow(self._cells(r, lambda v: f"{v:.9g}"))
        return buf.getvalue()

    def to_text(self):
        header = ["Distribution", "sigma2", "tau2", "b or alpha", "log-LK", "k", "AIC"]
        body = [self._cells(r, lambda v: f"{v:.6g}") for r in self.rows]
        widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
        lines = ["  ".join(c.rjust(wd) if i else c.ljust(wd) for i, (c, wd) in enumerate(zip(row, widths)))
                 for row in [header, *body]]
        lines.insert(1, "-" * len(lines[0]))
        for r in self.rows:
            if r.error:
                lines.append(f"# {r.name}: {r.error}")
        return "\n".join(lines) + "\n"


def _sort_key(r):
    a = r.aic if np.isfinite(r.aic) else math.inf
    return (a, r.k, r.name)


def compare(y, specs, grid=None, workers=None):
    """Fit every spec and rank by AIC (ties: fewer parameters, then name)."""
    specs = list(specs)
    if not specs:
        raise InvalidSpec("compare needs at least one spec")
    results = _run_all(y, specs, grid, workers)
    return ComparisonTable(sorted(results, key=_sort_key))


# --------------------------------------------------------------------------
# presets matching the model families of the comparison tables

WIDE_VAR = 4.0
WIDE_HALF = 4.0


def preset(name):
    """Build a :class:`FitSpec` from a preset name such as ``pearson-b:0.75``."""
    key, _, arg = name.partition(":")
    key = key.strip().lower()
    try:
        value = float(arg) if arg else None
    except ValueError as exc:
        raise InvalidSpec(f"bad preset argument in {name!r}") from exc
    if key == "gaussian":
        return FitSpec(nm.Gaussian(1e-2), ("sigma2", "tau2"), name="Gaussian")
    if key == "cauchy":
        return FitSpec(nm.PearsonVII(1.0, 1e-4), ("sigma2", "tau2"), name="Cauchy")
    if key == "laplace":
        return FitSpec(nm.GeneralizedLaplace(1.0, 10.0), ("sigma2", "tau"), name="Laplace")
    if key == "pearson-b":
        if value is None:
            raise InvalidSpec("pearson-b needs a value, e.g. pearson-b:0.75")
        if math.isinf(value):
            return preset("gaussian")
        return FitSpec(nm.PearsonVII(value, 1e-4), ("sigma2", "tau2"))
    if key == "pearson":
        return FitSpec(nm.PearsonVII(0.75, 1e-6), ("sigma2", "tau2", "b"), name="Pearson")
    if key == "glaplace-b":
        if value is None:
            raise InvalidSpec("glaplace-b needs a value, e.g. glaplace-b:0.1")
        return FitSpec(nm.GeneralizedLaplace(value, 10.0), ("sigma2", "tau"))
    if key == "glaplace":
        return FitSpec(nm.GeneralizedLaplace(0.2, 10.0), ("sigma2", "tau", "b"), name="G-Laplace")
    if key == "gauss-gauss":
        return FitSpec(nm.Mixture(0.99, nm.Gaussian(1e-3), nm.Gaussian(WIDE_VAR)),
                       ("sigma2", "tau2", "alpha"), name="G(0,tau2)+G(0,4)")
    if key == "gauss-unif":
        return FitSpec(nm.Mixture(0.99, nm.Gaussian(1e-3), nm.Uniform(-WIDE_HALF, WIDE_HALF)),
                       ("sigma2", "tau2", "alpha"), name="G(0,tau2)+U[-4;4]")
    if key == "delta-unif":
        return FitSpec(nm.Mixture(0.999, nm.Delta(0.0), nm.Uniform(-WIDE_HALF, WIDE_HALF)),
                       ("sigma2", "alpha"), name="d(0)+U[-4;4]")
    if key == "delta-gauss":
        return FitSpec(nm.Mixture(0.99, nm.Delta(0.0), nm.Gaussian(WIDE_VAR)),
                       ("sigma2", "alpha"), name="d(0)+G(0,4)")
    raise InvalidSpec(f"unknown preset {name!r}")


PRESET_GROUPS = {
    "all": ("gaussian", "cauchy", "pearson", "glaplace", "delta-gauss"),
    "full": ("gaussian", "laplace", "cauchy", "pearson", "glaplace",
               "gauss-gauss", "gauss-unif", "delta-unif", "delta-gauss"),
    "pearson-profile": ("pearson-b:0.6", "pearson-b:0.75", "pearson-b:1", "pearson-b:1.5",
                        "pearson-b:3", "gaussian"),
    "glaplace-profile": ("glaplace-b:0.05", "glaplace-b:0.1", "glaplace-b:0.2",
                         "glaplace-b:0.5", "glaplace-b:1", "glaplace-b:2"),
}


def expand_presets(names):
    out = []
    for name in names:
        out.extend(PRESET_GROUPS.get(name.strip().lower(), (name,)))
    return out
