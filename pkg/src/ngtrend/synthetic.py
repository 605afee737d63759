"""Synthetic test series: a step trend with three jumps plus Gaussian noise."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpec
from .noise_models import sample

RNG_ALGORITHM = "numpy.random.PCG64"


@dataclass(frozen=True)
class JumpSpec:
    """Piecewise-constant trend; indices are 1-based.

    Segment ``s`` covers ``segment_bounds[s] <= i < segment_bounds[s+1]``;
    the last segment also includes ``n``.  With the defaults the level
    changes at i = 100, 250 and 350.
    """

    n: int = 500
    segment_bounds: tuple = (1, 100, 250, 350, 500)
    segment_levels: tuple = (0.0, 2.0, -1.0, 1.0)
    obs_sigma2: float = 1.0
    seed: int = 42

    def __post_init__(self):
        b = tuple(int(v) for v in self.segment_bounds)
        object.__setattr__(self, "segment_bounds", b)
        object.__setattr__(self, "segment_levels", tuple(float(v) for v in self.segment_levels))
        if self.n < 1:
            raise InvalidSpec("n must be >= 1")
        if len(b) < 2 or b[0] != 1 or b[-1] != self.n:
            raise InvalidSpec(f"segment bounds must start at 1 and end at n={self.n}, got {b}")
        if any(b2 <= b1 for b1, b2 in zip(b, b[1:])):
            raise InvalidSpec("segment bounds must be strictly increasing")
        if len(self.segment_levels) != len(b) - 1:
            raise InvalidSpec("need exactly one level per segment")
        if not (math.isfinite(self.obs_sigma2) and self.obs_sigma2 > 0):
            raise InvalidSpec("obs_sigma2 must be > 0")

    @classmethod
    def scaled(cls, n, **kw):
        """Default jump layout stretched proportionally to length ``n``."""
        base = cls()
        if n == base.n:
            return cls(**kw)
        if n < len(base.segment_levels) + 1:
            return cls(n=n, segment_bounds=(1, n), segment_levels=(0.0,), **kw)
        inner = [max(2, min(n - 1, round(v * n / base.n))) for v in base.segment_bounds[1:-1]]
        bounds = tuple(sorted(set([1, *inner, n])))
        if len(bounds) != len(base.segment_bounds):
            return cls(n=n, segment_bounds=(1, n), segment_levels=(0.0,), **kw)
        return cls(n=n, segment_bounds=bounds, **kw)

    @property
    def jump_indices(self):
        return self.segment_bounds[1:-1]


@dataclass
class GeneratedSeries:
    y: np.ndarray
    truth: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def index(self):
        return np.arange(1, self.y.size + 1)


def step_function(spec):
    truth = np.empty(spec.n)
    b = spec.segment_bounds
    for s, level in enumerate(spec.segment_levels):
        stop = b[s + 1] - 1 if s + 1 < len(b) - 1 else b[s + 1]
        truth[b[s] - 1:stop] = level
    return truth


def generate(spec=None):
    spec = JumpSpec() if spec is None else spec
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    truth = step_function(spec)
    y = truth + math.sqrt(spec.obs_sigma2) * rng.standard_normal(spec.n)
    meta = {
        "rng": RNG_ALGORITHM,
        "seed": spec.seed,
        "n": spec.n,
        "segment_bounds": list(spec.segment_bounds),
        "segment_levels": list(spec.segment_levels),
        "obs_sigma2": spec.obs_sigma2,
    }
    return GeneratedSeries(y, truth, meta)


def simulate_trend(sys_noise, obs_sigma2, n, seed, start=0.0):
    """Draw from ``t_n = t_{n-1} + v_n, y_n = t_n + w_n`` with ``v ~ sys_noise``."""
    v = sample(sys_noise, seed, n)
    rng = np.random.Generator(np.random.PCG64([seed, 1]))
    trend = start + np.cumsum(v)
    y = trend + math.sqrt(obs_sigma2) * rng.standard_normal(n)
    meta = {"rng": RNG_ALGORITHM, "seed": seed, "n": n, "obs_sigma2": obs_sigma2}
    return GeneratedSeries(y, trend, meta)
