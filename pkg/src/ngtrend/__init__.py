"""Trend estimation with non-Gaussian system noise.

A random-walk trend ``t_n = t_{n-1} + v_n`` observed as ``y_n = t_n + w_n``
with Gaussian ``w_n`` and heavy-tailed or mixture ``v_n``.  Densities are
propagated on a uniform grid; parameters are fitted by maximum likelihood and
models are ranked by AIC.
"""

from .errors import (BudgetExhausted, DegenerateData, DomainError, InvalidParameter,
                     InvalidSpec, LengthMismatch, NgTrendError, NonFiniteInput, NotFinite,
                     NumericalBlowup, UndefinedAt, UnsupportedKernel, ZeroEvidence, ZeroMass)
from .grid_core import Grid, GridDensity
from .kalman import TrendParams, kalman_filter, kalman_loglik, kalman_smoother
from .mle_fit import ComparisonTable, FitResult, FitSpec, compare, fit, preset, profile
from .ng_filter import NgModel, PosteriorBands, ng_loglik, ng_smooth, posterior_bands, run_smoother
from .noise_models import Delta, GeneralizedLaplace, Gaussian, Mixture, PearsonVII, Uniform
from .synthetic import JumpSpec, generate, simulate_trend

__version__ = "0.1.0"
