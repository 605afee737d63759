import math

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st
from scipy import integrate, stats

from ngtrend import grid_core as gc
from ngtrend import noise_models as nm
from ngtrend.errors import DomainError, InvalidParameter, NotFinite, UnsupportedKernel, ZeroEvidence, ZeroMass

STD_GRID = gc.Grid(-8.0, 8.0, 801)


def std_normal(grid=STD_GRID):
    return gc.gaussian_density(grid, 0.0, 1.0)


# ---------------------------------------------------------------- Grid


def test_grid_spacing_and_nodes():
    g = gc.Grid(-1.0, 3.0, 5)
    assert g.h == 1.0
    assert g.nodes.tolist() == [-1.0, 0.0, 1.0, 2.0, 3.0]


@pytest.mark.parametrize("lo, hi, n", [(0, 0, 10), (1, 0, 10), (0, 1, 1), (0, 1, 2.5), (0, np.inf, 3)])
def test_grid_rejects_bad_shapes(lo, hi, n):
    with pytest.raises(InvalidParameter):
        gc.Grid(lo, hi, n)


def test_density_validation():
    g = gc.Grid(0, 1, 3)
    with pytest.raises(InvalidParameter):
        gc.GridDensity(g, [1.0, -1.0, 1.0])
    with pytest.raises(InvalidParameter):
        gc.GridDensity(g, [1.0, 1.0])
    with pytest.raises(NotFinite):
        gc.GridDensity(g, [1.0, np.nan, 1.0])
    with pytest.raises(InvalidParameter):
        gc.GridDensity(g, [1.0, 1.0, 1.0], atom_weight=0.5, atom_location=2.0)


def test_density_values_are_read_only():
    d = std_normal()
    with pytest.raises(ValueError):
        d.values[0] = 1.0


# ---------------------------------------------------------------- trapezoid_integral


def test_integral_of_constant():
    for n in (2, 3, 17, 400):
        d = gc.GridDensity(gc.Grid(0, 2, n), np.ones(n))
        assert gc.trapezoid_integral(d) == pytest.approx(2.0, abs=1e-14)


def test_integral_of_standard_normal_matches_cdf():
    expected = stats.norm.cdf(8) - stats.norm.cdf(-8)
    assert abs(gc.trapezoid_integral(std_normal()) - expected) < 1e-9


def test_integral_of_pure_atom():
    d = gc.point_mass(STD_GRID, 0.3)
    assert gc.trapezoid_integral(d) == 1.0


def test_integral_formula():
    g = gc.Grid(0.0, 1.0, 4)
    v = np.array([0.0, 1.0, 3.0, 2.0])
    d = gc.GridDensity(g, v, atom_weight=0.25, atom_location=0.5)
    expected = sum(g.h * (v[i] + v[i + 1]) / 2 for i in range(3)) + 0.25
    assert gc.trapezoid_integral(d) == pytest.approx(expected, rel=1e-15)


# ---------------------------------------------------------------- normalize


def test_normalize_constant_rescale():
    d = gc.GridDensity(gc.Grid(0, 1, 101), np.full(101, 2.0))
    out = gc.normalize(d)
    assert np.allclose(out.values, 1.0, atol=1e-15)


def test_normalize_leaves_normalized_gaussian():
    d = std_normal()
    out = gc.normalize(d)
    assert np.max(np.abs(out.values - d.values)) < 1e-9


def test_normalize_triangle_plus_atom_is_already_unit():
    # a triangle of integral 1/2 (peak 1/2 on [-1, 1]) plus an atom of 1/2
    g = gc.Grid(-1, 1, 201)
    tri = 0.5 * np.maximum(0.0, 1.0 - np.abs(g.nodes))
    d = gc.GridDensity(g, tri, atom_weight=0.5, atom_location=0.0)
    assert gc.trapezoid_integral(d) == pytest.approx(1.0, abs=1e-12)
    out = gc.normalize(d)
    assert np.allclose(out.values, tri, atol=1e-12)
    assert out.atom_weight == pytest.approx(0.5, abs=1e-12)


def test_normalize_scales_atom_with_values():
    g = gc.Grid(0, 1, 11)
    d = gc.GridDensity(g, np.full(11, 3.0), atom_weight=1.0, atom_location=0.5)
    out = gc.normalize(d)
    assert out.atom_weight / 1.0 == pytest.approx(out.values[0] / 3.0, rel=1e-15)
    assert gc.trapezoid_integral(out) == pytest.approx(1.0, abs=1e-12)


def test_normalize_zero_mass():
    with pytest.raises(ZeroMass):
        gc.normalize(gc.GridDensity(gc.Grid(0, 1, 5), np.zeros(5)))


@given(st.lists(st.floats(0.0, 1e3), min_size=5, max_size=5), st.floats(0.0, 2.0))
@example([0.0, 0.0, 0.0, 0.0, 2.225073858507e-311], 0.0)
def test_normalize_idempotent(vals, atom):
    g = gc.Grid(0.0, 1.0, 5)
    d = gc.GridDensity(g, vals, atom, 0.5)
    if gc.trapezoid_integral(d) <= 0:
        return
    once = gc.normalize(d)
    twice = gc.normalize(once)
    assert abs(gc.trapezoid_integral(once) - 1.0) < 1e-9
    assert np.array_equal(once.values, twice.values) or np.max(np.abs(once.values - twice.values)) < 1e-15 * max(1.0, once.values.max())


# ---------------------------------------------------------------- convolve


def test_convolve_point_mass_with_unit_gaussian():
    out = gc.convolve(gc.point_mass(STD_GRID, 0.0), nm.Gaussian(1.0))
    x = STD_GRID.nodes
    inner = np.abs(x) <= 6
    assert np.max(np.abs(out.values[inner] - stats.norm.pdf(x[inner]))) <= 1e-6
    assert out.atom_weight == 0.0


def test_convolve_pure_delta_is_identity():
    d = gc.normalize(gc.from_function(STD_GRID, lambda x: np.exp(-np.abs(x - 1.0))))
    out = gc.convolve(d, nm.Mixture(1.0, nm.Delta(0.0), nm.Gaussian(4.0)))
    assert np.max(np.abs(out.values - d.values)) < 1e-12


def test_convolve_gaussians_adds_variances():
    out = gc.convolve(std_normal(), nm.Gaussian(1.0))
    x = STD_GRID.nodes
    assert np.max(np.abs(out.values - stats.norm.pdf(x, scale=math.sqrt(2.0)))) <= 1e-5


@pytest.mark.parametrize("model", [
    nm.Gaussian(0.3),
    nm.PearsonVII(3.0, 0.01),
    nm.GeneralizedLaplace(1.0, 3.0),
    nm.Mixture(0.9, nm.Gaussian(0.05), nm.Uniform(-1, 1)),
])
def test_convolve_preserves_mass(model):
    d = gc.gaussian_density(STD_GRID, 0.0, 0.5)
    raw, aw, _ = gc.convolve_raw(d, gc.transition_kernel(model, STD_GRID))
    total = gc._trapz(raw, STD_GRID.h) + aw
    # kernel tails beyond the grid are small for these parameters
    assert abs(total - 1.0) < 1e-6


def test_convolve_commutes_for_gaussians():
    a = gc.convolve(gc.convolve(gc.point_mass(STD_GRID, 0.0), nm.Gaussian(0.4)), nm.Gaussian(1.3))
    b = gc.convolve(gc.convolve(gc.point_mass(STD_GRID, 0.0), nm.Gaussian(1.3)), nm.Gaussian(0.4))
    assert np.max(np.abs(a.values - b.values)) < 1e-6


def test_convolve_atom_split_by_mixture():
    d = gc.point_mass(STD_GRID, 0.5)
    out = gc.convolve(d, nm.Mixture(0.7, nm.Delta(0.0), nm.Gaussian(0.5)))
    assert out.atom_weight == pytest.approx(0.7, abs=1e-9)
    assert out.atom_location == 0.5
    assert gc._trapz(out.values, STD_GRID.h) == pytest.approx(0.3, abs=1e-9)
    assert out.mean() == pytest.approx(0.5, abs=1e-9)


def test_fft_matches_direct_for_heavy_kernel():
    d = gc.gaussian_density(STD_GRID, 1.0, 0.3)
    k = gc.transition_kernel(nm.PearsonVII(0.8, 0.01), STD_GRID)
    a = gc.convolve(d, k, method="direct")
    b = gc.convolve(d, k, method="fft")
    assert np.max(np.abs(a.values - b.values)) < 1e-8


def test_propagator_matches_convolve_arrays():
    d = gc.gaussian_density(STD_GRID, -1.0, 0.7)
    k = gc.transition_kernel(nm.Mixture(0.6, nm.Delta(0.0), nm.Gaussian(2.0)), STD_GRID)
    ref = gc.convolve_arrays(STD_GRID, d.values, 0.0, 0.0, k, "direct")[0]
    fast = gc.propagator(k, "fft")(d.values)
    assert np.max(np.abs(ref - fast)) < 1e-12


def test_convolve_rejects_non_models():
    with pytest.raises(UnsupportedKernel):
        gc.convolve(std_normal(), "gaussian")


def test_kernel_weights_match_hat_integrals():
    # the hat functions sum to 1 out to (n-1)h and fall linearly to 0 at nh
    g = gc.Grid(-20, 20, 1601)
    edge, h = 40.0, g.h
    for model in (nm.Gaussian(0.01), nm.PearsonVII(0.6, 1e-6), nm.GeneralizedLaplace(0.1, 15.0)):
        k = gc.transition_kernel(model, g)
        ramp = integrate.quad(lambda x: (1 - (x - edge) / h) * model.pdf(x), edge, edge + h)[0]
        expected = 2 * (model.mass(0.0, edge) + ramp) if hasattr(model, "mass") else 1.0
        assert k.weights.sum() == pytest.approx(expected, abs=1e-9)



@given(st.floats(0.05, 3.0))
def test_narrow_gaussian_kernel_keeps_variance(ratio):
    # sd = ratio * h.  Point-sampled weights sum to 1 + 2 sum_k exp(-2 pi^2 k^2 ratio^2)
    # (Poisson summation); hat weights sum to 1.  The blend mixes the two.
    g = gc.Grid(-10, 10, 801)
    var = (ratio * g.h) ** 2
    k = gc.transition_kernel(nm.Gaussian(var), g)
    lo, hi = gc.RESOLVE_BANDS["gaussian"]
    t = min(max((ratio - lo) / (hi - lo), 0.0), 1.0)
    share = t * t * (3 - 2 * t)
    alias = 2 * sum(math.exp(-2 * math.pi ** 2 * j * j * ratio * ratio) for j in range(1, 20))
    off = (np.arange(k.weights.size) - (g.n_nodes - 1)) * g.h
    mass = k.weights.sum()
    assert k.weights.min() >= 0
    assert mass == pytest.approx(1.0 + share * alias, abs=1e-12)
    assert np.sum(off ** 2 * k.weights) / mass == pytest.approx(var, rel=1e-9)

# ---------------------------------------------------------------- pointwise_bayes


def test_bayes_flat_likelihood():
    prior = std_normal()
    post, ev = gc.pointwise_bayes(prior, np.ones(STD_GRID.n_nodes))
    assert ev == pytest.approx(gc.trapezoid_integral(prior), abs=1e-15)
    assert np.max(np.abs(post.values - prior.values / ev)) < 1e-15


def test_bayes_conjugate_gaussian():
    x = STD_GRID.nodes
    lik = stats.norm.pdf(0.0, loc=x, scale=1.0)
    post, ev = gc.pointwise_bayes(std_normal(), lik)
    assert abs(ev - 0.28209479177387814) < 1e-5  # N(0; 0, 2) = 1/sqrt(4 pi)
    assert np.max(np.abs(post.values - stats.norm.pdf(x, scale=math.sqrt(0.5)))) < 1e-5


def test_bayes_point_mass_prior():
    g = gc.Grid(0.0, 1.0, 11)
    lik = 4.0 * g.nodes  # linear, so interpolation at 0.5 gives 2
    post, ev = gc.pointwise_bayes(gc.point_mass(g, 0.5), lik)
    assert ev == pytest.approx(2.0, abs=1e-12)
    assert post.atom_weight == pytest.approx(1.0, abs=1e-12)
    assert post.atom_location == 0.5


def test_bayes_zero_evidence():
    g = gc.Grid(0.0, 1.0, 11)
    with pytest.raises(ZeroEvidence):
        gc.pointwise_bayes(gc.GridDensity(g, np.ones(11)), np.zeros(11))


def test_bayes_rejects_bad_likelihood():
    with pytest.raises(InvalidParameter):
        gc.pointwise_bayes(std_normal(), -np.ones(STD_GRID.n_nodes))


@given(st.floats(-3, 3), st.floats(0.2, 3.0))
def test_bayes_evidence_is_trapezoid_of_product(y, s2):
    prior = gc.gaussian_density(STD_GRID, 0.5, 1.5)
    lik = stats.norm.pdf(y, loc=STD_GRID.nodes, scale=math.sqrt(s2))
    _, ev = gc.pointwise_bayes(prior, lik)
    direct = gc.trapezoid_integral(gc.GridDensity(STD_GRID, prior.values * lik))
    assert abs(ev - direct) <= 1e-12


# ---------------------------------------------------------------- percentile


def test_percentile_symmetric_median():
    assert abs(gc.percentile(std_normal(), 0.5)) <= STD_GRID.h / 2


def test_percentile_standard_gaussian():
    d = std_normal(gc.Grid(-8, 8, 1601))
    assert abs(gc.percentile(d, 0.8413) - 1.0) < 1e-2
    # tighter: the inverse CDF of the discretized density
    assert abs(gc.percentile(d, stats.norm.cdf(1.0)) - 1.0) < 1e-4


def test_percentile_uniform():
    g = gc.Grid(0, 4, 401)
    d = gc.normalize(gc.GridDensity(g, np.ones(401)))
    assert abs(gc.percentile(d, 0.25) - 1.0) <= g.h


def test_percentile_atom_jump():
    g = gc.Grid(-1, 1, 201)
    tri = np.maximum(0.0, 1.0 - np.abs(g.nodes))
    d = gc.GridDensity(g, 0.5 * tri, atom_weight=0.5, atom_location=0.25)
    below = gc._trapz(np.where(g.nodes <= 0.25, 0.5 * tri, 0.0), g.h)
    assert gc.percentile(d, below + 0.1) == 0.25
    assert gc.percentile(d, below + 0.45) == 0.25
    assert gc.percentile(d, 0.99) > 0.25
    assert gc.percentile(d, 0.01) < 0.25


@pytest.mark.parametrize("q", [0.0, 1.0, -0.1, 1.5])
def test_percentile_domain(q):
    with pytest.raises(DomainError):
        gc.percentile(std_normal(), q)


@given(st.lists(st.floats(0.001, 0.999), min_size=2, max_size=8), st.floats(0.0, 0.8))
def test_percentile_monotone(qs, atom):
    g = gc.Grid(-3, 3, 61)
    d = gc.normalize(gc.GridDensity(g, np.exp(-np.abs(g.nodes - 0.4)), atom, -0.5))
    qs = sorted(qs)
    ps = gc.percentiles(d, qs)
    assert np.all(np.diff(ps) >= -1e-12)
