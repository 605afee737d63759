import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ngtrend import kalman
from ngtrend import mle_fit as mf
from ngtrend import noise_models as nm
from ngtrend import synthetic
from ngtrend.errors import InvalidSpec


def segments(spec):
    b = spec.segment_bounds
    for s in range(len(spec.segment_levels)):
        stop = b[s + 1] - 1 if s + 1 < len(b) - 1 else b[s + 1]
        yield slice(b[s] - 1, stop), spec.segment_levels[s]


def test_default_layout(jump_series):
    spec = synthetic.JumpSpec()
    assert jump_series.y.size == 500
    assert spec.jump_indices == (100, 250, 350)
    t = jump_series.truth
    # 1-based index i carries the new level from the jump index on
    assert t[98] == 0.0 and t[99] == 2.0
    assert t[248] == 2.0 and t[249] == -1.0
    assert t[348] == -1.0 and t[349] == 1.0 and t[499] == 1.0
    assert list(jump_series.index[:3]) == [1, 2, 3]


def test_segment_variance_near_one(jump_series):
    spec = synthetic.JumpSpec()
    for sl, level in segments(spec):
        seg = jump_series.y[sl]
        v = np.var(seg, ddof=1)
        if seg.size >= 150:
            assert v == pytest.approx(1.0, abs=0.25)
        # sample variance has sd sqrt(2/(n-1)) under the model
        assert abs(v - 1.0) < 3.0 * math.sqrt(2.0 / (seg.size - 1))


def test_segment_means(jump_series):
    spec = synthetic.JumpSpec()
    for sl, level in segments(spec):
        seg = jump_series.y[sl]
        assert abs(seg.mean() - level) < 3.0 / math.sqrt(seg.size)


def test_noiseless_limit():
    g = synthetic.generate(synthetic.JumpSpec(obs_sigma2=1e-12))
    assert np.max(np.abs(g.y - g.truth)) < 1e-5


def test_single_segment_has_no_trend():
    spec = synthetic.JumpSpec(n=500, segment_bounds=(1, 500), segment_levels=(0.0,))
    y = synthetic.generate(spec).y
    r = mf.fit(y, mf.FitSpec(nm.Gaussian(1e-2)))
    assert r.model.var < 1e-3


@given(st.integers(0, 2**32 - 1))
def test_determinism(seed):
    spec = synthetic.JumpSpec(n=50, segment_bounds=(1, 20, 50), segment_levels=(0, 1), seed=seed)
    a, b = synthetic.generate(spec), synthetic.generate(spec)
    assert a.y.tobytes() == b.y.tobytes()


def test_seed_changes_draws():
    a = synthetic.generate(synthetic.JumpSpec(seed=1)).y
    b = synthetic.generate(synthetic.JumpSpec(seed=2)).y
    assert not np.array_equal(a, b)


def test_metadata_names_generator(jump_series):
    meta = jump_series.metadata
    assert meta["rng"] == "numpy.random.PCG64"
    assert meta["seed"] == 42 and meta["n"] == 500
    assert meta["segment_bounds"] == [1, 100, 250, 350, 500]


@pytest.mark.parametrize("kw", [
    dict(n=0, segment_bounds=(1,), segment_levels=()),
    dict(segment_bounds=(1, 100, 90, 500)),
    dict(segment_bounds=(2, 100, 250, 350, 500)),
    dict(segment_bounds=(1, 100, 250, 350, 499)),
    dict(segment_levels=(0.0, 1.0)),
    dict(obs_sigma2=0.0),
    dict(obs_sigma2=math.nan),
])
def test_invalid_specs(kw):
    with pytest.raises(InvalidSpec):
        synthetic.JumpSpec(**kw)


def test_scaled_layout():
    assert synthetic.JumpSpec.scaled(500) == synthetic.JumpSpec()
    s = synthetic.JumpSpec.scaled(200)
    assert s.segment_bounds == (1, 40, 100, 140, 200)
    assert synthetic.JumpSpec.scaled(10).segment_bounds[0] == 1
    assert synthetic.JumpSpec.scaled(3).segment_levels == (0.0,)


def test_simulated_walk_matches_its_model():
    g = synthetic.simulate_trend(nm.Gaussian(0.01), 1.0, 2000, 5)
    steps = np.diff(g.truth)
    assert np.var(steps) == pytest.approx(0.01, rel=0.1)
    assert np.var(g.y - g.truth) == pytest.approx(1.0, rel=0.1)
    r = kalman.kalman_filter(g.y, kalman.TrendParams(1.0, 0.01))
    assert np.isfinite(r.loglik)
    again = synthetic.simulate_trend(nm.Gaussian(0.01), 1.0, 2000, 5)
    assert again.y.tobytes() == g.y.tobytes()
