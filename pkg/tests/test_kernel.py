import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subint.exceptions import EmptyNeighborhoodError, InvalidArgumentError
from subint.kernel import KernelSpec, nw_estimate, rate_optimal_bandwidth
from subint.montecarlo import circle_h0, draw_sample, get_dgp
from subint.spline_sieve import Sample

from .conftest import STUDY_SEED

FAMILIES = ["gaussian", "epanechnikov"]


def _sample(rng, n, y=None):
    x = rng.uniform(-2, 2, size=(n, 2))
    y = rng.normal(size=n) if y is None else y
    return Sample(x, y, [-2, -2], [2, 2])


@pytest.mark.parametrize("family", FAMILIES)
def test_constant_response(rng, family):
    s = _sample(rng, 200, np.full(200, -1.75))
    pts = rng.uniform(-1, 1, size=(30, 2))
    np.testing.assert_array_equal(nw_estimate(s, KernelSpec(family, 0.8, 2), pts), -1.75)


@pytest.mark.parametrize("family", FAMILIES)
def test_single_observation(family):
    s = Sample([[0.3, -0.4]], [2.2], [-2, -2], [2, 2])
    assert nw_estimate(s, KernelSpec(family, 0.5, 2), [0.3, -0.4]) == 2.2


def test_golden_mse():
    # recorded on first run for this seed and frozen
    s = draw_sample(get_dgp("circle"), 8000, STUDY_SEED)
    b = rate_optimal_bandwidth(8000, 2, 2, 1)
    assert b == pytest.approx(8000 ** (-0.2))
    g = np.linspace(-1.5, 1.5, 30)
    grid = np.stack([a.ravel() for a in np.meshgrid(g, g, indexing="ij")], axis=1)
    mse = np.mean((nw_estimate(s, KernelSpec("gaussian", b, 2), grid) - circle_h0(grid)) ** 2)
    assert mse == pytest.approx(0.005751232811162911, rel=1e-9)
    assert mse <= 0.0057513


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), bw=st.floats(0.05, 3.0), family=st.sampled_from(FAMILIES))
def test_convex_combination(seed, bw, family):
    rng = np.random.default_rng(seed)
    s = _sample(rng, 60)
    pts = s.x[:10] + rng.uniform(-0.01, 0.01, size=(10, 2))
    pts = np.clip(pts, -2, 2)
    est = nw_estimate(s, KernelSpec(family, bw, 2), pts)
    assert np.all(est >= s.y.min()) and np.all(est <= s.y.max())


def test_small_bandwidth_interpolates(rng):
    s = _sample(rng, 50)
    est = nw_estimate(s, KernelSpec("gaussian", 1e-3, 2), s.x)
    np.testing.assert_allclose(est, s.y, atol=1e-10)


@pytest.mark.parametrize("family", FAMILIES)
def test_scaling_invariance(rng, family):
    s = _sample(rng, 300)
    spec = KernelSpec(family, 0.6, 2)
    pts = rng.uniform(-1.5, 1.5, size=(40, 2))
    a = nw_estimate(s, spec, pts, scaled=True)
    b = nw_estimate(s, spec, pts, scaled=False)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_empty_neighborhood_names_point():
    s = Sample([[-1.9, -1.9]], [1.0], [-2, -2], [2, 2])
    with pytest.raises(EmptyNeighborhoodError, match="1.5"):
        nw_estimate(s, KernelSpec("epanechnikov", 0.1, 2), [1.5, 1.5])


def test_spec_validation():
    with pytest.raises(InvalidArgumentError):
        KernelSpec("triangle", 1.0, 2)
    with pytest.raises(InvalidArgumentError):
        KernelSpec("gaussian", 0.0, 2)
