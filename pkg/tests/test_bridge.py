import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from srbreserve.bridge import (
    bridge_cdf,
    bridge_conditional_mean,
    bridge_conditional_raw_second_moment,
    bridge_conditional_second_moment,
    bridge_density,
    bridge_incomplete_first_moment,
    bridge_logpdf,
    bridge_midpoint_sample,
    bridge_sf,
    bridge_upper_first_moment,
    midpoint_from_normals,
)
from srbreserve.stable import BridgeParams, subordinator_density

from .conftest import mc_z

# mpmath quadrature of the composed kernel at c = T = 1, t = 0.3, z = 2, y = 0.4
CDF_EXAMPLE = 0.55363950377848554225
MOMENT_EXAMPLE = 0.072208729290871135877
# int_0^1 u^2 f_{1/2,1}(u; 1) du
SECOND_MOMENT_EXAMPLE = 0.33608011439530038211


def _quad(f, a, b, points=()):
    pts = [p for p in points if a < p < b]
    return integrate.quad(f, a, b, points=pts or None, epsabs=0, epsrel=1e-12, limit=500)[0]


def test_density_support_and_normalisation(unit_params):
    assert bridge_density(unit_params, 0.3, 0.0, 2.0) == 0.0
    assert bridge_density(unit_params, 0.3, 2.5, 2.0) == 0.0
    total = _quad(lambda y: float(bridge_density(unit_params, 0.3, y, 2.0)), 0, 2, (0.05, 0.4))
    assert total == pytest.approx(1.0, abs=1e-9)


def test_density_is_composed_kernel(unit_params):
    lhs = float(bridge_density(unit_params, 0.5, 0.5, 1.0))
    rhs = (subordinator_density(unit_params, 0.5, 0.5) * subordinator_density(unit_params, 0.5, 0.5)
           / subordinator_density(unit_params, 1.0, 1.0))
    assert lhs == pytest.approx(float(rhs), rel=1e-12)
    assert float(bridge_logpdf(unit_params, 0.5, 0.5, 1.0)) == pytest.approx(math.log(lhs), rel=1e-13)


def test_cdf_values(unit_params):
    assert float(bridge_cdf(unit_params, 0.5, 0.5, 1.0)) == pytest.approx(0.5, abs=1e-15)
    assert float(bridge_cdf(unit_params, 0.3, 1e-12, 2.0)) == pytest.approx(0.0, abs=1e-12)
    assert float(bridge_cdf(unit_params, 0.3, 2.0 - 1e-12, 2.0)) == pytest.approx(1.0, abs=1e-9)
    assert float(bridge_cdf(unit_params, 0.3, 0.4, 2.0)) == pytest.approx(CDF_EXAMPLE, abs=1e-12)
    assert float(bridge_incomplete_first_moment(unit_params, 0.3, 0.4, 2.0)) == pytest.approx(MOMENT_EXAMPLE, abs=1e-12)


def test_first_moment_limits(unit_params):
    assert float(bridge_incomplete_first_moment(unit_params, 0.3, 2.0, 2.0)) == pytest.approx(0.6)
    assert float(bridge_incomplete_first_moment(unit_params, 0.3, 0.0, 2.0)) == 0.0
    lo = bridge_incomplete_first_moment(unit_params, 0.3, 0.7, 2.0)
    hi = bridge_upper_first_moment(unit_params, 0.3, 0.7, 2.0)
    assert float(lo + hi) == pytest.approx(0.6, rel=1e-14)


@given(st.floats(0.2, 4), st.floats(0.05, 0.95), st.floats(0.1, 5), st.floats(0.02, 0.98))
def test_cdf_and_moment_match_quadrature(c, tf, z, f):
    p = BridgeParams(c, 1.0)
    y = f * z
    dens = lambda u: float(bridge_density(p, tf, u, z))  # noqa: E731
    mode_guess = (0.1 * z, 0.5 * z, 0.9 * z)
    q0 = _quad(dens, 0, y, mode_guess)
    q1 = _quad(lambda u: u * dens(u), 0, y, mode_guess)
    assert float(bridge_cdf(p, tf, y, z)) == pytest.approx(q0, abs=1e-8)
    assert float(bridge_incomplete_first_moment(p, tf, y, z)) == pytest.approx(q1, abs=1e-8)
    assert float(bridge_cdf(p, tf, y, z) + bridge_sf(p, tf, y, z)) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("k", [0.5, 2.0, 10.0])
def test_scaling_identity_is_exact(k):
    for c in (0.5, 1.0, 3.0):
        for tf, f, z in ((0.125, 0.5, 1.0), (0.875, 0.125, 4.5), (0.5, 0.875, 0.375)):
            base = bridge_cdf(BridgeParams(c, 1.0), tf, f * z, z)
            assert bridge_cdf(BridgeParams(c, k), k * tf, k * k * f * z, k * k * z) == base


def test_large_activity_concentrates_on_linear_path():
    z, t, width = 2.0, 0.3, 0.05
    mass = []
    for c in (10.0, 100.0, 1000.0):
        p = BridgeParams(c, 1.0)
        mass.append(float(bridge_cdf(p, t, t * z + width, z) - bridge_cdf(p, t, t * z - width, z)))
    assert mass[0] < mass[1] < mass[2]
    assert mass[2] > 0.99


def test_conditional_mean(unit_params):
    assert bridge_conditional_mean(unit_params, 0.0, 0.4, 0.0, 2.0) == pytest.approx(0.8)
    assert bridge_conditional_mean(unit_params, 0.2, 0.6, 0.5, 2.0) == pytest.approx(1.25)
    assert bridge_conditional_mean(unit_params, 0.2, 1.0 - 1e-12, 0.5, 2.0) == pytest.approx(2.0)


def test_conditional_mean_by_simulation(unit_params, rng):
    # bridge from (0.2, 0.5) to (1, 2): the midpoint of [0.2, 1] is 0.6
    draws = bridge_midpoint_sample(unit_params, 0.2, 1.0, 0.5, 2.0, rng, 100_000)
    assert abs(mc_z(draws, 1.25)) < 3


def test_second_moment(unit_params):
    assert bridge_conditional_second_moment(unit_params, 0.0, 1.0 - 1e-10, 0.0, 2.0) == pytest.approx(4.0, rel=1e-6)
    m2 = bridge_conditional_second_moment(unit_params, 0.0, 0.5, 0.0, 1.0)
    assert m2 == pytest.approx(SECOND_MOMENT_EXAMPLE, rel=1e-12)
    assert m2 <= 1.0 * bridge_conditional_mean(unit_params, 0.0, 0.5, 0.0, 1.0)


@given(st.floats(0.0, 0.5), st.floats(0.55, 0.95), st.floats(0.0, 1.0), st.floats(0.05, 3.0))
def test_increment_and_raw_second_moment_by_quadrature(s, t, x, w):
    p = BridgeParams(1.0, 1.0)
    z = x + w
    # the increment over [s, t] of the bridge from (s, x) to (T, z) is a bridge of horizon T - s
    sub = BridgeParams(1.0, 1.0 - s)
    dens = lambda u: float(bridge_density(sub, t - s, u, w))  # noqa: E731
    inc2 = _quad(lambda u: u * u * dens(u), 0, w, (0.1 * w, 0.5 * w, 0.9 * w))
    assert bridge_conditional_second_moment(p, s, t, x, z) == pytest.approx(inc2, rel=1e-8, abs=1e-13)
    raw = _quad(lambda u: (x + u) ** 2 * dens(u), 0, w, (0.1 * w, 0.5 * w, 0.9 * w))
    assert bridge_conditional_raw_second_moment(p, s, t, x, z) == pytest.approx(raw, rel=1e-8)


def test_midpoint_sampler_law(unit_params, rng):
    z = 1.5
    draws = bridge_midpoint_sample(unit_params, 0.0, 1.0, 0.0, z, rng, 100_000)
    assert np.all((draws >= 0) & (draws <= z))
    assert stats.kstest(draws, lambda y: bridge_cdf(unit_params, 0.5, y, z)).pvalue > 0.01


@given(st.floats(0, 5), st.floats(0, 5), st.floats(-40, 40), st.floats(1e-3, 3))
def test_midpoint_stays_in_range(y, gap, normal, dt):
    out = float(midpoint_from_normals(1.0, dt, y, y + gap, normal))
    assert y <= out <= y + gap
    assert float(midpoint_from_normals(1.0, dt, y, y, normal)) == y


def test_input_validation(unit_params):
    with pytest.raises(ValueError):
        bridge_conditional_mean(unit_params, 0.5, 0.4, 0.0, 1.0)
    with pytest.raises(ValueError):
        bridge_midpoint_sample(unit_params, 0.0, 1.0, 2.0, 1.0, np.random.default_rng(0))
