import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from srbreserve.gigclosed import (
    closed_best_estimate,
    closed_exponential_moment,
    closed_higher_moment,
    gig_terminal_prior,
    ig_increment_density,
    ig_moment,
    ig_process_transition,
    mixture_transition_density,
    mixture_weights,
)
from srbreserve.lrb import ConditionalLaw, Observation, transition_density
from srbreserve.reserve import best_estimate, conditional_second_moment
from srbreserve.stable import BridgeParams


def test_third_moment_example():
    assert ig_moment(1.0, 2.0, 1.0, 3) == pytest.approx(13.0 / 32.0, rel=1e-14)


@given(c=st.floats(0.2, 3.0), g=st.floats(0.2, 3.0), t=st.floats(0.05, 2.0))
def test_low_moments(c, g, t):
    ct = c * t
    assert ig_moment(c, g, t, 0) == pytest.approx(1.0, rel=1e-14)
    assert ig_moment(c, g, t, 1) == pytest.approx(ct / g, rel=1e-13)
    assert ig_moment(c, g, t, 2) == pytest.approx(ct / g**3 * (1.0 + g * ct), rel=1e-13)


@pytest.mark.parametrize("k", [1, 2, 3, 5, 8])
def test_moments_match_quadrature(k):
    c, g, t = 1.3, 0.9, 0.7
    ref = integrate.quad(lambda x: x**k * ig_increment_density(c, g, t, x), 0, math.inf, limit=200, epsrel=1e-12)[0]
    assert ig_moment(c, g, t, k) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("n", [1, 2, 4])
@pytest.mark.parametrize("t,xi", [(0.0, 0.0), (0.3, 0.4), (0.8, 2.0)])
def test_closed_best_estimate_matches_the_general_route(n, t, xi):
    c, g, T = 1.0, 1.5, 1.0
    params = BridgeParams(c, T)
    law = ConditionalLaw(gig_terminal_prior(c, g, n, T), Observation(t, xi), params)
    assert closed_best_estimate(c, g, n, t, xi, T) == pytest.approx(best_estimate(law), rel=1e-9)
    assert closed_higher_moment(c, g, n, t, xi, T, 2) == pytest.approx(conditional_second_moment(law), rel=1e-9)


@given(t=st.floats(0.0, 0.95), y=st.floats(0.0, 5.0))
def test_first_order_rational_function(t, y):
    c, g, T = 1.0, 1.5, 1.0
    m1, m2 = ig_moment(c, g, T - t, 1), ig_moment(c, g, T - t, 2)
    expected = (y * y + 2.0 * m1 * y + m2) / (y + m1)
    assert closed_best_estimate(c, g, 1, t, y, T) == pytest.approx(expected, rel=1e-13)


def test_first_order_weights():
    c, g, T, s, t, x = 1.0, 1.5, 1.0, 0.2, 0.6, 0.7
    w = mixture_weights(c, g, 1, s, t, x, T).weights
    den = ig_moment(c, g, T - s, 1) + x
    assert w[1] == pytest.approx(ig_moment(c, g, t - s, 1) / den, rel=1e-14)
    assert w[0] == pytest.approx((ig_moment(c, g, T - t, 1) + x) / den, rel=1e-14)
    assert sum(w) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("n", [1, 3])
def test_mixture_transition_matches_the_general_route(n):
    c, g, T = 1.0, 1.5, 1.0
    params = BridgeParams(c, T)
    prior = gig_terminal_prior(c, g, n, T)
    start = Observation(0.2, 0.5)
    assert sum(mixture_weights(c, g, n, 0.2, 0.6, 0.5, T).weights) == pytest.approx(1.0, rel=1e-13)
    for y in (0.55, 0.9, 1.7):
        general = transition_density(params, prior, start, Observation(0.6, y))
        assert float(mixture_transition_density(c, g, n, 0.2, 0.6, 0.5, y, T)) == pytest.approx(general, rel=1e-9)


def test_best_estimate_collapses_to_paid_at_the_horizon():
    for xi in (0.5, 2.0):
        assert closed_best_estimate(1.0, 1.5, 2, 1.0 - 1e-10, xi, 1.0) == pytest.approx(xi, rel=1e-8)


def test_exponential_moment_matches_quadrature():
    c, g, n, T, t, xi = 1.0, 1.5, 2, 1.0, 0.4, 0.8
    law = ConditionalLaw(gig_terminal_prior(c, g, n, T), Observation(t, xi), BridgeParams(c, T))
    values = []
    for a in (0.3, 0.8, 1.2):
        ref = law.expectation(lambda z, a=a: 0.5 * a * a * z).value
        closed = closed_exponential_moment(c, g, n, t, xi, T, a)
        assert closed == pytest.approx(ref, rel=1e-7)
        values.append(closed)
    assert np.all(np.diff(values) > 0)
    assert closed_exponential_moment(c, g, n, t, xi, T, 1e-6) == pytest.approx(1.0, rel=1e-10)


def test_exponential_moment_needs_a_below_gamma():
    with pytest.raises(ValueError):
        closed_exponential_moment(1.0, 1.5, 1, 0.0, 0.0, 1.0, 1.5)


def test_order_bounds():
    with pytest.raises(ValueError):
        closed_best_estimate(1.0, 1.0, 0, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        closed_best_estimate(1.0, 1.0, 13, 0.0, 0.0, 1.0)


@pytest.mark.parametrize("T", [1.0, 3.0])
def test_inverse_gaussian_prior_has_independent_increments(T):
    c, g = 1.0, 1.5
    params = BridgeParams(c, T)
    prior = gig_terminal_prior(c, g, 0, T)
    start = Observation(0.2, 0.5)
    for y in (0.55, 0.9, 1.7):
        general = transition_density(params, prior, start, Observation(0.6, y))
        assert float(ig_process_transition(c, g, 0.2, 0.6, 0.5, y)) == pytest.approx(general, rel=1e-9)
    mass = integrate.quad(lambda y: ig_process_transition(c, g, 0.2, 0.6, 0.5, y), 0.5, math.inf, limit=200)[0]
    assert mass == pytest.approx(1.0, abs=1e-9)
