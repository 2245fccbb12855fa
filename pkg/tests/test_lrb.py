import math

import numpy as np
import pytest
from scipy import integrate, stats

from srbreserve.lrb import ConditionalLaw, Observation, PosteriorSampler, reanchor, transition_density
from srbreserve.prior import ExponentialPrior, GIGPrior, GPDPrior, LevyStablePrior
from srbreserve.stable import BridgeParams, subordinator_density

from .conftest import mc_z

PARAMS = BridgeParams(1.0, 1.0)
PRIORS = [GPDPrior(1.0, 1.0, 0.25), ExponentialPrior(0.8), GIGPrior(0.7, 0.8, 1.3), LevyStablePrior(1.0, 1.0)]
ANCHORS = [Observation(0.2, 0.5), Observation(0.6, 1.5), Observation(0.9, 0.05)]


def _quad(f, lo, pts=()):
    edges = [lo] + sorted(p for p in pts if p > lo)
    total = sum(integrate.quad(f, a, b, limit=200, epsabs=0, epsrel=1e-11)[0] for a, b in zip(edges[:-1], edges[1:]))
    # z = 1/u turns a heavy tail into a finite range
    g = lambda u: f(1.0 / u) / (u * u) if u > 0 else 0.0
    return total + integrate.quad(g, 0.0, 1.0 / edges[-1], limit=200, epsabs=1e-14, epsrel=1e-11)[0]


@pytest.mark.parametrize("prior", PRIORS, ids=repr)
@pytest.mark.parametrize("anchor", ANCHORS, ids=repr)
def test_psi_mass_is_the_density_ratio_integral(prior, anchor):
    law = ConditionalLaw(prior, anchor, PARAMS)
    s, xi = anchor.s, anchor.xi
    lo = max(xi, prior.support[0])

    def ratio(z):
        num = subordinator_density(PARAMS, 1.0 - s, z - xi)
        den = subordinator_density(PARAMS, 1.0, z)
        return float(num / den * prior.pdf(z))

    scale = 0.5 * (1.0 - s) ** 2
    pts = [lo + scale * m for m in (0.01, 0.1, 1.0, 10.0)] + list(prior.breakpoints())
    assert math.exp(law.log_psi) == pytest.approx(_quad(ratio, lo, pts), rel=1e-8)


def test_normalizer_matches_a_prior_average(rng):
    prior = GPDPrior(1.0, 1.0, 0.25)
    law = ConditionalLaw(prior, Observation(0.2, 0.5), PARAMS)
    draws = np.exp(law.log_factor(prior.sample(rng, 200_000)))
    assert abs(mc_z(draws, law.normalizer)) < 4.0


def test_normalizer_at_time_zero_is_one():
    law = ConditionalLaw(GPDPrior(1.0, 1.0, 0.25), Observation(0.0, 0.0), PARAMS)
    assert law.normalizer == 1.0 and law.is_prior
    assert law.cdf(2.0) == pytest.approx(float(law.prior.cdf(2.0)), abs=1e-15)


@pytest.mark.parametrize("prior", PRIORS, ids=repr)
@pytest.mark.parametrize("anchor", ANCHORS, ids=repr)
def test_posterior_has_unit_mass(prior, anchor):
    law = ConditionalLaw(prior, anchor, PARAMS)
    lo = max(anchor.xi, prior.support[0])
    scale = law.boundary_layer
    pts = [lo + scale * m for m in (0.01, 0.1, 1.0, 10.0)] + list(prior.breakpoints())
    assert _quad(lambda z: float(law.pdf(z)), lo, pts) == pytest.approx(1.0, abs=1e-8)
    assert law.cdf(lo + scale) + law.sf(lo + scale) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("prior", PRIORS[:2], ids=repr)
def test_transition_density_has_unit_mass(prior):
    start, t = Observation(0.2, 0.5), 0.5
    f = lambda y: transition_density(PARAMS, prior, start, Observation(t, y))
    pts = [0.5 + 0.045 * m for m in (0.1, 1.0, 10.0)] + [1.0, 3.0]
    assert _quad(f, 0.5, pts) == pytest.approx(1.0, abs=1e-7)


def test_two_steps_compose_to_one():
    prior = GPDPrior(1.0, 1.0, 0.25)
    start, end, mid = Observation(0.3, 0.2), Observation(0.6, 0.5), 0.45
    direct = transition_density(PARAMS, prior, start, end)

    def via(y):
        if not 0.2 < y < 0.5:
            return 0.0
        m = Observation(mid, y)
        return transition_density(PARAMS, prior, start, m) * transition_density(PARAMS, prior, m, end)

    composed = integrate.quad(via, 0.2, 0.5, points=[0.21, 0.25, 0.35, 0.45, 0.49], limit=200,
                              epsabs=0, epsrel=1e-11)[0]
    assert composed == pytest.approx(direct, rel=1e-9)


def test_reanchor_keeps_only_the_latest_observation():
    prior = GPDPrior(1.0, 1.0, 0.25)
    law0 = ConditionalLaw(prior, Observation(0.0, 0.0), PARAMS)
    two = reanchor(reanchor(law0, Observation(0.3, 0.2)), Observation(0.6, 0.5))
    one = reanchor(law0, Observation(0.6, 0.5))
    assert two == one
    assert two.log_normalizer == one.log_normalizer
    with pytest.raises(ValueError):
        reanchor(one, Observation(0.5, 0.6))
    with pytest.raises(ValueError):
        reanchor(one, Observation(0.7, 0.4))


@pytest.mark.parametrize("prior", PRIORS[:3], ids=repr)
def test_posterior_mean_exceeds_paid(prior):
    law = ConditionalLaw(prior, Observation(0.6, 1.5), PARAMS)
    assert law.expectation(lambda z: np.log(z)).value > 1.5


@pytest.mark.parametrize("p", [0.01, 0.25, 0.5, 0.9, 0.999])
def test_quantile_inverts_the_cdf(anchored_law, p):
    q = anchored_law.quantile(p)
    assert anchored_law.cdf(q) == pytest.approx(p, abs=1e-8)


def test_sampler_tracks_the_quantile_function(anchored_law, rng):
    sampler = PosteriorSampler(anchored_law)
    for p in (0.01, 0.25, 0.5, 0.9, 0.999):
        assert float(sampler.ppf(p)) == pytest.approx(anchored_law.quantile(p), rel=1e-6)
    draws = sampler.sample(rng, 3000)
    assert stats.kstest(draws, np.vectorize(anchored_law.cdf)).pvalue > 1e-3


def test_invalid_anchors_are_rejected():
    prior = GPDPrior(1.0, 1.0, 0.25)
    with pytest.raises(ValueError):
        ConditionalLaw(prior, Observation(1.0, 0.5), PARAMS)
    with pytest.raises(ValueError):
        Observation(0.0, 0.5)
    with pytest.raises(ValueError):
        Observation(0.5, -1.0)
    with pytest.raises(ValueError):
        ConditionalLaw(GPDPrior(1.0, 1.0, -0.5), Observation(0.5, 3.5), PARAMS)
