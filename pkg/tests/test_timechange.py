import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from srbreserve.lrb import ConditionalLaw, Observation
from srbreserve.prior import GPDPrior
from srbreserve.reserve import LayerSpec, best_estimate, layer_recovery_schedule, reserving_report
from srbreserve.stable import BridgeParams
from srbreserve.timechange import (
    IdentityExposure,
    TabulatedExposure,
    WeibullExposure,
    curve_from_config,
    exposure_peak,
    inverse_operational_time,
    operational_time,
    timechanged_view,
)

PARAMS = BridgeParams(1.0, 1.0)
PRIOR = GPDPrior(1.0, 1.0, 0.25)


def test_weibull_clock_example():
    tau = operational_time(WeibullExposure(0.5, 2.0), 1.0, 0.5)
    assert tau == pytest.approx((1.0 - math.exp(-1.0)) / (1.0 - math.exp(-4.0)), rel=1e-15)


@pytest.mark.parametrize("curve", [WeibullExposure(0.5, 2.0), WeibullExposure(2.0, 0.7),
                                   TabulatedExposure((0.0, 0.3, 0.6), (2.0, 1.0, 0.5))], ids=repr)
def test_clock_matches_integrated_exposure(curve):
    T = 1.0
    total = integrate.quad(lambda u: float(curve.marginal(u)), 0, T, points=[0.3, 0.6], epsrel=1e-12)[0]
    for t in (0.1, 0.45, 0.8):
        part = integrate.quad(lambda u: float(curve.marginal(u)), 0, t, points=[0.3, 0.6], epsrel=1e-12)[0]
        assert float(operational_time(curve, T, t)) == pytest.approx(T * part / total, rel=1e-10)
    assert float(operational_time(curve, T, 0.0)) == 0.0
    assert float(operational_time(curve, T, T)) == T


@given(a=st.floats(0.2, 3.0), b=st.floats(0.3, 4.0), u=st.floats(0.0, 2.0))
def test_weibull_inverse_clock(a, b, u):
    curve = WeibullExposure(a, b)
    t = float(inverse_operational_time(curve, 2.0, u))
    assert 0.0 <= t <= 2.0
    assert float(operational_time(curve, 2.0, t)) == pytest.approx(u, abs=1e-9)


def test_tabulated_inverse_clock_is_exact():
    # the zero bucket makes the clock stand still on [0.5, 0.75]
    curve = TabulatedExposure((0.0, 0.25, 0.5, 0.75), (1.0, 3.0, 0.0, 2.0))
    for u in np.linspace(0.0, 1.0, 11):
        t = float(inverse_operational_time(curve, 1.0, u))
        assert float(operational_time(curve, 1.0, t)) == pytest.approx(u, abs=1e-14)
    assert float(inverse_operational_time(curve, 1.0, 0.7)) == pytest.approx(0.775, rel=1e-13)


def test_identity_curve_changes_nothing():
    view = timechanged_view(PARAMS, PRIOR, curve_from_config(None))
    law = ConditionalLaw(PRIOR, Observation(0.3, 0.6), PARAMS)
    assert view.report(0.3, 0.6) == reserving_report(PARAMS, PRIOR, Observation(0.3, 0.6))
    assert view.paid_claims_conditional_mean(0.3, 0.6, 0.7) == pytest.approx(
        ((1 - 0.7) * 0.6 + 0.4 * best_estimate(law)) / 0.7, rel=1e-14)
    assert isinstance(curve_from_config({"kind": "identity"}), IdentityExposure)


def test_peak_location():
    peak = exposure_peak(WeibullExposure(1.0, 2.0))
    assert peak.peak == pytest.approx(math.sqrt(0.5), rel=1e-15) and not peak.monotone_decreasing
    assert exposure_peak(WeibullExposure(1.0, 1.0)) == (None, True)
    assert exposure_peak(WeibullExposure(1.0, 0.5)).monotone_decreasing


@pytest.mark.parametrize("a,b", [(1.0, 2.0), (0.5, 3.0), (2.0, 1.5)])
def test_clock_speed_peaks_at_the_exposure_peak(a, b):
    curve = WeibullExposure(a, b)
    T = 3.0 * a
    grid = np.linspace(1e-6, T, 200_001)
    tau = np.asarray(operational_time(curve, T, grid))
    speed = np.gradient(tau, grid)
    assert grid[np.argmax(speed)] == pytest.approx(exposure_peak(curve).peak, abs=1e-3 * T)
    # concave after the peak; the far tail where the speed is lost in rounding is skipped
    tail = (grid > exposure_peak(curve).peak * 1.01) & (speed > 1e-6 * speed.max())
    assert np.all(np.diff(speed[tail]) < 0)
    assert np.all(np.diff(curve.marginal(grid[grid > exposure_peak(curve).peak * 1.01])) <= 0)


def test_layer_dates_come_back_in_calendar_time():
    curve = WeibullExposure(0.5, 2.0)
    view = timechanged_view(PARAMS, PRIOR, curve)
    layer = LayerSpec(1.2, 0.8, (0.4, 0.7, 1.0))
    sched = view.layer_recovery_schedule(0.2, 0.5, layer)
    assert [d for d, _ in sched] == [0.4, 0.7, 1.0]
    op = LayerSpec(1.2, 0.8, tuple(float(curve.tau(1.0, d)) for d in (0.4, 0.7, 1.0)))
    direct = layer_recovery_schedule(ConditionalLaw(PRIOR, Observation(float(curve.tau(1.0, 0.2)), 0.5), PARAMS), op)
    for (_, v1), (_, v2) in zip(sched, direct):
        assert v1 == pytest.approx(v2, rel=1e-14)


def test_expected_development_follows_the_clock():
    curve = WeibullExposure(0.5, 2.0)
    view = timechanged_view(PARAMS, PRIOR, curve)
    t = np.array([0.0, 0.25, 0.5, 1.0])
    np.testing.assert_allclose(view.expected_development(t), np.asarray(curve.tau(1.0, t)) * 7.0 / 3.0, rtol=1e-14)


@pytest.mark.parametrize("cfg", [{"kind": "weibull", "a": -1.0, "b": 1.0}, {"kind": "weibull", "a": 1.0},
                                  {"kind": "tabulated", "times": [0.1, 0.2], "exposure": [1.0, 1.0]},
                                  {"kind": "tabulated", "times": [0.0, 0.2], "exposure": [0.0, 0.0]},
                                  {"kind": "bogus"}])
def test_bad_curves_are_rejected(cfg):
    with pytest.raises(ValueError):
        curve_from_config(cfg)


def test_calendar_time_outside_the_horizon_is_rejected():
    with pytest.raises(ValueError):
        operational_time(WeibullExposure(1.0, 2.0), 1.0, 1.5)
