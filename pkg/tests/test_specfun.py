import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from srbreserve.specfun import (
    LogWeightedValue,
    bessel_k_half_integer,
    bessel_k_half_integer_scaled,
    gamma_fn,
    hankel_symbol,
    log_bessel_k,
    log_std_normal_cdf,
    mills,
    scaled_cdf_product,
    std_normal_cdf,
)

# reference values computed with mpmath at 40 digits
PHI_MINUS_ONE = 0.15865525393145705141
LOG_E5000_PHI_M100 = -5.524208694205088626
E50_PHI_M10 = 0.03950669410138600294
K_5HALF_AT_2 = 0.3897977588961997039
GAMMA_7_5 = 1871.254305797788346
LOG_K = {(0.3, 1.7): -1.777424395492060594, (2.2, 0.05): 7.518814751830869374,
         (7.1, 30.0): -30.65577394944277894, (0.0, 1e-3): 1.949288550192198707}


def test_normal_cdf_values():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(-1.0) == pytest.approx(PHI_MINUS_ONE, rel=1e-14)
    assert std_normal_cdf(38.0) == 1.0
    assert np.isfinite(scaled_cdf_product(0.0, -38.0).log_magnitude)


def test_log_normal_cdf_deep_tail_matches_scipy():
    x = np.array([-5.0, -8.0, -20.0, -100.0, -1e4])
    assert np.allclose(log_std_normal_cdf(x), special.log_ndtr(x), rtol=1e-13)


def test_scaled_cdf_product_extreme_arguments():
    assert scaled_cdf_product(0.0, 0.0).value == pytest.approx(0.5, rel=1e-15)
    big = scaled_cdf_product(5000.0, -100.0)
    assert big.log_magnitude == pytest.approx(LOG_E5000_PHI_M100, rel=1e-12, abs=1e-10)
    # the regime of the two-line correlation integrand at c = T = 1, z = 0.01
    assert scaled_cdf_product(50.0, -10.0).value == pytest.approx(E50_PHI_M10, rel=1e-10)


@given(st.floats(-30, 30))
def test_mills_is_gaussian_scaled_tail(u):
    expected = math.exp(0.5 * u * u + special.log_ndtr(-u))
    assert float(mills(u)) == pytest.approx(expected, rel=1e-11)


def test_log_weighted_value_arithmetic():
    a = LogWeightedValue.from_float(-2.0)
    b = LogWeightedValue.from_float(3.0)
    assert (a * b).value == pytest.approx(-6.0)
    assert (a * LogWeightedValue.zero()).value == 0.0
    with pytest.raises(ValueError):
        LogWeightedValue(math.inf, 1)


def test_bessel_half_integer_values():
    assert float(bessel_k_half_integer(0, 1.0)) == pytest.approx(math.sqrt(math.pi / 2) * math.exp(-1), rel=1e-15)
    assert float(bessel_k_half_integer(1, 1.0)) == pytest.approx(2 * math.sqrt(math.pi / 2) * math.exp(-1), rel=1e-15)
    assert float(bessel_k_half_integer(2, 2.0)) == pytest.approx(K_5HALF_AT_2, rel=1e-12)


@given(st.integers(0, 8), st.floats(0.01, 200.0))
def test_bessel_half_integer_against_scipy(n, z):
    assert float(bessel_k_half_integer_scaled(n, z)) == pytest.approx(special.kve(n + 0.5, z), rel=1e-12)


@given(st.integers(1, 8), st.floats(0.05, 50.0))
def test_bessel_recurrence(n, z):
    # K_{nu+1} = K_{nu-1} + (2 nu / z) K_nu with nu = n + 1/2
    lhs = bessel_k_half_integer_scaled(n + 1, z)
    rhs = bessel_k_half_integer_scaled(n - 1, z) + (2 * n + 1) / z * bessel_k_half_integer_scaled(n, z)
    assert float(lhs) == pytest.approx(float(rhs), rel=1e-12)


def test_bessel_negative_order_symmetry():
    assert float(bessel_k_half_integer_scaled(-1, 0.7)) == float(bessel_k_half_integer_scaled(0, 0.7))
    with pytest.raises(ValueError):
        bessel_k_half_integer_scaled(0, 0.0)


@pytest.mark.parametrize("nu,z", list(LOG_K))
def test_log_bessel_k_general_order(nu, z):
    assert log_bessel_k(nu, z) == pytest.approx(LOG_K[(nu, z)], rel=1e-10)


def test_hankel_symbol():
    assert hankel_symbol(0.5, 0) == 1.0
    assert hankel_symbol(1.5, 1) == 2.0
    assert hankel_symbol(2.5, 1) == 6.0
    assert hankel_symbol(2.5, 2) == 12.0
    assert hankel_symbol(2.5, 3) == 0.0


def test_gamma_values():
    assert gamma_fn(1.0) == 1.0
    assert gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-15)
    assert gamma_fn(7.5) == pytest.approx(GAMMA_7_5, rel=1e-14)
    with pytest.raises(ValueError):
        gamma_fn(0.0)
