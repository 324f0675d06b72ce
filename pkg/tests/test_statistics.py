import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from condvar import (
    AccuracyWarning,
    ConfigError,
    RangeError,
    ScalingMode,
    block_increment_power,
    block_sum_theta_hat,
    c_p_constant,
    normal_abs_moment,
    power_variation,
)

SCALED, UNSCALED = ScalingMode.SCALED, ScalingMode.UNSCALED

# c_4 frozen from two independent routes computed before the build:
# exact Gaussian-moment expansion with sympy -> 120, and 10^8-sample Monte
# Carlo -> 120.1147 +- 0.1421 (s.e.), i.e. the 3 s.e. band below.
C4_EXACT = 120.0
C4_MC_BAND = (119.68846584056233, 120.54102320434531)


def quadrature_abs_moment(p):
    """E|N|^p by adaptive quadrature, independent of the Gamma formula."""
    phi = lambda x: math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    val, _ = integrate.quad(lambda x: 2 * x**p * phi(x), 0, np.inf, epsabs=0, epsrel=1e-13, limit=200)
    return val


def polar_cp(p):
    """c_p via polar coordinates: radial moment in closed form, angular part by piecewise quadrature.

    With (N1, N2) = r (cos t, sin t): the integrand is r^p h(t), E r^(2p) =
    2^p Gamma(p + 1), and h is smooth between its kinks at multiples of pi/4.
    """
    def h2(t):
        c, s = math.cos(t), math.sin(t)
        h = abs(c + s) ** p / 2 ** (p / 2) - 0.5 * (abs(c) ** p + abs(s) ** p)
        return h * h

    edges = np.arange(9) * math.pi / 4
    ang = sum(integrate.quad(h2, a, b, epsabs=0, epsrel=1e-13)[0] for a, b in zip(edges[:-1], edges[1:]))
    return 2 * 2**p * math.gamma(p + 1) * ang / (2 * math.pi)


class TestNormalMoments:
    def test_m2_is_one(self):
        assert normal_abs_moment(2) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("p", [0.5, 1, 1.5, 3, 4, 6])
    def test_against_quadrature(self, p):
        assert normal_abs_moment(p) == pytest.approx(quadrature_abs_moment(p), rel=1e-12)

    def test_m1_value(self):
        assert normal_abs_moment(1) == pytest.approx(0.7978845608028654, rel=1e-12)
        assert normal_abs_moment(4) == pytest.approx(3.0, rel=1e-12)

    def test_increasing_from_one(self):
        grid = np.linspace(1, 10, 37)
        vals = [normal_abs_moment(p) for p in grid]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("p", [0, -1.5])
    def test_domain(self, p):
        with pytest.raises(ConfigError):
            normal_abs_moment(p)


class TestCp:
    def test_c2_is_two(self):
        assert abs(c_p_constant(2) - 2.0) < 1e-10

    def test_c4_inside_monte_carlo_band(self):
        c4 = c_p_constant(4)
        lo, hi = C4_MC_BAND
        assert lo < c4 < hi
        assert c4 == pytest.approx(C4_EXACT, rel=1e-12)

    @pytest.mark.parametrize("p", [2, 4, 6])
    def test_even_powers_match_polar(self, p):
        assert c_p_constant(p) == pytest.approx(polar_cp(p), rel=1e-10)

    def test_odd_power_warns_but_is_close(self):
        with pytest.warns(AccuracyWarning):
            c3 = c_p_constant(3)
        assert c3 == pytest.approx(polar_cp(3), rel=1e-4)

    def test_polynomial_case_does_not_warn(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            c_p_constant(2, quadrature_order=40)

    @pytest.mark.parametrize("p", [0.5, 1, 2.5, 3])
    def test_nonnegative(self, p):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AccuracyWarning)
            assert c_p_constant(p) >= 0

    def test_order_floor(self):
        with pytest.raises(ConfigError):
            c_p_constant(2, quadrature_order=10)


def step_path(n, at, size=1.0):
    x = np.zeros(n + 1)
    x[at:] = size
    return x


class TestPowerVariation:
    def test_constant_path(self):
        assert power_variation(np.full(50, 3.0), 2, SCALED) == 0.0

    def test_single_jump_unscaled(self):
        assert power_variation(step_path(20, 7), 4, UNSCALED) == 1.0

    def test_linear_scaled_p2(self):
        n = 100
        x = np.arange(n + 1) / n
        assert power_variation(x, 2, SCALED) == pytest.approx(n * (1 / n) ** 2, rel=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(
        st.integers(0, 2**32 - 1),
        st.floats(0.5, 6),
        st.sampled_from([SCALED, UNSCALED]),
        st.integers(-3, 3),
    )
    def test_scaling_equivariance(self, seed, p, mode, e):
        x = np.random.default_rng(seed).standard_normal(64).cumsum()
        c = 2.0**e
        assert power_variation(c * x, p, mode) == pytest.approx(c**p * power_variation(x, p, mode), rel=1e-13)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.5, 6), st.sampled_from([SCALED, UNSCALED]))
    def test_translation_invariance(self, seed, p, mode):
        # integer-valued paths keep X + const exact in floating point
        x = np.random.default_rng(seed).integers(-50, 50, 40).astype(float).cumsum()
        assert power_variation(x + 1024.0, p, mode) == power_variation(x, p, mode)


class TestBlocks:
    def test_k1_is_single_increment(self):
        x = np.array([0.0, 0.3, -0.1, 0.4])
        n = 3
        for i in range(3):
            want = (1 / n) ** (1 - 3 / 2) * abs(x[i + 1] - x[i]) ** 3
            assert block_sum_theta_hat(x, 3, SCALED, i, 1) == pytest.approx(want, rel=1e-15)
            assert block_increment_power(x, 3, SCALED, i, 1) == pytest.approx(want, rel=1e-15)

    def test_partition_identity(self):
        x = np.random.default_rng(1).standard_normal(61).cumsum()
        total = sum(block_sum_theta_hat(x, 2.5, SCALED, i, 12) for i in range(0, 60, 12))
        assert total == pytest.approx(power_variation(x, 2.5, SCALED), rel=1e-13)

    def test_linear_path_values(self):
        n, k = 40, 5
        x = np.arange(n + 1) / n
        d = 1 / n
        for i in (0, 17, n - k):
            assert block_sum_theta_hat(x, 2, SCALED, i, k) == pytest.approx(k * d * d, rel=1e-13)
            assert block_increment_power(x, 2, SCALED, i, k) == pytest.approx(k * k * d * d, rel=1e-13)

    def test_step_inside_window(self):
        x = step_path(30, 12, size=-0.7)
        assert block_increment_power(x, 3, UNSCALED, 8, 10) == pytest.approx(0.7**3, rel=1e-15)

    @pytest.mark.parametrize("i,k", [(-1, 2), (9, 2), (0, 11), (0, 0)])
    def test_out_of_range(self, i, k):
        x = np.zeros(11)
        with pytest.raises(RangeError):
            block_sum_theta_hat(x, 2, SCALED, i, k)
        with pytest.raises(RangeError):
            block_increment_power(x, 2, SCALED, i, k)
