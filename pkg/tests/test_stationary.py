# tests/test_stationary.py
import math

import numpy as np
import pytest

from src.services import bessel, stationary
from src.services.stationary import MomentPair, ORIGIN
from src.services.torus_fourier import mass
from src.utils.error_handler import ConfigurationError


def test_partition_function_at_origin_is_bessel():
    assert stationary.partition_Z(1.0, ORIGIN) == pytest.approx(2 * math.pi * 1.2660658777520082, rel=1e-10)
    assert stationary.partition_Z(1.0, ORIGIN) == pytest.approx(7.9549, abs=1e-4)


def test_log_partition_survives_small_sigma():
    log_Z = stationary.log_partition_Z(1e-3, MomentPair(0.0, 0.5))
    assert math.isfinite(log_Z)
    assert log_Z > 1000


def test_density_is_normalized_and_peaks_on_the_tilted_well():
    rho = stationary.density(0.2, MomentPair(0.0, 0.8), M_grid=1024)
    assert rho.samples.integral() == pytest.approx(1.0, abs=1e-12)
    assert int(np.argmax(rho.samples.values)) == 256
    assert np.all(rho.samples.values > 0)


def test_density_field_has_unit_mass():
    f = stationary.density_field(0.7, MomentPair(0.0, 0.3), 16)
    assert mass(f) == pytest.approx(1.0, abs=1e-12)


def test_moment_pair_polar_form():
    m = MomentPair(0.0, -0.5)
    assert m.M == 0.5
    assert m.phi == pytest.approx(-math.pi / 2)
    assert m.distance(ORIGIN) == 0.5
    assert m.to_dict() == {"m1": 0.0, "m2": -0.5}


def test_map_g_fixes_origin():
    g = stationary.map_g(0.4, ORIGIN)
    assert abs(g.m1) < 1e-14
    assert abs(g.m2) < 1e-14


def test_normalized_auxiliaries_are_map_minus_identity():
    for m in [0.1, 0.5, 0.9]:
        assert stationary.zeta(0.6, m, normalized=True) == pytest.approx(
            stationary.map_gbar(0.6, m) - m, abs=1e-14)
        assert stationary.xi(0.6, m, normalized=True) == pytest.approx(
            stationary.map_h(0.6, m) - m, abs=1e-14)


def test_auxiliary_functions_negative_at_one():
    for sigma in [0.1, 0.7, 2.0]:
        assert stationary.zeta(sigma, 1.0) < 0
        assert stationary.xi(sigma, 1.0) < 0


@pytest.mark.parametrize("m", [0.0, 0.3, 0.8])
def test_map_h_derivative_matches_finite_difference(m):
    h = 1e-6
    fd = (stationary.map_h(0.7, m + h) - stationary.map_h(0.7, m - h)) / (2 * h)
    assert stationary.map_h_derivative(0.7, m) == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("sigma", [0.3, 1.0, 2.5])
def test_odd_moments_vanish(sigma):
    s0 = stationary.moment_seq_s(sigma, 0)
    assert abs(stationary.moment_seq_s(sigma, 1)) < 1e-13 * s0
    assert abs(stationary.moment_seq_s(sigma, 3)) < 1e-13 * s0
    assert abs(stationary.moment_seq_c(sigma, 1)) < 1e-13 * s0


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_second_moments_are_bessel_combinations(sigma):
    I0 = bessel.bessel_I(0, 1 / sigma)
    I1 = bessel.bessel_I(1, 1 / sigma)
    assert stationary.moment_seq_s(sigma, 0) == pytest.approx(I0, rel=1e-10)
    assert stationary.moment_seq_s(sigma, 2) == pytest.approx((I0 + I1) / 2, rel=1e-9)
    assert stationary.moment_seq_c(sigma, 2) == pytest.approx((I0 - I1) / 2, rel=1e-9)


def test_moment_seq_accepts_arrays_and_rejects_bad_indices():
    values = stationary.moment_seq_s(1.0, np.array([0, 2, 4]))
    assert values.shape == (3,)
    assert values[0] > values[1] > values[2] > 0
    with pytest.raises(ConfigurationError):
        stationary.moment_seq_s(1.0, -1)
    with pytest.raises(ConfigurationError):
        stationary.moment_seq_c(1.0, 1.5)


def test_upsilon_decreases_towards_minus_sigma():
    sigma = 0.6
    values = [stationary.upsilon(sigma, k) for k in range(13)]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert all(v > -sigma for v in values)
    assert abs(values[12] + sigma) < 0.1


@pytest.mark.parametrize("sigma", [0.3, 0.6, 1.0])
def test_upsilon_strictly_decreasing(sigma):
    values = [stationary.upsilon(sigma, k) for k in range(9)]
    assert all(b < a for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("sigma,m", [
    (0.3, 0.2), (0.3, 0.6), (0.3, 1.0), (0.5, 0.2), (0.5, 0.9), (0.8, 0.5), (2.0, 1.0),
])
def test_zeta_series_matches_quadrature(sigma, m):
    s0 = stationary.moment_seq_s(sigma, 0)
    np.testing.assert_allclose(
        stationary.zeta_series(sigma, m), stationary.zeta(sigma, m), rtol=1e-8, atol=1e-10 * s0
    )


@pytest.mark.parametrize("sigma", [0.3, 0.4, 0.5, 0.6, 0.7, 0.77, 0.85, 1.0, 1.5, 2.0])
def test_zeta_slope_at_zero_is_bessel_criterion(sigma):
    expected = 0.5 * bessel.bessel_I(0, 1 / sigma) * bessel.f_c(sigma)
    s0, s2 = stationary.moment_seq_s(sigma, np.array([0, 2]))
    assert stationary.zeta_prime_at_zero(sigma) == pytest.approx(expected, rel=1e-8, abs=1e-10)
    assert (s2 - sigma * s0) / sigma == pytest.approx(expected, rel=1e-8, abs=1e-10)


@pytest.mark.parametrize("sigma,m", [(0.3, 0.4), (0.6, 0.7), (1.0, 0.25)])
def test_axis_functions_are_odd(sigma, m):
    for func in (stationary.zeta, stationary.xi):
        assert func(sigma, -m) == pytest.approx(-func(sigma, m), rel=1e-10, abs=1e-12)
        odd = -func(sigma, m, normalized=True)
        assert func(sigma, -m, normalized=True) == pytest.approx(odd, rel=1e-10, abs=1e-12)
    assert stationary.zeta(sigma, 0.0) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("sigma", [0.5, 1.0])
def test_zeta_slope_at_zero_matches_finite_difference(sigma):
    h = 1e-4
    fd = (stationary.zeta(sigma, h) - stationary.zeta(sigma, -h)) / (2 * h)
    assert stationary.zeta_prime_at_zero(sigma) == pytest.approx(fd, rel=1e-6)


def test_zeta_slope_changes_sign_at_sigma_c():
    assert stationary.zeta_prime_at_zero(0.75) > 0
    assert stationary.zeta_prime_at_zero(0.79) < 0
    assert stationary.find_sigma_c_from_zeta() == pytest.approx(bessel.find_sigma_c(), abs=1e-8)


@pytest.mark.parametrize("sigma,count", [
    (0.05, 3), (0.5, 3), (0.6, 3), (0.7, 3), (0.75, 3),
    (0.78, 1), (0.9, 1), (1.5, 1),
])
def test_solution_count_across_sigma_c(sigma, count):
    report = stationary.find_fixed_points(sigma)
    assert report.count == count
    assert ORIGIN in report.solutions
    for sol in report.solutions:
        g = stationary.map_g(sigma, sol)
        assert sol.distance(g) < 1e-8


def test_nontrivial_solutions_lie_on_the_sine_axis():
    report = stationary.find_fixed_points(0.6)
    nontrivial = [s for s in report.solutions if s != ORIGIN]
    assert len(nontrivial) == 2
    assert all(s.m1 == 0.0 for s in nontrivial)
    assert nontrivial[0].m2 == pytest.approx(-nontrivial[1].m2, abs=1e-10)
    assert 0 < report.m_star < 1
    assert report.to_dict()["count"] == 3


def test_m_star_vanishes_above_sigma_c():
    assert stationary.find_fixed_points(0.9).m_star == 0.0


def test_phase_row_fields():
    row = stationary.phase_row(0.6)
    assert row["count"] == 3
    assert row["zeta_prime0"] > 0
    assert row["f_c"] > 0
    assert row["m_star"] > 0


def test_quadrant_exclusion_signs():
    assert abs(stationary.quadrant_exclusion(0.6, 0.5, 0.0)) < 1e-10
    assert abs(stationary.quadrant_exclusion(0.6, 0.5, math.pi / 2)) < 1e-10
    assert stationary.quadrant_exclusion(0.6, 1.0, math.pi / 4) > 0
    assert stationary.quadrant_exclusion(0.6, 1.0, 3 * math.pi / 4) < 0
    with pytest.raises(ConfigurationError):
        stationary.quadrant_exclusion(0.6, -0.1, 0.0)


@pytest.mark.parametrize("sigma", [0.5, 0.8, 2.0])
def test_xi_uniqueness_certificate(sigma):
    assert stationary.xi_uniqueness_check(sigma)


def test_xi_uniqueness_certificate_needs_large_sigma():
    with pytest.raises(ConfigurationError):
        stationary.xi_uniqueness_check(0.3)


@pytest.mark.parametrize("sigma", [0.05, 0.02])
def test_s0_leading_asymptotics(sigma):
    exact = stationary.moment_seq_s(sigma, 0)
    assert abs(stationary.s0_asymptotic(sigma) / exact - 1) <= 3 * sigma


def test_laplace_first_order_for_partition_function():
    sigma = 0.05
    approx = sum(stationary.laplace_approx((1.0, 0.0, 0.0), minimum, sigma)
                 for minimum in stationary.double_well_minima())
    exact = stationary.moment_seq_s(sigma, 0)
    assert abs(approx / exact - 1) <= sigma ** 2


def test_laplace_rejects_degenerate_minimum():
    with pytest.raises(ConfigurationError):
        stationary.laplace_approx((1.0, 0.0, 0.0), stationary.PotentialMinimum(0.0, 0.0, 0.0, 1.0), 0.1)


def test_tilted_minima_are_critical_points():
    m = 0.6
    for x, minimum in stationary.tilted_minima(m):
        assert -2 * math.sin(2 * x) + m * math.sin(x) == pytest.approx(0.0, abs=1e-14)
        assert minimum.U0 == pytest.approx(math.cos(2 * x) - m * math.cos(x), abs=1e-14)
        assert minimum.U2 == pytest.approx(-4 * math.cos(2 * x) + m * math.cos(x), abs=1e-14)
        assert minimum.U3 == pytest.approx(8 * math.sin(2 * x) - m * math.sin(x), abs=1e-14)
    with pytest.raises(ConfigurationError):
        stationary.tilted_minima(1.5)


def test_h_expansions_first_order_accuracy():
    coarse = stationary.h_expansions(0.02, 0.5)
    fine = stationary.h_expansions(0.01, 0.5)
    for name in ("one", "cos", "cos2"):
        assert set(coarse[name]) == {"quadrature", "leading", "first", "correction", "error_over_sigma"}
        assert coarse[name]["error_over_sigma"] < 1.0
        assert fine[name]["error_over_sigma"] < coarse[name]["error_over_sigma"] + 1e-6
    assert coarse["one"]["leading"] == pytest.approx(2.0)
    assert coarse["cos"]["leading"] == pytest.approx(0.25)


@pytest.mark.parametrize("m", [0.0, 0.5, 1.0])
def test_h_expansions_error_is_small_against_sigma(m):
    expansions = stationary.h_expansions(0.02, m)
    for name in ("one", "cos", "cos2"):
        assert expansions[name]["error_over_sigma"] < 0.2


@pytest.mark.parametrize("sigma", [0.05, 0.02])
def test_s2_shares_the_leading_order_of_s0(sigma):
    exact = stationary.moment_seq_s(sigma, 2)
    assert abs(stationary.s0_asymptotic(sigma) / exact - 1) <= 3 * sigma
