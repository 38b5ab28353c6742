import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sacebounds.copula import (
    CopulaDomainError, CopulaSpec, bvn_cdf, gaussian_copula_cdf, joint_pmf, phi_from_spearman,
    plackett_cdf, principal_strata, r_from_spearman, spearman_from_phi, spearman_from_r,
)
from sacebounds.model import MarginalSurvival

unit = st.floats(0.0, 1.0)
phis = st.floats(0.02, 5e4)


def test_spearman_closed_form_matches_quadrature(frozen):
    for phi, rho in frozen["spearman"].items():
        assert abs(spearman_from_phi(float(phi)) - rho) < 1e-8


def test_spearman_calibration_points():
    assert abs(spearman_from_phi(7.76) - 0.600) < 1e-3
    assert abs(math.log(phi_from_spearman(0.999)) - 9.773) < 0.01
    assert abs(math.log(phi_from_spearman(0.9)) - 4.191) < 1e-3
    assert phi_from_spearman(0.0) == 1.0


def test_spearman_is_continuous_through_independence():
    # the closed form loses about eps / d digits just above the switch point
    for d in (1e-7, -1e-7, 2e-6, -2e-6, 1e-4):
        series = d / 3 - d * d / 6 + d ** 3 / 10
        assert abs(spearman_from_phi(1 + d) - series) < 1e-9


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 0.9999))
def test_phi_inversion(rho):
    assert abs(spearman_from_phi(phi_from_spearman(rho)) - rho) < 1e-8


@pytest.mark.parametrize("rho", [-0.1, 1.0, 1.5])
def test_rho_outside_domain(rho):
    with pytest.raises(CopulaDomainError):
        phi_from_spearman(rho)


def test_plackett_special_values():
    assert plackett_cdf(0.3, 0.6, 1.0) == pytest.approx(0.18)
    assert plackett_cdf(0.0, 0.6, 7.76) == 0.0
    assert plackett_cdf(1.0, 0.6, 7.76) == pytest.approx(0.6)
    with pytest.raises(CopulaDomainError):
        plackett_cdf(0.5, 0.5, 0.0)


@settings(max_examples=200, deadline=None)
@given(unit, unit, phis)
def test_plackett_within_frechet_bounds(u, v, phi):
    c = plackett_cdf(u, v, phi)
    assert max(u + v - 1, 0) - 1e-15 <= c <= min(u, v) + 1e-15


@settings(max_examples=100, deadline=None)
@given(unit, unit, unit, unit, phis)
def test_plackett_two_increasing(u1, u2, v1, v2, phi):
    u1, u2 = sorted((u1, u2))
    v1, v2 = sorted((v1, v2))
    vol = (plackett_cdf(u2, v2, phi) - plackett_cdf(u1, v2, phi)
           - plackett_cdf(u2, v1, phi) + plackett_cdf(u1, v1, phi))
    assert vol > -1e-12


def test_plackett_rationalized_root_agrees_with_textbook_form():
    u, v = np.meshgrid(np.linspace(0.05, 0.95, 7), np.linspace(0.05, 0.95, 7))
    for phi in (0.3, 2.0, 7.76, 50.0):
        a = 1 + (phi - 1) * (u + v)
        ref = (a - np.sqrt(a * a - 4 * phi * (phi - 1) * u * v)) / (2 * (phi - 1))
        np.testing.assert_allclose(plackett_cdf(u, v, phi), ref, atol=1e-12)


def test_bvn_matches_quadrature(frozen):
    for x, y, r, ref in frozen["bvn"]:
        assert abs(bvn_cdf(x, y, r) - ref) < 1e-7


def test_bvn_orthant_closed_form():
    for r in (-0.9, -0.3, 0.2, 0.7, 0.99):
        assert bvn_cdf(0.0, 0.0, r) == pytest.approx(0.25 + math.asin(r) / (2 * math.pi), abs=1e-9)


def test_bvn_infinite_arguments():
    assert bvn_cdf(math.inf, 0.3, 0.5) == pytest.approx(0.6179114221889527)
    assert bvn_cdf(-math.inf, 0.3, 0.5) == 0.0


def test_gaussian_copula_edges():
    assert gaussian_copula_cdf(0.0, 0.4, 0.5) == 0.0
    assert gaussian_copula_cdf(1.0, 0.4, 0.5) == pytest.approx(0.4)
    assert gaussian_copula_cdf(0.4, 1.0, 0.5) == pytest.approx(0.4)


def test_gaussian_correlation_map():
    assert r_from_spearman(0.0) == 0.0
    assert r_from_spearman(1.0) == pytest.approx(1.0)
    for rho in (0.1, 0.5, 0.9):
        assert spearman_from_r(r_from_spearman(rho)) == pytest.approx(rho)


def test_spec_native_parameters():
    p = CopulaSpec.from_spearman("plackett", 0.6)
    assert p.native == pytest.approx(2.049, abs=1e-3) and p.native_label == "log_phi"
    g = CopulaSpec.from_spearman("gaussian", 0.6)
    assert g.native == pytest.approx(2 * math.sin(math.pi * 0.1)) and g.native_label == "r"
    assert CopulaSpec.independence().rho == 0.0
    with pytest.raises(CopulaDomainError):
        CopulaSpec("frank", 2.0)


M1 = MarginalSurvival(np.array([.15, .25, .2, .25, .15]), np.array([.15, .15, .3, .15, .25]))
M2 = MarginalSurvival(np.array([.3, .4, .15, .1, .05]), np.array([.4, .3, .15, .1, .05]))


@pytest.mark.parametrize("m,expected", [
    (M1, [0.519, 0.081, 0.181, 0.219]),
    (M2, [0.182, 0.118, 0.118, 0.582]),
])
def test_stratum_masses_at_rho_06(m, expected):
    s = principal_strata(joint_pmf(m, CopulaSpec.plackett(7.76)), 2)
    got = [s["always_survivor"], s["protected"], s["harmed"], s["never_survivor"]]
    np.testing.assert_allclose(got, expected, atol=1e-3)


def test_joint_pmf_independence_is_outer_product():
    np.testing.assert_allclose(joint_pmf(M1, CopulaSpec.independence()), np.outer(M1.treated, M1.control))
    np.testing.assert_allclose(joint_pmf(M1, CopulaSpec.plackett(1.0)), np.outer(M1.treated, M1.control),
                               atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4),
       st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4),
       st.floats(0.0, 0.9999), st.sampled_from(["plackett", "gaussian"]))
def test_joint_pmf_reproduces_marginals(w1, w0, rho, family):
    w1, w0 = np.array(w1) + 1e-3, np.array(w0) + 1e-3
    m = MarginalSurvival(w1 / w1.sum(), w0 / w0.sum())
    p = joint_pmf(m, CopulaSpec.from_spearman(family, rho))
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), m.treated, atol=1e-7)
    np.testing.assert_allclose(p.sum(axis=0), m.control, atol=1e-7)
    assert abs(p.sum() - 1) < 1e-7


def test_joint_pmf_concentrates_on_comonotone_coupling():
    p = joint_pmf(MarginalSurvival(np.full(4, .25), np.full(4, .25)), CopulaSpec.from_spearman("plackett", 0.9999))
    assert np.trace(p) > 0.97
