import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from kintraffic.closure import (
    ClosureVariant,
    braking_probability,
    coeff_a,
    coeff_b,
    enskog_term,
    headway_pdf,
    headway_weights,
    kinetic_profile,
    merged_coefficient,
    reduced_density,
    simplified_a,
    simplified_b,
    simplified_profile,
)
from kintraffic.core import DomainError, ModelParameters

DENSITIES = [0.1 * k for k in range(1, 10)]


def test_reduced_density_examples():
    assert reduced_density(0.0) == 0.0
    assert reduced_density(0.5) == pytest.approx(1.0)
    assert reduced_density(0.9) == pytest.approx(9.0)
    assert reduced_density(0.9999) > 9000
    with pytest.raises(DomainError):
        reduced_density(1.0)


def test_headway_pdf_examples():
    assert headway_pdf(0.5, 0.5) == 0.0
    assert headway_pdf(1.0, 0.5) == pytest.approx(reduced_density(0.5))
    H_A = 1.7
    rt = reduced_density(0.3)
    assert headway_pdf(H_A, 0.3) == pytest.approx(rt * math.exp(-rt * (H_A - 1.0)), rel=1e-15)


@pytest.mark.parametrize("rho", DENSITIES)
@pytest.mark.parametrize("H_B", [1.0, 0.4])
def test_headway_moments_by_quadrature(rho, H_B):
    rho = rho / H_B
    norm, _ = quad(lambda h: headway_pdf(h, rho, H_B), H_B, np.inf, epsabs=1e-13, epsrel=1e-12)
    mean, _ = quad(lambda h: h * headway_pdf(h, rho, H_B), H_B, np.inf,
                   epsabs=1e-13, epsrel=1e-12)
    assert abs(norm - 1.0) < 1e-8
    assert abs(mean - 1.0 / rho) < 1e-8 * max(1.0, 1.0 / rho)


def test_braking_probability_examples():
    assert braking_probability(0.0) == 0.0
    assert braking_probability(0.5) == pytest.approx(1 - 0.5 * math.exp(-1), abs=1e-12)
    assert braking_probability(0.5) == pytest.approx(0.816060, abs=1e-6)
    assert braking_probability(1 - 1e-9) == pytest.approx(1.0, abs=1e-6)
    p = braking_probability(np.linspace(0, 0.9, 200))
    assert np.all(np.diff(p) > 0)
    p = braking_probability(np.linspace(0.9, 0.99999, 200))
    assert np.all(np.diff(p) >= 0) and np.all(p <= 1)


def test_enskog_zero_gradient():
    for variant in ClosureVariant:
        assert enskog_term(variant, 0.5, 0.5, 0.0) == 0.0


def test_enskog_examples():
    p_b = 1 - 0.5 * math.exp(-1)
    assert enskog_term("fp-eta1", 0.5, 0.5, -1.0) == pytest.approx(p_b * 0.5, rel=1e-12)
    assert enskog_term("fp-eta1", 0.5, 0.5, -1.0) == pytest.approx(0.408030, abs=1e-6)
    params = ModelParameters(q_A=1.0, H_A=1.0, alpha=3.0, w=1.0)
    # -q_A rho H_A (min(alpha u, w) - u)/2 du_dx
    expected = -1.0 * 0.5 * 1.0 * (min(1.5, 1.0) - 0.5) / 2 * 1.0
    assert enskog_term("boltzmann-ex2", 0.5, 0.5, 1.0, params) == pytest.approx(expected)
    assert expected == -0.125


def test_enskog_branch_formulas():
    params = ModelParameters(H_A=1.5, H_B=0.8, q_A=0.7, q_B=1.3, c_eta=2.0, beta=0.3)
    rho, u, g = 0.6, 0.4, 0.25
    p_b = braking_probability(rho, 0.8)
    assert enskog_term("boltzmann-ex1", rho, u, -g, params) == pytest.approx(
        1.3 * p_b * rho * 0.8**2 * g * g)
    assert enskog_term("boltzmann-ex1", rho, u, g, params) == pytest.approx(
        -0.7 * rho * 1.5**2 * g * g)
    assert enskog_term("boltzmann-ex2", rho, u, -g, params) == pytest.approx(
        1.3 * p_b * rho * 0.8 * 0.7 / 2 * u * g)
    assert enskog_term("fp-eta1", rho, u, g, params) == pytest.approx(-1.0 * 0.7 * rho * 1.5 * g)
    assert enskog_term("fp-eta2", rho, u, -g, params) == pytest.approx(
        2.0 * 1.3 * p_b * rho * 0.8**2 * g * g)


def test_enskog_domain():
    with pytest.raises(DomainError):
        enskog_term("fp-eta1", 1.0, 0.5, 1.0)
    with pytest.raises(DomainError):
        enskog_term("fp-eta1", 0.5, 1.5, 1.0)


@pytest.mark.parametrize("variant", list(ClosureVariant))
def test_enskog_sign_contract(variant):
    rng = np.random.default_rng(7)
    params = ModelParameters(H_A=1.2, H_B=1.0, w=1.0)
    rho = rng.uniform(0, 0.999, 1000)
    u = rng.uniform(0, 1.0, 1000)
    g = rng.uniform(-5, 5, 1000)
    e = enskog_term(variant, rho, u, g, params)
    assert np.all(e[g > 0] <= 0)
    assert np.all(e[g < 0] >= 0)


def test_coefficients_reduce_to_simplified_forms():
    params = ModelParameters(H=1.0, H_A=1.0, H_B=1.0, v_ref=1.0)
    rho = np.linspace(0.01, 0.99, 99)
    eq_a = params.v_ref / (1 / (rho * params.H) - 1)
    eq_b = params.H / (1 / (rho * params.H) - 1)
    for sign in (-1, 1):
        assert np.max(np.abs(coeff_a(rho, 0.5, sign, params, braking_prob=1.0) - eq_a)
                      / eq_a) < 1e-12
        assert np.max(np.abs(coeff_b(rho, sign, params, braking_prob=1.0) - eq_b) / eq_b) < 1e-12
    assert np.allclose(simplified_a(rho, params), eq_a, rtol=1e-12)
    assert np.allclose(simplified_b(rho, params), eq_b, rtol=1e-12)
    assert simplified_a(0.5) == pytest.approx(1.0)
    assert simplified_b(0.5) == pytest.approx(1.0)


def test_coefficients_vanish_at_zero_density():
    for sign in (-1, 1):
        assert coeff_a(0.0, 0.5, sign) == 0.0
        assert coeff_b(0.0, sign) == 0.0


def test_b_ratio_is_braking_probability():
    rho = np.linspace(0.05, 0.95, 19)
    ratio = coeff_b(rho, -1) / coeff_b(rho, 1)
    assert np.allclose(ratio, braking_probability(rho), rtol=1e-13)


def test_velocity_factors_injectable():
    a = coeff_a(0.5, 0.8, -1, f_B=lambda u: 2 * u)
    assert a == pytest.approx(braking_probability(0.5) * 1.0 * 1.6)


def test_source_matches_enskog_with_threshold_weights():
    base = ModelParameters(H_A=1.4, H_B=1.0)
    rng = np.random.default_rng(3)
    for _ in range(50):
        rho = rng.uniform(0.05, 0.95)
        q_a, q_b = headway_weights(rho, base)
        params = ModelParameters(H_A=1.4, H_B=1.0, q_A=q_a, q_B=q_b)
        for g in (-0.7, 0.4):
            sign = np.sign(g)
            e1 = enskog_term("fp-eta1", rho, 0.5, g, params)
            assert rho * coeff_a(rho, 0.5, sign, params) * g == pytest.approx(-e1, rel=1e-12)
            e2 = enskog_term("fp-eta2", rho, 0.5, g, params)
            assert rho * coeff_b(rho, sign, params) * abs(g) * g == pytest.approx(-e2, rel=1e-12)


@settings(max_examples=200)
@given(rho=st.floats(1e-6, 0.99), u=st.floats(0, 1), sign=st.sampled_from([-1, 1]))
def test_coefficients_positive(rho, u, sign):
    params = ModelParameters(H_A=1.3)
    assert coeff_a(rho, u, sign, params) > 0
    assert coeff_b(rho, sign, params) > 0
    assert math.isfinite(coeff_a(rho, u, sign, params))


def test_merged_coefficient():
    assert merged_coefficient(0.5, 0.0) == 0.0
    assert merged_coefficient(0.5, 0.5) == pytest.approx(0.5)
    assert merged_coefficient(0.5, -5.0) == pytest.approx(1.0)
    assert merged_coefficient(0.5, 0.5) == pytest.approx(simplified_b(0.5) * 0.5)


@pytest.mark.parametrize("make", [simplified_profile, kinetic_profile])
def test_profile_derivatives(make):
    profile = make(ModelParameters(H_A=1.3))
    rho = np.linspace(0.05, 0.9, 30)
    h = 1e-6
    for coeff in (profile.a, profile.b):
        for brake in (np.zeros(30, bool), np.ones(30, bool)):
            _, d = coeff(rho, brake)
            fd = (coeff(rho + h, brake)[0] - coeff(rho - h, brake)[0]) / (2 * h)
            assert np.allclose(d, fd, rtol=1e-6)


def test_kinetic_profile_matches_table():
    params = ModelParameters(H_A=1.3)
    profile = kinetic_profile(params)
    rho = np.linspace(0.05, 0.9, 10)
    val, _ = profile.a(rho, rho > 0.5)
    expected = np.where(rho > 0.5, coeff_a(rho, 0.5, -1, params), coeff_a(rho, 0.5, 1, params))
    assert np.allclose(val, expected, rtol=1e-13)
