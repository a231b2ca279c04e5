import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special

from hjgeo.special import (EllipticDomainError, carlson_rd, carlson_rf, carlson_rj, ellip_E, ellip_F, ellip_Pi,
                           mtt_discriminant_roots, mtt_reduced_closed_form, mtt_reduced_derivative)

pos = st.floats(1e-3, 10.0)


@given(pos, pos, pos)
def test_rf_matches_scipy(x, y, z):
    assert carlson_rf(x, y, z) == pytest.approx(special.elliprf(x, y, z), rel=1e-13)


@given(pos, pos, pos)
def test_rd_matches_scipy(x, y, z):
    assert carlson_rd(x, y, z) == pytest.approx(special.elliprd(x, y, z), rel=1e-13)


@given(pos, pos, pos, pos)
def test_rj_matches_scipy(x, y, z, p):
    assert carlson_rj(x, y, z, p) == pytest.approx(special.elliprj(x, y, z, p), rel=1e-13)


def test_zero_argument():
    assert ellip_F(0.0, 0.3) == ellip_E(0.0, 0.3) == ellip_Pi(0.0, 0.2, 0.3) == 0.0


def test_zero_parameter_degenerates_to_arcsin():
    assert ellip_F(0.5, 0.0) == pytest.approx(0.5235987756, abs=1e-10)
    assert ellip_E(0.5, 0.0) == pytest.approx(math.asin(0.5), abs=1e-15)
    assert ellip_F(0.5, 0.0) == pytest.approx(math.asin(0.5), abs=1e-15)


def test_F_against_quadrature():
    z, m = 0.5, 0.3
    val, _ = integrate.quad(lambda t: 1 / math.sqrt((1 - t * t) * (1 - m * t * t)), 0, z, epsabs=1e-14)
    assert ellip_F(z, m) == pytest.approx(val, abs=1e-10)


@pytest.mark.parametrize("z, a, m", [(0.3, 0.2, 0.5), (0.9, -0.7, 0.1), (-0.6, 0.4, 0.95), (0.99, 0.5, 0.0)])
def test_legendre_forms_match_mpmath(z, a, m):
    phi = math.asin(z)
    assert ellip_F(z, m) == pytest.approx(float(mpmath.ellipf(phi, m)), rel=1e-13)
    assert ellip_E(z, m) == pytest.approx(float(mpmath.ellipe(phi, m)), rel=1e-13)
    assert ellip_Pi(z, a, m) == pytest.approx(float(mpmath.ellippi(a, phi, m)), rel=1e-13)


def test_conventions_are_selectable():
    z, k = 0.4, 0.6
    assert ellip_F(z, k, second="modulus") == pytest.approx(ellip_F(z, k * k), rel=1e-15)
    assert ellip_F(math.asin(z), k, first="amplitude") == pytest.approx(ellip_F(z, k), rel=1e-15)


def test_halving_threshold_is_stable():
    for args in [(0.2, 1.3, 2.2), (1e-3, 0.5, 4.0)]:
        assert abs(carlson_rf(*args) - carlson_rf(*args, rtol=0.5e-16)) < 1e-12
        assert abs(carlson_rd(*args) - carlson_rd(*args, rtol=0.5e-16)) < 1e-12
        assert abs(carlson_rj(*args, 0.7) - carlson_rj(*args, 0.7, rtol=0.5e-16)) < 1e-12


def test_domain_errors():
    with pytest.raises(EllipticDomainError):
        ellip_F(1.5, 0.2)
    with pytest.raises(EllipticDomainError):
        ellip_F(0.9, 2.0)
    with pytest.raises(ValueError):
        carlson_rf(-1.0, 1.0, 1.0)


def test_discriminant_roots_reference():
    tp, tm = mtt_discriminant_roots(1.0, -1.0, 0.0)
    assert tp == pytest.approx(1.0, abs=1e-15) and tm == pytest.approx(-4.0, abs=1e-15)


def test_inadmissible_parameters():
    with pytest.raises(EllipticDomainError):
        mtt_discriminant_roots(1.0, 1.0, 10.0)


TRIPLES = [(1.0, -1.0, 0.0, 1.0), (0.5, -0.2, 0.1, 4.0), (-1.0, 0.3, 0.2, 1.0), (1.2, -1.5, 0.4, 0.5)]


@pytest.mark.parametrize("j1, j2, m, k", TRIPLES)
def test_closed_form_derivative_identity(j1, j2, m, k):
    tp, _ = mtt_discriminant_roots(j1, j2, m)
    qmax = math.sqrt(tp) / k
    assert mtt_reduced_closed_form(0.0, j1, j2, m, k) == 0.0
    for q in np.linspace(-qmax, qmax, 52)[1:-1] * 0.98:
        h = 1e-6
        fd = (mtt_reduced_closed_form(q + h, j1, j2, m, k) - mtt_reduced_closed_form(q - h, j1, j2, m, k)) / (2 * h)
        assert abs(fd - mtt_reduced_derivative(q, j1, j2, m, k)) < 1e-6


def test_literal_weight_only_valid_for_positive_j1_q():
    j1, j2, m, k = 1.0, -1.0, 0.0, 1.0
    q = -0.5
    exact, _ = integrate.quad(lambda u: mtt_reduced_derivative(u, j1, j2, m, k), 0, q, epsabs=1e-14)
    assert mtt_reduced_closed_form(q, j1, j2, m, k) == pytest.approx(exact, abs=1e-12)
    assert abs(mtt_reduced_closed_form(q, j1, j2, m, k, literal=True) - exact) > 1e-3
    assert mtt_reduced_closed_form(0.5, j1, j2, m, k, literal=True) == pytest.approx(
        mtt_reduced_closed_form(0.5, j1, j2, m, k), abs=1e-15)


def test_other_conventions_fail_the_derivative_identity():
    j1, j2, m, k = 1.0, -1.0, 0.0, 1.0
    q, h = 0.4, 1e-6
    want = mtt_reduced_derivative(q, j1, j2, m, k)
    for kw in ({"second": "modulus"}, {"first": "amplitude"}):
        fd = (mtt_reduced_closed_form(q + h, j1, j2, m, k, **kw)
              - mtt_reduced_closed_form(q - h, j1, j2, m, k, **kw)) / (2 * h)
        assert abs(fd - want) > 1e-3
