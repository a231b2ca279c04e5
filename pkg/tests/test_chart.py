import math

import numpy as np
import pytest

from hjgeo import models
from hjgeo.chart import (CanonicalChart, ChartError, chi_residual, equivariance_residual, f_eval, phi_eval,
                         poisson_residual, verify_chart)
from hjgeo.liealg import StructureConstants


def test_f_eval_examples(mtt):
    ch = mtt.chart
    np.testing.assert_array_equal(f_eval(ch, [0.0], [1.0], [1.0, -1.0]), [1, 1, 0, -1])
    np.testing.assert_array_equal(f_eval(ch, [0.0], [0.0], [0.3, 0.7]), [0.3, 0, 0, 0.7])
    np.testing.assert_array_equal(f_eval(ch, [2.0], [3.0], [1.0, 0.0]), [1, 3, 2, -3])


def test_phi_examples(mtt, rng):
    ch = mtt.chart
    assert phi_eval(ch, [0, 2, 0, 0], [1.0])[0] == pytest.approx(math.e, abs=1e-15)
    for q in rng.uniform(-1, 1, 10):
        assert phi_eval(ch, np.zeros(4), [q])[0] == q
    # xi_2 phi = zeta_2(phi) = 1
    for x, q in zip(rng.uniform(-1, 1, (20, 4)), rng.uniform(-1, 1, 20)):
        d = mtt.frame_field.matrix(x)[1] @ ch.phi_dx(x, [q])[0]
        assert d == pytest.approx(1.0, abs=1e-14)


def test_poisson_bracket_f2_f3(mtt, rng):
    ch = mtt.chart
    k = mtt.constants["k"]
    for q, p, j1, j2 in rng.uniform(-1, 1, (10, 4)):
        dq, dp = ch.f_jacobian([q], [p], [j1, j2])
        pb = dp @ dq.T - dq @ dp.T
        assert pb[1, 2] == pytest.approx(k * j1, abs=1e-14)


@pytest.mark.parametrize("k", [0.5, 1.0, 4.0])
def test_mtt_chart_verifies(k):
    spec = models.builtin("mtt", k=k)
    rep = verify_chart(spec.chart, spec.structure_constants, spec.orbit, spec.frame_field, 100, 0,
                       spec.q_box, spec.j_box, spec.x_box, spec.x0)
    assert rep.passed, rep.format()
    for c in rep.checks:
        assert c.residual < 1e-9, c.line()


def test_point_orbit_chart(flat4):
    rep = verify_chart(flat4.chart, flat4.structure_constants, flat4.orbit, flat4.frame_field)
    assert rep.passed, rep.format()


def _mutated_chart(spec, chi):
    return CanonicalChart(np.array(spec.zeta, dtype=object), chi, list(spec.phi), 4, 1, 2, spec.constants)


def test_chi3_sign_flip_breaks_compatibility(mtt):
    ch = _mutated_chart(mtt, ["j1", "0", "-k*j1*q1", "j2"])
    rep = verify_chart(ch, mtt.structure_constants, mtt.orbit, mtt.frame_field)
    assert not rep["chi compatibility"].passed
    assert rep["chi compatibility"].residual > 0.1
    assert chi_residual(ch, mtt.structure_constants, [0.5], [1.0, -1.0]) > 0.1


def test_wrong_structure_breaks_poisson_brackets(mtt):
    wrong = StructureConstants.from_brackets(4, [(2, 3, 1, 2.0), (2, 4, 2, -0.5), (3, 4, 3, 0.5)])
    assert poisson_residual(mtt.chart, wrong, [0.2], [0.3], [1.0, -1.0]) > 0.1


def test_wrong_phi_breaks_equivariance(mtt):
    ch = CanonicalChart(np.array(mtt.zeta, dtype=object), list(mtt.chi), ["exp(k*x2)*(q1 - x4)"], 4, 1, 2,
                        mtt.constants)
    assert equivariance_residual(ch, mtt.frame_field, np.array([0.1, 0.5, 0, 0.2]), [0.3]) > 0.1


def test_irregular_orbit_parameters_flagged(mtt):
    # j1 = 0 gives a degenerate orbit (corank 4)
    rep = verify_chart(mtt.chart, mtt.structure_constants, mtt.orbit, samples=5, j_box=[[0, 0], [-1, 1]])
    assert not rep["orbit regular (corank = s)"].passed


def test_chart_shape_errors(mtt):
    with pytest.raises(ChartError):
        CanonicalChart([["0", "1"]] * 4, list(mtt.chi), list(mtt.phi), 4, 1, 2, mtt.constants)
    with pytest.raises(ChartError):
        CanonicalChart(np.array(mtt.zeta, dtype=object), ["j1", "0", "j2"], list(mtt.phi), 4, 1, 2, mtt.constants)
    with pytest.raises(ChartError):
        mtt.chart.f_eval([0.0, 1.0], [0.0], [1.0, 1.0])
