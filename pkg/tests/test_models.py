import numpy as np
import pytest
import yaml

from hjgeo import models
from hjgeo.frame import metric_contravariant, metric_covariant
from hjgeo.models import ModelError
from hjgeo.reduce import EmptyDomainError, assemble_quadratic, solve_branch


def _doc(name="mtt"):
    return yaml.safe_load(models.bundled_path(name).read_text())


def test_bundled_mtt_structure(mtt):
    C = mtt.structure_constants.C
    k = mtt.constants["k"]
    assert C[1, 2, 0] == pytest.approx(k)
    assert C[1, 3, 1] == pytest.approx(-k / 2)
    assert C[2, 3, 2] == pytest.approx(k / 2)
    assert C[2, 1, 0] == pytest.approx(-k)
    assert np.count_nonzero(C) == 6
    assert (mtt.n, mtt.s, mtt.r) == (4, 2, 1)


def test_frame_xi4_is_constant(mtt):
    for x in ([0, 0, 0, 0], [0.3, -0.7, 0.2, 0.9]):
        np.testing.assert_array_equal(mtt.frame_field.matrix(np.array(x, float))[3], [2, -1, 0, 0])


def test_mtt_line_element(mtt):
    k = mtt.constants["k"]
    x = np.array([0.1, 0.4, -0.6, 0.3])
    g = metric_covariant(mtt.frame_field, mtt.metric, x)
    x3, x2 = x[2], x[1]
    ref = np.zeros((4, 4))
    ref[0, 0] = 1
    ref[0, 1] = ref[1, 0] = 1
    ref[0, 3] = ref[3, 0] = -k * x3
    ref[1, 3] = ref[3, 1] = -k * x3
    ref[2, 2] = -np.exp(-k * x2)
    ref[3, 3] = k * k * x3 * x3 - np.exp(k * x2)
    np.testing.assert_allclose(g, ref, atol=1e-13)


def test_flat4_metric_is_identity(flat4):
    x = np.array([0.2, -0.5, 0.9, 0.1])
    np.testing.assert_array_equal(metric_contravariant(flat4.frame_field, flat4.metric, x), np.eye(4))
    assert (flat4.s, flat4.r) == (4, 0)


@pytest.mark.parametrize("k", [0.5, 1.0, 4.0])
def test_mtt_validates_for_several_k(k):
    rep = models.validate_all(models.builtin("mtt", k=k))
    assert rep.passed, rep.format()


def test_flat4_validates(flat4):
    assert models.validate_all(flat4).passed


def test_wrong_zeta_shape_names_field():
    d = _doc()
    d["chart"]["zeta"][1] = ["1", "0"]
    with pytest.raises(ModelError, match=r"chart\.zeta: dimension mismatch"):
        models.from_dict(d)


def test_parse_error_names_field():
    d = _doc()
    d["frame"][2][2] = "exp(k*x2/"
    with pytest.raises(ModelError, match=r"frame\[3\]\[3\]: unexpected end of input"):
        models.from_dict(d)


def test_missing_key_reported():
    d = _doc()
    del d["frame_metric"]
    with pytest.raises(ModelError, match="frame_metric: missing required key"):
        models.from_dict(d)


def test_bad_structure_index():
    d = _doc()
    d["structure"][0] = [2, 5, 1, "k"]
    with pytest.raises(ModelError, match="outside 1..4"):
        models.from_dict(d)


def test_bad_dimension_sum():
    d = _doc()
    d["chart"]["dimension"] = 2
    with pytest.raises(ModelError, match="chart.dimension"):
        models.from_dict(d)


def test_invalid_yaml():
    with pytest.raises(ModelError, match="not valid YAML"):
        models.loads("name: [unclosed")


def test_save_load_round_trip(tmp_path, mtt, rng):
    path = tmp_path / "copy.model"
    models.save(mtt, path)
    back = models.load(path)
    assert back.to_dict() == mtt.to_dict()
    for _ in range(20):
        x = rng.uniform(-1, 1, 4)
        q = rng.uniform(-1, 1, 1)
        j = rng.uniform(0.5, 1.5, 2)
        np.testing.assert_array_equal(back.frame_field.matrix(x), mtt.frame_field.matrix(x))
        np.testing.assert_array_equal(back.chart.zeta(q), mtt.chart.zeta(q))
        np.testing.assert_array_equal(back.chart.chi(q, j), mtt.chart.chi(q, j))
        assert back.chart.phi(x, q) == pytest.approx(mtt.chart.phi(x, q), abs=0)


def test_structure_mutation_is_caught():
    d = _doc()
    d["structure"][0][3] = "0"  # [e2, e3] = 0
    rep = models.validate_all(models.from_dict(d), samples=20)
    assert not rep.passed
    assert not rep["frame: frame brackets"].passed


def test_metric_sign_flip_is_not_a_validation_error():
    # G22 -> +1 is a different but consistent geometry: every structural check
    # passes, yet the metric and the reduced equation change.
    d = _doc()
    d["frame_metric"][1][1] = "1"
    flipped = models.from_dict(d)
    base = models.builtin("mtt")
    assert models.validate_all(flipped, samples=20).passed
    x = np.array([0.1, 0.2, 0.3, 0.4])
    assert not np.allclose(metric_covariant(flipped.frame_field, flipped.metric, x),
                           metric_covariant(base.frame_field, base.metric, x))
    qa = assemble_quadratic(base.chart, base.metric, (1.0, -1.0), 0.0)
    qb = assemble_quadratic(flipped.chart, flipped.metric, (1.0, -1.0), 0.0)
    assert qa.coefficients(0.3) != pytest.approx(qb.coefficients(0.3))
    # downstream: the fixture parameters no longer admit a real reduced solution
    assert solve_branch(qa).derivative(0.0) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(EmptyDomainError):
        solve_branch(qb)


def test_unknown_builtin_and_constant():
    with pytest.raises(ModelError, match="unknown builtin"):
        models.builtin("kerr")
    with pytest.raises(ModelError, match="unknown constant"):
        models.builtin("mtt", a=2.0)


def test_constants_override():
    m = models.builtin("mtt", k=2.5)
    assert m.constants["k"] == 2.5
    assert m.structure_constants.C[1, 2, 0] == pytest.approx(2.5)


def test_strict_load(tmp_path):
    assert models.load(models.bundled_path("mtt"), strict=True).name == "mtt"
    d = _doc()
    d["structure"][0][3] = "0"
    bad = tmp_path / "bad.model"
    bad.write_text(yaml.safe_dump(d))
    models.load(bad)  # schema is fine
    with pytest.raises(ModelError, match="validation failed"):
        models.load(bad, strict=True)


def test_resolve():
    assert models.resolve("flat4").name == "flat4"
    assert models.resolve("models/flat4.model").name == "flat4"
    assert models.resolve(str(models.bundled_path("mtt")), {"k": 2.0}).constants["k"] == 2.0
    with pytest.raises(ModelError, match="no such builtin or file"):
        models.resolve("nope.model")
