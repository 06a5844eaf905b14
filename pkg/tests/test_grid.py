import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sms.errors import ConfigurationError, ContractError, EvaluationError, HypothesisViolation
from sms.grid import MeshConfig, NamedFunction, build_mesh, quadrature, sample_field


def test_three_node_mesh():
    m = build_mesh(MeshConfig(1, 2.0, 3))
    assert m.spacing == 1.0
    np.testing.assert_array_equal(m.coords[:, 0], [-1.0, 0.0, 1.0])
    np.testing.assert_array_equal(m.weights, [1.0, 1.0, 1.0])


def test_2d_product_weights():
    m = build_mesh(MeshConfig(2, 1.0, 3))
    assert m.size == 9
    assert m.spacing == 0.5
    np.testing.assert_allclose(m.weights, 0.25)


def test_metric_weight_enters_quadrature():
    m = build_mesh(MeshConfig(1, 2.0, 3, metric_weight="one_plus_r2"))
    np.testing.assert_array_equal(m.weights, [2.0, 1.0, 2.0])


@pytest.mark.parametrize("kw", [{"nodes_per_axis": 2}, {"half_width": 0.0}, {"dimension": 4}, {"metric_weight": "nope"}])
def test_bad_mesh_config(kw):
    with pytest.raises(ConfigurationError):
        build_mesh(MeshConfig(**{"dimension": 1, "half_width": 2.0, "nodes_per_axis": 3, **kw}))


def test_potential_must_be_positive():
    m = build_mesh(MeshConfig(1, 2.0, 3))
    with pytest.raises(HypothesisViolation):
        sample_field(m, NamedFunction("square"), potential=True)
    V = sample_field(m, NamedFunction("harmonic"), potential=True)
    np.testing.assert_array_equal(V, [2.0, 1.0, 2.0])


def test_weight_samples():
    m = build_mesh(MeshConfig(1, 2.0, 3))
    np.testing.assert_allclose(sample_field(m, NamedFunction("inverse_square")), [0.25, 1.0, 0.25])
    np.testing.assert_allclose(sample_field(m, NamedFunction("th3_weight")), [0.25, 1.0, 0.25])


def test_non_finite_sample_rejected():
    m = build_mesh(MeshConfig(1, 2.0, 3))
    with pytest.raises(EvaluationError):
        sample_field(m, lambda x: 1.0 / x[:, 0] ** 0 * np.where(x[:, 0] == 0, np.inf, 1.0))


def test_unknown_function_name():
    with pytest.raises(ConfigurationError):
        NamedFunction("nope").resolve()


def test_quadrature_examples():
    m = build_mesh(MeshConfig(1, 2.0, 3))
    assert quadrature(m, [1, 1, 1]) == 3.0
    assert quadrature(m, [0, 0, 0]) == 0.0
    half = build_mesh(MeshConfig(1, 1.0, 3))
    assert half.spacing == 0.5
    assert quadrature(half, [1, 2, 3]) == 3.0
    with pytest.raises(ContractError):
        quadrature(m, [1, 2])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=7, max_size=7), st.floats(-5, 5), st.floats(-5, 5))
def test_quadrature_linear_and_monotone(f, a, b):
    m = build_mesh(MeshConfig(1, 3.0, 7))
    f = np.array(f)
    g = np.cos(m.coords[:, 0])
    assert quadrature(m, f) >= 0
    np.testing.assert_allclose(quadrature(m, a * f + b * g), a * quadrature(m, f) + b * quadrature(m, g), rtol=1e-9, atol=1e-6)


def test_quadrature_refinement_order():
    # the box [-2, 2] with Dirichlet nodes; the integrand cos(x) is not zero at ±2,
    # so the midpoint-like sum is compared against the exact integral 2 sin 2
    exact = 2 * np.sin(2.0)
    errs = []
    for n in (31, 63, 127):
        m = build_mesh(MeshConfig(1, 2.0, n))
        errs.append(abs(quadrature(m, np.cos(m.coords[:, 0])) + m.spacing * np.cos(2.0) - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert orders.min() >= 1.9


def test_outer_shell_mask():
    m = build_mesh(MeshConfig(1, 8.0, 255))
    shell = m.outer_shell(0.1)
    assert np.all(np.abs(m.coords[shell, 0]) >= 7.2)
    assert not np.any(np.abs(m.coords[~shell, 0]) >= 7.2)
