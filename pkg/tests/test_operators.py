import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sms.errors import ContractError, HypothesisViolation, SolverError
from sms.grid import MeshConfig, NamedFunction, build_mesh, sample_field
from sms.operators import (
    apply_resolvent,
    assemble,
    inner_h1v,
    inner_l2,
    pcg,
    stiffness,
)


def test_three_node_form(tiny):
    _, fp = tiny
    np.testing.assert_array_equal(fp.A.toarray(), [[3, -1, 0], [-1, 3, -1], [0, -1, 3]])
    np.testing.assert_array_equal(fp.M.toarray(), np.eye(3))


def test_three_node_energy_split(tiny):
    mesh, fp = tiny
    u = np.ones(3)
    assert inner_h1v(fp, u, u) == 5.0
    K = stiffness(mesh)
    assert u @ (K @ u) == 2.0


def test_potential_scaling_leaves_stiffness(tiny):
    mesh, fp = tiny
    fp3 = assemble(mesh, 3.0 * np.ones(3))
    np.testing.assert_array_equal((fp3.A - fp.A).toarray(), 2.0 * np.eye(3))


def test_assemble_rejects_nonpositive_potential(tiny):
    mesh, _ = tiny
    with pytest.raises(HypothesisViolation):
        assemble(mesh, np.array([1.0, 0.0, 1.0]))


def test_l2_examples(tiny):
    _, fp = tiny
    assert inner_l2(fp, [1, 0, 0], [0, 1, 0]) == 0.0
    assert inner_l2(fp, np.ones(3), np.ones(3)) == 3.0
    with pytest.raises(ContractError):
        inner_l2(fp, [1, 0], [1, 0, 0])


def test_resolvent_three_node(tiny):
    _, fp = tiny
    w = apply_resolvent(fp, [1.0, 0.0, 0.0])
    # dense inverse of tridiag(-1, 3, -1) as the oracle
    np.testing.assert_allclose(w, np.linalg.inv(fp.A.toarray())[:, 0], rtol=1e-10)
    np.testing.assert_allclose(w, np.array([8, 3, 1]) / 21, rtol=1e-10)
    np.testing.assert_array_equal(apply_resolvent(fp, np.zeros(3)), 0.0)


def test_resolvent_of_eigenvector(small_problem):
    pb, ed = small_problem
    e1 = ed.vectors[:, 0]
    w = apply_resolvent(pb.fp, e1)
    np.testing.assert_allclose(w, e1 / ed.eigenvalues[0], rtol=0, atol=1e-8 * np.abs(e1).max())


def test_resolvent_block_matches_columns(small_problem, rng):
    fp = small_problem[0].fp
    H = rng.standard_normal((fp.size, 3))
    W = apply_resolvent(fp, H)
    for j in range(3):
        np.testing.assert_allclose(W[:, j], apply_resolvent(fp, H[:, j]), rtol=1e-8, atol=1e-12)


def test_resolvent_identity_and_linearity(small_problem, rng):
    fp = small_problem[0].fp
    for _ in range(50):
        h, phi = rng.standard_normal(fp.size), rng.standard_normal(fp.size)
        w = apply_resolvent(fp, h)
        defect = abs(inner_h1v(fp, w, phi) - inner_l2(fp, h, phi))
        assert defect <= 10 * fp.tol_cg * np.linalg.norm(phi) * np.linalg.norm(fp.mass * h)
    h1, h2 = rng.standard_normal((2, fp.size))
    lhs = apply_resolvent(fp, 2.0 * h1 - 0.5 * h2)
    rhs = 2.0 * apply_resolvent(fp, h1) - 0.5 * apply_resolvent(fp, h2)
    assert np.linalg.norm(lhs - rhs) <= 1e-8 * np.linalg.norm(rhs)


def test_cg_failure_reports_residual(small_problem, rng):
    fp = small_problem[0].fp.with_solver(max_iter=2)
    with pytest.raises(SolverError) as err:
        apply_resolvent(fp, rng.standard_normal(fp.size))
    assert err.value.residual is not None and err.value.residual > fp.tol_cg


def test_pcg_matches_direct(rng):
    A = sp.random(30, 30, density=0.2, random_state=3)
    A = (A @ A.T + 30 * sp.identity(30)).tocsr()
    b = rng.standard_normal(30)
    x, _, rel = pcg(A, b, 1.0 / A.diagonal(), 1e-12, 500)
    np.testing.assert_allclose(x, np.linalg.solve(A.toarray(), b), rtol=1e-9)
    assert rel <= 1e-12


def test_2d_stiffness_is_five_point():
    m = build_mesh(MeshConfig(2, 2.0, 3))
    K = stiffness(m).toarray()
    centre = 4
    assert K[centre, centre] == 4.0
    assert sorted(K[centre][K[centre] != 0]) == [-1, -1, -1, -1, 4]


vectors = arrays(np.float64, 31, elements=st.floats(-1e3, 1e3, allow_nan=False))


@pytest.fixture(scope="module")
def fp31():
    m = build_mesh(MeshConfig(1, 4.0, 31))
    return assemble(m, sample_field(m, NamedFunction("harmonic"), potential=True))


@settings(max_examples=60, deadline=None)
@given(vectors, vectors)
def test_inner_products_exactly_symmetric(fp31, u, v):
    assert inner_h1v(fp31, u, v) == inner_h1v(fp31, v, u)
    assert inner_l2(fp31, u, v) == inner_l2(fp31, v, u)


@settings(max_examples=60, deadline=None)
@given(vectors)
def test_coercivity(fp31, u):
    vmin = fp31.potential.min()
    assert inner_h1v(fp31, u, u) >= vmin * inner_l2(fp31, u, u) * (1 - 1e-12)


def test_metric_weight_stiffness_is_symmetric_positive():
    m = build_mesh(MeshConfig(2, 3.0, 9, metric_weight="one_plus_r2"))
    fp = assemble(m, sample_field(m, NamedFunction("harmonic"), potential=True))
    A = fp.A.toarray()
    np.testing.assert_array_equal(A, A.T)
    assert np.linalg.eigvalsh(A).min() > 0
