import warnings

import numpy as np
import pytest
from scipy.optimize import newton_krylov

from sms.checks import projector_suite, smooth_random
from sms.config import parse_config, shipped_config
from sms.critical import (
    classify_solutions,
    deflated_newton,
    estimate_nabla_condition,
    multiplicity_experiment,
    normalised_distance,
    seed_generator,
    split_subspaces,
    sup_over_Ekh,
    verify_geometry,
)
from sms.critical.geometry import EigenCoordinates, sphere_minimum
from sms.critical.newton import make_record
from sms.errors import ContractError, SolverError
from sms.functional import EnergyModel, nodal_residual, residual
from sms.operators import norm_h1v


@pytest.fixture(scope="module")
def ctx(small_problem):
    pb, ed = small_problem
    split = split_subspaces(ed, pb.fp, (2, 0))
    return pb, ed, split


def _model(pb, lam, linear=False):
    alpha = np.zeros(pb.fp.size) if linear else pb.alpha
    return EnergyModel(pb.fp, alpha, pb.nl, lam)


# --- split -------------------------------------------------------------------


def test_split_bases(ctx):
    pb, ed, split = ctx
    e1, e2 = ed.vectors[:, 0], ed.vectors[:, 1]
    np.testing.assert_allclose(split.basis1[:, 0], e1)
    np.testing.assert_allclose(split.basis2[:, 0], e2)
    np.testing.assert_allclose(split.P2(e2), e2, atol=1e-10)
    assert np.abs(split.P1(e2)).max() < 1e-10
    assert np.abs(split.P3(e2)).max() < 1e-10


def test_projector_algebra(ctx, rng):
    rep = projector_suite(ctx[2], rng)
    assert rep.passed, rep.render()


def test_projectors_self_adjoint(ctx, rng):
    pb, _, split = ctx
    u, v = smooth_random(pb.fp, rng, 2).T
    for P in (split.P1, split.P2, split.P3):
        assert u @ (pb.fp.A @ P(v)) == pytest.approx(P(u) @ (pb.fp.A @ v), rel=1e-9, abs=1e-12)


def test_split_needs_enough_pairs(ctx):
    pb, ed, _ = ctx
    with pytest.raises(ContractError):
        split_subspaces(ed, pb.fp, (ed.count, 0))


def test_scaling_leaves_projectors(ctx, rng):
    from sms.spectrum import compute_eigenpairs

    pb, ed, split = ctx
    fpc = pb.fp.scaled(2.5)
    edc = compute_eigenpairs(fpc, ed.count)
    np.testing.assert_allclose(edc.eigenvalues, ed.eigenvalues, rtol=1e-10)
    sc = split_subspaces(edc, fpc, (2, 0))
    W = smooth_random(pb.fp, rng, 5)
    for name in ("P1", "P2", "P3"):
        np.testing.assert_allclose(getattr(sc, name)(W), getattr(split, name)(W), atol=1e-8 * np.abs(W).max())


# --- seeds -------------------------------------------------------------------


def test_seed_examples(ctx):
    pb, _, split = ctx
    s = seed_generator(split, 0.5, 5.0, 2)
    e2 = split.unit_coordinates()[:, 1]
    np.testing.assert_allclose(s[0], 0.5 * e2)
    np.testing.assert_allclose(s[1], -0.5 * e2)
    seeds = seed_generator(split, 0.5, 5.0, 12)
    norms = sorted({round(norm_h1v(pb.fp, w), 10) for w in seeds})
    assert norms == [0.5, 5.0]
    again = seed_generator(split, 0.5, 5.0, 12)
    assert all(a.tobytes() == b.tobytes() for a, b in zip(seeds, again))
    with pytest.raises(ContractError):
        seed_generator(split, 5.0, 0.5, 4)


# --- Newton ------------------------------------------------------------------


def test_linear_problem_only_has_zero(ctx):
    pb, ed, _ = ctx
    model = _model(pb, 0.5 * (ed.eigenvalues[0] + ed.eigenvalues[1]), linear=True)
    seed = ed.vectors[:, 0] + ed.vectors[:, 3]
    rec = deflated_newton(model, [seed], deflate_zero=False)[0]
    assert rec.status == "trivial" and np.abs(rec.w).max() < 1e-10
    recs = deflated_newton(model, [seed, -seed])
    assert not any(r.converged for r in recs)


def test_positive_solution_below_lambda1(ctx):
    pb, ed, _ = ctx
    model = _model(pb, 0.5 * ed.eigenvalues[0])
    e1 = ed.vectors[:, 0]
    rec = deflated_newton(model, [3 * e1], mesh=pb.mesh, deflate_zero=False)[0]
    assert rec.converged and rec.grad_norm <= 1e-8
    assert rec.min_value >= -1e-6 * rec.max_abs
    # an independent inexact Newton-Krylov solve from the same seed lands on the same field
    oracle = newton_krylov(lambda w: nodal_residual(model, w) / pb.fp.mass, 3 * e1, f_tol=1e-10)
    assert normalised_distance(pb.fp, rec.w, oracle) < 1e-8
    neg = deflated_newton(model, [-e1], deflate_zero=False)[0]
    assert neg.status == "trivial"


def test_three_solutions_from_eigen_seeds(ctx):
    pb, ed, split = ctx
    lam = split.lam_k - 0.05 * (split.lam_next - split.lam_k)
    model = _model(pb, lam)
    e1, e2 = ed.vectors[:, 0], ed.vectors[:, 1]
    seeds = [e1, -e1, e2, -e2, e1 + e2, e1 - e2, 0.5 * split.unit_coordinates()[:, 1]]
    recs = deflated_newton(model, seeds, mesh=pb.mesh)
    summary = classify_solutions(recs, pb.mesh, pb.fp)
    assert summary.n_distinct >= 3
    for r in recs:
        if r.converged:
            assert residual(model, r.w) <= 1e-8
    # deflation soundness: rerunning with the found solutions as known gives nothing new nearby
    known = [s.w for s in summary.solutions]
    again = deflated_newton(model, seeds, known=known, mesh=pb.mesh)
    for r in again:
        if r.converged:
            assert all(normalised_distance(pb.fp, r.w, k) > 1e-3 for k in known)


def test_newton_contracts(ctx):
    pb, ed, _ = ctx
    model = _model(pb, 1.0)
    with pytest.raises(ContractError):
        deflated_newton(model, [np.zeros(pb.fp.size)])
    with pytest.raises(ContractError):
        deflated_newton(model, [ed.vectors[:, 0]], tol=0.0)


# --- classification ----------------------------------------------------------


def test_classify_duplicates_and_mirrors(ctx):
    pb, ed, _ = ctx
    model = _model(pb, 1.0)
    w = ed.vectors[:, 1]
    recs = [make_record(model, w, pb.mesh, converged=True, seed_index=i) for i in range(2)]
    assert classify_solutions(recs, pb.mesh, pb.fp).n_distinct == 1
    recs = [make_record(model, w, pb.mesh, converged=True), make_record(model, -w, pb.mesh, converged=True, seed_index=1)]
    s = classify_solutions(recs, pb.mesh, pb.fp, eta=(-1.0, 1.0))
    assert s.n_distinct == 2
    assert s.min_pairwise_distance > 1e-3
    e1 = make_record(model, ed.vectors[:, 0], pb.mesh, converged=True)
    s1 = classify_solutions([e1], pb.mesh, pb.fp)
    assert s1.solutions[0].nonnegative and s1.solutions[0].decays and s1.solutions[0].level == "unclassified"


# --- geometry, sup, ∇ ----------------------------------------------------------


def test_quadratic_geometry_closed_form(ctx):
    pb, _, split = ctx
    lam = 0.5 * (split.lam_prev + split.lam_k)
    model = _model(pb, lam, linear=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g = verify_geometry(model, split, 1.0, 10.0, budget=4)
    c = 0.5 * (1 - lam / split.lam_k)
    assert g.inf_sphere == pytest.approx(c, rel=1e-6)
    assert abs(g.sup_ball) <= 1e-12
    assert g.sup_sphere == pytest.approx(100 * c, rel=1e-6)
    # the big sphere in X1 ⊕ X2 carries the positive e_k direction, so the margin is negative
    assert g.margin < 0


def test_geometry_at_lambda_prev(ctx):
    pb, _, split = ctx
    model = _model(pb, split.lam_prev)
    with pytest.warns(UserWarning):
        g = verify_geometry(model, split, 0.3, 3.0, budget=4)
    assert g.status == "advisory"
    # J vanishes on the nonpositive half of X1 and is negative on the rest
    assert g.sup_ball == 0.0
    assert g.margin == pytest.approx(g.inf_sphere - max(g.sup_ball, g.sup_sphere))
    # the truncated f leaves J quadratic on nonpositive fields of X1 ⊕ X2, so the
    # sphere side stays positive at λ = λ_1 and the margin is not the inf side alone
    assert g.sup_sphere > 0


def test_geometry_contract(ctx):
    pb, _, split = ctx
    with pytest.raises(ContractError):
        verify_geometry(_model(pb, 3.9), split, 2.0, 1.0)


def test_sphere_minimum_stays_on_sphere(ctx, rng):
    pb, _, split = ctx
    model = _model(pb, 3.9)
    vals, W = sphere_minimum(model, split, 0.7, smooth_random(pb.fp, rng, 3), max_iter=20)
    for j in range(3):
        assert norm_h1v(pb.fp, W[:, j]) == pytest.approx(0.7, rel=1e-10)
        assert np.abs(split.P1(W[:, j])).max() < 1e-10


def test_eigen_coordinates_consistent(ctx, rng):
    from sms.functional import energy

    pb, _, split = ctx
    model = _model(pb, 3.9)
    ec = EigenCoordinates(model, split, 2)
    u = 3 * rng.standard_normal(2)
    assert ec.value(u) == pytest.approx(energy(model, ec.field(u)), rel=1e-10)
    g = ec.grad(u)
    t = 1e-6
    fd = np.array([(ec.value(u + t * e) - ec.value(u - t * e)) / (2 * t) for e in np.eye(2)])
    np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-8)


def test_sup_quadratic_cases(ctx):
    pb, ed, split = ctx
    val, w = sup_over_Ekh(_model(pb, ed.eigenvalues[2], linear=True), split)
    assert val == 0.0 and not w.any()
    with pytest.raises(SolverError):
        sup_over_Ekh(_model(pb, 0.5 * (split.lam_prev + split.lam_k), linear=True), split)


def test_sup_decreases_towards_lambda_k(ctx):
    pb, _, split = ctx
    gap = split.lam_next - split.lam_k
    vals = [sup_over_Ekh(_model(pb, split.lam_k - f * gap), split)[0] for f in (0.1, 0.05, 0.02)]
    assert vals[0] > vals[1] > vals[2] > 0


def test_nabla_empty_slab(ctx):
    pb, _, split = ctx
    est = estimate_nabla_condition(_model(pb, 3.9), split, 1e6, 2e6, 0.1, budget=5)
    assert est.absent and est.value is None and est.probe_max < 1e6


def test_nabla_quadratic_positive(ctx):
    pb, _, split = ctx
    lam = 0.5 * (split.lam_prev + split.lam_k)
    est = estimate_nabla_condition(_model(pb, lam, linear=True), split, 0.01, 0.05, 0.1, budget=20, max_iter=10)
    assert not est.absent and est.value > 0


def test_nabla_contracts(ctx):
    pb, _, split = ctx
    with pytest.raises(ContractError):
        estimate_nabla_condition(_model(pb, 3.9), split, 1.0, 0.5, 0.1)
    with pytest.raises(ContractError):
        estimate_nabla_condition(_model(pb, 3.9), split, 0.1, 0.5, 0.0)


# --- experiment ----------------------------------------------------------------


def _coarse_cfg(**overrides):
    cfg = parse_config(shipped_config())
    base = {
        "mesh": {"dimension": 1, "half_width": 8.0, "nodes_per_axis": 127},
        "solver": {**cfg.to_dict()["solver"], "nabla_budget": 10, "geometry_budget": 4},
    }
    base.update(overrides)
    return cfg.with_overrides(**base)


def test_degenerate_experiment():
    cfg = _coarse_cfg(alpha={"name": "zero", "params": {}})
    rep = multiplicity_experiment(cfg)
    assert rep.degenerate and "linear" in rep.note
    assert all(r.n_distinct == 0 and r.status == "degenerate" for r in rep.rows)
    assert rep.largest_gap_with_three is None


def test_window_above_lambda_k_is_inapplicable():
    cfg = _coarse_cfg(window={"fraction": 0.1, "count": 5, "offsets": [0.05]})
    rep = multiplicity_experiment(cfg)
    (row,) = rep.rows
    assert row.lam > rep.split.lam_k
    assert not row.applicable and row.status == "inapplicable"
    assert row.margin < 0
    assert row.certificates(1e-8, 1e-3)["window"] == "inapplicable"
