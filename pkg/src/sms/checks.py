"""Property suites behind ``sms verify-all``.

Each suite returns a :class:`Report`; all randomness comes from generators
seeded by the caller so repeated runs give identical numbers.
"""

from __future__ import annotations

import warnings

import numpy as np

from .critical.geometry import verify_geometry
from .critical.split import SubspaceSplit, split_subspaces
from .functional import EnergyModel, directional_derivative, energy, gradient, residual
from .nonlinearity import check_hypotheses, growth_constants
from .operators import FormPair, apply_resolvent, inner_h1v, inner_l2, solve_form
from .problem import Problem, resolve_target
from .report import Report
from .spectrum import (
    EigenDecomposition,
    compute_eigenpairs,
    poincare_margin,
    rayleigh_minimum_on_complement,
    verify_spectral_axioms,
)


def smooth_random(fp: FormPair, rng, count: int | None = None) -> np.ndarray:
    """Random fields smoothed by one resolvent solve, unit in L²."""
    shape = (fp.size,) if count is None else (fp.size, count)
    raw = rng.standard_normal(shape)
    w = solve_form(fp, (fp.mass * raw.T).T)
    norms = np.sqrt(np.sum((fp.mass * (w * w).T).T, axis=0))
    return w / norms


def deflated_recompute(ed: EigenDecomposition, fp: FormPair, upto: int = 3, tol: float = 1e-8) -> Report:
    rep = Report("deflated recompute")
    for k in range(1, min(upto, ed.count - 1) + 1):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            val, _ = rayleigh_minimum_on_complement(fp, ed.basis(k), tol=1e-10)
        ref = ed.eigenvalues[k]
        rep.at_most(f"lambda_{k + 1}_recompute", abs(val - ref) / abs(ref), tol, "relative")
    return rep


def poincare_suite(ed: EigenDecomposition, fp: FormPair, rng, samples: int = 100, tol: float = 1e-9) -> Report:
    """Both generalised Poincaré margins on random fields of unit L² norm."""
    rep = Report("poincare")
    E = ed.vectors
    for k in range(1, ed.count):
        # upper: w ∈ E_k
        C = rng.standard_normal((k, samples))
        W = E[:, :k] @ C
        W /= np.sqrt(np.sum(fp.mass[:, None] * W * W, axis=0))
        upper = min(poincare_margin(ed, fp, W[:, j], k, "upper") for j in range(samples))
        rep.at_least(f"upper_E{k}", upper, -tol)
        # lower: w ⟂ E_k
        W = smooth_random(fp, rng, samples)
        W -= E[:, :k] @ (E[:, :k].T @ (fp.mass[:, None] * W))
        W /= np.sqrt(np.sum(fp.mass[:, None] * W * W, axis=0))
        lower = min(poincare_margin(ed, fp, W[:, j], k, "lower") for j in range(samples))
        rep.at_least(f"lower_perp_E{k}", lower, -tol)
    return rep


def resolvent_suite(fp: FormPair, rng, pairs: int = 50) -> Report:
    """⟨R h, φ⟩ = ⟨h, φ⟩_{L²}, scaled by ‖φ‖·‖M h‖ (the CG residual bound)."""
    rep = Report("resolvent identity")
    H = rng.standard_normal((fp.size, pairs))
    Phi = rng.standard_normal((fp.size, pairs))
    W = apply_resolvent(fp, H)
    worst = 0.0
    for j in range(pairs):
        lhs = inner_h1v(fp, W[:, j], Phi[:, j])
        rhs = inner_l2(fp, H[:, j], Phi[:, j])
        scale = np.linalg.norm(Phi[:, j]) * np.linalg.norm(fp.mass * H[:, j])
        worst = max(worst, abs(lhs - rhs) / scale)
    rep.at_most("eq_defect", worst, 10 * fp.tol_cg, "relative")
    a, b = 0.7, -1.3
    lin = apply_resolvent(fp, a * H[:, 0] + b * H[:, 1]) - (a * W[:, 0] + b * W[:, 1])
    rep.at_most("linearity", float(np.linalg.norm(lin) / np.linalg.norm(W[:, :2])), 100 * fp.tol_cg, "relative")
    return rep


def fd_order(model: EnergyModel, w, v, steps=(1e-3, 1e-4, 1e-5)) -> float:
    """Least-squares slope of log|central difference error| against log t."""
    d = directional_derivative(model, w, v)
    errs = [abs(d - (energy(model, w + t * v) - energy(model, w - t * v)) / (2 * t)) for t in steps]
    errs = np.maximum(errs, np.finfo(float).tiny)
    return float(np.polyfit(np.log(steps), np.log(errs), 1)[0])


def gradient_suite(model: EnergyModel, rng, pairs: int = 50, fd_pairs: int = 5) -> Report:
    rep = Report("gradient calculus")
    fp = model.fp
    W = 0.5 * smooth_random(fp, rng, pairs)
    Vd = smooth_random(fp, rng, pairs)
    G = gradient(model, W)
    worst = 0.0
    for j in range(pairs):
        lhs = inner_h1v(fp, G[:, j], Vd[:, j])
        rhs = directional_derivative(model, W[:, j], Vd[:, j])
        nw = np.sqrt(inner_h1v(fp, W[:, j], W[:, j]))
        nv = np.sqrt(inner_h1v(fp, Vd[:, j], Vd[:, j]))
        worst = max(worst, abs(lhs - rhs) / ((1 + nw) * (1 + nv)))
    rep.at_most("duality_defect", worst, 1e-8, "scaled by (1+|w|)(1+|v|)")
    # nonnegative directions keep the third derivative Σ αm f''(w) v³ from
    # cancelling, so the O(t²) term stays above rounding at t = 1e-5
    orders = [fd_order(model, W[:, j], 10.0 * np.abs(Vd[:, j])) for j in range(fd_pairs)]
    rep.at_least("fd_order_min", min(orders), 1.8, "t = 1e-3, 1e-4, 1e-5")
    rep.add("residual_at_zero", residual(model, np.zeros(fp.size)), 0.0, residual(model, np.zeros(fp.size)) == 0.0)
    return rep


def hypothesis_suite(nl, eps: float = 0.1) -> Report:
    rep = check_hypotheses(nl)
    gc = growth_constants(nl, eps)
    for c in gc.report.checks:
        rep.checks.append(c)
    rep.title = "hypotheses (f1)-(f4) and growth constants"
    return rep


def projector_suite(split: SubspaceSplit, rng, samples: int = 100, tol: float = 1e-10) -> Report:
    rep = Report("projector algebra")
    fp = split.fp
    W = smooth_random(fp, rng, samples)
    norms = np.sqrt(np.sum(W * (fp.A @ W), axis=0))
    P = {"1": split.P1, "2": split.P2, "3": split.P3}

    def h1(X):
        return np.sqrt(np.maximum(np.sum(X * (fp.A @ X), axis=0), 0.0)) / norms

    cross = idem = 0.0
    for i, Pi in P.items():
        PiW = Pi(W)
        idem = max(idem, float(h1(Pi(PiW) - PiW).max()))
        for j, Pj in P.items():
            if i != j:
                cross = max(cross, float(h1(Pi(Pj(W))).max()))
    rep.at_most("cross_products", cross, tol, "relative H1_V")
    rep.at_most("idempotence", idem, tol, "relative H1_V")
    total = split.P1(W) + split.P2(W) + split.P3(W) - W
    rep.at_most("partition_of_unity", float(h1(total).max()), tol, "relative H1_V")
    return rep


def quadratic_geometry_suite(problem: Problem, split: SubspaceSplit, rho: float = 1.0, R: float = 10.0, tol: float = 1e-6) -> Report:
    """With α ≡ 0 the geometry has closed forms in eigen-coordinates."""
    rep = Report("quadratic geometry oracle")
    lam_k = split.lam_k
    lam = 0.5 * (split.lam_prev + lam_k) if split.k > 1 else 0.5 * lam_k
    model = EnergyModel(problem.fp, np.zeros(problem.fp.size), problem.nl, lam)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g = verify_geometry(model, split, rho, R, budget=4)
    c = 0.5 * (1.0 - lam / lam_k)
    inf_ref, sph_ref = c * rho**2, c * R**2
    rep.at_most("inf_sphere", abs(g.inf_sphere - inf_ref) / inf_ref, tol, f"closed form {inf_ref:.6g}")
    rep.at_most("sup_ball", abs(g.sup_ball) / sph_ref, tol, "closed form 0")
    rep.at_most("sup_sphere", abs(g.sup_sphere - sph_ref) / sph_ref, tol, f"closed form {sph_ref:.6g}")
    return rep


def scaling_suite(ed: EigenDecomposition, fp: FormPair, split: SubspaceSplit, rng, c: float = 3.7, tol: float = 1e-8) -> Report:
    rep = Report("scaling equivariance")
    fpc = fp.scaled(c)
    edc = compute_eigenpairs(fpc, ed.count)
    rep.at_most("eigenvalues", float(np.max(np.abs(edc.eigenvalues - ed.eigenvalues) / ed.eigenvalues)), tol, "relative")
    sc = split_subspaces(edc, fpc, (split.k, split.h))
    W = smooth_random(fp, rng, 10)
    dev = 0.0
    for name in ("P1", "P2", "P3"):
        a, b = getattr(split, name)(W), getattr(sc, name)(W)
        dev = max(dev, float(np.linalg.norm(a - b) / np.linalg.norm(W)))
    rep.at_most("projectors", dev, tol, "relative")
    return rep


def run_all(problem: Problem, ed: EigenDecomposition | None = None, seed: int | None = None) -> list[Report]:
    cfg = problem.cfg
    rng = np.random.default_rng(cfg.rng_seed if seed is None else seed)
    ed = ed or problem.spectrum()
    fp = problem.fp
    group = resolve_target(cfg, ed)
    split = split_subspaces(ed, fp, group)
    lam = split.lam_k - 0.02 * (split.lam_next - split.lam_k)
    model = EnergyModel(fp, problem.alpha, problem.nl, lam)
    return [
        verify_spectral_axioms(ed, fp),
        deflated_recompute(ed, fp),
        poincare_suite(ed, fp, rng),
        resolvent_suite(fp, rng),
        gradient_suite(model, rng),
        hypothesis_suite(problem.nl),
        projector_suite(split, rng),
        quadratic_geometry_suite(problem, split),
        scaling_suite(ed, fp, split, rng),
    ]
