"""The per-λ multiplicity search near a multiplicity group (k, h).

For every λ of a window just below λ_k the pipeline runs the geometry
check, the sup of J_λ over E_{k+h}, the ∇-condition estimate on the slab
[η′, η″], a deflated Newton search and the classification of what was
found.  A failure in any stage is recorded on that λ's row and the scan
moves on.
"""

from __future__ import annotations

import logging
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..config import ExperimentConfig
from ..errors import SmsError
from ..functional import EnergyModel
from ..problem import Problem, build_problem, resolve_target
from ..spectrum import EigenDecomposition
from .classify import SolutionSummary, classify_solutions
from .geometry import GeometryReport, sup_over_Ekh, verify_geometry
from .nabla import NablaEstimate, estimate_nabla_condition
from .newton import CriticalPointRecord, deflated_newton
from .seeds import seed_generator
from .split import SubspaceSplit, split_subspaces

log = logging.getLogger(__name__)

EXTRA_SEED_SCALES = (1.0, 3.0, 10.0, 30.0)


@dataclass
class LambdaResult:
    lam: float
    offset: float  # (λ - λ_k) / (λ_{k+h+1} - λ_k)
    applicable: bool
    status: str = "ok"
    geometry: GeometryReport | None = None
    sup_Ekh: float | None = None
    eta: tuple[float, float] | None = None
    nabla: NablaEstimate | None = None
    records: list[CriticalPointRecord] = field(default_factory=list, repr=False)
    summary: SolutionSummary | None = None
    error: dict | None = None
    seconds: float = 0.0

    @property
    def margin(self) -> float:
        return self.geometry.margin if self.geometry is not None else float("nan")

    @property
    def nabla_inf(self) -> float:
        if self.nabla is None or self.nabla.absent:
            return float("nan")
        return self.nabla.value

    @property
    def n_distinct(self) -> int:
        return self.summary.n_distinct if self.summary is not None else 0

    @property
    def max_residual(self) -> float:
        if self.summary is None or not self.summary.solutions:
            return float("nan")
        return max(s.grad_norm for s in self.summary.solutions)

    def certificates(self, tol: float, dist_tol: float) -> dict[str, str]:
        """Pass/fail flags for every certificate this row carries."""

        def flag(ok):
            return "pass" if ok else "fail"

        c = {"window": "ok" if self.applicable else "inapplicable"}
        if self.status == "degenerate":
            c["degenerate"] = "linear"
            c["nontrivial"] = "0"
            return c
        if self.geometry is not None:
            c["geometry"] = flag(self.geometry.passed)
        if self.nabla is not None:
            c["nabla"] = "absent" if self.nabla.absent else flag(self.nabla.value > 0)
        s = self.summary
        if s is not None:
            sols = [x for x in s.solutions if x.nontrivial]
            c["three"] = flag(len(sols) >= 3)
            c["residual"] = flag(all(x.grad_norm <= tol for x in sols))
            c["distinct"] = flag(s.min_pairwise_distance >= dist_tol)
            c["ordering"] = flag(s.ordering_ok)
            c["decay"] = flag(all(x.decays for x in sols))
            c["nonnegative"] = f"{sum(x.nonnegative for x in sols)}/{len(sols)}"
        if self.error is not None:
            c["error"] = self.error.get("stage", "?")
        return c

    def certs_string(self, tol: float, dist_tol: float) -> str:
        return ";".join(f"{k}={v}" for k, v in self.certificates(tol, dist_tol).items())


@dataclass
class ExperimentReport:
    cfg: ExperimentConfig
    problem: Problem = field(repr=False)
    spectrum: EigenDecomposition = field(repr=False)
    group: tuple[int, int]
    split: SubspaceSplit = field(repr=False)
    rows: list[LambdaResult]
    degenerate: bool = False
    note: str = ""

    @property
    def largest_gap_with_three(self) -> float | None:
        """Largest λ_k - λ among rows where three distinct solutions were found."""
        gaps = [self.split.lam_k - r.lam for r in self.rows if r.applicable and r.n_distinct >= 3]
        return max(gaps) if gaps else None

    def nearest(self) -> LambdaResult:
        """The applicable row closest to λ_k."""
        rows = [r for r in self.rows if r.applicable] or self.rows
        return min(rows, key=lambda r: abs(self.split.lam_k - r.lam))


def lambda_window(cfg: ExperimentConfig, split: SubspaceSplit) -> list[tuple[float, float]]:
    """(offset, λ) pairs with λ = λ_k + offset·(λ_{k+h+1} - λ_k), in increasing λ."""
    w = cfg.window
    if w.offsets is not None:
        offsets = sorted(float(o) for o in w.offsets)
    else:
        offsets = [-w.fraction * j / w.count for j in range(w.count, 0, -1)]
    gap = split.lam_next - split.lam_k
    return [(o, split.lam_k + o * gap) for o in offsets]


def experiment_seeds(split: SubspaceSplit, rho: float, R: float, count: int, rng_seed: int) -> list[np.ndarray]:
    """Linking-set seeds plus multiples of ±ê_i and ê_1 ± ê_k."""
    seeds = seed_generator(split, rho, R, count, rng_seed)
    E = split.unit_coordinates()
    e1, ek = E[:, 0], E[:, split.k - 1]
    for s in EXTRA_SEED_SCALES:
        for j in range(E.shape[1]):
            seeds.extend([s * E[:, j], -s * E[:, j]])
        if split.k > 1:
            seeds.extend([s * (e1 + ek), s * (e1 - ek)])
    return seeds


def run_lambda(problem: Problem, split: SubspaceSplit, lam: float, offset: float) -> LambdaResult:
    cfg = problem.cfg
    sv = cfg.solver
    t0 = time.perf_counter()
    applicable = split.lam_prev < lam < split.lam_k
    row = LambdaResult(lam=lam, offset=offset, applicable=applicable, status="ok" if applicable else "inapplicable")
    model = EnergyModel(problem.fp, problem.alpha, problem.nl, lam)
    stage = "geometry"
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            row.geometry = verify_geometry(model, split, budget=sv.geometry_budget, seed=cfg.rng_seed)
        if not applicable:
            # outside the window the search is not backed by the theory
            return row
        stage = "sup_Ekh"
        row.sup_Ekh, _ = sup_over_Ekh(model, split, seed=cfg.rng_seed)
        row.eta = (0.5 * row.geometry.inf_sphere, row.sup_Ekh)
        stage = "nabla"
        lo, hi = min(row.eta), max(row.eta)
        row.nabla = estimate_nabla_condition(model, split, lo, hi, sv.nabla_gamma * row.geometry.rho, sv.nabla_budget, seed=cfg.rng_seed)
        stage = "newton"
        seeds = experiment_seeds(split, row.geometry.rho, row.geometry.R, sv.seed_count, cfg.rng_seed)
        row.records = deflated_newton(
            model, seeds, tol=sv.newton_tol, max_iter=sv.newton_max_iter, mesh=problem.mesh, dist_tol=sv.dist_tol
        )
        stage = "classify"
        row.summary = classify_solutions(row.records, problem.mesh, problem.fp, sv.dist_tol, (lo, hi))
    except SmsError as exc:
        log.warning("lambda=%g: %s failed: %s", lam, stage, exc)
        row.status = "error"
        row.error = {"stage": stage, "type": type(exc).__name__, "message": str(exc)}
        diag = getattr(exc, "diagnostics", None)
        if diag:
            row.error["diagnostics"] = diag
    finally:
        row.seconds = time.perf_counter() - t0
    return row


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SMS_THREADS", "1")))
    except ValueError:
        return 1


def multiplicity_experiment(cfg: ExperimentConfig, problem: Problem | None = None, spectrum: EigenDecomposition | None = None) -> ExperimentReport:
    problem = problem or build_problem(cfg)
    ed = spectrum or problem.spectrum()
    group = resolve_target(cfg, ed)
    split = split_subspaces(ed, problem.fp, group)
    window = lambda_window(cfg, split)

    if not np.any(problem.alpha) or problem.nl.coefficient == 0:
        # linear problem: for λ off the spectrum only w = 0 solves it
        rows = [
            LambdaResult(lam=lam, offset=o, applicable=split.lam_prev < lam < split.lam_k, status="degenerate")
            for o, lam in window
        ]
        for r in rows:
            r.summary = SolutionSummary([], None, np.asarray(problem.fp.mass))
        note = "alpha*f vanishes: linear problem, no nontrivial solutions off the spectrum"
        return ExperimentReport(cfg, problem, ed, group, split, rows, degenerate=True, note=note)

    n = min(_threads(), len(window))
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(lambda item: run_lambda(problem, split, item[1], item[0]), window))
    else:
        rows = [run_lambda(problem, split, lam, o) for o, lam in window]
    note = "" if all(r.applicable for r in rows) else "some lambda values lie outside (lambda_{k-1}, lambda_k)"
    return ExperimentReport(cfg, problem, ed, group, split, rows, note=note)
