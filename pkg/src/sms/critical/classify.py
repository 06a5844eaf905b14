from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..grid import Mesh
from ..operators import FormPair, norm_l2
from .newton import DIST_TOL, CriticalPointRecord, normalised_distance


@dataclass
class DistinctSolution:
    solution_id: int
    w: np.ndarray = field(repr=False)
    energy: float
    grad_norm: float
    l2_norm: float
    min_value: float
    max_abs: float
    shell_max: float
    nontrivial: bool
    nonnegative: bool
    decays: bool
    level: str
    members: list[int] = field(default_factory=list)

    @property
    def min_ratio(self) -> float:
        return self.min_value / self.max_abs if self.max_abs else 0.0

    @property
    def decay_ratio(self) -> float:
        return self.shell_max / self.max_abs if self.max_abs else 0.0


@dataclass
class SolutionSummary:
    solutions: list[DistinctSolution]
    eta: tuple[float, float] | None
    mass: np.ndarray = field(default=None, repr=False)

    @property
    def n_distinct(self) -> int:
        return sum(1 for s in self.solutions if s.nontrivial)

    def by_level(self, level: str) -> list[DistinctSolution]:
        return [s for s in self.solutions if s.nontrivial and s.level == level]

    @property
    def ordering_ok(self) -> bool:
        """Two solutions in the (∇)-slab and at least one above it."""
        return len(self.by_level("slab")) >= 2 and len(self.by_level("above")) >= 1

    @property
    def min_pairwise_distance(self) -> float:
        sols = [s for s in self.solutions if s.nontrivial]
        if len(sols) < 2:
            return np.inf
        return min(self._dist(a, b) for i, a in enumerate(sols) for b in sols[i + 1 :])

    def _dist(self, a, b):
        scale = max(a.max_abs, b.max_abs)
        return float(np.sqrt(np.sum(self.mass * (a.w - b.w) ** 2)) / scale)


def _level(energy: float, eta) -> str:
    if eta is None:
        return "unclassified"
    lo, hi = eta
    if energy < lo:
        return "below"
    if energy <= hi:
        return "slab"
    return "above"


def classify_solutions(
    records: list[CriticalPointRecord],
    mesh: Mesh,
    fp: FormPair,
    dist_tol: float = DIST_TOL,
    eta: tuple[float, float] | None = None,
    *,
    nontrivial_tol: float = 1e-6,
    sign_tol: float = 1e-6,
    decay_tol: float = 1e-4,
) -> SolutionSummary:
    """Merge converged records closer than ``dist_tol`` (normalised L²) and
    attach the per-solution certificates."""
    shell = mesh.outer_shell(0.1)
    groups: list[list[CriticalPointRecord]] = []
    for rec in records:
        if not rec.converged:
            continue
        for g in groups:
            if normalised_distance(fp, rec.w, g[0].w) <= dist_tol:
                g.append(rec)
                break
        else:
            groups.append([rec])
    sols = []
    for i, g in enumerate(sorted(groups, key=lambda g: g[0].energy)):
        best = min(g, key=lambda r: r.grad_norm)
        w = best.w
        max_abs = float(np.abs(w).max())
        shell_max = float(np.abs(w[shell]).max()) if shell.any() else 0.0
        sols.append(
            DistinctSolution(
                solution_id=i,
                w=w,
                energy=best.energy,
                grad_norm=best.grad_norm,
                l2_norm=norm_l2(fp, w),
                min_value=float(w.min()),
                max_abs=max_abs,
                shell_max=shell_max,
                nontrivial=norm_l2(fp, w) > nontrivial_tol,
                nonnegative=bool(w.min() >= -sign_tol * max_abs),
                decays=bool(shell_max <= decay_tol * max_abs),
                level=_level(best.energy, eta),
                members=[r.seed_index for r in g],
            )
        )
        for r in g:
            r.solution_id = i
    return SolutionSummary(sols, eta, np.asarray(fp.mass))
