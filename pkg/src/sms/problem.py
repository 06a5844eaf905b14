"""Assemble the discrete problem described by an :class:`ExperimentConfig`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .errors import ConfigurationError
from .grid import Mesh, NamedFunction, build_mesh, sample_field
from .nonlinearity import Nonlinearity
from .operators import FormPair, assemble
from .spectrum import EigenDecomposition, compute_eigenpairs


@dataclass(frozen=True, eq=False)
class Problem:
    cfg: ExperimentConfig
    mesh: Mesh
    fp: FormPair
    alpha: np.ndarray
    nl: Nonlinearity

    def spectrum(self, m: int | None = None) -> EigenDecomposition:
        s = self.cfg.spectrum
        return compute_eigenpairs(self.fp, m or s.m, s.tol, cluster_tol=s.cluster_tol, seed=self.cfg.rng_seed)


def build_nonlinearity(cfg: ExperimentConfig) -> Nonlinearity:
    n = cfg.nonlinearity
    table = tuple(tuple(row) for row in (n.table or ()))
    return Nonlinearity(kind=n.kind, p=n.p, r=n.r, coefficient=n.coefficient, dimension=cfg.mesh.dimension, table=table)


def build_problem(cfg: ExperimentConfig) -> Problem:
    mesh = build_mesh(cfg.mesh)
    V = sample_field(mesh, NamedFunction(cfg.potential.name, cfg.potential.params), potential=True)
    alpha = sample_field(mesh, NamedFunction(cfg.alpha.name, cfg.alpha.params))
    if np.any(alpha < 0):
        raise ConfigurationError("alpha must be nonnegative")
    fp = assemble(mesh, V, tol_cg=cfg.solver.cg_tol, max_iter=cfg.solver.cg_max_iter)
    return Problem(cfg, mesh, fp, alpha, build_nonlinearity(cfg))


def resolve_target(cfg: ExperimentConfig, ed: EigenDecomposition) -> tuple[int, int]:
    """The multiplicity group (k, h) to study; ``auto`` picks the group after λ_1."""
    groups = list(ed.groups)
    if cfg.target == "auto":
        if len(groups) < 3:
            raise ConfigurationError("target 'auto' needs at least three eigenvalue groups; raise spectrum.m")
        return groups[1]
    for g in groups:
        if g[0] <= cfg.target <= g[0] + g[1]:
            if g[0] + g[1] + 1 > ed.count:
                raise ConfigurationError(f"group of lambda_{cfg.target} is not closed within m={ed.count} eigenpairs")
            return g
    raise ConfigurationError(f"target {cfg.target} exceeds the {ed.count} computed eigenpairs")
