"""Deflated Newton search for critical points of J_λ.

Newton runs on the nodal equation A w - M(λ w + α f(w)) = 0.  Known
solutions r_i (and optionally 0) are removed with the multiplicative
deflation factor

    m(w) = Π_i (‖w - r_i‖_{L²}^{-p} + σ),

applied through the usual rescaling of the undeflated Newton step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from ..errors import ContractError
from ..functional import EnergyModel, energy, nodal_jacobian, nodal_residual, residual
from ..grid import Mesh
from ..operators import norm_l2

log = logging.getLogger(__name__)

DIST_TOL = 1e-3


@dataclass
class CriticalPointRecord:
    w: np.ndarray
    energy: float
    grad_norm: float
    min_value: float
    max_abs: float
    shell_max: float
    converged: bool
    status: str = "converged"
    seed_index: int = -1
    iterations: int = 0
    solution_id: int = -1
    history: list[float] = field(default_factory=list, repr=False)


def normalised_distance(fp, u, v) -> float:
    """‖u - v‖_{L²} / max(max|u|, max|v|)."""
    scale = max(np.abs(u).max(), np.abs(v).max())
    if scale == 0:
        return 0.0
    return norm_l2(fp, u - v) / scale


def make_record(model: EnergyModel, w, mesh: Mesh | None = None, **kw) -> CriticalPointRecord:
    w = np.asarray(w, dtype=float)
    shell = float(np.abs(w[mesh.outer_shell()]).max()) if mesh is not None else np.nan
    return CriticalPointRecord(
        w=w,
        energy=energy(model, w),
        grad_norm=residual(model, w),
        min_value=float(w.min()),
        max_abs=float(np.abs(w).max()),
        shell_max=shell,
        **kw,
    )


class _Deflation:
    def __init__(self, mass, power, shift):
        self.mass = mass
        self.power = power
        self.shift = shift
        self.roots: list[np.ndarray] = []

    def step_scale(self, w, delta) -> float:
        # d/dw of log m(w) applied to delta
        dlog = 0.0
        for r in self.roots:
            diff = w - r
            d2 = float(np.sum(self.mass * diff * diff))
            if d2 == 0.0:
                return 0.0
            d = np.sqrt(d2)
            phi = d ** (-self.power) + self.shift
            dlog += -self.power * d ** (-self.power - 2) * float(np.sum(self.mass * diff * delta)) / phi
        denom = 1.0 - dlog
        return 1.0 / denom if denom != 0 else 0.0


def deflated_newton(
    model: EnergyModel,
    seeds,
    known=(),
    tol: float = 1e-8,
    max_iter: int = 100,
    *,
    mesh: Mesh | None = None,
    deflate_zero: bool = True,
    power: float = 2.0,
    shift: float = 1.0,
    dist_tol: float = DIST_TOL,
    nontrivial_tol: float = 1e-6,
) -> list[CriticalPointRecord]:
    """Run deflated Newton from every seed in order.

    Each newly converged solution is added to the deflation set before the
    next seed starts.  Returns one record per seed; seeds that fail
    (singular Jacobian, divergence, iteration cap, landing on a known
    solution) come back with ``converged=False`` and a ``status`` string.
    """
    if not tol > 0:
        raise ContractError(f"tol must be > 0, got {tol}")
    fp = model.fp
    mass = np.asarray(fp.mass)
    vmin = float(np.min(fp.potential))
    defl = _Deflation(mass, power, shift)
    known_list = [np.asarray(k, dtype=float) for k in known]
    defl.roots.extend(known_list)
    if deflate_zero:
        defl.roots.append(np.zeros(fp.size))
    records: list[CriticalPointRecord] = []
    for idx, seed in enumerate(seeds):
        w = np.array(seed, dtype=float)
        if not np.any(w):
            raise ContractError("seeds must be nonzero")
        status, history, it = "max_iter", [], 0
        for it in range(1, max_iter + 1):
            r = nodal_residual(model, w)
            # ‖∇J‖ <= ‖r‖_{M^-1} / sqrt(min V) because A >= min(V) M
            cheap = float(np.sqrt(np.sum(r * r / mass)) / np.sqrt(vmin))
            history.append(cheap)
            if not np.isfinite(cheap) or cheap > 1e150:
                status = "diverged"
                break
            if cheap <= 0.5 * tol:
                status = "converged"
                break
            try:
                with np.errstate(all="ignore"):
                    lu = spla.splu(nodal_jacobian(model, w))
                delta = -lu.solve(r)
            except RuntimeError:
                status = "singular_jacobian"
                break
            if not np.all(np.isfinite(delta)):
                status = "singular_jacobian"
                break
            tau = defl.step_scale(w, delta)
            w = w + tau * delta
        if status != "converged":
            log.debug("seed %d: %s after %d iterations", idx, status, it)
            records.append(make_record(model, w, mesh, converged=False, status=status, seed_index=idx, iterations=it, history=history))
            continue
        rec = make_record(model, w, mesh, converged=True, seed_index=idx, iterations=it, history=history)
        if rec.grad_norm > tol:
            rec.converged, rec.status = False, "residual_above_tol"
        elif norm_l2(fp, w) <= nontrivial_tol:
            rec.converged, rec.status = False, "trivial"
        elif any(normalised_distance(fp, w, k) <= dist_tol for k in defl.roots if np.any(k)):
            rec.converged, rec.status = False, "duplicate"
        else:
            defl.roots.append(w.copy())
        records.append(rec)
    return records


def converged(records) -> list[CriticalPointRecord]:
    return [r for r in records if r.converged]
