"""Numerical estimate of the (∇)-condition on the subspace X1 ⊕ X3.

The quantity estimated is

    inf { ‖P ∇J_λ(w)‖ : a <= J_λ(w) <= b,  ‖P2 w‖ <= γ },

with P the H^1_V projector onto X1 ⊕ X3 (so ‖P2 w‖ is the distance from w
to X1 ⊕ X3).  Many feasible starts descend φ(w) = ½‖P ∇J_λ(w)‖² in parallel
while staying feasible; the smallest norm seen is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from ..functional import EnergyModel, energy, gradient, hessian_action
from .seeds import random_unit
from .split import SubspaceSplit


@dataclass
class NablaEstimate:
    value: float | None
    minimiser: np.ndarray | None = field(default=None, repr=False)
    energy: float | None = None
    distance: float | None = None
    feasible_starts: int = 0
    probe_max: float = -np.inf

    @property
    def absent(self) -> bool:
        return self.value is None


def _h1(A, W):
    return np.sqrt(np.maximum(np.sum(W * (A @ W), axis=0), 0.0))


def _feasible_starts(model, split, a, b, gamma, budget, rng, t_grid):
    fp = split.fp
    A = fp.A
    units = split.unit_coordinates()
    x1 = units[:, : split.k - 1]
    x2 = units[:, split.k - 1 :]
    target = 0.5 * (a + b)
    starts, probe_max = [], -np.inf
    for _ in range(budget):
        u3 = random_unit(split, rng)
        if x1.shape[1]:
            c1 = rng.uniform(-1.0, 1.0) * rng.standard_normal(x1.shape[1])
            u = u3 + x1 @ c1
        else:
            u = u3
        u = u / _h1(A, u[:, None])[0]
        c2 = rng.standard_normal(x2.shape[1])
        off = gamma * rng.uniform(0.0, 1.0) * (x2 @ c2) / np.linalg.norm(c2)
        W = off[:, None] + np.outer(u, t_grid)
        J = energy(model, W)
        probe_max = max(probe_max, float(J.max()))
        inside = np.flatnonzero((J >= a) & (J <= b))
        if inside.size:
            # the slab point closest to its middle
            j = inside[np.argmin(np.abs(J[inside] - target))]
            starts.append(W[:, j])
    return starts, probe_max


def estimate_nabla_condition(
    model: EnergyModel,
    split: SubspaceSplit,
    a: float,
    b: float,
    gamma: float,
    budget: int = 200,
    *,
    seed: int = 42,
    max_iter: int = 40,
    t_max: float | None = None,
) -> NablaEstimate:
    if not a <= b:
        raise ContractError(f"need a <= b, got {a}, {b}")
    if not gamma > 0:
        raise ContractError(f"gamma must be > 0, got {gamma}")
    A = split.fp.A
    rng = np.random.default_rng(seed)
    if t_max is None:
        t_max = 10.0 * max(gamma, 1.0)
    t_grid = np.concatenate([[0.0], np.geomspace(1e-4 * t_max, t_max, 400)])
    starts, probe_max = _feasible_starts(model, split, a, b, gamma, budget, rng, t_grid)
    if not starts:
        return NablaEstimate(None, probe_max=probe_max)

    W = np.stack(starts, axis=1)

    def phi_parts(W):
        G = gradient(model, W)
        Q = split.P13(G)
        return Q, 0.5 * np.sum(Q * (A @ Q), axis=0)

    Q, phi = phi_parts(W)
    best = phi.copy()
    best_W = W.copy()
    tau = np.ones(W.shape[1])
    for _ in range(max_iter):
        # the hessian is self-adjoint in ⟨·,·⟩, so H·Q is the H^1_V gradient of φ
        step = hessian_action(model, W, Q)
        todo = np.arange(W.shape[1])
        for _bt in range(12):
            trial = W[:, todo] - tau[todo] * step[:, todo]
            p2 = split.P2(trial)
            d = _h1(A, p2)
            over = d > gamma
            if over.any():
                trial[:, over] -= p2[:, over] * (1.0 - gamma / d[over])
            Jt = energy(model, trial)
            feas = (Jt >= a) & (Jt <= b)
            ok = np.zeros(todo.size, dtype=bool)
            if feas.any():
                Qt, phit = phi_parts(trial[:, feas])
                sub = np.flatnonzero(feas)
                good = phit < phi[todo[sub]]
                ok[sub[good]] = True
                cols = todo[sub[good]]
                W[:, cols], Q[:, cols], phi[cols] = trial[:, sub[good]], Qt[:, good], phit[good]
            tau[todo[ok]] *= 1.5
            todo = todo[~ok]
            if not todo.size:
                break
            tau[todo] *= 0.25
        better = phi < best
        best[better] = phi[better]
        best_W[:, better] = W[:, better]
    i = int(np.argmin(best))
    w = best_W[:, i]
    return NablaEstimate(
        value=float(np.sqrt(2.0 * best[i])),
        minimiser=w.copy(),
        energy=float(energy(model, w)),
        distance=float(_h1(A, split.P2(w)[:, None])[0]),
        feasible_starts=len(starts),
        probe_max=probe_max,
    )
