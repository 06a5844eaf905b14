"""Linking geometry of J_λ and the sup of J_λ over E_{k+h}.

Finite-dimensional pieces are handled in scaled eigen-coordinates
u_i = sqrt(λ_i)·c_i for w = Σ c_i e_i, so that ‖w‖ = |u|.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from ..errors import ContractError, SolverError
from ..functional import EnergyModel, energy, gradient
from .seeds import random_unit
from .split import SubspaceSplit

log = logging.getLogger(__name__)


class EigenCoordinates:
    """J_λ restricted to span{e_1..e_n} in H^1_V-unit coordinates."""

    def __init__(self, model: EnergyModel, split: SubspaceSplit, n: int):
        self.model = model
        B = split.basis12[:, :n]
        lam = split.eigenvalues[:n]
        self.lam = lam
        self.U = B / np.sqrt(lam)  # columns unit in H^1_V
        self.quad = 1.0 - model.lam / lam

    @property
    def dim(self) -> int:
        return self.quad.size

    def field(self, u):
        return self.U @ u

    def value(self, u):
        w = self.U @ u
        return 0.5 * float(np.sum(self.quad * u * u)) - float(self.model.alpha_mass @ self.model.nl.F(w))

    def grad(self, u):
        w = self.U @ u
        return self.quad * u - self.U.T @ (self.model.alpha_mass * self.model.nl.f(w))

    def hess(self, u):
        w = self.U @ u
        d = self.model.alpha_mass * self.model.nl.fprime(w)
        return np.diag(self.quad) - self.U.T @ (d[:, None] * self.U)


def _start_directions(dim, rng, n_random):
    dirs = [s * np.eye(dim)[i] for i in range(dim) for s in (1.0, -1.0)]
    for _ in range(n_random):
        v = rng.standard_normal(dim)
        dirs.append(v / np.linalg.norm(v))
    return dirs


def _max_on_sphere(ec: EigenCoordinates, radius: float, rng, n_random=12):
    """max of J over |u| = radius (dimension ec.dim >= 1)."""
    if ec.dim == 1:
        vals = [ec.value(np.array([s * radius])) for s in (1.0, -1.0)]
        i = int(np.argmax(vals))
        return vals[i], np.array([(1.0, -1.0)[i] * radius])
    best_val, best_u = -np.inf, None
    if ec.dim == 2:
        # dense circle scan, then local refinement of the best angle
        ang = np.linspace(0.0, 2 * np.pi, 2049)[:-1]
        vals = [ec.value(radius * np.array([np.cos(a), np.sin(a)])) for a in ang]
        i = int(np.argmax(vals))
        step = ang[1] - ang[0]
        res = minimize_scalar(
            lambda a: -ec.value(radius * np.array([np.cos(a), np.sin(a)])),
            bounds=(ang[i] - step, ang[i] + step),
            method="bounded",
            options={"xatol": 1e-12},
        )
        cand = [(vals[i], ang[i]), (-res.fun, res.x)]
        v, a = max(cand)
        return v, radius * np.array([np.cos(a), np.sin(a)])
    cons = {"type": "eq", "fun": lambda u: u @ u - radius**2, "jac": lambda u: 2 * u}
    for d in _start_directions(ec.dim, rng, n_random):
        res = minimize(lambda u: -ec.value(u), radius * d, jac=lambda u: -ec.grad(u), constraints=[cons], method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
        u = radius * res.x / np.linalg.norm(res.x)
        val = ec.value(u)
        if val > best_val:
            best_val, best_u = val, u
    return best_val, best_u


def _max_on_ball(ec: EigenCoordinates, radius: float, rng, n_random=12):
    """max of J over |u| <= radius; returns 0 at u = 0 when dim == 0."""
    if ec.dim == 0:
        return 0.0, np.zeros(0)
    best_val, best_u = ec.value(np.zeros(ec.dim)), np.zeros(ec.dim)
    sph_val, sph_u = _max_on_sphere(ec, radius, rng, n_random)
    if sph_val > best_val:
        best_val, best_u = sph_val, sph_u
    cons = {"type": "ineq", "fun": lambda u: radius**2 - u @ u, "jac": lambda u: -2 * u}
    for d in _start_directions(ec.dim, rng, n_random):
        for frac in (0.25, 0.75):
            res = minimize(lambda u: -ec.value(u), frac * radius * d, jac=lambda u: -ec.grad(u), constraints=[cons], method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
            u = res.x
            nu = np.linalg.norm(u)
            if nu > radius:
                u = u * radius / nu
            val = ec.value(u)
            if val > best_val:
                best_val, best_u = val, u
    return best_val, best_u


def sphere_minimum(model: EnergyModel, split: SubspaceSplit, rho: float, starts: np.ndarray, max_iter: int = 300, gtol: float = 1e-9):
    """min of J_λ on {w ∈ X2 ⊕ X3 : ‖w‖ = ρ} by Riemannian gradient descent.

    ``starts`` is an (N, b) block; every column is projected onto X2 ⊕ X3
    and scaled to norm ρ, then all columns descend together with per-column
    Armijo backtracking.  Returns ``(values, fields)``.
    """
    A = split.fp.A

    def to_sphere(W):
        W = split.P23(W)
        return rho * W / np.sqrt(np.sum(W * (A @ W), axis=0))

    W = to_sphere(np.asarray(starts, dtype=float))
    J = energy(model, W)
    tau = np.ones(W.shape[1])
    for _ in range(max_iter):
        G = split.P23(gradient(model, W))
        radial = np.sum(G * (A @ W), axis=0) / rho**2
        T = G - radial * W
        tn2 = np.sum(T * (A @ T), axis=0)
        active = np.sqrt(np.maximum(tn2, 0)) > gtol * max(rho, 1e-300)
        if not active.any():
            break
        for _bt in range(40):
            trial = to_sphere(W - tau * T)
            Jt = energy(model, trial)
            ok = Jt <= J - 1e-4 * tau * tn2
            accept = ok & active
            W[:, accept] = trial[:, accept]
            J[accept] = Jt[accept]
            still = active & ~ok
            tau[accept] = np.minimum(2.0 * tau[accept], 4.0)
            if not still.any():
                break
            tau[still] *= 0.5
            active = still
        else:
            pass
    return J, W


def ray_maximiser(model: EnergyModel, direction, t_max: float = 1e6) -> float | None:
    """argmax_{t > 0} J_λ(t·d); None if J keeps increasing up to ``t_max``."""
    d = np.asarray(direction, dtype=float)
    t = 1e-3
    prev = energy(model, t * d)
    while t < t_max:
        nxt = energy(model, 2 * t * d)
        if nxt < prev:
            res = minimize_scalar(lambda s: -energy(model, s * d), bounds=(t / 2, 2 * t), method="bounded", options={"xatol": 1e-10 * t})
            return float(res.x)
        t, prev = 2 * t, nxt
    return None


@dataclass
class GeometryReport:
    rho: float
    R: float
    inf_sphere: float
    sup_ball: float
    sup_sphere: float
    margin: float
    status: str
    inf_field: np.ndarray = field(repr=False, default=None)
    candidates: list = field(default_factory=list)

    @property
    def sup(self) -> float:
        return max(self.sup_ball, self.sup_sphere)

    @property
    def passed(self) -> bool:
        return self.margin > 0


def _window_status(split: SubspaceSplit, lam: float) -> str:
    return "ok" if split.lam_prev < lam < split.lam_k else "advisory"


def _geometry_at(model, split, rho, R, budget, seed):
    rng = np.random.default_rng(seed)
    units = split.unit_coordinates()
    x2 = units[:, split.k - 1 :]
    cols = [x2[:, j] * s for j in range(x2.shape[1]) for s in (1.0, -1.0)]
    while len(cols) < budget:
        cols.append(random_unit(split, rng, where="23"))
    vals, fields = sphere_minimum(model, split, rho, np.stack(cols[: max(budget, 1)], axis=1))
    i = int(np.argmin(vals))
    ball_val, _ = _max_on_ball(EigenCoordinates(model, split, split.k - 1), R, rng)
    sph_val, _ = _max_on_sphere(EigenCoordinates(model, split, split.k + split.h), R, rng)
    margin = float(vals[i]) - max(ball_val, sph_val)
    return GeometryReport(rho, R, float(vals[i]), float(ball_val), float(sph_val), margin, _window_status(split, model.lam), fields[:, i].copy())


def verify_geometry(model: EnergyModel, split: SubspaceSplit, rho: float | None = None, R: float | None = None, budget: int = 8, seed: int = 42) -> GeometryReport:
    """Estimate both sides of the linking inequality.

    inf side: min of J on the X2 ⊕ X3 sphere of radius ρ (``budget``
    starts); sup side: max over the X1 ball and the X1 ⊕ X2 sphere of
    radius R, by exhaustive small-dimensional optimisation.  Without ρ the
    radius is searched among fractions of the e_k ray maximiser, R = 10ρ.
    """
    if rho is not None and R is not None and not 0 < rho < R:
        raise ContractError(f"need 0 < rho < R, got {rho}, {R}")
    status = _window_status(split, model.lam)
    if status != "ok":
        warnings.warn(f"lambda={model.lam:g} outside ({split.lam_prev:g}, {split.lam_k:g}); geometry is advisory", stacklevel=2)
    if rho is not None:
        return _geometry_at(model, split, rho, R if R is not None else 10 * rho, budget, seed)
    e = split.unit_coordinates()[:, split.k - 1]
    scales = [s for s in (ray_maximiser(model, e), ray_maximiser(model, -e)) if s is not None]
    base = min(scales) if scales else 1.0
    best = None
    tried = []
    for frac in (0.25, 0.5, 0.75):
        rep = _geometry_at(model, split, frac * base, 10 * frac * base, budget, seed)
        tried.append((rep.rho, rep.margin))
        if best is None or rep.margin > best.margin:
            best = rep
    best.candidates = tried
    return best


def sup_over_Ekh(model: EnergyModel, split: SubspaceSplit, n_random: int = 16, seed: int = 42, bound: float = 1e8):
    """max of J_λ over E_{k+h}; returns ``(value, maximiser field)``.

    Raises :class:`SolverError` when ascent is unbounded (for instance with
    α ≡ 0 and λ < λ_k).
    """
    ec = EigenCoordinates(model, split, split.k + split.h)
    if model.is_linear:
        if np.any(ec.quad > 0):
            raise SolverError(
                "J is unbounded above on E_{k+h} without a nonlinearity (alpha = 0 and lambda < lambda_{k+h})",
                diagnostics={"quadratic_coefficients": ec.quad.tolist()},
            )
        return 0.0, np.zeros(split.fp.size)
    rng = np.random.default_rng(seed)
    best_val, best_u = 0.0, np.zeros(ec.dim)
    scales = (0.1, 1.0, 10.0)
    starts = [np.zeros(ec.dim)] + [s * d for s in scales for d in _start_directions(ec.dim, rng, n_random)]
    for u0 in starts:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = minimize(lambda u: -ec.value(u), u0, jac=lambda u: -ec.grad(u), hess=lambda u: -ec.hess(u), method="trust-exact", options={"gtol": 1e-12, "maxiter": 1000})
        if not np.all(np.isfinite(res.x)) or np.linalg.norm(res.x) > bound or -res.fun > bound:
            raise SolverError(
                "ascent on E_{k+h} diverged; J_lambda appears unbounded above",
                diagnostics={"start": u0.tolist(), "last_norm": float(np.linalg.norm(res.x))},
            )
        val = ec.value(res.x)
        if val > best_val:
            best_val, best_u = val, res.x
    return float(best_val), ec.field(best_u)
