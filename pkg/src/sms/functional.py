"""The energy J_λ(w) = ½‖w‖² - (λ/2)‖w‖²_{L²} - ∫ α F(w), its derivative
and its gradient in the H^1_V metric.

All functions accept a single field of shape ``(N,)`` or a block of fields
``(N, k)``; blocks are evaluated column by column in one pass.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, ContractError
from .nonlinearity import Nonlinearity
from .operators import FormPair, solve_form

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EnergyModel:
    fp: FormPair
    alpha: np.ndarray
    nl: Nonlinearity
    lam: float

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.shape != (self.fp.size,):
            raise ContractError(f"alpha has shape {alpha.shape}, expected ({self.fp.size},)")
        if np.any(alpha < 0) or not np.all(np.isfinite(alpha)):
            raise ConfigurationError("alpha must be finite and nonnegative")
        if not np.isfinite(self.lam):
            raise ConfigurationError("lambda must be finite")
        if not alpha.any():
            log.info("alpha vanishes identically: the problem is linear")

    @property
    def is_linear(self) -> bool:
        return not np.any(self.alpha) or self.nl.coefficient == 0

    @cached_property
    def alpha_mass(self) -> np.ndarray:
        return self.fp.mass * np.asarray(self.alpha, dtype=float)

    def at(self, lam: float) -> "EnergyModel":
        return EnergyModel(self.fp, self.alpha, self.nl, float(lam))

    def _weights(self, w):
        if w.ndim == 1:
            return self.fp.mass, self.alpha_mass
        return self.fp.mass[:, None], self.alpha_mass[:, None]


def _as_field(model: EnergyModel, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape[0] != model.fp.size:
        raise ContractError(f"field has {w.shape[0]} entries, expected {model.fp.size}")
    return w


def energy(model: EnergyModel, w):
    w = _as_field(model, w)
    m, am = model._weights(w)
    val = (
        0.5 * np.sum(w * (model.fp.A @ w), axis=0)
        - 0.5 * model.lam * np.sum(m * w * w, axis=0)
        - np.sum(am * model.nl.F(w), axis=0)
    )
    return float(val) if w.ndim == 1 else val


def directional_derivative(model: EnergyModel, w, v):
    w = _as_field(model, w)
    v = _as_field(model, v)
    m, am = model._weights(w)
    val = (
        np.sum(v * (model.fp.A @ w), axis=0)
        - model.lam * np.sum(m * w * v, axis=0)
        - np.sum(am * model.nl.f(w) * v, axis=0)
    )
    return float(val) if w.ndim == 1 else val


def nodal_residual(model: EnergyModel, w) -> np.ndarray:
    """A w - M(λ w + α f(w)); zero exactly at critical points."""
    w = _as_field(model, w)
    m, am = model._weights(w)
    return model.fp.A @ w - m * (model.lam * w) - am * model.nl.f(w)


def gradient(model: EnergyModel, w) -> np.ndarray:
    """∇J_λ(w) = w - R(λw + αf(w)) with R the resolvent of the form A.

    Evaluated as the single solve A g = A w - M(λw + αf(w)), which is the
    same field without the cancellation between w and R(...) near
    solutions.
    """
    return solve_form(model.fp, nodal_residual(model, w))


def residual(model: EnergyModel, w):
    """‖∇J_λ(w)‖ in the H^1_V norm."""
    w = _as_field(model, w)
    if not np.any(w) and not np.any(model.nl.f(w)):
        return 0.0 if w.ndim == 1 else np.zeros(w.shape[1])
    g = gradient(model, w)
    val = np.sqrt(np.maximum(np.sum(g * (model.fp.A @ g), axis=0), 0.0))
    return float(val) if w.ndim == 1 else val


def nodal_jacobian(model: EnergyModel, w) -> sp.csc_matrix:
    """Derivative of :func:`nodal_residual`: A - diag(M(λ + αf'(w)))."""
    w = _as_field(model, w)
    diag = model.fp.mass * model.lam + model.alpha_mass * model.nl.fprime(w)
    return (model.fp.A - sp.diags(diag)).tocsc()


def hessian_action(model: EnergyModel, w, v) -> np.ndarray:
    """D∇J_λ(w)[v] = v - R((λ + αf'(w)) v); self-adjoint in ⟨·,·⟩."""
    w = _as_field(model, w)
    v = _as_field(model, v)
    m, am = model._weights(w)
    return solve_form(model.fp, model.fp.A @ v - (m * model.lam + am * model.nl.fprime(w)) * v)
