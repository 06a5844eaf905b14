"""Truncated tensor-product grids, sampled fields and quadrature.

A mesh covers the box [-L, L]^d with ``n`` interior nodes per axis.  The
boundary nodes carry the homogeneous Dirichlet value and are not stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigurationError, ContractError, EvaluationError, HypothesisViolation

# ---------------------------------------------------------------------------
# named scalar functions
# ---------------------------------------------------------------------------

# Radial metric weights ω(r).  Each factory returns a callable of the radius.
METRIC_WEIGHTS: dict[str, Callable[..., Callable[[np.ndarray], np.ndarray]]] = {
    "constant": lambda value=1.0: (lambda r: np.full_like(r, float(value))),
    "one_plus_r2": lambda scale=1.0: (lambda r: 1.0 + scale * r**2),
    "cosh": lambda scale=1.0: (lambda r: np.cosh(scale * r)),
}


def _harmonic(omega=1.0, shift=1.0):
    return lambda x, r: (omega * r) ** 2 + shift


def _quartic(scale=1.0, shift=1.0):
    return lambda x, r: scale * r**4 + shift


def _anharmonic(omega=1.0, quartic=0.1, shift=1.0):
    return lambda x, r: (omega * r) ** 2 + quartic * r**4 + shift


def _constant(value=1.0):
    return lambda x, r: np.full_like(r, float(value))


def _inverse_square(scale=1.0):
    # α(x) = scale·(1 + |x|)^(-2)
    return lambda x, r: scale / (1.0 + r) ** 2


def _th3_weight(scale=1.0):
    # α(x) = scale·(1 + |x|^d)^(-2), d taken from the coordinates
    return lambda x, r: scale / (1.0 + r ** x.shape[1]) ** 2


def _gaussian(scale=1.0, width=1.0):
    return lambda x, r: scale * np.exp(-((r / width) ** 2))


def _zero():
    return lambda x, r: np.zeros_like(r)


def _square(scale=1.0):
    # V = scale·|x|^2 with no shift; violates V ≥ v0 > 0 at the origin
    return lambda x, r: scale * r**2


SCALAR_FUNCTIONS: dict[str, Callable[..., Callable[[np.ndarray, np.ndarray], np.ndarray]]] = {
    "harmonic": _harmonic,
    "quartic": _quartic,
    "anharmonic": _anharmonic,
    "constant": _constant,
    "inverse_square": _inverse_square,
    "th3_weight": _th3_weight,
    "gaussian": _gaussian,
    "zero": _zero,
    "square": _square,
}


@dataclass(frozen=True)
class NamedFunction:
    """A scalar function on R^d addressed by registry name plus keyword params."""

    name: str
    params: Mapping[str, float] = field(default_factory=dict)

    def resolve(self) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
        try:
            factory = SCALAR_FUNCTIONS[self.name]
        except KeyError:
            raise ConfigurationError(
                f"unknown function {self.name!r}; known: {sorted(SCALAR_FUNCTIONS)}"
            ) from None
        try:
            return factory(**dict(self.params))
        except TypeError as exc:
            raise ConfigurationError(f"bad parameters for {self.name!r}: {exc}") from None

    def __call__(self, coords: np.ndarray) -> np.ndarray:
        coords = np.atleast_2d(coords)
        r = np.linalg.norm(coords, axis=1)
        return np.asarray(self.resolve()(coords, r), dtype=float)


# ---------------------------------------------------------------------------
# mesh
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeshConfig:
    dimension: int = 1
    half_width: float = 8.0
    nodes_per_axis: int = 201
    metric_weight: str = "constant"
    metric_params: Mapping[str, float] = field(default_factory=dict)

    def validate(self) -> None:
        if self.dimension not in (1, 2, 3):
            raise ConfigurationError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if not self.half_width > 0:
            raise ConfigurationError(f"half_width must be > 0, got {self.half_width}")
        if self.nodes_per_axis < 3:
            raise ConfigurationError(f"nodes_per_axis must be >= 3, got {self.nodes_per_axis}")
        if self.metric_weight not in METRIC_WEIGHTS:
            raise ConfigurationError(
                f"unknown metric_weight {self.metric_weight!r}; known: {sorted(METRIC_WEIGHTS)}"
            )


@dataclass(frozen=True, eq=False)
class Mesh:
    """Interior nodes of a uniform grid on [-L, L]^d.

    Nodes are stored in C order (last axis fastest).  ``metric`` holds the
    radial weight ω at each node; ``weights`` = h^d·ω is the quadrature
    weight.
    """

    config: MeshConfig
    axis: np.ndarray
    coords: np.ndarray
    spacing: float
    metric: np.ndarray
    weights: np.ndarray

    @property
    def dimension(self) -> int:
        return self.config.dimension

    @property
    def n(self) -> int:
        return self.config.nodes_per_axis

    @property
    def size(self) -> int:
        return self.coords.shape[0]

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dimension

    @property
    def radius(self) -> np.ndarray:
        return np.linalg.norm(self.coords, axis=1)

    def metric_function(self) -> Callable[[np.ndarray], np.ndarray]:
        return METRIC_WEIGHTS[self.config.metric_weight](**dict(self.config.metric_params))

    def outer_shell(self, fraction: float = 0.1) -> np.ndarray:
        """Boolean mask of nodes whose sup-norm distance from the origin
        lies in the outermost ``fraction`` of the half-width."""
        reach = np.max(np.abs(self.coords), axis=1)
        return reach >= (1.0 - fraction) * self.config.half_width


def build_mesh(cfg: MeshConfig) -> Mesh:
    cfg.validate()
    n, d, L = cfg.nodes_per_axis, cfg.dimension, float(cfg.half_width)
    h = 2.0 * L / (n + 1)
    axis = -L + h * np.arange(1, n + 1)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=1)
    omega = METRIC_WEIGHTS[cfg.metric_weight](**dict(cfg.metric_params))(np.linalg.norm(coords, axis=1))
    omega = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega)) or np.any(omega <= 0):
        raise ConfigurationError("metric weight must be finite and strictly positive on the box")
    weights = h**d * omega
    for arr in (axis, coords, omega, weights):
        arr.setflags(write=False)
    return Mesh(config=cfg, axis=axis, coords=coords, spacing=h, metric=omega, weights=weights)


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------


def sample_field(mesh: Mesh, expr, *, potential: bool = False) -> np.ndarray:
    """Evaluate ``expr`` at the interior nodes.

    ``expr`` is a :class:`NamedFunction` or any callable taking the
    ``(N, d)`` coordinate array.  With ``potential=True`` the samples must be
    bounded below by a positive constant; a minimum ``<= 0`` raises
    :class:`HypothesisViolation`.
    """
    values = np.asarray(expr(mesh.coords), dtype=float).reshape(-1)
    if values.shape[0] != mesh.size:
        raise ContractError(f"expression returned {values.shape[0]} values for {mesh.size} nodes")
    if not np.all(np.isfinite(values)):
        raise EvaluationError("non-finite sample in field evaluation")
    if potential and values.min() <= 0:
        raise HypothesisViolation(f"potential must be strictly positive; min value is {values.min()!r}")
    values.setflags(write=False)
    return values


def quadrature(mesh: Mesh, f) -> float:
    f = np.asarray(f, dtype=float)
    if f.shape[0] != mesh.size:
        raise ContractError(f"field has {f.shape[0]} entries, mesh has {mesh.size} nodes")
    return float(mesh.weights @ f)
