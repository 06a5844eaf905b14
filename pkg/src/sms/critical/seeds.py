from __future__ import annotations

import numpy as np

from ..errors import ContractError
from ..operators import solve_form
from .split import SubspaceSplit


def _h1_normalise(fp, w):
    return w / np.sqrt(w @ (fp.A @ w))


def random_unit(split: SubspaceSplit, rng, where: str = "3") -> np.ndarray:
    """Smooth random field in X3 (or X2⊕X3 with ``where='23'``), unit in H^1_V.

    Nodal noise is smoothed by one resolvent solve before projecting.
    """
    fp = split.fp
    raw = solve_form(fp, fp.mass * rng.standard_normal(fp.size))
    proj = split.P3 if where == "3" else split.P23
    return _h1_normalise(fp, proj(raw))


def seed_generator(split: SubspaceSplit, rho: float, R: float, count: int, rng_seed: int = 42) -> list[np.ndarray]:
    """Deterministic Newton seeds on the linking sets.

    Order: ±ρê_j and ±Rê_j for the X2 directions, then (ρ/√2)(ê_k + x3)
    with x3 a random unit X3 field, then R-scale unit vectors of X1 ⊕ X2.
    Every seed has H^1_V norm exactly ρ or R.
    """
    if not 0 < rho < R:
        raise ContractError(f"need 0 < rho < R, got rho={rho}, R={R}")
    rng = np.random.default_rng(rng_seed)
    units = split.unit_coordinates()
    x2_units = units[:, split.k - 1 :]
    seeds: list[np.ndarray] = []
    for j in range(x2_units.shape[1]):
        e = x2_units[:, j]
        seeds.extend([rho * e, -rho * e])
    for j in range(x2_units.shape[1]):
        e = x2_units[:, j]
        seeds.extend([R * e, -R * e])
    fp = split.fp
    while len(seeds) < count:
        x3 = random_unit(split, rng)
        seeds.append(rho / np.sqrt(2.0) * (x2_units[:, 0] + x3))
        c = rng.standard_normal(units.shape[1])
        mix = units @ c
        seeds.append(R * _h1_normalise(fp, mix))
    return seeds[:count]
