"""The reaction term f, its primitive F, and sampled hypothesis checks.

Every nonlinearity is truncated to its positive part: f(t) = F(t) = 0 for
t <= 0, which is what selects nonnegative solutions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractError
from .report import Report

log = logging.getLogger(__name__)


def default_probe_grid() -> np.ndarray:
    return np.logspace(-6, 6, 1201)


def critical_exponent(d: int) -> float:
    return np.inf if d <= 2 else 2.0 * d / (d - 2)


@dataclass(frozen=True)
class Nonlinearity:
    """f(t) = coefficient·t^p (``kind="power"``) or a tabulated profile.

    ``r`` is the growth exponent used by the (f2)/(f4) checks and defaults
    to p + 1.  For ``kind="table"`` the profile is piecewise linear through
    ``table`` = ((t_0, f_0), ...) with t_0 = 0, f_0 = 0, and continues past
    the last node as a power law matched to the last segment.
    """

    kind: str = "power"
    p: float = 2.0
    r: float | None = None
    coefficient: float = 1.0
    dimension: int = 1
    table: tuple[tuple[float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in ("power", "table"):
            raise ConfigurationError(f"nonlinearity.kind must be 'power' or 'table', got {self.kind!r}")
        if self.kind == "power" and self.p <= 0:
            raise ConfigurationError(f"nonlinearity.p must be > 0, got {self.p}")
        if self.coefficient < 0:
            raise ConfigurationError("nonlinearity coefficient must be >= 0")
        if self.kind == "table":
            t = np.array([row[0] for row in self.table], dtype=float)
            fv = np.array([row[1] for row in self.table], dtype=float)
            if t.size < 2 or t[0] != 0.0 or fv[0] != 0.0 or np.any(np.diff(t) <= 0):
                raise ConfigurationError("table must start at (0, 0) with strictly increasing t")
        r = self.growth
        two_star = critical_exponent(self.dimension)
        if not 2.0 < r < two_star:
            raise ConfigurationError(f"growth exponent r={r} outside (2, {two_star}) for d={self.dimension}")
        if self.dimension <= 2:
            log.info("d=%d: subcritical range is (2, inf); the Sobolev setting assumes d >= 3", self.dimension)

    @property
    def growth(self) -> float:
        if self.r is not None:
            return float(self.r)
        if self.kind == "power":
            return float(self.p) + 1.0
        raise ConfigurationError("table nonlinearities need an explicit growth exponent r")

    # -- table helpers -----------------------------------------------------

    def _table_arrays(self):
        t = np.array([row[0] for row in self.table], dtype=float)
        fv = np.array([row[1] for row in self.table], dtype=float)
        seg = np.diff(t) * 0.5 * (fv[1:] + fv[:-1])
        Fv = np.concatenate([[0.0], np.cumsum(seg)])
        # tail exponent q from the last segment: f ~ f_last (t / t_last)^q
        if fv[-2] > 0 and t[-2] > 0:
            q = np.log(fv[-1] / fv[-2]) / np.log(t[-1] / t[-2])
        else:
            q = 1.0
        return t, fv, Fv, q

    def f(self, t):
        t = np.asarray(t, dtype=float)
        pos = np.maximum(t, 0.0)
        if self.kind == "power":
            return self.coefficient * np.where(t > 0, pos**self.p, 0.0)
        tt, fv, _, q = self._table_arrays()
        inside = np.interp(pos, tt, fv)
        tail = fv[-1] * (np.maximum(pos, tt[-1]) / tt[-1]) ** q
        return self.coefficient * np.where(t > 0, np.where(pos <= tt[-1], inside, tail), 0.0)

    def F(self, t):
        t = np.asarray(t, dtype=float)
        pos = np.maximum(t, 0.0)
        if self.kind == "power":
            return self.coefficient * np.where(t > 0, pos ** (self.p + 1.0) / (self.p + 1.0), 0.0)
        tt, fv, Fv, q = self._table_arrays()
        idx = np.clip(np.searchsorted(tt, pos, side="right") - 1, 0, tt.size - 2)
        slope = (fv[idx + 1] - fv[idx]) / (tt[idx + 1] - tt[idx])
        dt = pos - tt[idx]
        inside = Fv[idx] + fv[idx] * dt + 0.5 * slope * dt * dt
        big = np.maximum(pos, tt[-1])
        tail = Fv[-1] + fv[-1] * tt[-1] / (q + 1.0) * ((big / tt[-1]) ** (q + 1.0) - 1.0)
        return self.coefficient * np.where(t > 0, np.where(pos <= tt[-1], inside, tail), 0.0)

    def fprime(self, t):
        """Exact derivative for power kind; secant slope for tables."""
        t = np.asarray(t, dtype=float)
        pos = np.maximum(t, 0.0)
        if self.kind == "power":
            return self.coefficient * np.where(t > 0, self.p * pos ** (self.p - 1.0), 0.0)
        tt, fv, _, q = self._table_arrays()
        idx = np.clip(np.searchsorted(tt, pos, side="right") - 1, 0, tt.size - 2)
        slope = (fv[idx + 1] - fv[idx]) / (tt[idx + 1] - tt[idx])
        tail = q * fv[-1] / tt[-1] * (np.maximum(pos, tt[-1]) / tt[-1]) ** (q - 1.0)
        return self.coefficient * np.where(t > 0, np.where(pos <= tt[-1], slope, tail), 0.0)


def evaluate(nl: Nonlinearity, t):
    """(f(t), F(t)); scalars in, scalars out."""
    f, F = nl.f(t), nl.F(t)
    if np.ndim(t) == 0:
        return float(f), float(F)
    return f, F


def _probe(t_grid):
    t = np.asarray(t_grid, dtype=float)
    if t.size == 0:
        raise ContractError("probe grid is empty")
    if np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ContractError("probe grid must be positive and strictly increasing")
    return t


def check_hypotheses(nl: Nonlinearity, t_grid=None, tol: float = 1e-12, f1_tol: float = 1e-3) -> Report:
    """Sampled checks of (f1)-(f4) on a logarithmic probe grid.

    (f4) uses the non-strict form 0 < rF(t) <= f(t)t; its slack is measured
    relative to f(t)t so the check is scale free.
    """
    t = _probe(default_probe_grid() if t_grid is None else t_grid)
    r = nl.growth
    f, F = nl.f(t), nl.F(t)
    report = Report(f"hypotheses (f1)-(f4), r={r:g}")

    low = t <= 10.0 * t[0]
    ratio0 = f[low] / t[low]
    # ratio must be small and not growing as t -> 0
    f1_ok = ratio0.max() <= f1_tol and ratio0[0] <= ratio0[-1] * (1 + 1e-9) + tol
    report.add("f1_ratio_near_zero", ratio0.max(), f1_tol, f1_ok, "max f(t)/t on lowest decade")

    top = t >= t[-1] / 10.0
    prev = (t >= t[-1] / 100.0) & ~top
    ratio_inf = f / t ** (r - 1.0)
    top_max = ratio_inf[top].max()
    ref = ratio_inf[prev].max() if prev.any() else top_max
    f2_ok = bool(np.isfinite(top_max)) and top_max <= ref * (1 + 1e-6) + tol
    report.add("f2_growth_ratio", top_max, ref * (1 + 1e-6), f2_ok, "max f(t)/t^(r-1) on top decade")

    g = f * t - 2.0 * F
    drops = np.diff(g) < -tol * np.maximum(1.0, np.abs(g[:-1]))
    report.add("f3_monotone_violations", int(drops.sum()), 0, not drops.any(), "t -> f(t)t - 2F(t)")

    ft = f * t
    slack = (ft - r * F) / np.where(ft > 0, ft, 1.0)
    report.at_least("f4_relative_slack", slack.min(), -tol, "min (f t - rF)/(f t)")
    report.add("f4_F_positive", F.min(), 0.0, F.min() > 0, "min F(t)")
    return report


@dataclass(frozen=True)
class GrowthConstants:
    eps: float
    A1: float
    A2: float
    A2_eps: float
    A3: float
    A4: float
    report: Report


def growth_constants(nl: Nonlinearity, eps: float, t_grid=None, tol: float = 1e-12) -> GrowthConstants:
    """Smallest grid-valid constants in the growth estimates.

    f <= 2εt + rA1 t^(r-1);  F <= εt² + A1 t^r;  f <= A2 + A2ε t^(r-1);
    F >= A3 t^r - A4.  Slack is reported relative to the bounding side.
    """
    if not eps > 0:
        raise ContractError(f"eps must be > 0, got {eps}")
    t = _probe(default_probe_grid() if t_grid is None else t_grid)
    r = nl.growth
    f, F = nl.f(t), nl.F(t)
    report = Report(f"growth constants, eps={eps:g}")

    A1 = max(float(np.max((f - 2.0 * eps * t) / (r * t ** (r - 1.0)))), 0.0)
    bound_f = 2.0 * eps * t + r * A1 * t ** (r - 1.0)
    s_f = (bound_f - f) / np.maximum(bound_f, np.finfo(float).tiny)
    report.at_least("f_bound_A1_slack", s_f.min(), -tol, f"A1={A1:.6g}")
    bound_F = eps * t**2 + A1 * t**r
    s_F = (bound_F - F) / np.maximum(bound_F, np.finfo(float).tiny)
    report.at_least("F_bound_A1_slack", s_F.min(), -tol, "integrated f bound")

    split = t < 1.0
    A2 = float(f[split].max()) if split.any() else 0.0
    A2_eps = float(np.max(f[~split] / t[~split] ** (r - 1.0))) if (~split).any() else 0.0
    bound_f2 = A2 + A2_eps * t ** (r - 1.0)
    s_f2 = (bound_f2 - f) / np.maximum(bound_f2, np.finfo(float).tiny)
    report.at_least("f_bound_A2_slack", s_f2.min(), -tol, f"A2={A2:.6g}, A2eps={A2_eps:.6g}")

    if nl.kind == "power" and np.isclose(r, nl.p + 1.0):
        A3, A4 = nl.coefficient / (nl.p + 1.0), 0.0
    else:
        far = t >= 1.0
        A3 = float(np.min(F[far] / t[far] ** r)) if far.any() else 0.0
        A4 = max(float(np.max(A3 * t**r - F)), 0.0)
    bound_low = A3 * t**r - A4
    s_low = (F - bound_low) / np.maximum(np.abs(F), np.finfo(float).tiny)
    report.add("F_lower_A3_positive", A3, 0.0, A3 > 0, f"A3={A3:.6g}, A4={A4:.6g}")
    report.at_least("F_lower_slack", s_low.min(), -tol)
    return GrowthConstants(eps, A1, A2, A2_eps, A3, A4, report)
