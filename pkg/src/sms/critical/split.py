"""The three-way splitting X1 = E_{k-1}, X2 = span{e_k..e_{k+h}}, X3 = E_{k+h}^⊥."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as la

from ..errors import ContractError
from ..operators import FormPair
from ..spectrum import EigenDecomposition


@dataclass(frozen=True, eq=False)
class SubspaceSplit:
    """H^1_V-orthogonal projectors for a multiplicity group ``(k, h)``.

    ``basis1`` and ``basis2`` hold the eigenvectors spanning X1 and X2;
    P3 is the identity minus the projector onto X1 ⊕ X2.
    """

    fp: FormPair
    k: int
    h: int
    basis1: np.ndarray
    basis2: np.ndarray
    eigenvalues: np.ndarray  # λ_1 .. λ_{k+h+1}

    @property
    def lam_prev(self) -> float:
        return float(self.eigenvalues[self.k - 2]) if self.k > 1 else -np.inf

    @property
    def lam_k(self) -> float:
        return float(self.eigenvalues[self.k - 1])

    @property
    def lam_next(self) -> float:
        return float(self.eigenvalues[self.k + self.h])

    @property
    def basis12(self) -> np.ndarray:
        return np.hstack([self.basis1, self.basis2])

    @cached_property
    def _proj(self):
        out = {}
        for name, B in (("1", self.basis1), ("2", self.basis2), ("12", self.basis12)):
            if B.shape[1] == 0:
                out[name] = None
                continue
            AB = self.fp.A @ B
            G = B.T @ AB
            out[name] = (B, AB, la.cho_factor(0.5 * (G + G.T)))
        return out

    def _apply(self, name, w):
        data = self._proj[name]
        if data is None:
            return np.zeros_like(w)
        B, AB, cf = data
        return B @ la.cho_solve(cf, AB.T @ w)

    def _check(self, w):
        w = np.asarray(w, dtype=float)
        if w.shape[0] != self.fp.size:
            raise ContractError(f"field has {w.shape[0]} entries, expected {self.fp.size}")
        return w

    def P1(self, w):
        return self._apply("1", self._check(w))

    def P2(self, w):
        return self._apply("2", self._check(w))

    def P12(self, w):
        return self._apply("12", self._check(w))

    def P3(self, w):
        w = self._check(w)
        return w - self._apply("12", w)

    def P13(self, w):
        """Projector onto X1 ⊕ X3 (the complement of X2)."""
        w = self._check(w)
        return w - self._apply("2", w)

    def P23(self, w):
        """Projector onto X2 ⊕ X3 = E_{k-1}^⊥."""
        w = self._check(w)
        return w - self._apply("1", w)

    def unit_coordinates(self):
        """Columns ê_i = e_i/‖e_i‖ for i <= k+h, unit in the H^1_V norm."""
        B = self.basis12
        norms = np.sqrt(np.sum(B * (self.fp.A @ B), axis=0))
        return B / norms


def split_subspaces(ed: EigenDecomposition, fp: FormPair, group: tuple[int, int]) -> SubspaceSplit:
    k, h = int(group[0]), int(group[1])
    if k < 1 or h < 0:
        raise ContractError(f"invalid group {(k, h)}")
    if k + h + 1 > ed.count:
        raise ContractError(f"group {(k, h)} needs {k + h + 1} eigenpairs, only {ed.count} computed")
    return SubspaceSplit(
        fp=fp,
        k=k,
        h=h,
        basis1=ed.vectors[:, : k - 1].copy(),
        basis2=ed.vectors[:, k - 1 : k + h].copy(),
        eigenvalues=ed.eigenvalues[: k + h + 1].copy(),
    )
