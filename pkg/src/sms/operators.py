"""Discrete H^1_V and L^2 forms and the resolvent of -Δ + V.

``A`` realises ⟨u, v⟩ = ∫ ∇u·∇v + ∫ V u v with the (2d+1)-point stencil
(homogeneous Dirichlet data outside the box); ``M`` is the lumped mass,
stored as its diagonal.  Both already include the quadrature weights, so
``u @ A @ v`` and ``u @ (M * v)`` are the discrete inner products.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, reduce

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, HypothesisViolation, SolverError
from .grid import Mesh

DEFAULT_CG_TOL = 1e-10


def _difference_1d(n: int) -> sp.csr_matrix:
    # (n+1) x n forward differences including the two boundary edges
    rows = np.concatenate([np.arange(n), np.arange(1, n + 1)])
    cols = np.concatenate([np.arange(n), np.arange(n)])
    vals = np.concatenate([np.ones(n), -np.ones(n)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n + 1, n))


def stiffness(mesh: Mesh) -> sp.csr_matrix:
    """Dirichlet stiffness matrix scaled by the quadrature weights.

    Each edge contributes ``h^(d-2) / ω(midpoint) · (u_i - u_j)^2``; the
    volume factor ω and the inverse-squared gradient factor ω^-2 combine to
    ω^-1 on the edge.
    """
    n, d, h = mesh.n, mesh.dimension, mesh.spacing
    L = mesh.config.half_width
    eye = sp.identity(n, format="csr")
    d1 = _difference_1d(n)
    edge_axis = -L + h * (np.arange(n + 1) + 0.5)
    omega = mesh.metric_function()
    K = sp.csr_matrix((mesh.size, mesh.size))
    for a in range(d):
        factors = [d1 if b == a else eye for b in range(d)]
        D = reduce(lambda x, y: sp.kron(x, y, format="csr"), factors)
        axes = [edge_axis if b == a else mesh.axis for b in range(d)]
        mids = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        c = h ** (d - 2) / omega(np.linalg.norm(mids, axis=1))
        K = K + D.T @ sp.diags(c) @ D
    return K.tocsr()


@dataclass(frozen=True, eq=False)
class FormPair:
    """The two bilinear forms of the discrete problem plus CG settings."""

    A: sp.csr_matrix
    mass: np.ndarray
    potential: np.ndarray
    tol_cg: float = DEFAULT_CG_TOL
    max_iter: int | None = None

    @property
    def size(self) -> int:
        return self.mass.shape[0]

    @property
    def M(self) -> sp.dia_matrix:
        return sp.diags(self.mass)

    @property
    def max_iterations(self) -> int:
        return self.max_iter if self.max_iter is not None else 10 * self.size

    def with_solver(self, tol_cg=None, max_iter=None) -> "FormPair":
        return FormPair(
            self.A,
            self.mass,
            self.potential,
            self.tol_cg if tol_cg is None else tol_cg,
            self.max_iter if max_iter is None else max_iter,
        )

    @cached_property
    def _coo(self):
        return self.A.tocoo()

    def scaled(self, c: float) -> "FormPair":
        """(cA, cM); eigenvalues and Rayleigh quotients are unchanged."""
        return FormPair((c * self.A).tocsr(), c * self.mass, self.potential, self.tol_cg, self.max_iter)


def assemble(mesh: Mesh, V, tol_cg: float = DEFAULT_CG_TOL, max_iter: int | None = None) -> FormPair:
    V = np.asarray(V, dtype=float)
    if V.shape != (mesh.size,):
        raise ContractError(f"potential has shape {V.shape}, expected ({mesh.size},)")
    if V.min() <= 0:
        raise HypothesisViolation(f"potential must be strictly positive; min value is {V.min()!r}")
    A = (stiffness(mesh) + sp.diags(V * mesh.weights)).tocsr()
    A.sort_indices()
    mass = np.array(mesh.weights, dtype=float)
    mass.setflags(write=False)
    return FormPair(A=A, mass=mass, potential=V, tol_cg=tol_cg, max_iter=max_iter)


def _check_pair(fp: FormPair, u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape[0] != fp.size or v.shape[0] != fp.size:
        raise ContractError(f"field sizes {u.shape[0]}, {v.shape[0]} do not match form size {fp.size}")
    return u, v


def inner_h1v(fp: FormPair, u, v) -> float:
    u, v = _check_pair(fp, u, v)
    # u·(Av) and v·(Au) round differently; the symmetrised entrywise sum
    # below is bit-identical under swapping u and v.
    coo = fp._coo
    terms = coo.data * (u[coo.row] * v[coo.col] + u[coo.col] * v[coo.row])
    return float(0.5 * np.sum(terms))


def inner_l2(fp: FormPair, u, v) -> float:
    u, v = _check_pair(fp, u, v)
    return float(np.sum(fp.mass * (u * v)))


def norm_h1v(fp: FormPair, u) -> float:
    u = np.asarray(u, dtype=float)
    return float(np.sqrt(max(u @ (fp.A @ u), 0.0)))


def norm_l2(fp: FormPair, u) -> float:
    u = np.asarray(u, dtype=float)
    return float(np.sqrt(np.sum(fp.mass * u * u)))


def pcg(A, B, precond, tol, max_iter):
    """Jacobi-preconditioned conjugate gradients on every column of ``B``.

    Columns converge independently; a column is done once its true residual
    satisfies ``‖A x - b‖ <= tol·‖b‖``.  Returns ``(X, iterations, rel_res)``.
    """
    B = np.asarray(B, dtype=float)
    squeeze = B.ndim == 1
    if squeeze:
        B = B[:, None]
    X = np.zeros_like(B)
    bnorm = np.linalg.norm(B, axis=0)
    rel = np.zeros(B.shape[1])
    todo = np.flatnonzero(bnorm > 0)
    total_iter = 0
    # restart on the true residual guards against drift of the recursive one
    for _restart in range(4):
        if todo.size == 0:
            break
        R = B[:, todo] - A @ X[:, todo]
        Xa = X[:, todo].copy()
        bn = bnorm[todo]
        active = np.arange(todo.size)
        Z = R * precond[:, None]
        P = Z.copy()
        rz = np.einsum("ij,ij->j", R, Z)
        it = 0
        while active.size and it < max_iter:
            AP = A @ P
            pap = np.einsum("ij,ij->j", P, AP)
            alpha = rz / pap
            Xa[:, active] += alpha * P
            R -= alpha * AP
            it += 1
            rn = np.linalg.norm(R, axis=0)
            keep = rn > 0.5 * tol * bn[active]
            if not keep.all():
                active, R, P, rz = active[keep], R[:, keep], P[:, keep], rz[keep]
                if not active.size:
                    break
            Z = R * precond[:, None]
            rz_new = np.einsum("ij,ij->j", R, Z)
            P = Z + (rz_new / rz) * P
            rz = rz_new
        total_iter += it
        X[:, todo] = Xa
        true = np.linalg.norm(B[:, todo] - A @ X[:, todo], axis=0) / bnorm[todo]
        rel[todo] = true
        todo = todo[true > tol]
        if it >= max_iter:
            break
    if todo.size:
        raise SolverError(
            f"CG did not reach relative residual {tol:g} within {max_iter} iterations",
            residual=float(rel[todo].max()),
            diagnostics={"iterations": total_iter, "unconverged_columns": todo.tolist()},
        )
    if squeeze:
        return X[:, 0], total_iter, float(rel[0])
    return X, total_iter, rel


def apply_resolvent(fp: FormPair, hfield) -> np.ndarray:
    """Solve ``A w = M h`` by preconditioned CG.

    This is the weak solution operator ⟨R h, φ⟩ = ⟨h, φ⟩_{L²} for all φ.
    ``hfield`` may be a single field or an ``(N, k)`` block of fields.
    """
    h = np.asarray(hfield, dtype=float)
    if h.shape[0] != fp.size:
        raise ContractError(f"field has {h.shape[0]} entries, expected {fp.size}")
    rhs = fp.mass * h if h.ndim == 1 else fp.mass[:, None] * h
    return solve_form(fp, rhs)


def solve_form(fp: FormPair, rhs) -> np.ndarray:
    """Solve ``A w = rhs`` (rhs already in dual, i.e. mass-weighted, form)."""
    precond = 1.0 / fp.A.diagonal()
    X, _, _ = pcg(fp.A, rhs, precond, fp.tol_cg, fp.max_iterations)
    return X
