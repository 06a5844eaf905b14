"""Eigenpairs of -Δ + V by deflated Rayleigh-quotient minimisation.

The solver is a block inverse iteration: each sweep applies the resolvent
to the active block, removes the M-projection onto already locked
eigenvectors, and performs a Rayleigh-Ritz step on what is left.  The
lowest Ritz pairs whose residual falls below ``tol`` are locked in order,
so eigenvalue ``k+1`` is always the minimum of the Rayleigh quotient on the
M-orthogonal complement of e_1..e_k.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .errors import ContractError, SolverError
from .operators import FormPair, solve_form
from .report import Report

log = logging.getLogger(__name__)

CLUSTER_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    eigenvalues: np.ndarray
    vectors: np.ndarray  # (N, m), columns M-orthonormal
    residuals: np.ndarray
    groups: tuple[tuple[int, int], ...]
    iterations: int = 0

    @property
    def count(self) -> int:
        return self.eigenvalues.shape[0]

    def vector(self, k: int) -> np.ndarray:
        """e_k with the 1-based index used throughout the package."""
        if not 1 <= k <= self.count:
            raise ContractError(f"eigen index {k} outside 1..{self.count}")
        return self.vectors[:, k - 1]

    def basis(self, k: int) -> np.ndarray:
        """Columns e_1..e_k spanning E_k."""
        if not 0 <= k <= self.count:
            raise ContractError(f"E_{k} needs {k} eigenpairs, only {self.count} computed")
        return self.vectors[:, :k]


def relative_residuals(fp: FormPair, values, vectors) -> np.ndarray:
    """‖A e - λ M e‖_{M^-1} / (λ ‖e‖_M) for each column."""
    R = fp.A @ vectors - (fp.mass[:, None] * vectors) * values
    num = np.sqrt(np.sum(R * R / fp.mass[:, None], axis=0))
    den = np.abs(values) * np.sqrt(np.sum(fp.mass[:, None] * vectors * vectors, axis=0))
    return num / den


def _m_orthonormal_basis(Y, mass, drop=1e-13):
    G = Y.T @ (mass[:, None] * Y)
    G = 0.5 * (G + G.T)
    w, U = la.eigh(G)
    keep = w > drop * w.max()
    return Y @ (U[:, keep] / np.sqrt(w[keep]))


def _deflate(Y, locked, mass):
    if locked.shape[1] == 0:
        return Y
    # classical Gram-Schmidt twice is enough for M-orthogonality to rounding
    for _ in range(2):
        Y = Y - locked @ (locked.T @ (mass[:, None] * Y))
    return Y


def _fix_signs(vectors, mass):
    out = vectors.copy()
    if out.shape[1]:
        if np.sum(mass * out[:, 0]) < 0:
            out[:, 0] *= -1
    for j in range(1, out.shape[1]):
        col = out[:, j]
        big = np.flatnonzero(np.abs(col) > 1e-8 * np.abs(col).max())
        if big.size and col[big[0]] < 0:
            out[:, j] *= -1
    return out


def compute_eigenpairs(
    fp: FormPair,
    m: int,
    tol: float = 1e-9,
    *,
    block: int | None = None,
    max_sweeps: int = 2000,
    seed: int = 0,
    cluster_tol: float = CLUSTER_TOL,
) -> EigenDecomposition:
    """Lowest ``m`` eigenpairs of ``A e = λ M e``.

    ``tol`` bounds the relative residual (see :func:`relative_residuals`).
    e_1 is returned with nonnegative weighted mean; every other e_k has its
    first significant entry positive.
    """
    N = fp.size
    if not 1 <= m <= N:
        raise ContractError(f"requested {m} eigenpairs from a space of dimension {N}")
    b = min(N, max(m + 6, int(1.5 * m) + 4) if block is None else block)
    rng = np.random.default_rng(seed)
    mass = np.asarray(fp.mass)
    locked = np.zeros((N, 0))
    locked_vals: list[float] = []
    X = rng.standard_normal((N, b))
    res = np.array([np.inf])
    for sweep in range(1, max_sweeps + 1):
        Y = solve_form(fp, mass[:, None] * X) if sweep > 1 else X
        Y = _deflate(Y, locked, mass)
        Q = _m_orthonormal_basis(Y, mass)
        H = Q.T @ (fp.A @ Q)
        theta, S = la.eigh(0.5 * (H + H.T))
        X = Q @ S
        res = relative_residuals(fp, theta, X)
        need = m - locked.shape[1]
        n_lock = 0
        while n_lock < min(need, len(theta)) and res[n_lock] <= tol:
            n_lock += 1
        if X.shape[1] + locked.shape[1] == N:
            # the block spans the whole complement: Ritz pairs are exact
            n_lock = min(need, X.shape[1])
        if n_lock:
            locked = np.hstack([locked, X[:, :n_lock]])
            locked_vals.extend(theta[:n_lock])
            X = X[:, n_lock:]
            log.debug("sweep %d: locked %d pairs (total %d)", sweep, n_lock, locked.shape[1])
        if locked.shape[1] >= m:
            break
        if X.shape[1] == 0:
            break
    else:
        raise SolverError(
            f"eigensolver locked {locked.shape[1]} of {m} pairs in {max_sweeps} sweeps",
            residual=float(res.min()) if res.size else None,
            diagnostics={"locked": list(locked_vals), "ritz_residuals": res.tolist()},
        )
    # one final Rayleigh-Ritz over the locked space restores exact A-orthogonality
    Q = _m_orthonormal_basis(locked[:, :m], mass)
    H = Q.T @ (fp.A @ Q)
    theta, S = la.eigh(0.5 * (H + H.T))
    vecs = _fix_signs(Q @ S, mass)
    residuals = relative_residuals(fp, theta, vecs)
    return EigenDecomposition(
        eigenvalues=theta,
        vectors=vecs,
        residuals=residuals,
        groups=tuple(group_multiplicities(theta, cluster_tol)),
        iterations=sweep,
    )


def group_multiplicities(eigenvalues, cluster_tol: float = CLUSTER_TOL) -> list[tuple[int, int]]:
    """Maximal clusters ``λ_k = … = λ_{k+h}`` as 1-based ``(k, h)`` pairs.

    Neighbours join a cluster when their gap relative to the larger value is
    at most ``cluster_tol``.
    """
    lam = np.asarray(getattr(eigenvalues, "eigenvalues", eigenvalues), dtype=float)
    groups = []
    start = 0
    for i in range(1, lam.size + 1):
        if i == lam.size or (lam[i] - lam[i - 1]) > cluster_tol * max(abs(lam[i]), abs(lam[i - 1])):
            groups.append((start + 1, i - 1 - start))
            start = i
    return groups


def group_containing(ed: EigenDecomposition, k: int) -> tuple[int, int]:
    for g in ed.groups:
        if g[0] <= k <= g[0] + g[1]:
            return g
    raise ContractError(f"index {k} is outside the computed spectrum")


def positive_negative_parts(w) -> tuple[np.ndarray, np.ndarray]:
    w = np.asarray(w, dtype=float)
    return np.maximum(w, 0.0), np.minimum(w, 0.0)


def poincare_margin(ed: EigenDecomposition, fp: FormPair, w, k: int, side: str) -> float:
    """Slack in the generalised Poincaré inequalities.

    lower: w ⟂ E_k gives ‖w‖² - λ_{k+1}‖w‖²_{L²} >= 0;
    upper: w ∈ E_k gives λ_k‖w‖²_{L²} - ‖w‖² >= 0.
    """
    w = np.asarray(w, dtype=float)
    l2 = float(np.sum(fp.mass * w * w))
    h1 = float(w @ (fp.A @ w))
    if side == "lower":
        if not 0 <= k < ed.count:
            raise ContractError(f"lower margin needs λ_{k + 1}; {ed.count} pairs computed")
        return h1 - ed.eigenvalues[k] * l2
    if side == "upper":
        if not 1 <= k <= ed.count:
            raise ContractError(f"upper margin needs λ_{k}; {ed.count} pairs computed")
        return ed.eigenvalues[k - 1] * l2 - h1
    raise ContractError(f"side must be 'upper' or 'lower', got {side!r}")


def project_onto_span(fp: FormPair, basis, w) -> np.ndarray:
    """L²-orthogonal projection onto span(basis); basis must be M-orthonormal."""
    return basis @ (basis.T @ (fp.mass * w))


def rayleigh_minimum_on_complement(fp: FormPair, basis, tol: float = 1e-9, seed: int = 1):
    """min of ‖w‖²/‖w‖²_{L²} over the M-orthogonal complement of span(basis).

    Independent of :func:`compute_eigenpairs`: LOBPCG with the explicit
    constraint set, preconditioned by a sparse LU factorisation of A.
    Returns ``(value, minimiser)``.
    """
    N = fp.size
    basis = np.asarray(basis, dtype=float).reshape(N, -1)
    lu = spla.splu(fp.A.tocsc())
    prec = spla.LinearOperator((N, N), matvec=lu.solve, matmat=lu.solve, dtype=float)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((N, 3))
    Y = basis if basis.shape[1] else None
    vals, vecs = spla.lobpcg(
        fp.A, X, B=fp.M, M=prec, Y=Y, tol=tol, maxiter=500, largest=False, verbosityLevel=0
    )
    i = int(np.argmin(vals))
    return float(vals[i]), vecs[:, i]


def verify_spectral_axioms(
    ed: EigenDecomposition,
    fp: FormPair,
    *,
    orth_tol: float = 1e-8,
    sign_tol: float = 1e-10,
    identity_tol: float = 1e-9,
    min_gap: float = 0.0,
    residual_tol: float = 1e-6,
) -> Report:
    E = ed.vectors
    report = Report("spectral axioms")
    G_l2 = E.T @ (fp.mass[:, None] * E)
    G_h1 = E.T @ (fp.A @ E)
    off = ~np.eye(ed.count, dtype=bool)
    max_l2 = float(np.abs(G_l2[off]).max()) if ed.count > 1 else 0.0
    # scale the H^1_V Gram matrix by sqrt(λ_i λ_j) so the tolerance is unit-free
    scale = np.sqrt(np.outer(np.abs(ed.eigenvalues), np.abs(ed.eigenvalues)))
    max_h1 = float(np.abs(G_h1[off] / scale[off]).max()) if ed.count > 1 else 0.0
    report.at_most("l2_orthogonality", max_l2, orth_tol)
    report.at_most("h1v_orthogonality", max_h1, orth_tol)
    norm_dev = float(np.abs(np.diag(G_l2) - 1.0).max())
    report.at_most("l2_normalisation", norm_dev, orth_tol)
    e1 = E[:, 0]
    report.at_least("min_e1_nodal", float(e1.min() / np.abs(e1).max()), -sign_tol, "relative to max|e1|")
    report.at_least("lambda1_positive", float(ed.eigenvalues[0]), 0.0)
    if ed.count > 1:
        gap = float(ed.eigenvalues[1] - ed.eigenvalues[0])
        report.add("lambda1_simple_gap", gap, min_gap, gap > min_gap)
    identity = np.abs(ed.eigenvalues - np.diag(G_h1)) / np.abs(ed.eigenvalues)
    report.at_most("eigen_identity", float(identity.max()), identity_tol, "|λ_k - ‖e_k‖²| / λ_k")
    report.at_most("max_residual", float(ed.residuals.max()), residual_tol, "relative")
    return report
