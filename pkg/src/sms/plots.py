"""Deterministic SVG figures for spectra and scans."""

from __future__ import annotations

import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .grid import Mesh  # noqa: E402

_RC = {"svg.hashsalt": "sms", "svg.fonttype": "none", "path.simplify": False}


def _profile(mesh: Mesh, w) -> tuple[np.ndarray, np.ndarray]:
    """Values along the first axis through the centre of the box."""
    w = np.asarray(w).reshape(mesh.shape)
    mid = mesh.n // 2
    while w.ndim > 1:
        w = w[..., mid]
    return mesh.axis, w


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def plot_eigenfunctions(mesh: Mesh, ed, path, count: int = 4) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for k in range(min(count, ed.count)):
            x, y = _profile(mesh, ed.vectors[:, k])
            ax.plot(x, y, lw=1.2, label=f"e{k + 1}, lambda={ed.eigenvalues[k]:.6g}")
        ax.set_xlabel("x")
        ax.set_title("eigenfunction profiles")
        ax.legend(fontsize=7)
        return _save(fig, Path(path))


def emit_plot(report, path) -> Path | None:
    """Solution profiles of the row nearest λ_k and the margin-vs-λ curve.

    An empty report is skipped with a warning.
    """
    if report is None or not report.rows:
        warnings.warn("empty report: nothing to plot", stacklevel=2)
        return None
    row = report.nearest()
    sols = [s for s in (row.summary.solutions if row.summary else []) if s.nontrivial]
    mesh = report.problem.mesh
    with plt.rc_context(_RC):
        ncols = 2 if sols else 1
        fig, axes = plt.subplots(1, ncols, figsize=(5.5 * ncols, 4), squeeze=False)
        ax = axes[0, 0]
        lam = np.array([r.lam for r in report.rows])
        margin = np.array([r.margin for r in report.rows])
        ax.plot(lam, margin, "o-", lw=1.2)
        ax.axhline(0.0, color="0.6", lw=0.8)
        ax.axvline(report.split.lam_k, color="0.3", lw=0.8, ls="--")
        ax.set_xlabel("lambda")
        ax.set_ylabel("geometry margin")
        ax.set_title("margin vs lambda")
        if sols:
            ax = axes[0, 1]
            for s in sols:
                x, y = _profile(mesh, s.w)
                ax.plot(x, y, lw=1.2, label=f"sol {s.solution_id}, J={s.energy:.4g}")
            ax.set_xlabel("x")
            ax.set_title(f"solutions at lambda={row.lam:.6g}")
            ax.legend(fontsize=7)
        fig.tight_layout()
        return _save(fig, Path(path))
