"""Eigen-portfolio identities, minimum-variance weights, sector projections."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, PipelineError, SingularMatrixError
from .panel import StandardizedPanel
from .spectra import CorrelationMatrix

VARIANCE_TOL = 1e-8


def eigen_portfolio_variance(panel: StandardizedPanel, w: np.ndarray, lam: float) -> float:
    """Variance of the eigenvector-weighted portfolio; must equal the eigenvalue."""
    w = np.asarray(w, dtype=float)
    if w.shape != (panel.n_cols,):
        raise ValueError(f"weights have shape {w.shape}, panel has {panel.n_cols} columns")
    series = panel.matrix @ w
    var = float(series @ series) / panel.n_obs
    if abs(var - lam) > VARIANCE_TOL * max(1.0, abs(lam)):
        raise ConsistencyError(
            f"portfolio variance {var:.12g} disagrees with eigenvalue {lam:.12g}; "
            "the eigendecomposition and the panel are inconsistent")
    return var


def markowitz_weights(corr: CorrelationMatrix, R: np.ndarray, delta: float) -> np.ndarray:
    """Minimum-variance weights Delta * C^-1 R / (R' C^-1 R), via a linear solve."""
    R = np.asarray(R, dtype=float)
    C = corr.entries
    if R.shape != (C.shape[0],):
        raise ValueError(f"return vector has shape {R.shape}, matrix is {C.shape}")
    if not np.any(R):
        raise ValueError("return vector must be nonzero")
    min_eig = float(np.linalg.eigvalsh(C).min())
    if min_eig <= 1e-10:
        raise SingularMatrixError(
            f"correlation matrix is numerically singular (min eigenvalue {min_eig:.3e}); "
            "consider spectral cleaning before optimizing weights")
    y = np.linalg.solve(C, R)
    return delta * y / float(R @ y)


@dataclass
class SectorProjection:
    """Group-averaged eigenvector mass, normalized to sum to one."""

    rho: np.ndarray
    raw: np.ndarray
    groups: list[str]

    def validate(self) -> "SectorProjection":
        if abs(self.rho.sum() - 1.0) > 1e-10:
            raise ValueError(f"normalized projection sums to {self.rho.sum()}, not 1")
        return self


def sector_projection(v: np.ndarray, groups) -> SectorProjection:
    """Project an eigenvector onto group averages and normalize.

    raw[g] is the mean eigenvector entry over the assets in group g; rho
    divides by the total over groups. A sign-mixed eigenvector can make
    that total zero, in which case the normalization is undefined and
    reported as an error rather than silently patched.
    """
    v = np.asarray(v, dtype=float)
    groups = list(groups)
    if len(groups) != v.size:
        raise ValueError(f"{len(groups)} labels for {v.size} assets")
    names = sorted(set(groups))
    raw = np.array([v[np.asarray(groups) == g].mean() for g in names])
    total = float(raw.sum())
    if total == 0.0:
        raise PipelineError("projection normalization is zero; rho is undefined for this eigenvector")
    return SectorProjection(raw / total, raw, names).validate()
