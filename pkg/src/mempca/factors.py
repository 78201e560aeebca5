"""Principal-component factor series and sparse per-asset loadings.

Each asset's residual series is regressed on the component series with
an L1-penalized least-squares fit (cyclic coordinate descent on the
Gram/cross-product statistics). The penalty is chosen per asset by
contiguous-block cross-validation over a descending log-spaced grid,
picking the largest penalty whose mean out-of-fold error is within one
standard error of the minimum (the most parsimonious model that is
statistically indistinguishable from the best).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .errors import ConvergenceError
from .folds import contiguous_blocks
from .panel import StandardizedPanel
from .spectra import EigenSystem

CD_TOL = 1e-7
CD_MAX_SWEEPS = 10_000
GRID_SIZE = 100
GRID_FLOOR = 1e-4
SE_FACTOR = 1.0


@dataclass
class ComponentSeries:
    """T x m matrix of factor series, column p = panel projected on eigenvector p."""

    values: np.ndarray
    source: str

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def n_components(self) -> int:
        return self.values.shape[1]


@dataclass
class LoadingMatrix:
    """Per-asset penalized loadings on the factor series."""

    betas: np.ndarray      # (N, m_max)
    penalty: np.ndarray    # (N,) chosen penalty per asset
    fit_stats: np.ndarray  # (N,) in-sample mean squared error
    column_ids: list[str]


def component_series(residuals: StandardizedPanel, eigs: EigenSystem, m_max: int) -> ComponentSeries:
    """Project the residual panel onto the top m_max eigenvectors."""
    if not 1 <= m_max <= eigs.n:
        raise ValueError(f"m_max must be in [1, {eigs.n}], got {m_max}")
    if residuals.n_cols != eigs.n:
        raise ValueError("panel width does not match the eigensystem")
    return ComponentSeries(residuals.matrix @ eigs.eigenvectors[:, :m_max],
                           source=f"eigensystem[{eigs.n}]")


# ---------------------------------------------------------------------------
# coordinate descent on Gram statistics


@njit(cache=True, parallel=True)
def _cd_paths(gram, diag, bvecs, grids, tol, max_sweeps):
    """Penalty paths for many targets sharing one Gram matrix.

    gram: (p, p) = (1/T) F'F; bvecs: (n, p) = (1/T) F'c per target;
    grids: (n, nu) descending penalty values per target. Returns the
    (n, nu, p) solutions and an (n, nu) sweep count (-1 = not converged).
    """
    n, p = bvecs.shape
    nu = grids.shape[1]
    betas = np.zeros((n, nu, p))
    sweeps = np.zeros((n, nu), dtype=np.int64)
    for i in prange(n):
        beta = np.zeros(p)
        for u in range(nu):
            thr = grids[i, u] / 2.0
            it = 0
            converged = False
            while it < max_sweeps:
                delta = 0.0
                for j in range(p):
                    if diag[j] <= 0.0:
                        continue
                    rho = bvecs[i, j] + diag[j] * beta[j]
                    for k in range(p):
                        rho -= gram[j, k] * beta[k]
                    mag = abs(rho) - thr
                    if mag > 0.0:
                        new = mag / diag[j]
                        if rho < 0.0:
                            new = -new
                    else:
                        new = 0.0
                    step = abs(new - beta[j])
                    if step > delta:
                        delta = step
                    beta[j] = new
                it += 1
                if delta < tol:
                    converged = True
                    break
            sweeps[i, u] = it if converged else -1
            betas[i, u] = beta
    return betas, sweeps


def _gram_stats(F: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(1/T) F'F and (1/T) F'C for a block of rows."""
    T = F.shape[0]
    gram = F.T @ F / T
    bvecs = (F.T @ targets / T).T  # (n_targets, p)
    return gram, bvecs


def _run_paths(gram, bvecs, grids, context=""):
    # contiguous inputs keep the jitted kernel on one cached signature
    betas, sweeps = _cd_paths(np.ascontiguousarray(gram),
                              np.ascontiguousarray(np.diag(gram)),
                              np.ascontiguousarray(bvecs),
                              np.ascontiguousarray(grids),
                              CD_TOL, CD_MAX_SWEEPS)
    if (sweeps < 0).any():
        rows = np.unique(np.nonzero(sweeps < 0)[0])
        raise ConvergenceError(
            f"coordinate descent hit the {CD_MAX_SWEEPS}-sweep budget"
            f"{' (' + context + ')' if context else ''} for targets {rows.tolist()}",
            last_iterate=betas)
    return betas


def upsilon_max(bvec: np.ndarray) -> float:
    """Smallest penalty that zeroes every coefficient: 2 max_p |(1/T) F_p'c|."""
    return 2.0 * float(np.abs(bvec).max())


def penalty_grid(up_max: float, n_grid: int = GRID_SIZE, floor: float = GRID_FLOOR) -> np.ndarray:
    """Descending log-spaced grid from up_max down to floor * up_max."""
    if n_grid < 1:
        raise ValueError("n_grid must be >= 1")
    if up_max <= 0.0:
        return np.zeros(n_grid)
    if n_grid == 1:
        return np.array([up_max])
    return np.geomspace(up_max, floor * up_max, n_grid)


def lasso_fit(target: np.ndarray, factors: ComponentSeries, upsilon: float) -> np.ndarray:
    """L1-penalized least-squares coefficients of one series on the factors."""
    if upsilon < 0:
        raise ValueError("the penalty must be non-negative")
    target = np.asarray(target, dtype=float)
    if target.shape != (factors.n_obs,):
        raise ValueError(f"target length {target.shape} does not match factors T={factors.n_obs}")
    gram, bvecs = _gram_stats(factors.values, target[:, None])
    betas = _run_paths(gram, bvecs, np.array([[upsilon]]))
    return betas[0, 0]


def _cv_fold_errors(C: np.ndarray, F: np.ndarray, grids: np.ndarray,
                    folds: int) -> np.ndarray:
    """Mean out-of-fold squared error per (fold, target, grid point).

    Errors are evaluated from the held-out block's Gram statistics,
    which equals the direct mean of squared prediction errors.
    """
    T = F.shape[0]
    out = np.empty((folds, C.shape[1], grids.shape[1]))
    for g, (start, stop) in enumerate(contiguous_blocks(T, folds)):
        train = np.r_[0:start, stop:T]
        F_tr, C_tr = F[train], C[train]
        F_te, C_te = F[start:stop], C[start:stop]
        gram_tr, b_tr = _gram_stats(F_tr, C_tr)
        betas = _run_paths(gram_tr, b_tr, grids, context=f"fold {g}")
        gram_te, b_te = _gram_stats(F_te, C_te)
        mean_sq = (C_te**2).mean(axis=0)
        cross = (betas * b_te[:, None, :]).sum(axis=-1)
        quad = ((betas @ gram_te) * betas).sum(axis=-1)
        out[g] = mean_sq[:, None] - 2.0 * cross + quad
    return out


def _select_grid_index(fold_err: np.ndarray) -> np.ndarray:
    """Largest penalty within SE_FACTOR standard errors of the CV minimum.

    fold_err: (folds, n, nu) with the grid in descending-penalty order.
    Returns the chosen grid index per target.
    """
    folds = fold_err.shape[0]
    mean_err = fold_err.mean(axis=0)
    idx = np.arange(mean_err.shape[0])
    amin = mean_err.argmin(axis=1)
    if folds > 1:
        se = fold_err[:, idx, amin].std(axis=0, ddof=1) / np.sqrt(folds)
    else:
        se = np.zeros(idx.size)
    threshold = mean_err[idx, amin] + SE_FACTOR * se
    return (mean_err <= threshold[:, None]).argmax(axis=1)


def select_penalty(target: np.ndarray, factors: ComponentSeries, folds: int = 10,
                   n_grid: int = GRID_SIZE, grid_floor: float = GRID_FLOOR) -> float:
    """Cross-validated penalty for one target series.

    Contiguous time blocks keep the serial dependence of the data intact.
    """
    target = np.asarray(target, dtype=float)
    T = factors.n_obs
    if target.shape != (T,):
        raise ValueError(f"target length {target.shape} does not match factors T={T}")
    if T < 10 * folds:
        raise ValueError(f"need T >= {10 * folds} observations for {folds}-fold selection, got {T}")
    _, bvec = _gram_stats(factors.values, target[:, None])
    grid = penalty_grid(upsilon_max(bvec[0]), n_grid, grid_floor)
    fold_err = _cv_fold_errors(target[:, None], factors.values, grid[None, :], folds)
    pick = _select_grid_index(fold_err)[0]
    return float(grid[pick])


def fit_all_loadings(residuals: StandardizedPanel, factors: ComponentSeries,
                     folds: int = 10, n_grid: int = GRID_SIZE,
                     grid_floor: float = GRID_FLOOR) -> LoadingMatrix:
    """Per-asset penalty selection and final fit for the whole panel.

    Identical in law to running select_penalty + lasso_fit asset by
    asset; the assets share the fold layout and Gram matrices, so the
    whole panel is solved in one batched pass.
    """
    C = residuals.matrix
    F = factors.values
    T, n_assets = C.shape
    if F.shape[0] != T:
        raise ValueError("residual panel and factor series disagree on T")
    if T < 10 * folds:
        raise ValueError(f"need T >= {10 * folds} observations for {folds}-fold selection, got {T}")

    gram, bvecs = _gram_stats(F, C)
    up_max = 2.0 * np.abs(bvecs).max(axis=1)
    ratios = penalty_grid(1.0, n_grid, grid_floor) if n_grid > 1 else np.ones(1)
    grids = up_max[:, None] * ratios[None, :]

    fold_err = _cv_fold_errors(C, F, grids, folds)
    picks = _select_grid_index(fold_err)
    chosen = grids[np.arange(n_assets), picks]

    betas = _run_paths(gram, bvecs, chosen[:, None], context="final refit")[:, 0, :]
    resid = C - F @ betas.T
    mse = (resid**2).mean(axis=0)
    return LoadingMatrix(betas, chosen, mse, list(residuals.column_ids))


def lasso_objective(target: np.ndarray, F: np.ndarray, beta: np.ndarray, upsilon: float) -> float:
    """(1/T)||c - F beta||^2 + upsilon * ||beta||_1 (for descent checks)."""
    resid = target - F @ beta
    return float(resid @ resid / F.shape[0] + upsilon * np.abs(beta).sum())
