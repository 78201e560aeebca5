"""Reference stopping rules: cumulative explained variance and PRESS.

Both operate on the same detrended panel as the memory-based selector,
so timed comparisons measure each method end to end from the common
input. PRESS performs one least-squares regression per asset and
per component count in every fold, the cost structure this family of
cross-validation rules is known for.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import detrend as _detrend
from . import factors as _factors
from . import memory as _memory
from . import spectra as _spectra
from .errors import StageError
from .folds import contiguous_blocks
from .panel import StandardizedPanel


@dataclass
class CumVarCurve:
    """Cumulative percentage of variation explained, m = 1..N."""

    lambda_curve: np.ndarray

    def validate(self) -> "CumVarCurve":
        if np.any(np.diff(self.lambda_curve) < 0):
            raise ValueError("cumulative curve must be non-decreasing")
        if abs(self.lambda_curve[-1] - 100.0) > 1e-8:
            raise ValueError(f"curve must reach 100 at m=N, got {self.lambda_curve[-1]}")
        return self


def cumulative_variance(eigs: _spectra.EigenSystem) -> CumVarCurve:
    """100 * cumulative eigenvalue sum / N (the trace of a correlation matrix)."""
    return CumVarCurve(100.0 * np.cumsum(eigs.eigenvalues) / eigs.n).validate()


def select_by_cumvar(curve: CumVarCurve, alpha: float) -> int:
    """Smallest m whose cumulative percentage exceeds alpha."""
    if not 0.0 < alpha < 100.0:
        raise ValueError(f"alpha must be in (0, 100), got {alpha}")
    return int(np.argmax(curve.lambda_curve > alpha)) + 1


def cumvar_bracket(eigs: _spectra.EigenSystem, m_max: int,
                   alphas: tuple[float, float] = (70.0, 90.0)) -> tuple[int, int]:
    """Cutoff counts with the variance budget restricted to the m_max pool.

    The heuristic rule is applied inside the candidate pool of
    informative components (eigenvalues above the fitted bulk edge):
    the cumulative sum is renormalized by the pool total, and the
    crossings of the two thresholds bracket the defensible counts. On
    the full trace the thresholds would land deep inside the noise bulk.
    """
    if not 1 <= m_max <= eigs.n:
        raise ValueError(f"m_max must be in [1, {eigs.n}], got {m_max}")
    pool = eigs.eigenvalues[:m_max]
    frac = 100.0 * np.cumsum(pool) / pool.sum()
    lo = int(np.argmax(frac > alphas[0])) + 1
    hi = int(np.argmax(frac > alphas[1])) + 1
    return lo, hi


# ---------------------------------------------------------------------------
# PRESS


@dataclass
class PressCurve:
    """Out-of-sample squared prediction error per component count."""

    press: np.ndarray                      # (m_max + 1,), index = m
    fold_layout: list[tuple[int, int]]
    argmin_m: int

    def validate(self) -> "PressCurve":
        if np.any(self.press < 0) or not np.all(np.isfinite(self.press)):
            raise ValueError("PRESS values must be finite and non-negative")
        if int(np.argmin(self.press)) != self.argmin_m:
            raise ValueError("argmin inconsistent with the stored curve")
        return self


def _press_fold(X_train: np.ndarray, X_test: np.ndarray, m_max: int,
                regression: str = "ols", folds_inner: int = 10) -> np.ndarray:
    """Squared prediction error on one held-out block for m = 0..m_max.

    The training rows define the correlation matrix and its leading
    eigenvectors; factor series for the held-out block use those same
    eigenvectors. For every m the per-asset coefficients are re-fit on
    the training rows (one regression per asset), then the block is
    predicted as the factor combination.
    """
    T_tr = X_train.shape[0]
    corr = X_train.T @ X_train / T_tr
    corr = (corr + corr.T) / 2.0
    w, v = np.linalg.eigh(corr)
    order = np.argsort(w)[::-1]
    vectors = _spectra._fix_signs(v[:, order[:m_max]])
    I_tr = X_train @ vectors
    I_te = X_test @ vectors

    n_assets = X_train.shape[1]
    out = np.empty(m_max + 1)
    out[0] = float((X_test**2).sum())
    for m in range(1, m_max + 1):
        design = I_tr[:, :m]
        if regression == "lasso":
            betas = _press_lasso_betas(design, X_train, folds_inner)
        else:
            betas = np.empty((m, n_assets))
            for i in range(n_assets):
                betas[:, i] = np.linalg.lstsq(design, X_train[:, i], rcond=None)[0]
        pred = I_te[:, :m] @ betas
        out[m] = float(((pred - X_test) ** 2).sum())
    return out


def _press_lasso_betas(design: np.ndarray, targets: np.ndarray, folds: int) -> np.ndarray:
    """Penalized per-asset coefficients for the lasso PRESS variant."""
    T = design.shape[0]
    gram, bvecs = _factors._gram_stats(design, targets)
    up_max = 2.0 * np.abs(bvecs).max(axis=1)
    ratios = _factors.penalty_grid(1.0)
    grids = up_max[:, None] * ratios[None, :]
    fold_err = _factors._cv_fold_errors(targets, design, grids, folds)
    picks = _factors._select_grid_index(fold_err)
    chosen = grids[np.arange(targets.shape[1]), picks]
    return _factors._run_paths(gram, bvecs, chosen[:, None])[:, 0, :].T


def press_crossval(panel: StandardizedPanel, m_max: int, folds: int = 10,
                   regression: str = "ols") -> PressCurve:
    """Contiguous-block cross-validated PRESS(m) for m = 0..m_max."""
    X = panel.matrix
    T = X.shape[0]
    if m_max < 1:
        raise ValueError("m_max must be at least 1")
    if T < 2 * folds:
        raise ValueError(f"need T >= {2 * folds} rows for {folds} folds, got {T}")
    layout = contiguous_blocks(T, folds)
    smallest = min(stop - start for start, stop in layout)
    if smallest < m_max:
        raise ValueError(f"smallest fold has {smallest} rows, fewer than m_max={m_max}")

    total = np.zeros(m_max + 1)
    for start, stop in layout:
        train = np.r_[0:start, stop:T]
        total += _press_fold(X[train], X[start:stop], m_max, regression)
    return PressCurve(total, layout, int(np.argmin(total))).validate()


# ---------------------------------------------------------------------------
# timed comparison


def timed_compare(panel: StandardizedPanel, methods: tuple[str, ...] = ("memory", "cumvar", "press"),
                  folds: int = 10, press_regression: str = "ols",
                  select_kwargs: dict | None = None) -> dict:
    """Run the selected stopping rules on one panel and time each end to end.

    Every method is timed from the shared standardized log-volatility
    panel, including its own detrending and spectrum work, with the
    other methods quiescent. Failures leave a marker instead of a
    result so partial reports remain valid.
    """
    report: dict[str, dict] = {}
    select_kwargs = select_kwargs or {}

    def _detrended():
        eigs_e = _spectra.eigendecompose(_spectra.correlation(panel))
        i0 = _detrend.market_mode(panel, eigs_e.eigenvectors[:, 0])
        _, resid = _detrend.detrend_market(panel, i0)
        eigs_g = _spectra.eigendecompose(_spectra.correlation(resid))
        return resid, eigs_g

    if "memory" in methods:
        start = time.perf_counter()
        try:
            result = _memory.select_components(panel, folds=folds, **select_kwargs)
            report["memory"] = {"m_star": result.m_star,
                                "seconds": time.perf_counter() - start}
            report["memory"]["m_max"] = result.mp_fit.m_max
        except StageError as exc:
            report["memory"] = {"error": str(exc), "seconds": time.perf_counter() - start}

    if "cumvar" in methods:
        start = time.perf_counter()
        try:
            resid, eigs_g = _detrended()
            fit = _spectra.fit_mp(eigs_g, n_obs=resid.n_obs)
            lo, hi = cumvar_bracket(eigs_g, fit.m_max)
            report["cumvar"] = {"m70": lo, "m90": hi,
                                "seconds": time.perf_counter() - start}
        except Exception as exc:
            report["cumvar"] = {"error": str(exc), "seconds": time.perf_counter() - start}

    if "press" in methods:
        start = time.perf_counter()
        try:
            resid, eigs_g = _detrended()
            fit = _spectra.fit_mp(eigs_g, n_obs=resid.n_obs)
            curve = press_crossval(resid, max(fit.m_max, 1), folds=folds,
                                   regression=press_regression)
            report["press"] = {"argmin": curve.argmin_m,
                               "seconds": time.perf_counter() - start,
                               "curve": [float(x) for x in curve.press]}
        except Exception as exc:
            report["press"] = {"error": str(exc), "seconds": time.perf_counter() - start}
    return report
