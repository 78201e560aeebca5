"""Removal of the common market factor by per-asset linear regression."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSeriesError
from .panel import StandardizedPanel

log = logging.getLogger(__name__)


@dataclass
class MarketModel:
    """Per-asset slope/intercept of the regression on the market series."""

    i0: np.ndarray       # (T,) market-mode series
    beta0: np.ndarray    # (N,) slopes
    alpha0: np.ndarray   # (N,) intercepts
    tickers: list[str]
    dropped: list[str]   # assets whose residuals were degenerate


def market_mode(panel: StandardizedPanel, w1: np.ndarray) -> np.ndarray:
    """Weighted average of the panel columns with the top-eigenvector weights."""
    w1 = np.asarray(w1, dtype=float)
    if w1.shape != (panel.n_cols,):
        raise ValueError(f"weight vector has shape {w1.shape}, panel has {panel.n_cols} columns")
    return panel.matrix @ w1


def detrend_market(panel: StandardizedPanel, i0: np.ndarray) -> tuple[MarketModel, StandardizedPanel]:
    """Regress every column on the market series; return standardized residuals.

    Assets whose residuals have zero variance (exact linear dependence on
    the market series) carry no information beyond the market and are
    dropped from the residual panel with a logged warning.
    """
    X = panel.matrix
    i0 = np.asarray(i0, dtype=float)
    if i0.shape != (X.shape[0],):
        raise ValueError(f"market series length {i0.shape} does not match panel T={X.shape[0]}")
    ic = i0 - i0.mean()
    denom = float(ic @ ic)
    if denom == 0.0:
        raise DegenerateSeriesError("market series has zero variance")

    beta = (ic @ X) / denom
    alpha = X.mean(axis=0) - beta * i0.mean()
    resid = X - np.outer(i0, beta) - alpha

    sd = resid.std(axis=0)
    keep = sd > 1e-10  # zero up to round-off: the input columns have unit variance
    dropped = [panel.column_ids[j] for j in np.flatnonzero(~keep)]
    if dropped:
        log.warning("dropping %d assets exactly proportional to the market mode: %s",
                    len(dropped), dropped)

    model = MarketModel(i0, beta, alpha, list(panel.column_ids), dropped)
    resid = resid[:, keep]
    resid = (resid - resid.mean(axis=0)) / resid.std(axis=0)
    out = StandardizedPanel(resid, "residuals",
                            [c for c, k in zip(panel.column_ids, keep) if k],
                            list(panel.dates)).validate()
    return model, out
