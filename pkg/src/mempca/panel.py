"""Price-panel ingestion, cleaning and log-volatility transforms.

The cleaning step aligns ragged daily price histories onto a common
date axis, dropping series that traded too rarely and carrying the last
available price over non-traded days (so a gap becomes a zero
log-return). Downstream stages work on column-standardized matrices.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ContractViolationError, DegenerateColumnError, EmptyPanelError

log = logging.getLogger(__name__)

MEAN_TOL = 1e-10
VAR_TOL = 1e-8


@dataclass
class PricePanel:
    """Daily closing prices on a shared date axis, NaN where not traded.

    dates are ISO-8601 strings in strictly increasing order; every ticker
    has at least one observed price and all observed prices are positive.
    """

    dates: list[str]
    tickers: list[str]
    values: np.ndarray  # (T, N), NaN = missing

    def validate(self) -> "PricePanel":
        if self.values.shape != (len(self.dates), len(self.tickers)):
            raise ContractViolationError("values shape does not match dates/tickers")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise ContractViolationError("dates must be strictly increasing")
        observed = ~np.isnan(self.values)
        if not observed.any(axis=0).all():
            missing = [t for t, ok in zip(self.tickers, observed.any(axis=0)) if not ok]
            raise ContractViolationError(f"tickers with no observations: {missing}")
        if np.any(self.values[observed] <= 0):
            raise ContractViolationError("observed prices must be positive")
        return self

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    @property
    def n_tickers(self) -> int:
        return len(self.tickers)


@dataclass
class StandardizedPanel:
    """T x N matrix whose columns have mean 0 and (population) variance 1."""

    matrix: np.ndarray
    kind: str  # "returns" | "log-volatility" | "residuals"
    column_ids: list[str]
    dates: list[str] = field(default_factory=list)

    def validate(self) -> "StandardizedPanel":
        m = self.matrix
        if not np.all(np.isfinite(m)):
            raise ContractViolationError("panel contains non-finite entries")
        mu = m.mean(axis=0)
        var = m.var(axis=0)  # population (1/T) normalization
        if np.abs(mu).max(initial=0.0) >= MEAN_TOL:
            raise ContractViolationError(f"column mean off zero by {np.abs(mu).max():.2e}")
        if np.abs(var - 1.0).max(initial=0.0) >= VAR_TOL:
            raise ContractViolationError(f"column variance off one by {np.abs(var - 1).max():.2e}")
        return self

    @property
    def n_obs(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]


def standardize_columns(matrix: np.ndarray, column_ids) -> np.ndarray:
    """Center and scale each column to mean 0, population variance 1.

    Raises DegenerateColumnError naming zero-variance columns.
    """
    matrix = np.asarray(matrix, dtype=float)
    mu = matrix.mean(axis=0)
    sd = matrix.std(axis=0)
    bad = np.flatnonzero(sd == 0.0)
    if bad.size:
        raise DegenerateColumnError([column_ids[j] for j in bad])
    return (matrix - mu) / sd


# ---------------------------------------------------------------------------
# cleaning


def clean_prices(raw: PricePanel, p: float, return_report: bool = False):
    """Align a ragged price panel onto a common forward-filled date axis.

    Four steps: (i) drop tickers whose observed history is shorter than
    ``p`` times the longest one, (ii) truncate to the latest first-trade
    date among survivors, (iii) build the date axis as the union of the
    survivors' trading dates from that day on, (iv) fill gaps by carrying
    the last available price forward. The result has no missing values.

    With ``return_report=True`` also returns a dict with the removed
    tickers and per-ticker forward-fill counts.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must be in (0, 1], got {p}")
    raw.validate()

    observed = ~np.isnan(raw.values)
    lengths = observed.sum(axis=0)
    longest = lengths.max()
    keep = np.flatnonzero(lengths >= p * longest)
    removed = [raw.tickers[j] for j in np.flatnonzero(lengths < p * longest)]
    if keep.size == 0:
        raise EmptyPanelError("cleaning removed every ticker")

    dates = np.asarray(raw.dates)
    first_obs = [dates[observed[:, j]][0] for j in keep]
    start = max(first_obs)

    # union of surviving tickers' trading dates, from the common start on
    any_traded = observed[:, keep].any(axis=1)
    axis_mask = any_traded & (dates >= start)
    axis = dates[axis_mask]

    values = np.empty((axis.size, keep.size))
    fill_counts: dict[str, int] = {}
    for out_j, j in enumerate(keep):
        col = raw.values[:, j]
        # forward-fill over the full history, then restrict to the axis
        filled = pd.Series(col).ffill().to_numpy()
        values[:, out_j] = filled[axis_mask]
        traded_on_axis = observed[axis_mask, j].sum()
        fill_counts[raw.tickers[j]] = int(axis.size - traded_on_axis)

    panel = PricePanel(list(axis), [raw.tickers[j] for j in keep], values).validate()
    if return_report:
        return panel, {"removed": removed, "fill_counts": fill_counts,
                       "n_dates": int(axis.size), "n_tickers": int(keep.size)}
    return panel


# ---------------------------------------------------------------------------
# transforms


def log_returns(prices: PricePanel) -> StandardizedPanel:
    """Log-differences of prices, column-standardized.

    Requires a clean panel (no missing values) with at least 3 dates.
    A constant price series yields zero variance and is reported as a
    degenerate column.
    """
    prices.validate()
    if np.isnan(prices.values).any():
        raise ContractViolationError("log_returns requires a cleaned panel without gaps")
    if prices.n_dates < 3:
        raise ValueError(f"need at least 3 dates, got {prices.n_dates}")
    lp = np.log(prices.values)
    raw = np.diff(lp, axis=0)
    matrix = standardize_columns(raw, prices.tickers)
    return StandardizedPanel(matrix, "returns", list(prices.tickers),
                             list(prices.dates[1:])).validate()


def raw_log_returns(prices: PricePanel) -> np.ndarray:
    """Log-differences before standardization (for fill-site checks)."""
    return np.diff(np.log(prices.values), axis=0)


def log_volatility(returns: StandardizedPanel) -> StandardizedPanel:
    """Entrywise ln|r| of a standardized returns panel, re-standardized.

    Exact zero returns (from forward-filled prices) are replaced by the
    smallest nonzero magnitude in the same column before the log, which
    keeps the transform finite without injecting a global constant.
    """
    if returns.kind != "returns":
        raise ContractViolationError(f"expected a returns panel, got kind={returns.kind!r}")
    r = np.abs(returns.matrix.copy())
    all_zero = np.flatnonzero(~(r > 0).any(axis=0))
    if all_zero.size:
        raise DegenerateColumnError([returns.column_ids[j] for j in all_zero])
    for j in range(r.shape[1]):
        col = r[:, j]
        zeros = col == 0.0
        if zeros.any():
            col[zeros] = col[~zeros].min()
    matrix = standardize_columns(np.log(r), returns.column_ids)
    return StandardizedPanel(matrix, "log-volatility", list(returns.column_ids),
                             list(returns.dates)).validate()


# ---------------------------------------------------------------------------
# CSV I/O


def read_prices_csv(path) -> PricePanel:
    """Read a long-format `date,ticker,close` CSV into a PricePanel."""
    df = pd.read_csv(path, dtype={"date": str, "ticker": str})
    expected = {"date", "ticker", "close"}
    if not expected.issubset(df.columns):
        raise ValueError(f"prices CSV must have columns {sorted(expected)}, got {list(df.columns)}")
    wide = df.pivot_table(index="date", columns="ticker", values="close", aggfunc="first")
    wide = wide.sort_index()
    return PricePanel(list(wide.index), list(wide.columns), wide.to_numpy(dtype=float)).validate()


def write_panel_csv(path, dates, column_ids, values) -> None:
    """Write a wide panel CSV: a `date` column followed by one column per id."""
    df = pd.DataFrame(values, columns=list(column_ids))
    df.insert(0, "date", list(dates))
    df.to_csv(path, index=False, float_format="%.17g")


def read_panel_csv(path) -> tuple[list[str], list[str], np.ndarray]:
    """Read a wide panel CSV back into (dates, column_ids, values)."""
    df = pd.read_csv(path, dtype={"date": str})
    if "date" not in df.columns:
        raise ValueError("panel CSV must have a 'date' column")
    dates = list(df["date"])
    cols = [c for c in df.columns if c != "date"]
    return dates, cols, df[cols].to_numpy(dtype=float)


def read_standardized_csv(path, kind: str) -> StandardizedPanel:
    """Read a wide panel CSV and (re-)standardize its columns."""
    dates, cols, values = read_panel_csv(path)
    return StandardizedPanel(standardize_columns(values, cols), kind, cols, dates).validate()
