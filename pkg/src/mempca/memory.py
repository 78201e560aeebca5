"""Residual-memory measurement and the component-count selection rule.

For every number m of removed components the per-asset residue keeps
some autocorrelation memory, summarized by the integrated proxy eta
(the autocorrelation summed up to its Bartlett cut). The median ratio
eta_i(m) / eta_i(0) across assets traces out a curve zeta(m) whose
log-log tail is a power law; the smallest left endpoint maximizing the
adjusted R^2 of the tail fit marks where the decay stops being faster
than a power law, and one component less is the count worth keeping.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit, prange

from . import detrend as _detrend
from . import factors as _factors
from . import spectra as _spectra
from .errors import (
    DataQualityError,
    DegenerateSeriesError,
    InsufficientDataError,
    LogDomainError,
    StageError,
)
from .panel import StandardizedPanel

log = logging.getLogger(__name__)

BARTLETT_LEVEL = 1.96  # 5% two-sided band under the white-noise null
THETA_TIE_TOL = 1e-9


# ---------------------------------------------------------------------------
# autocorrelation


@dataclass
class ACFCurve:
    """Sample autocorrelation kappa(L) for L = 1..l_max.

    Per-lag (T-L) normalization with the global mean and population
    variance; the |kappa| <= 1 bound is meaningful for lags well below
    the series length.
    """

    kappa: np.ndarray
    series_length: int
    l_max: int

    def validate(self) -> "ACFCurve":
        if self.kappa.shape != (self.l_max,):
            raise ValueError("kappa length does not match l_max")
        if not np.all(np.isfinite(self.kappa)):
            raise ValueError("autocorrelation contains non-finite values")
        if np.abs(self.kappa).max() > 1.0 + 1e-10:
            raise ValueError("|kappa| exceeds 1 beyond tolerance")
        return self


def acf(x: np.ndarray, l_max: int | None = None) -> ACFCurve:
    """Autocorrelation curve of one series via FFT convolution.

    kappa(L) = (1/(T-L)) sum_t (x(t+L)-mean)(x(t)-mean) / variance.
    """
    x = np.asarray(x, dtype=float)
    T = x.size
    if T < 8:
        raise ValueError(f"need at least 8 observations, got {T}")
    if l_max is None:
        l_max = T - 1
    if not 1 <= l_max <= T - 1:
        raise ValueError(f"l_max must be in [1, {T - 1}], got {l_max}")
    xc = x - x.mean()
    var = float(xc @ xc) / T
    if var == 0.0:
        raise DegenerateSeriesError("series has zero variance")
    nfft = 1 << int(np.ceil(np.log2(2 * T)))
    f = np.fft.rfft(xc, nfft)
    autocov = np.fft.irfft(f * np.conj(f), nfft)[1:l_max + 1]
    kappa = autocov / (T - np.arange(1, l_max + 1)) / var
    return ACFCurve(kappa, T, l_max)


def acf_brute_force(x: np.ndarray, l_max: int | None = None) -> np.ndarray:
    """Double-loop reference for the same quantity (test oracle)."""
    x = np.asarray(x, dtype=float)
    T = x.size
    if l_max is None:
        l_max = T - 1
    mean = x.mean()
    var = ((x - mean) ** 2).sum() / T
    out = np.empty(l_max)
    for lag in range(1, l_max + 1):
        s = 0.0
        for t in range(T - lag):
            s += (x[t + lag] - mean) * (x[t] - mean)
        out[lag - 1] = s / (T - lag) / var
    return out


class BartlettCut(NamedTuple):
    lag: int
    truncated: bool


def bartlett_cut(curve: ACFCurve, level: float = BARTLETT_LEVEL) -> BartlettCut:
    """First lag whose |kappa| drops inside the white-noise band.

    The band is level/sqrt(T). If no lag ever enters the band the cut
    is the last computed lag, flagged as truncated.
    """
    band = level / np.sqrt(curve.series_length)
    inside = np.abs(curve.kappa) < band
    if inside.any():
        return BartlettCut(int(inside.argmax()) + 1, False)
    return BartlettCut(curve.l_max, True)


def integrated_proxy(curve: ACFCurve, l_cut: int) -> float:
    """Memory proxy: the autocorrelation summed over lags 1..l_cut."""
    if not 1 <= l_cut <= curve.l_max:
        raise ValueError(f"l_cut must be in [1, {curve.l_max}], got {l_cut}")
    return float(curve.kappa[:l_cut].sum())


@dataclass
class MemoryProxy:
    """Summary of one series' memory: cut lag, integrated proxy, decay exponent."""

    l_cut: int
    eta: float
    beta_vol: float | None
    truncated: bool = False


def memory_proxy(curve: ACFCurve, level: float = BARTLETT_LEVEL) -> MemoryProxy:
    cut = bartlett_cut(curve, level)
    eta = integrated_proxy(curve, cut.lag)
    beta = None
    if cut.lag >= 3:
        try:
            beta = powerlaw_exponent(curve, cut.lag)
        except InsufficientDataError:
            beta = None
    return MemoryProxy(cut.lag, eta, beta, cut.truncated)


def theil_sen(points) -> float:
    """Slope as the median over all pairwise slopes.

    The lower median (the element at rank ceil(k/2) of the sorted k
    pairwise slopes) is used, so even counts resolve deterministically.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError("need at least 2 (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    i, j = np.triu_indices(x.size, k=1)
    dx = x[j] - x[i]
    usable = dx != 0
    if not usable.any():
        raise ValueError("all x values are equal")
    slopes = np.sort((y[j][usable] - y[i][usable]) / dx[usable])
    return float(slopes[(slopes.size - 1) // 2])


def powerlaw_exponent(curve: ACFCurve, l_cut: int) -> float:
    """Decay exponent from a robust line through (ln L, ln kappa), L = 1..l_cut.

    Lags with non-positive autocorrelation are excluded from the fit.
    """
    if l_cut < 3:
        raise ValueError(f"need l_cut >= 3, got {l_cut}")
    lags = np.arange(1, l_cut + 1)
    k = curve.kappa[:l_cut]
    pos = k > 0
    if pos.sum() < 3:
        raise InsufficientDataError(
            f"only {int(pos.sum())} positive autocorrelations in lags 1..{l_cut}")
    slope = theil_sen(np.column_stack([np.log(lags[pos]), np.log(k[pos])]))
    return -slope


# ---------------------------------------------------------------------------
# residues and the memory curve


def residues(residual_panel: StandardizedPanel, loadings: "_factors.LoadingMatrix",
             factors: "_factors.ComponentSeries", m: int) -> np.ndarray:
    """Residues after removing the first m components; not re-standardized."""
    m_max = factors.n_components
    if not 1 <= m <= m_max:
        raise ValueError(f"m must be in [1, {m_max}], got {m}")
    return residual_panel.matrix - factors.values[:, :m] @ loadings.betas[:, :m].T


@njit(cache=True, parallel=True)
def _eta_scan(columns, var, band, l_max):
    """Per-column lag scan: accumulate kappa until it enters the band.

    columns: (n, T) demeaned series as rows. Returns (eta, cut, truncated)
    with the same values as acf + bartlett_cut + integrated_proxy.
    """
    n, T = columns.shape
    eta = np.zeros(n)
    cut = np.zeros(n, dtype=np.int64)
    truncated = np.zeros(n, dtype=np.bool_)
    for i in prange(n):
        x = columns[i]
        total = 0.0
        found = False
        for lag in range(1, l_max + 1):
            acc = 0.0
            for t in range(T - lag):
                acc += x[t + lag] * x[t]
            kappa = acc / (T - lag) / var[i]
            total += kappa
            if abs(kappa) < band:
                cut[i] = lag
                eta[i] = total
                found = True
                break
        if not found:
            cut[i] = l_max
            eta[i] = total
            truncated[i] = True
    return eta, cut, truncated


def _eta_batch(D: np.ndarray, l_max: int, level: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrated proxies for every column of D, scanning lags lazily.

    Equivalent to acf + bartlett_cut + integrated_proxy per column, but
    stops each column's scan at its cut. Returns (eta, l_cut, truncated).
    """
    T, n = D.shape
    Dm = D - D.mean(axis=0)
    var = (Dm**2).mean(axis=0)
    dead = np.flatnonzero(var == 0.0)
    if dead.size:
        raise DegenerateSeriesError(f"zero-variance residue columns at indices {dead.tolist()}")
    band = level / np.sqrt(T)
    return _eta_scan(np.ascontiguousarray(Dm.T), var, band, int(l_max))


@dataclass
class MemoryCurve:
    """Median residual-memory fraction per removed-component count."""

    zeta: np.ndarray        # (m_max + 1,), zeta[0] == 1
    eta_matrix: np.ndarray  # (m_max + 1, N) per-asset proxies
    excluded: list[str] = field(default_factory=list)
    l_cut_matrix: np.ndarray | None = None
    n_truncated: int = 0

    @property
    def m_max(self) -> int:
        return self.zeta.size - 1


def memory_curve(residual_panel: StandardizedPanel, loadings: "_factors.LoadingMatrix",
                 factors: "_factors.ComponentSeries", m_max: int | None = None,
                 l_max: int | None = None, level: float = BARTLETT_LEVEL) -> MemoryCurve:
    """zeta(m) = median_i eta_i(m)/eta_i(0) for m = 0..m_max.

    Assets whose baseline proxy eta_i(0) is exactly zero cannot form a
    ratio and are excluded with a warning; more than half excluded is a
    data-quality failure.
    """
    C = residual_panel.matrix
    T, n_assets = C.shape
    if n_assets < 3:
        raise ValueError("need at least 3 assets for a meaningful median")
    if m_max is None:
        m_max = factors.n_components
    if not 1 <= m_max <= factors.n_components:
        raise ValueError(f"m_max must be in [1, {factors.n_components}], got {m_max}")
    if l_max is None:
        l_max = T - 1

    etas = np.empty((m_max + 1, n_assets))
    cuts = np.empty((m_max + 1, n_assets), dtype=int)
    n_trunc = 0
    eta0, cut0, trunc = _eta_batch(C, l_max, level)
    etas[0], cuts[0] = eta0, cut0
    n_trunc += int(trunc.sum())

    keep = eta0 != 0.0
    excluded = [residual_panel.column_ids[j] for j in np.flatnonzero(~keep)]
    if excluded:
        log.warning("excluding %d assets with zero baseline memory proxy: %s",
                    len(excluded), excluded)
    if len(excluded) > 0.5 * n_assets:
        raise DataQualityError(
            f"{len(excluded)} of {n_assets} assets have zero baseline proxy")

    zeta = np.empty(m_max + 1)
    zeta[0] = 1.0
    increases = 0
    for m in range(1, m_max + 1):
        D = C - factors.values[:, :m] @ loadings.betas[:, :m].T
        eta_m, cut_m, trunc = _eta_batch(D, l_max, level)
        etas[m], cuts[m] = eta_m, cut_m
        n_trunc += int(trunc.sum())
        zeta[m] = float(np.median(eta_m[keep] / eta0[keep]))
        increases += int((np.abs(eta_m[keep]) > np.abs(etas[m - 1][keep])).sum())
    if increases:
        log.debug("per-asset |eta| increased in %d (m, asset) pairs", increases)
    return MemoryCurve(zeta, etas, excluded, cuts, n_trunc)


# ---------------------------------------------------------------------------
# breakpoint fit


def adjusted_r2(r2: float, n: int) -> float:
    """Sample-size adjusted coefficient of determination for a 1-regressor fit."""
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    if r2 > 1:
        raise ValueError(f"R^2 cannot exceed 1, got {r2}")
    return 1.0 - (1.0 - r2) * (n - 1) / (n - 2)


@dataclass
class ThetaFit:
    """Power-law-tail breakpoint of the memory curve and the selected count."""

    theta_hat: int
    gamma: float
    r2_adj_by_candidate: dict[int, float]
    m_star: int


def fit_theta(curve: MemoryCurve | np.ndarray, tie_tol: float = THETA_TIE_TOL) -> ThetaFit:
    """Left endpoint of the best log-log linear tail of zeta(m).

    For every candidate endpoint the line is fit over m = candidate..m_max
    and scored by adjusted R^2; the argmax (smallest candidate within
    tie_tol of the best score) is the breakpoint, and the count to retain
    is one less.
    """
    zeta = curve.zeta if isinstance(curve, MemoryCurve) else np.asarray(curve, dtype=float)
    m_max = zeta.size - 1
    if m_max < 4:
        raise ValueError(f"need m_max >= 4, got {m_max}")
    if np.any(zeta[1:] <= 0.0):
        bad = np.flatnonzero(zeta[1:] <= 0.0) + 1
        raise LogDomainError(f"zeta must be positive for the log fit; zeta(m) <= 0 at m={bad.tolist()}")

    ln_m = np.log(np.arange(1, m_max + 1))
    ln_z = np.log(zeta[1:])
    candidates = np.arange(2, m_max - 1)
    scores = np.empty(candidates.size)
    slopes = np.empty(candidates.size)
    for pos, cand in enumerate(candidates):
        x = ln_m[cand - 1:]
        y = ln_z[cand - 1:]
        xm, ym = x.mean(), y.mean()
        sxx = float((x - xm) @ (x - xm))
        slope = float((x - xm) @ (y - ym)) / sxx
        resid = y - ym - slope * (x - xm)
        sst = float((y - ym) @ (y - ym))
        r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else 1.0
        scores[pos] = adjusted_r2(r2, x.size)
        slopes[pos] = slope
    best = scores.max()
    pick = int(np.flatnonzero(scores >= best - tie_tol)[0])
    theta = int(candidates[pick])
    table = dict(zip(candidates.tolist(), scores.tolist()))
    return ThetaFit(theta, -float(slopes[pick]), table, theta - 1)


# ---------------------------------------------------------------------------
# full pipeline


@dataclass
class SelectionResult:
    """Everything produced on the way to the selected component count."""

    m_star: int
    theta_fit: ThetaFit
    memory: MemoryCurve
    mp_fit: "_spectra.MPFit"
    eigs_e: "_spectra.EigenSystem"
    eigs_g: "_spectra.EigenSystem"
    market_model: "_detrend.MarketModel"
    residual_panel: StandardizedPanel
    factor_series: "_factors.ComponentSeries"
    loadings: "_factors.LoadingMatrix"
    timings: dict[str, float]
    warnings: list[str]


def select_components(panel: StandardizedPanel, folds: int = 10,
                      n_grid: int = _factors.GRID_SIZE, l_max: int | None = None,
                      level: float = BARTLETT_LEVEL, m_max: int | None = None,
                      mp_max_iter: int = 20) -> SelectionResult:
    """Run the full selection pipeline on a standardized panel.

    Stages: market detrending, spectrum of the detrended correlation
    matrix with the bulk fit, per-asset penalized loadings, residues and
    the memory curve, and the breakpoint fit. Stage failures are
    re-raised with the stage name attached.
    """
    timings: dict[str, float] = {}
    warnings: list[str] = []

    def staged(name, fn):
        start = time.perf_counter()
        try:
            out = fn()
        except Exception as exc:
            raise StageError(name, exc) from exc
        timings[name] = time.perf_counter() - start
        return out

    def _detrend_stage():
        eigs_e = _spectra.eigendecompose(_spectra.correlation(panel))
        i0 = _detrend.market_mode(panel, eigs_e.eigenvectors[:, 0])
        model, resid = _detrend.detrend_market(panel, i0)
        return eigs_e, model, resid

    eigs_e, model, resid = staged("detrend", _detrend_stage)
    if model.dropped:
        warnings.append(f"dropped {len(model.dropped)} market-degenerate assets: {model.dropped}")
    if (eigs_e.eigenvectors[:, 0] < 0).any():
        warnings.append("market-mode eigenvector has negative entries")

    def _spectrum_stage():
        eigs_g = _spectra.eigendecompose(_spectra.correlation(resid))
        fit = _spectra.fit_mp(eigs_g, n_obs=resid.n_obs, max_iter=mp_max_iter)
        return eigs_g, fit

    eigs_g, mp_fit = staged("spectrum", _spectrum_stage)
    n_keep = m_max if m_max is not None else mp_fit.m_max
    if n_keep < 1:
        raise StageError("spectrum", ValueError(
            "no informative components above the fitted bulk edge"))

    def _loadings_stage():
        series = _factors.component_series(resid, eigs_g, n_keep)
        return series, _factors.fit_all_loadings(resid, series, folds=folds, n_grid=n_grid)

    factor_series, loadings = staged("loadings", _loadings_stage)

    curve = staged("memory", lambda: memory_curve(resid, loadings, factor_series,
                                                  m_max=n_keep, l_max=l_max, level=level))
    if curve.excluded:
        warnings.append(f"excluded from the median (zero baseline proxy): {curve.excluded}")
    if curve.n_truncated:
        warnings.append(f"{curve.n_truncated} (asset, m) proxies truncated at l_max")

    theta = staged("theta", lambda: fit_theta(curve))
    return SelectionResult(theta.m_star, theta, curve, mp_fit, eigs_e, eigs_g,
                           model, resid, factor_series, loadings, timings, warnings)


def selection_report(result: SelectionResult) -> dict:
    """JSON-ready summary of a selection run."""
    return {
        "m_star": result.m_star,
        "theta_hat": result.theta_fit.theta_hat,
        "gamma": result.theta_fit.gamma,
        "m_max": result.memory.m_max,
        "r2_adj": {str(k): v for k, v in result.theta_fit.r2_adj_by_candidate.items()},
    }
