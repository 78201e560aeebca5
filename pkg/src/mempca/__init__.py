"""Memory-based selection of the number of principal components to retain."""

from .baselines import (
    CumVarCurve,
    PressCurve,
    cumulative_variance,
    cumvar_bracket,
    press_crossval,
    select_by_cumvar,
    timed_compare,
)
from .detrend import MarketModel, detrend_market, market_mode
from .factors import (
    ComponentSeries,
    LoadingMatrix,
    component_series,
    fit_all_loadings,
    lasso_fit,
    select_penalty,
)
from .memory import (
    ACFCurve,
    MemoryCurve,
    MemoryProxy,
    SelectionResult,
    ThetaFit,
    acf,
    adjusted_r2,
    bartlett_cut,
    fit_theta,
    integrated_proxy,
    memory_curve,
    memory_proxy,
    powerlaw_exponent,
    residues,
    select_components,
    selection_report,
    theil_sen,
)
from .panel import (
    PricePanel,
    StandardizedPanel,
    clean_prices,
    log_returns,
    log_volatility,
    read_prices_csv,
)
from .portfolio import (
    SectorProjection,
    eigen_portfolio_variance,
    markowitz_weights,
    sector_projection,
)
from .spectra import (
    CorrelationMatrix,
    EigenSystem,
    MPFit,
    correlation,
    count_outliers,
    eigendecompose,
    fit_mp,
    mp_density,
    mp_support,
)
from .synth import MarketSpec, SyntheticPanel, ar1, cluster_sizes, fgn, fgn_acf, simulate_market

__version__ = "0.1.0"

__all__ = [
    "ACFCurve", "ComponentSeries", "CorrelationMatrix", "CumVarCurve", "EigenSystem",
    "LoadingMatrix", "MPFit", "MarketModel", "MarketSpec", "MemoryCurve", "MemoryProxy",
    "PressCurve", "PricePanel", "SectorProjection", "SelectionResult", "StandardizedPanel",
    "SyntheticPanel", "ThetaFit", "acf", "adjusted_r2", "ar1", "bartlett_cut",
    "clean_prices", "cluster_sizes", "component_series", "correlation", "count_outliers",
    "cumulative_variance", "cumvar_bracket", "detrend_market", "eigen_portfolio_variance",
    "eigendecompose", "fgn", "fgn_acf", "fit_all_loadings", "fit_mp", "fit_theta",
    "integrated_proxy", "lasso_fit", "log_returns", "log_volatility", "market_mode",
    "markowitz_weights", "memory_curve", "memory_proxy", "mp_density", "mp_support",
    "powerlaw_exponent", "press_crossval", "read_prices_csv", "residues",
    "sector_projection", "select_by_cumvar", "select_components", "select_penalty",
    "selection_report", "simulate_market", "theil_sen", "timed_compare",
]
