"""Command-line interface orchestrating the selection pipeline.

Subcommands: clean, transform, spectrum, select, simulate, compare,
portfolio. Options resolve as flag > config file > default; the config
file is flat ``key = value`` text. Every run writes a manifest (config
echo, versions, stage timings, warnings, artifact list) to the output
directory, even when a stage fails. Exit codes: 0 success, 1 internal
error, 2 data/config error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

# the numba TBB version probe is noise on console reports
warnings.filterwarnings("ignore", message=".*TBB.*")

from . import __version__, baselines, memory, panel, plots, portfolio, spectra, synth
from .errors import PipelineError, StageError

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_DATA = 2

CONFIG_DEFAULTS = {
    "min_length_fraction": 0.9,
    "folds": 10,
    "lasso_grid_size": 100,
    "lasso_grid_floor": 1e-4,
    "bartlett_level": 1.96,
    "mp_max_iter": 20,
    "methods": "memory,cumvar,press",
    "press_regression": "ols",
    "alpha_low": 70.0,
    "alpha_high": 90.0,
    "synth_n": 300,
    "synth_t": 2000,
    "synth_k": 10,
    "synth_layout": "homogeneous",
    "synth_kind": "fgn",
    "synth_beta0": synth.DEFAULT_BETA0,
    "synth_phi": 1.0,
    "synth_h0": synth.DEFAULT_H0,
    "synth_psi0": synth.DEFAULT_PSI0,
    "synth_beta_spacing": "geometric",
    "sweep_seeds": 20,
    "delta": 1.0,
    "top_components": 3,
}

_INT_KEYS = {"folds", "lasso_grid_size", "mp_max_iter", "synth_n", "synth_t", "synth_k",
             "sweep_seeds", "top_components", "l_max", "m_max", "seed", "threads"}
_FLOAT_KEYS = {"min_length_fraction", "lasso_grid_floor", "bartlett_level", "alpha_low",
               "alpha_high", "synth_beta0", "synth_phi", "synth_h0", "synth_psi0", "delta"}
_BOOL_KEYS = {"plots", "no_plots"}


def read_config(path) -> dict:
    """Parse a flat key = value config file; '#' starts a comment."""
    values: dict[str, object] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        values[key] = value
    return values


def _coerce(key: str, value):
    if value is None or not isinstance(value, str):
        return value
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    if key in _BOOL_KEYS:
        return value.strip().lower() in ("1", "true", "yes", "on")
    return value


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, config file, and CLI flags (flags win)."""
    cfg = dict(CONFIG_DEFAULTS)
    if args.config:
        if not Path(args.config).exists():
            raise ValueError(f"config file not found: {args.config}")
        for key, value in read_config(args.config).items():
            cfg[key] = _coerce(key, value)
    for key, value in vars(args).items():
        if key in ("command", "config", "func") or value is None:
            continue
        cfg[key] = _coerce(key, value)
    cfg.setdefault("out_dir", "out")
    cfg.setdefault("plots", not cfg.get("no_plots", False))
    return cfg


class Runner:
    """Collects timings, warnings and artifact paths, and writes the manifest."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.out_dir = Path(cfg["out_dir"])
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.timings: dict[str, float] = {}
        self.warnings: list[str] = []
        self.artifacts: list[str] = []

    def path(self, name: str) -> Path:
        path = self.out_dir / name
        self.artifacts.append(str(path))
        return path

    def timed(self, name: str, fn):
        start = time.perf_counter()
        out = fn()
        self.timings[name] = time.perf_counter() - start
        return out

    def write_manifest(self, status: str):
        manifest = {
            "status": status,
            "config": {k: v for k, v in sorted(self.cfg.items())},
            "versions": {"mempca": __version__, "numpy": np.__version__,
                         "pandas": pd.__version__},
            "timings": self.timings,
            "warnings": self.warnings,
            "artifacts": self.artifacts,
        }
        path = self.out_dir / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")

    def write_json(self, name: str, payload: dict):
        self.path(name).write_text(json.dumps(payload, indent=2) + "\n")

    def write_table(self, name: str, frame: pd.DataFrame):
        frame.to_csv(self.path(name), index=False, float_format="%.17g")


def _load_logvol_panel(runner: Runner) -> panel.StandardizedPanel:
    """Resolve the input panel: an existing panel CSV, raw prices, or a synthetic spec."""
    cfg = runner.cfg
    if cfg.get("input"):
        return panel.read_standardized_csv(cfg["input"], kind="log-volatility")
    if cfg.get("prices"):
        prices = panel.read_prices_csv(cfg["prices"])
        cleaned, report = panel.clean_prices(prices, cfg["min_length_fraction"], return_report=True)
        if report["removed"]:
            runner.warnings.append(f"cleaning removed tickers: {report['removed']}")
        return panel.log_volatility(panel.log_returns(cleaned))
    market = synth.simulate_market(_spec_from_config(cfg))
    return market.panel


def _spec_from_config(cfg: dict) -> synth.MarketSpec:
    seed = cfg.get("seed")
    return synth.MarketSpec(
        n_assets=cfg["synth_n"], n_obs=cfg["synth_t"], n_clusters=cfg["synth_k"],
        layout=cfg["synth_layout"], memory_kind=cfg["synth_kind"],
        beta0=cfg["synth_beta0"], h0=cfg["synth_h0"], psi0=cfg["synth_psi0"],
        phi=cfg["synth_phi"], seed=0 if seed is None else int(seed),
        beta_spacing=cfg["synth_beta_spacing"])


def _emit_selection(runner: Runner, result: memory.SelectionResult,
                    dates: list[str]) -> dict:
    cfg = runner.cfg
    report = memory.selection_report(result)
    runner.write_json("selection.json", report)
    runner.write_json("spectrum.json", spectra.spectrum_report(result.eigs_g, result.mp_fit))
    hist = spectra.histogram_table(result.eigs_g, result.mp_fit)
    runner.write_table("spectrum_histogram.csv", pd.DataFrame(hist))

    model = result.market_model
    runner.write_table("market_model.csv", pd.DataFrame(
        {"ticker": model.tickers, "beta0": model.beta0, "alpha0": model.alpha0}))

    m_max = result.factor_series.n_components
    factor_cols = {f"I_{p}": result.factor_series.values[:, p - 1] for p in range(1, m_max + 1)}
    runner.write_table("factor_series.csv", pd.DataFrame({"date": dates, **factor_cols}))

    loading_cols = {f"beta_{p}": result.loadings.betas[:, p - 1] for p in range(1, m_max + 1)}
    runner.write_table("loadings.csv", pd.DataFrame(
        {"ticker": result.loadings.column_ids, "upsilon": result.loadings.penalty, **loading_cols}))

    zeta = result.memory.zeta
    runner.write_table("memory_curve.csv", pd.DataFrame(
        {"m": np.arange(zeta.size), "zeta": zeta}))
    ms = np.arange(1, zeta.size)
    good = zeta[1:] > 0
    runner.write_table("memory_curve_loglog.csv", pd.DataFrame(
        {"ln_m": np.log(ms[good]), "ln_zeta": np.log(zeta[1:][good])}))
    eta = result.memory.eta_matrix
    runner.write_table("eta_matrix.csv", pd.DataFrame(
        eta, columns=result.residual_panel.column_ids).assign(m=np.arange(eta.shape[0]))
        [["m", *result.residual_panel.column_ids]])

    if cfg.get("plots", True):
        mp_params = spectra.spectrum_report(result.eigs_g, result.mp_fit)["mp"]
        plots.save_spectrum_figure(hist, mp_params, runner.path("spectrum.png"))
        plots.save_memory_figure(zeta, result.theta_fit.theta_hat, runner.path("memory_curve.png"))
    runner.warnings.extend(result.warnings)
    runner.timings.update({f"stage_{k}": v for k, v in result.timings.items()})
    return report


# ---------------------------------------------------------------------------
# subcommands


def cmd_clean(runner: Runner) -> dict:
    cfg = runner.cfg
    if not cfg.get("input"):
        raise ValueError("clean requires --input pointing to a date,ticker,close CSV")
    prices = runner.timed("read", lambda: panel.read_prices_csv(cfg["input"]))
    cleaned, report = runner.timed("clean", lambda: panel.clean_prices(
        prices, cfg["min_length_fraction"], return_report=True))
    panel.write_panel_csv(runner.path("cleaned_prices.csv"), cleaned.dates,
                          cleaned.tickers, cleaned.values)
    runner.warnings.append(f"removed {len(report['removed'])} tickers; "
                           f"filled {sum(report['fill_counts'].values())} gaps")
    return {"n_tickers": report["n_tickers"], "n_dates": report["n_dates"],
            "removed": report["removed"], "fill_counts": report["fill_counts"]}


def cmd_transform(runner: Runner) -> dict:
    cfg = runner.cfg
    if not cfg.get("input"):
        raise ValueError("transform requires --input pointing to a date,ticker,close CSV")
    prices = panel.read_prices_csv(cfg["input"])
    cleaned, report = panel.clean_prices(prices, cfg["min_length_fraction"], return_report=True)
    returns = runner.timed("returns", lambda: panel.log_returns(cleaned))
    logvol = runner.timed("logvol", lambda: panel.log_volatility(returns))
    panel.write_panel_csv(runner.path("cleaned_prices.csv"), cleaned.dates,
                          cleaned.tickers, cleaned.values)
    panel.write_panel_csv(runner.path("returns_panel.csv"), returns.dates,
                          returns.column_ids, returns.matrix)
    panel.write_panel_csv(runner.path("logvol_panel.csv"), logvol.dates,
                          logvol.column_ids, logvol.matrix)
    return {"n_tickers": len(cleaned.tickers), "n_dates": len(logvol.dates),
            "removed": report["removed"]}


def cmd_spectrum(runner: Runner) -> dict:
    cfg = runner.cfg
    data = _load_logvol_panel(runner)
    eigs = runner.timed("eigen", lambda: spectra.eigendecompose(spectra.correlation(data)))
    fit = runner.timed("mp_fit", lambda: spectra.fit_mp(eigs, n_obs=data.n_obs,
                                                        max_iter=cfg["mp_max_iter"]))
    report = spectra.spectrum_report(eigs, fit)
    runner.write_json("spectrum.json", report)
    hist = spectra.histogram_table(eigs, fit)
    runner.write_table("spectrum_histogram.csv", pd.DataFrame(hist))
    if cfg.get("plots", True):
        plots.save_spectrum_figure(hist, report["mp"], runner.path("spectrum.png"))
    return report["mp"]


def cmd_select(runner: Runner) -> dict:
    cfg = runner.cfg
    data = _load_logvol_panel(runner)
    kwargs = {"folds": cfg["folds"], "n_grid": cfg["lasso_grid_size"],
              "level": cfg["bartlett_level"], "mp_max_iter": cfg["mp_max_iter"]}
    if cfg.get("l_max") is not None:
        kwargs["l_max"] = cfg["l_max"]
    if cfg.get("m_max") is not None:
        kwargs["m_max"] = cfg["m_max"]
    result = runner.timed("select", lambda: memory.select_components(data, **kwargs))
    return _emit_selection(runner, result, list(data.dates))


def cmd_simulate(runner: Runner) -> dict:
    cfg = runner.cfg
    spec = _spec_from_config(cfg)
    market = runner.timed("simulate", lambda: synth.simulate_market(spec))
    data = market.panel
    panel.write_panel_csv(runner.path("synthetic_panel.csv"), data.dates,
                          data.column_ids, data.matrix)
    runner.write_table("ground_truth.csv", pd.DataFrame(
        {"ticker": data.column_ids, "cluster": market.membership}))
    factor_cols = {f"I_{k + 1}": market.factor_series[:, k]
                   for k in range(market.factor_series.shape[1])}
    runner.write_table("true_factors.csv", pd.DataFrame(
        {"date": data.dates, "I_0": market.market_series, **factor_cols}))
    return {"n_assets": spec.n_assets, "n_obs": spec.n_obs,
            "cluster_sizes": market.cluster_sizes.tolist(), "seed": spec.seed}


def cmd_compare(runner: Runner) -> dict:
    cfg = runner.cfg
    synthetic_input = not (cfg.get("input") or cfg.get("prices"))
    if synthetic_input and cfg.get("seed") is None:
        raise ValueError("compare on synthetic data requires an explicit --seed "
                         "(reproducibility contract)")
    methods = tuple(m.strip() for m in str(cfg["methods"]).split(",") if m.strip())
    if cfg.get("sweep_phi"):
        return _run_sweep(runner, methods)
    data = _load_logvol_panel(runner)
    report = runner.timed("compare", lambda: baselines.timed_compare(
        data, methods=methods, folds=cfg["folds"],
        press_regression=cfg["press_regression"]))
    runner.write_json("comparison.json", report)
    _emit_compare_tables(runner, data, report, methods)
    return {m: {k: v for k, v in r.items() if k != "curve"} for m, r in report.items()}


def _emit_compare_tables(runner: Runner, data, report: dict, methods) -> None:
    cfg = runner.cfg
    lambda_curve = None
    if "cumvar" in methods:
        eigs_e = spectra.eigendecompose(spectra.correlation(data))
        i0 = np.asarray(data.matrix) @ eigs_e.eigenvectors[:, 0]
        from .detrend import detrend_market
        _, resid = detrend_market(data, i0)
        eigs_g = spectra.eigendecompose(spectra.correlation(resid))
        curve = baselines.cumulative_variance(eigs_g)
        lambda_curve = curve.lambda_curve
        runner.write_table("cumvar_curve.csv", pd.DataFrame(
            {"m": np.arange(1, lambda_curve.size + 1), "lambda_pct": lambda_curve}))
    press = None
    if "press" in report and "curve" in report["press"]:
        press = np.asarray(report["press"]["curve"])
        runner.write_table("press_curve.csv", pd.DataFrame(
            {"m": np.arange(press.size), "press": press}))
    if cfg.get("plots", True) and lambda_curve is not None:
        markers = {}
        if "memory" in report and "m_star" in report["memory"]:
            markers["memory m*"] = report["memory"]["m_star"]
        if "press" in report and "argmin" in report["press"]:
            markers["press"] = report["press"]["argmin"]
        plots.save_comparison_figure(lambda_curve, press, markers,
                                     runner.path("comparison.png"))


def _run_sweep(runner: Runner, methods) -> dict:
    """Noise sweep: per-method selected counts across phi values and seeds."""
    cfg = runner.cfg
    phis = [float(x) for x in str(cfg["sweep_phi"]).split(",")]
    n_seeds = cfg["sweep_seeds"]
    base_seed = int(cfg["seed"])
    rows = []
    for phi in phis:
        for offset in range(n_seeds):
            spec_cfg = dict(cfg, synth_phi=phi, seed=base_seed + offset)
            market = synth.simulate_market(_spec_from_config(spec_cfg))
            report = baselines.timed_compare(market.panel, methods=methods,
                                             folds=cfg["folds"],
                                             press_regression=cfg["press_regression"])
            row = {"phi": phi, "seed": base_seed + offset}
            if "memory" in report:
                row["memory_m_star"] = report["memory"].get("m_star")
            if "cumvar" in report:
                row["cumvar_m70"] = report["cumvar"].get("m70")
                row["cumvar_m90"] = report["cumvar"].get("m90")
            if "press" in report:
                row["press_argmin"] = report["press"].get("argmin")
            rows.append(row)
    frame = pd.DataFrame(rows)
    runner.write_table("sweep_results.csv", frame)
    value_cols = [c for c in frame.columns if c not in ("phi", "seed")]
    summary = frame.groupby("phi", as_index=False)[value_cols].mean()
    runner.write_table("sweep_summary.csv", summary)
    if cfg.get("plots", True):
        table = {c: summary[c].to_numpy() for c in value_cols}
        plots.save_sweep_figure(summary["phi"].to_numpy(), table, runner.path("sweep.png"))
    return {"phis": phis, "n_seeds": n_seeds,
            "summary": summary.to_dict(orient="records")}


def cmd_portfolio(runner: Runner) -> dict:
    cfg = runner.cfg
    data = _load_logvol_panel(runner)
    corr = spectra.correlation(data)
    eigs = spectra.eigendecompose(corr)

    if cfg.get("returns_csv"):
        table = pd.read_csv(cfg["returns_csv"])
        returns = table.set_index("ticker").loc[data.column_ids, "expected"].to_numpy()
    else:
        returns = np.ones(corr.n)
    weights = runner.timed("markowitz", lambda: portfolio.markowitz_weights(
        corr, returns, cfg["delta"]))
    runner.write_table("weights.csv", pd.DataFrame(
        {"ticker": data.column_ids, "weight": weights}))

    out: dict = {"n_assets": corr.n}
    if cfg.get("groups"):
        labels_frame = pd.read_csv(cfg["groups"])
        labels = labels_frame.set_index("ticker").loc[data.column_ids, "group"].tolist()
        rows = []
        for comp in range(1, min(cfg["top_components"], eigs.n) + 1):
            proj = portfolio.sector_projection(eigs.eigenvectors[:, comp - 1], labels)
            for g, rho, raw in zip(proj.groups, proj.rho, proj.raw):
                rows.append({"component": comp, "group": g, "rho": rho, "raw": raw})
        runner.write_table("projections.csv", pd.DataFrame(rows))
        out["n_groups"] = len(set(labels))
    variance = portfolio.eigen_portfolio_variance(data, eigs.eigenvectors[:, 0],
                                                  eigs.eigenvalues[0])
    out["top_portfolio_variance"] = variance
    return out


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mempca",
        description="Select the number of principal components by residual memory.")
    parser.add_argument("--version", action="version", version=f"mempca {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int, help="seed for randomized stages")
    common.add_argument("--out-dir", dest="out_dir", help="output directory (default: out)")
    common.add_argument("--threads", type=int, help="worker threads for batched stages")
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="console summary format (default json)")
    common.add_argument("--no-plots", dest="no_plots", action="store_true", default=None,
                        help="skip figure rendering")

    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_, flags=()):
        p = sub.add_parser(name, parents=[common], help=help_)
        for args, kwargs in flags:
            p.add_argument(*args, **kwargs)
        p.set_defaults(func=func)
        return p

    in_flag = (("--input",), {"help": "input CSV path"})
    prices_flag = (("--prices",), {"help": "raw prices CSV (date,ticker,close)"})
    p_flag = (("--min-length-fraction",), {"dest": "min_length_fraction", "type": float,
                                           "help": "cleaning length threshold p in (0,1]"})

    add("clean", cmd_clean, "clean and align a raw price panel", [in_flag, p_flag])
    add("transform", cmd_transform, "prices to standardized log-volatility panel",
        [in_flag, p_flag])
    add("spectrum", cmd_spectrum, "correlation spectrum and bulk fit",
        [in_flag, prices_flag])
    add("select", cmd_select, "run the full memory-based selection",
        [in_flag, prices_flag,
         (("--m-max",), {"dest": "m_max", "type": int, "help": "override the outlier count"}),
         (("--l-max",), {"dest": "l_max", "type": int, "help": "autocorrelation lag cap"}),
         (("--folds",), {"type": int, "help": "penalty-selection folds"})])
    add("simulate", cmd_simulate, "generate a synthetic long-memory market",
        [(("--synth-n",), {"dest": "synth_n", "type": int}),
         (("--synth-t",), {"dest": "synth_t", "type": int}),
         (("--synth-k",), {"dest": "synth_k", "type": int}),
         (("--synth-layout",), {"dest": "synth_layout", "choices": ("homogeneous", "powerlaw")}),
         (("--synth-kind",), {"dest": "synth_kind", "choices": ("fgn", "ar1")}),
         (("--synth-phi",), {"dest": "synth_phi", "type": float})])
    add("compare", cmd_compare, "time and compare the stopping rules",
        [in_flag, prices_flag,
         (("--methods",), {"help": "comma list from memory,cumvar,press"}),
         (("--sweep-phi",), {"dest": "sweep_phi", "help": "comma list of noise variances"}),
         (("--sweep-seeds",), {"dest": "sweep_seeds", "type": int}),
         (("--folds",), {"type": int})])
    add("portfolio", cmd_portfolio, "optimal weights and sector projections",
        [in_flag, prices_flag,
         (("--groups",), {"help": "ticker,group CSV"}),
         (("--returns-csv",), {"dest": "returns_csv", "help": "ticker,expected CSV"}),
         (("--delta",), {"type": float, "help": "target return level"}),
         (("--top-components",), {"dest": "top_components", "type": int})])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA

    if cfg.get("threads"):
        import numba
        numba.set_num_threads(max(1, int(cfg["threads"])))

    runner = Runner(cfg)
    status = "ok"
    code = EXIT_OK
    try:
        summary = args.func(runner)
    except (ValueError, PipelineError, StageError, FileNotFoundError, KeyError) as exc:
        status = f"error: {exc}"
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        status = f"internal error: {exc}"
        print(f"internal error: {exc}", file=sys.stderr)
        code = EXIT_INTERNAL
    else:
        if cfg.get("format") == "csv":
            flat = {k: v for k, v in summary.items()
                    if isinstance(v, (int, float, str, bool, np.integer, np.floating))}
            print(",".join(flat.keys()))
            print(",".join(str(v) for v in flat.values()))
        else:
            print(json.dumps(summary, indent=2, default=str))
    finally:
        runner.write_manifest(status)
    return code


if __name__ == "__main__":
    sys.exit(main())
