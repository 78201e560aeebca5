"""Acceptance suite: one test per criterion, printing a PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s``. The desk-scale
fixtures (homogeneous synthetic markets at N=300, K=10, T=2000) are
shared across criteria and dominate the runtime (a few minutes total).
Set MEMPCA_SLOW=1 to add the full-scale synthetic reference run.
"""

import os
import time

import numpy as np
import pytest

from mempca import reference
from mempca.baselines import cumvar_bracket, press_crossval, timed_compare
from mempca.detrend import detrend_market, market_mode
from mempca.errors import LogDomainError
from mempca.factors import component_series, fit_all_loadings, lasso_fit
from mempca.memory import (
    acf,
    acf_brute_force,
    bartlett_cut,
    fit_theta,
    integrated_proxy,
    memory_curve,
    theil_sen,
)
from mempca.panel import PricePanel, clean_prices, log_returns, raw_log_returns
from mempca.spectra import correlation, eigendecompose, fit_mp
from mempca.synth import MarketSpec, cluster_sizes, fgn, fgn_acf, simulate_market

from conftest import make_panel

DESK = dict(n_assets=300, n_obs=2000, n_clusters=10)
N_SEEDS = 20


def verdict(number, passed, detail):
    print(f"\nACCEPTANCE {number}: {'PASS' if passed else 'FAIL'} - {detail}")
    return passed


def desk_pipeline(seed, phi=1.0):
    """Stage-by-stage desk run keeping intermediates even if the fit fails."""
    market = simulate_market(MarketSpec(**DESK, phi=phi, seed=seed))
    panel = market.panel
    eigs_e = eigendecompose(correlation(panel))
    i0 = market_mode(panel, eigs_e.eigenvectors[:, 0])
    model, resid = detrend_market(panel, i0)
    eigs_g = eigendecompose(correlation(resid))
    fit = fit_mp(eigs_g, n_obs=resid.n_obs)
    series = component_series(resid, eigs_g, max(fit.m_max, 1))
    loadings = fit_all_loadings(resid, series)
    curve = memory_curve(resid, loadings, series)
    m_star = None
    try:
        m_star = fit_theta(curve).m_star
    except (LogDomainError, ValueError):
        pass
    bracket = cumvar_bracket(eigs_g, fit.m_max) if fit.m_max >= 1 else (None, None)
    return dict(market=market, panel=panel, resid=resid, model=model,
                eigs_e=eigs_e, eigs_g=eigs_g, mp_fit=fit, curve=curve,
                m_star=m_star, bracket=bracket)


@pytest.fixture(scope="module")
def desk_runs():
    return [desk_pipeline(seed) for seed in range(N_SEEDS)]


class TestCriterion1SelectionBracket:
    def test_m_star_within_cumvar_bracket(self, desk_runs):
        start = time.perf_counter()
        hits = sum(1 for r in desk_runs
                   if r["m_star"] is not None
                   and r["bracket"][0] <= r["m_star"] <= r["bracket"][1])
        detail = (f"memory-based m* within the [70%, 90%] bracket in {hits}/{N_SEEDS} "
                  f"desk seeds (need >= 16); "
                  f"m*={[r['m_star'] for r in desk_runs]}, "
                  f"brackets={[r['bracket'] for r in desk_runs]}")
        passed = hits >= 16
        verdict(1, passed, detail)
        assert time.perf_counter() - start < 300
        assert passed


class TestCriterion2ClusterRecovery:
    def test_outlier_count_near_k(self, desk_runs):
        hits = sum(1 for r in desk_runs if abs(r["mp_fit"].m_max - DESK["n_clusters"]) <= 2)
        detail = (f"MP outlier count within K+-2 in {hits}/{N_SEEDS} desk seeds "
                  f"(m_max values: {[r['mp_fit'].m_max for r in desk_runs]})")
        passed = hits >= 16
        verdict(2, passed, detail)
        assert passed


class TestCriterion3FgnFidelity:
    def test_sample_acf_matches_formula(self):
        start = time.perf_counter()
        worst = 0.0
        for H in (0.7, 0.8, 0.9):
            pop = fgn_acf(H, np.arange(1, 6))
            samples = []
            for seed in range(N_SEEDS):
                x = fgn(H, 4000, seed)
                var = (x**2).mean()
                samples.append([(x[L:] @ x[:-L]) / (4000 - L) / var for L in range(1, 6)])
            err = np.abs(np.mean(samples, axis=0) - pop).max()
            worst = max(worst, err)
        elapsed = time.perf_counter() - start
        passed = worst < 0.05 and elapsed < 30
        verdict(3, passed, f"FGN mean sample ACF lags 1-5 within +-0.05 "
                           f"(worst {worst:.4f}) in {elapsed:.1f}s")
        assert passed


class TestCriterion4MPCalibration:
    def test_white_noise_parameters(self):
        qs, sigmas = [], []
        for seed in range(N_SEEDS):
            rng = np.random.default_rng(seed)
            panel = make_panel(rng.standard_normal((1200, 300)))
            fit = fit_mp(eigendecompose(correlation(panel)), n_obs=1200)
            qs.append(fit.q)
            sigmas.append(fit.sigma)
        q_bar, s_bar = np.mean(qs), np.mean(sigmas)
        passed = abs(q_bar - 0.25) <= 0.025 and abs(s_bar - 1.0) <= 0.05
        verdict(4, passed, f"white-noise fit: mean q={q_bar:.4f} (target 0.25 +-10%), "
                           f"mean sigma={s_bar:.4f} (target 1 +-5%)")
        assert passed


class TestCriterion5OracleEquivalences:
    def test_exact_small_instance_oracles(self, rng):
        # acf vs double loop
        x = rng.standard_normal(128)
        acf_err = np.abs(acf(x).kappa - acf_brute_force(x)).max()

        # theil_sen vs all-pairs median
        pts = rng.standard_normal((20, 2))
        i, j = np.triu_indices(20, k=1)
        slopes = np.sort((pts[j, 1] - pts[i, 1]) / (pts[j, 0] - pts[i, 0]))
        ts_exact = theil_sen(pts) == slopes[(slopes.size - 1) // 2]

        # lasso at zero penalty vs normal equations
        F = rng.standard_normal((100, 4))
        y = F @ np.array([1.0, -0.5, 0.0, 0.2]) + 0.1 * rng.standard_normal(100)
        from mempca.factors import ComponentSeries
        beta = lasso_fit(y, ComponentSeries(F, "test"), 0.0)
        lasso_err = np.abs(beta - np.linalg.solve(F.T @ F, F.T @ y)).max()

        # PRESS vs independent fold-by-fold recomputation
        panel = make_panel(rng.standard_normal((40, 6)))
        curve = press_crossval(panel, m_max=3, folds=4)
        X, T = panel.matrix, 40
        bounds = np.linspace(0, T, 5).astype(int)
        expected = np.zeros(4)
        for g in range(4):
            te = np.arange(bounds[g], bounds[g + 1])
            tr = np.setdiff1d(np.arange(T), te)
            corr_tr = X[tr].T @ X[tr] / len(tr)
            w, v = np.linalg.eigh(corr_tr)
            v = v[:, np.argsort(w)[::-1]]
            expected[0] += (X[te] ** 2).sum()
            for m in range(1, 4):
                Itr, Ite = X[tr] @ v[:, :m], X[te] @ v[:, :m]
                beta_m = np.linalg.pinv(Itr.T @ Itr) @ Itr.T @ X[tr]
                expected[m] += ((Ite @ beta_m - X[te]) ** 2).sum()
        press_err = np.abs(curve.press - expected).max()

        # correlation vs brute-force sums
        small = make_panel(rng.standard_normal((12, 4)))
        corr = correlation(small).entries
        brute = np.array([[sum(small.matrix[t, a] * small.matrix[t, b]
                               for t in range(12)) / 12
                           for b in range(4)] for a in range(4)])
        off = ~np.eye(4, dtype=bool)
        corr_err = np.abs(corr[off] - brute[off]).max()

        passed = (acf_err <= 1e-12 and ts_exact and lasso_err <= 1e-6
                  and press_err <= 1e-8 and corr_err <= 1e-12)
        verdict(5, passed, f"oracles: acf {acf_err:.1e}, theil_sen exact={ts_exact}, "
                           f"lasso {lasso_err:.1e}, PRESS {press_err:.1e}, "
                           f"correlation {corr_err:.1e}")
        assert passed


class TestCriterion6BreakpointRecovery:
    def test_constructed_curves(self):
        failures = []
        for theta_true in range(5, 16):
            for gamma in (0.3, 0.5, 1.0):
                m = np.arange(1, 31)
                zeta = np.empty(31)
                zeta[0] = 1.0
                tail = (m / theta_true) ** -gamma
                head = np.exp(-0.6 * (theta_true - m))
                zeta[1:] = np.where(m >= theta_true, tail, head)
                zeta[1:] /= zeta[1]
                got = fit_theta(zeta).theta_hat
                if got != theta_true:
                    failures.append((theta_true, gamma, got))
        passed = not failures
        verdict(6, passed, f"breakpoint recovery exact on 11 x 3 constructed curves"
                           f"{'' if passed else f'; failures {failures}'}")
        assert passed


class TestCriterion7InvariantSuites:
    def test_invariants(self, desk_runs, rng):
        checks = {}
        run = desk_runs[0]
        zeta_ok = all(r["curve"].zeta[0] == 1.0 and
                      np.all(r["curve"].zeta[1:] <= 1.0 + 1e-10) for r in desk_runs)
        checks["zeta"] = zeta_ok

        from mempca.baselines import cumulative_variance
        curve = cumulative_variance(run["eigs_g"])
        checks["cumvar"] = (np.all(np.diff(curve.lambda_curve) >= 0)
                            and abs(curve.lambda_curve[-1] - 100) < 1e-8)

        checks["trace"] = all(abs(r["eigs_g"].eigenvalues.sum() - DESK["n_assets"]) < 1e-8
                              for r in desk_runs)

        from mempca.portfolio import eigen_portfolio_variance
        var = eigen_portfolio_variance(run["resid"], run["eigs_g"].eigenvectors[:, 0],
                                       run["eigs_g"].eigenvalues[0])
        checks["portfolio_var"] = abs(var - run["eigs_g"].eigenvalues[0]) < 1e-8

        model, panel = run["model"], run["panel"]
        raw_resid = panel.matrix - np.outer(model.i0, model.beta0) - model.alpha0
        ic = model.i0 - model.i0.mean()
        cov = np.abs((raw_resid - raw_resid.mean(axis=0)).T @ ic / panel.n_obs)
        checks["orthogonality"] = cov.max() < 1e-10

        checks["cluster_sizes"] = all(
            cluster_sizes(1200, 30, "powerlaw", seed).sum() == 1200 for seed in range(10))

        passed = all(checks.values())
        verdict(7, passed, f"invariants {checks}")
        assert passed


class TestCriterion8PerformanceRatio:
    def test_memory_faster_than_press(self):
        market = simulate_market(MarketSpec(**DESK, phi=1.0, seed=0))
        report = timed_compare(market.panel, methods=("memory", "press"))
        t_memory = report["memory"]["seconds"]
        t_press = report["press"]["seconds"]
        ratio = t_press / t_memory
        passed = ratio >= 3.0
        verdict(8, passed, f"memory {t_memory:.2f}s vs PRESS {t_press:.2f}s "
                           f"-> {ratio:.1f}x (need >= 3x; full-scale reference ~8x)")
        assert passed


class TestCriterion9NoiseSweep:
    def test_m_star_non_increasing_in_noise(self, desk_runs):
        phis = (0.25, 0.5, 1.0, 1.5)
        averages = []
        for phi in phis:
            if phi == 1.0:
                stars = [r["m_star"] for r in desk_runs]
            else:
                stars = [desk_pipeline(seed, phi=phi)["m_star"] for seed in range(N_SEEDS)]
            valid = [s for s in stars if s is not None]
            averages.append(np.mean(valid) if valid else np.nan)
        steps = np.diff(averages)
        violations = steps[steps > 0]
        passed = (violations.size <= 1) and np.all(violations <= 1.0)
        verdict(9, passed, f"seed-averaged m* across phi {phis}: "
                           f"{[round(a, 2) for a in averages]} "
                           f"(non-increasing, one inversion of <= 1 allowed)")
        assert passed


class TestCriterion10EmpiricalReferencesAndIngestion:
    def test_reference_constants_documented(self):
        emp = reference.EMPIRICAL
        ok = (emp["m_star"] == 15 and emp["detrended_spectrum"]["m_max"] == 35
              and emp["detrended_spectrum"]["q"] == 0.41
              and reference.SYNTHETIC_HOMOGENEOUS["m_star"] == 19
              and reference.SYNTHETIC_HETEROGENEOUS["m_star"] == 12)
        verdict(10, ok, "full-scale numbers are documented reference constants "
                        "(proprietary input data; not reproducible here)")
        assert ok

    def test_ingestion_exercises_every_cleaning_rule(self):
        # (i) short-series removal, (ii) common-earliest truncation,
        # (iii) union date axis, (iv) forward-fill with zero log-returns
        dates = [f"2020-01-{d:02d}" for d in range(1, 21)]
        values = np.full((20, 4), np.nan)
        rng = np.random.default_rng(3)
        walk = lambda n, base: base * np.exp(np.cumsum(rng.normal(0, 0.02, n)))
        values[:, 0] = walk(20, 100.0)                                # full history
        values[4:, 1] = walk(16, 50.0)                                # starts late
        values[:, 2] = walk(20, 80.0)
        values[np.arange(2, 20, 3), 2] = np.nan                       # periodic gaps
        values[12:, 3] = walk(8, 10.0)                                # too short
        raw = PricePanel(dates, ["FULL", "LATE", "GAPPY", "SHORT"], values)

        cleaned, report = clean_prices(raw, 0.6, return_report=True)
        rule_removal = report["removed"] == ["SHORT"]
        rule_truncation = cleaned.dates[0] == "2020-01-05"            # LATE's first day
        rule_union = len(cleaned.dates) == 16                         # all days survive
        fills = report["fill_counts"]["GAPPY"]
        returns = raw_log_returns(cleaned)
        filled_rows = [i - 4 for i in range(4, 20) if np.isnan(raw.values[i, 2])]
        gap_col = cleaned.tickers.index("GAPPY")
        rule_fill = (fills == len(filled_rows)
                     and np.allclose(returns[[i - 1 for i in filled_rows], gap_col], 0.0))
        passed = rule_removal and rule_truncation and rule_union and rule_fill
        verdict(10, passed, f"cleaning rules exercised: removal={rule_removal}, "
                            f"truncation={rule_truncation}, union={rule_union}, "
                            f"fill->zero-return={rule_fill} ({fills} fills)")
        assert passed
        log_returns(cleaned).validate()


@pytest.mark.skipif(not os.environ.get("MEMPCA_SLOW"),
                    reason="full-scale reference run (~2 min)")
class TestFullScaleReference:
    """Full-scale synthetic reference: not an acceptance criterion, but the
    strongest sanity anchor for the pipeline (spectrum edge, outlier count,
    breakpoint) against the published homogeneous-market values."""

    def test_homogeneous_reference_values(self):
        market = simulate_market(MarketSpec(1200, 4000, 30, phi=1.0, seed=0))
        panel = market.panel
        eigs_e = eigendecompose(correlation(panel))
        _, resid = detrend_market(panel, market_mode(panel, eigs_e.eigenvectors[:, 0]))
        eigs_g = eigendecompose(correlation(resid))
        fit = fit_mp(eigs_g, n_obs=resid.n_obs)
        series = component_series(resid, eigs_g, fit.m_max)
        loadings = fit_all_loadings(resid, series)
        theta = fit_theta(memory_curve(resid, loadings, series))
        ref = reference.SYNTHETIC_HOMOGENEOUS
        print(f"\nfull-scale: lambda+={fit.lambda_plus:.4f} (ref {ref['spectrum']['lambda_plus']}), "
              f"m_max={fit.m_max} (ref {ref['spectrum']['m_max']}), "
              f"theta={theta.theta_hat} (100-sample-median ref {ref['theta_hat']})")
        assert abs(fit.m_max - ref["spectrum"]["m_max"]) <= 2
        assert fit.lambda_plus == pytest.approx(ref["spectrum"]["lambda_plus"], abs=0.15)
        # single samples spread around the published median-curve breakpoint;
        # the selector must land in the post-cliff tail, not on a whole-curve fit
        assert 14 <= theta.theta_hat <= 28
