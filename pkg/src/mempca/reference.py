"""Reference values reported for the original full-scale experiments.

The empirical numbers come from a proprietary daily closing-price panel
(1270 listed tickers, January 2000 to May 2017, cleaned to 1202 x 4364)
and are NOT reproducible here; they are recorded as documented constants
for comparison when such data is available. The full-scale synthetic
numbers refer to N=1200, T=4000, K=30 markets averaged over 100 samples
and are approachable with this package (see the opt-in slow tests).
"""

# proprietary-data results: documentation only
EMPIRICAL = {
    "n_tickers_raw": 1270,
    "n_tickers_clean": 1202,
    "n_obs": 4364,
    "raw_spectrum": {"q": 0.38, "sigma": 1.03, "lambda_plus": 2.80, "outliers": 22},
    "detrended_spectrum": {"q": 0.41, "sigma": 1.01, "lambda_plus": 2.77, "m_max": 35},
    "theta_hat": 16,
    "m_star": 15,
    "cumvar_bracket": (13, 27),
    "press_argmin": 28,
    "seconds_memory": 209.7,
    "seconds_press": 1462.3,
}

# homogeneous synthetic market at full scale (equal clusters of 40)
SYNTHETIC_HOMOGENEOUS = {
    "n_assets": 1200,
    "n_obs": 4000,
    "n_clusters": 30,
    "spectrum": {"q": 0.284, "sigma": 0.939, "lambda_plus": 2.0756, "m_max": 30},
    "theta_hat": 20,
    "m_star": 19,
    "cumvar_bracket": (12, 22),
    "press_argmin": 29,
    "seconds_memory": 138.6,
    "seconds_press": 1136.8,
}

# heterogeneous synthetic market (power-law cluster sizes, mean 40, std 26.2)
SYNTHETIC_HETEROGENEOUS = {
    "n_assets": 1200,
    "n_obs": 4000,
    "n_clusters": 30,
    "cluster_size_std": 26.2,
    "spectrum": {"q": 0.299, "sigma": 0.898, "lambda_plus": 1.9322, "m_max": 28},
    "theta_hat": 13,
    "m_star": 12,
    "cumvar_bracket": (7, 17),
    "press_argmin": 25,
    "seconds_memory": 137.6,
    "seconds_press": 1146.3,
}

# short-memory AR(1) variant of the same markets
SYNTHETIC_AR1 = {"theta_hat_homogeneous": 8, "theta_hat_heterogeneous": 6}
