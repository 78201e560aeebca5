"""Synthetic long-memory markets with known cluster structure.

Factor series are fractional Gaussian noise (circulant embedding, exact
covariance) or stationary AR(1); assets load on one market factor plus
one cluster factor and white noise. All randomness flows from a single
integer seed through numpy's SeedSequence spawning, with PCG64 streams,
so runs are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PipelineError
from .panel import StandardizedPanel, standardize_columns

DEFAULT_BETA0 = 1.3
DEFAULT_BETA_RANGE = (0.14, 1.0)
DEFAULT_H0 = 0.9
DEFAULT_H_RANGE = (0.7, 0.9)
DEFAULT_PSI0 = 0.95
DEFAULT_PSI_RANGE = (0.65, 0.95)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def fgn(H: float, T: int, seed) -> np.ndarray:
    """Fractional Gaussian noise with unit variance via circulant embedding.

    The circulant extension of the FGN covariance is non-negative
    definite for H < 1; eigenvalues that dip below zero by round-off are
    clipped, anything worse aborts.
    """
    if not 0.5 <= H < 1.0:
        raise ValueError(f"need 1/2 <= H < 1, got {H}")
    if T < 2:
        raise ValueError(f"need T >= 2, got {T}")
    rng = _rng(seed)
    k = np.arange(T, dtype=float)
    gamma = 0.5 * (np.abs(k - 1) ** (2 * H) - 2 * np.abs(k) ** (2 * H) + np.abs(k + 1) ** (2 * H))
    row = np.concatenate([gamma, gamma[-2:0:-1]])  # circulant first row, length 2T-2
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * max(lam.max(), 1.0):
        raise PipelineError(f"circulant embedding significantly indefinite: min eig {lam.min():.3e}")
    lam = np.maximum(lam, 0.0)
    m = row.size
    w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    y = np.fft.fft(np.sqrt(lam) * w) / np.sqrt(m)
    return np.ascontiguousarray(y.real[:T])


def fgn_acf(H: float, lags) -> np.ndarray:
    """Population autocorrelation of FGN at the given integer lags."""
    L = np.asarray(lags, dtype=float)
    return 0.5 * (np.abs(L - 1) ** (2 * H) - 2 * np.abs(L) ** (2 * H) + np.abs(L + 1) ** (2 * H))


def ar1(psi: float, T: int, seed) -> np.ndarray:
    """Stationary AR(1) with unit marginal variance; population ACF psi^L."""
    if not 0.0 < psi < 1.0:
        raise ValueError(f"need 0 < psi < 1, got {psi}")
    if T < 2:
        raise ValueError(f"need T >= 2, got {T}")
    rng = _rng(seed)
    x = np.empty(T)
    x[0] = rng.standard_normal()  # stationary marginal N(0, 1)
    innov = rng.standard_normal(T - 1) * np.sqrt(1.0 - psi**2)
    for t in range(1, T):
        x[t] = psi * x[t - 1] + innov[t - 1]
    return x


def cluster_sizes(N: int, K: int, layout: str, seed=None) -> np.ndarray:
    """Cluster sizes summing exactly to N.

    homogeneous: N/K each (K must divide N). powerlaw: K draws from
    P(s) proportional to s^-2 on [2, N/2], proportionally rescaled and
    rounded by largest remainder to sum N, each size at least 2.
    """
    if K > N:
        raise ValueError(f"K={K} exceeds N={N}")
    if layout == "homogeneous":
        if N % K:
            raise ValueError(f"homogeneous layout needs K | N, got N={N}, K={K}")
        return np.full(K, N // K, dtype=int)
    if layout != "powerlaw":
        raise ValueError(f"unknown layout {layout!r}")
    rng = _rng(seed)
    support = np.arange(2, max(N // 2, 3) + 1, dtype=float)
    probs = support**-2.0
    probs /= probs.sum()
    raw = rng.choice(support, size=K, p=probs)
    scaled = raw * N / raw.sum()
    sizes = np.maximum(np.floor(scaled).astype(int), 2)
    # largest-remainder top-up (or trim from the largest if the floor overshot)
    while sizes.sum() < N:
        sizes[np.argmax(scaled - sizes)] += 1
    while sizes.sum() > N:
        j = np.argmax(sizes)
        if sizes[j] <= 2:
            raise ValueError(f"cannot fit {K} clusters of size >= 2 into N={N}")
        sizes[j] -= 1
    return sizes


@dataclass
class MarketSpec:
    """Parameters of one synthetic market."""

    n_assets: int
    n_obs: int
    n_clusters: int
    layout: str = "homogeneous"
    memory_kind: str = "fgn"  # "fgn" | "ar1"
    beta0: float = DEFAULT_BETA0
    beta_k: np.ndarray | None = None
    h0: float = DEFAULT_H0
    h_k: np.ndarray | None = None
    psi0: float = DEFAULT_PSI0
    psi_k: np.ndarray | None = None
    phi: float = 1.0
    seed: int = 0
    beta_spacing: str = "geometric"  # "geometric" | "linear"

    def resolved(self) -> "MarketSpec":
        """Fill in default parameter ladders and check the invariants.

        Cluster loadings span DEFAULT_BETA_RANGE, by default geometrically
        spaced: that choice matches the scale parameter the reference
        spectra imply (most clusters weak, a few strong), where a linear
        ladder concentrates too much variance in mid-strength clusters.
        Memory exponents are linearly spaced and sorted so stronger
        loadings pair with longer memory.
        """
        K = self.n_clusters
        spacer = np.geomspace if self.beta_spacing == "geometric" else np.linspace
        if self.beta_spacing not in ("geometric", "linear"):
            raise ValueError(f"unknown beta_spacing {self.beta_spacing!r}")
        beta_k = self.beta_k if self.beta_k is not None else spacer(*DEFAULT_BETA_RANGE, K)
        h_k = self.h_k if self.h_k is not None else np.linspace(*DEFAULT_H_RANGE, K)
        psi_k = self.psi_k if self.psi_k is not None else np.linspace(*DEFAULT_PSI_RANGE, K)
        beta_k, h_k, psi_k = (np.asarray(a, dtype=float) for a in (beta_k, h_k, psi_k))

        if self.beta0 <= 0:
            raise ValueError("beta0 must be positive")
        if self.phi < 0:
            raise ValueError("phi must be non-negative")
        if len(beta_k) != K or len(h_k) != K or len(psi_k) != K:
            raise ValueError("per-cluster parameter vectors must have length K")
        if self.memory_kind == "fgn":
            if not (0.5 <= self.h0 < 1.0) or np.any((h_k < 0.5) | (h_k >= 1.0)):
                raise ValueError("Hurst exponents must lie in [1/2, 1)")
        elif self.memory_kind == "ar1":
            if not (0.0 < self.psi0 < 1.0) or np.any((psi_k <= 0.0) | (psi_k >= 1.0)):
                raise ValueError("AR(1) coefficients must lie in (0, 1)")
        else:
            raise ValueError(f"unknown memory_kind {self.memory_kind!r}")

        # stronger loading pairs with stronger memory
        order = np.argsort(beta_k)
        h_sorted = np.sort(h_k)
        psi_sorted = np.sort(psi_k)
        h_aligned = np.empty(K)
        psi_aligned = np.empty(K)
        h_aligned[order] = h_sorted
        psi_aligned[order] = psi_sorted
        return MarketSpec(self.n_assets, self.n_obs, K, self.layout, self.memory_kind,
                          self.beta0, beta_k, self.h0, h_aligned, self.psi0, psi_aligned,
                          self.phi, self.seed, self.beta_spacing)


@dataclass
class SyntheticPanel:
    """Simulated log-volatility panel plus the generating ground truth."""

    panel: StandardizedPanel
    membership: np.ndarray          # (N,) cluster index per asset
    factor_series: np.ndarray       # (T, K) cluster factors
    market_series: np.ndarray       # (T,)
    cluster_sizes: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))


def simulate_market(spec: MarketSpec) -> SyntheticPanel:
    """Simulate the factor-plus-noise log-volatility market of one spec.

    Sub-streams: SeedSequence(seed).spawn yields, in order, the layout
    draw, the market factor, the K cluster factors, and the noise.
    """
    spec = spec.resolved()
    N, T, K = spec.n_assets, spec.n_obs, spec.n_clusters
    seeds = np.random.SeedSequence(spec.seed).spawn(K + 3)
    layout_rng = np.random.default_rng(seeds[0])
    sizes = cluster_sizes(N, K, spec.layout, layout_rng)
    membership = np.repeat(np.arange(K), sizes)

    if spec.memory_kind == "fgn":
        market = fgn(spec.h0, T, np.random.default_rng(seeds[1]))
        fac = np.column_stack([fgn(spec.h_k[k], T, np.random.default_rng(seeds[2 + k]))
                               for k in range(K)])
    else:
        market = ar1(spec.psi0, T, np.random.default_rng(seeds[1]))
        fac = np.column_stack([ar1(spec.psi_k[k], T, np.random.default_rng(seeds[2 + k]))
                               for k in range(K)])
    noise_rng = np.random.default_rng(seeds[K + 2])
    eps = noise_rng.standard_normal((T, N)) * np.sqrt(spec.phi)

    raw = spec.beta0 * market[:, None] + fac[:, membership] * spec.beta_k[membership] + eps
    tickers = [f"A{i:04d}" for i in range(N)]
    matrix = standardize_columns(raw, tickers)
    dates = [f"t{t:05d}" for t in range(T)]
    panel = StandardizedPanel(matrix, "log-volatility", tickers, dates).validate()
    return SyntheticPanel(panel, membership, fac, market, sizes)
