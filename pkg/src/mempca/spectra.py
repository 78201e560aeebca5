"""Correlation matrices, eigendecomposition, and the noise-bulk fit.

The bulk of the eigenvalue spectrum of a large sample correlation matrix
is compared against the Marchenko-Pastur density with free shape and
scale parameters; eigenvalues above the fitted upper edge are counted as
informative outliers (m_max).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import ContractViolationError, DecompositionError, FitError
from .panel import StandardizedPanel

SYM_TOL = 1e-12
DIAG_TOL = 1e-10
EIG_FLOOR = -1e-10
RECON_TOL = 1e-8

MP_SEARCH_BOX = ((0.01, 2.0), (0.1, 3.0))  # (q, sigma)


@dataclass
class CorrelationMatrix:
    """N x N sample correlation matrix with its observation count."""

    entries: np.ndarray
    n_obs: int

    def validate(self) -> "CorrelationMatrix":
        c = self.entries
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ContractViolationError(f"correlation matrix must be square, got {c.shape}")
        asym = np.abs(c - c.T).max()
        if asym >= SYM_TOL:
            raise ContractViolationError(f"asymmetry {asym:.2e} exceeds {SYM_TOL}")
        diag_err = np.abs(np.diag(c) - 1.0).max()
        if diag_err >= DIAG_TOL:
            raise ContractViolationError(f"diagonal off one by {diag_err:.2e}")
        if np.linalg.eigvalsh(c).min() < EIG_FLOOR:
            raise ContractViolationError("correlation matrix has a significantly negative eigenvalue")
        return self

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass
class EigenSystem:
    """Descending eigenvalues with aligned column-orthonormal eigenvectors."""

    eigenvalues: np.ndarray  # (N,), descending
    eigenvectors: np.ndarray  # (N, N), column j pairs with eigenvalues[j]

    def validate(self, source: np.ndarray | None = None) -> "EigenSystem":
        w, v = self.eigenvalues, self.eigenvectors
        if np.any(np.diff(w) > 0):
            raise ContractViolationError("eigenvalues must be sorted descending")
        ortho = np.abs(v.T @ v - np.eye(v.shape[1])).max()
        if ortho >= RECON_TOL:
            raise ContractViolationError(f"eigenvectors not orthonormal: {ortho:.2e}")
        if source is not None:
            recon = np.abs(source - (v * w) @ v.T).max()
            if recon >= RECON_TOL:
                raise ContractViolationError(f"reconstruction error {recon:.2e}")
        return self

    @property
    def n(self) -> int:
        return self.eigenvalues.size


@dataclass
class MPFit:
    """Fitted bulk parameters, support edges, and the outlier count."""

    q: float
    sigma: float
    lambda_minus: float
    lambda_plus: float
    fit_error: float
    m_max: int


def correlation(panel: StandardizedPanel) -> CorrelationMatrix:
    """Sample correlation (1/T) X'X of a standardized panel."""
    X = panel.matrix
    T = X.shape[0]
    if T < 2:
        raise ValueError("need at least 2 observations")
    panel.validate()  # a non-standardized panel would break the unit diagonal
    C = X.T @ X / T
    C = (C + C.T) / 2.0
    np.fill_diagonal(C, 1.0)
    return CorrelationMatrix(C, T).validate()


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Sign convention: the first non-negligible entry of each column is >= 0."""
    v = vectors.copy()
    for j in range(v.shape[1]):
        col = v[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        lead = nz[0] if nz.size else int(np.argmax(np.abs(col)))
        if col[lead] < 0:
            v[:, j] = -col
    return v


def eigendecompose(corr: CorrelationMatrix) -> EigenSystem:
    """Full symmetric eigendecomposition, descending, sign-fixed."""
    corr.validate()
    try:
        w, v = np.linalg.eigh(corr.entries)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise DecompositionError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(w)[::-1]
    system = EigenSystem(w[order], _fix_signs(v[:, order]))
    return system.validate(source=corr.entries)


# ---------------------------------------------------------------------------
# Marchenko-Pastur


def mp_support(q: float, sigma: float) -> tuple[float, float]:
    """Support edges sigma^2 (1 -+ sqrt(q))^2 of the bulk density."""
    lo = sigma**2 * (1.0 - np.sqrt(q)) ** 2
    hi = sigma**2 * (1.0 + np.sqrt(q)) ** 2
    return float(lo), float(hi)


def mp_density(lam, q: float, sigma: float):
    """Bulk eigenvalue density; zero outside the open support interval.

    Accepts a scalar or an array of evaluation points.
    """
    if q <= 0 or sigma <= 0:
        raise ValueError("q and sigma must be positive")
    lo, hi = mp_support(q, sigma)
    lam_arr = np.asarray(lam, dtype=float)
    out = np.zeros_like(lam_arr)
    inside = (lam_arr > lo) & (lam_arr < hi)
    x = lam_arr[inside]
    out[inside] = np.sqrt((hi - x) * (x - lo)) / (2.0 * np.pi * q * sigma**2 * x)
    return float(out) if np.isscalar(lam) else out


def _fd_histogram(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Freedman-Diaconis density histogram (bin floor of 5)."""
    q75, q25 = np.percentile(values, [75, 25])
    width = 2.0 * (q75 - q25) / values.size ** (1.0 / 3.0)
    span = values.max() - values.min()
    if width <= 0 or span <= 0:
        raise FitError("degenerate spectrum: histogram has no spread",
                       {"span": float(span), "iqr": float(q75 - q25)})
    n_bins = max(5, int(np.ceil(span / width)))
    dens, edges = np.histogram(values, bins=n_bins, density=True)
    return dens, edges


def fit_mp(eigs: EigenSystem, n_obs: int | None = None, max_iter: int = 20) -> MPFit:
    """Fit (q, sigma) to the bulk of the spectrum and count outliers.

    Iterative scheme: histogram the current bulk (Freedman-Diaconis
    bins), least-squares match to the bulk density via Nelder-Mead over
    the search box, recompute the bulk as {lambda <= lambda_+}, and stop
    once the outlier count stabilizes. The initial bulk split uses
    q0 = N/n_obs (0.3 when n_obs is unknown) and sigma0 = 1.
    """
    values = np.asarray(eigs.eigenvalues, dtype=float)
    n = values.size
    if n < 50:
        raise ValueError(f"need at least 50 eigenvalues for a meaningful histogram, got {n}")
    if np.allclose(values, values[0]):
        raise FitError("degenerate spectrum: all eigenvalues equal",
                       {"value": float(values[0])})

    q = float(np.clip(n / n_obs, *MP_SEARCH_BOX[0])) if n_obs else 0.3
    sigma = 1.0
    _, lam_plus = mp_support(q, sigma)
    m_prev = -1
    err = np.inf
    for _ in range(max_iter):
        bulk = values[values <= lam_plus]
        m_now = int((values > lam_plus).sum())
        if m_now == m_prev:
            break
        if bulk.size < 10:
            raise FitError("bulk collapsed during iteration",
                           {"lambda_plus": lam_plus, "bulk_size": int(bulk.size)})
        dens, edges = _fd_histogram(bulk)
        centers = (edges[:-1] + edges[1:]) / 2.0

        def objective(params):
            return float(np.sum((dens - mp_density(centers, params[0], params[1])) ** 2))

        res = optimize.minimize(objective, [q, sigma], method="Nelder-Mead",
                                bounds=MP_SEARCH_BOX,
                                options={"xatol": 1e-6, "fatol": 1e-12, "maxiter": 2000})
        if not res.success:
            raise FitError("bulk fit did not converge",
                           {"message": res.message, "x": res.x.tolist()})
        q, sigma = float(res.x[0]), float(res.x[1])
        err = float(res.fun)
        _, lam_plus = mp_support(q, sigma)
        m_prev = m_now

    lam_minus, lam_plus = mp_support(q, sigma)
    m_max = int((values > lam_plus).sum())
    return MPFit(q, sigma, lam_minus, lam_plus, err, m_max)


def count_outliers(eigs: EigenSystem, fit: MPFit) -> int:
    """Number of eigenvalues strictly above the fitted upper edge."""
    return int((eigs.eigenvalues > fit.lambda_plus).sum())


# ---------------------------------------------------------------------------
# reporting


def spectrum_report(eigs: EigenSystem, fit: MPFit) -> dict:
    """JSON-ready spectrum summary."""
    return {
        "eigenvalues": [float(x) for x in eigs.eigenvalues],
        "mp": {
            "q": fit.q,
            "sigma": fit.sigma,
            "lambda_plus": fit.lambda_plus,
            "lambda_minus": fit.lambda_minus,
            "m_max": fit.m_max,
        },
    }


def histogram_table(eigs: EigenSystem, fit: MPFit) -> dict[str, np.ndarray]:
    """Bulk histogram vs fitted density, as plot-ready columns."""
    bulk = eigs.eigenvalues[eigs.eigenvalues <= fit.lambda_plus]
    dens, edges = _fd_histogram(bulk)
    centers = (edges[:-1] + edges[1:]) / 2.0
    return {
        "bin_left": edges[:-1],
        "bin_right": edges[1:],
        "density": dens,
        "mp_density": mp_density(centers, fit.q, fit.sigma),
    }
