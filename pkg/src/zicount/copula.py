"""Truncated latent Gaussian copula: estimation and sampling.

Observed vectors are modeled as coordinatewise monotone transforms of a
latent standard Gaussian vector, zeroed below per-variable truncation
levels. The latent correlation is recovered by inverting the bridge
function that maps a latent correlation (plus the two truncation levels)
to the population Kendall's tau of the observed pair.

Four-dimensional Gaussian orthant probabilities are computed with a
separation-of-variables reduction to a 3-d integral over the unit cube,
evaluated by randomized quasi-Monte Carlo with a fixed internal seed, so
every function here is deterministic.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

from .exceptions import (
    ClampedCorrelationWarning,
    ConstantColumnError,
    InvalidCorrelationError,
)

__all__ = [
    "KendallMatrix",
    "LatentCopulaModel",
    "kendall_tau_matrix",
    "zero_truncation_levels",
    "phi4",
    "bridge_tt",
    "invert_bridge",
    "fit_tlnpn",
    "sample_tlnpn",
    "nearest_correlation",
]

_ROOT2 = np.sqrt(2.0)
_QMC_SEED = 202406
_SIGMA_BRACKET = 0.9999
_TINY = 1e-300
_UEPS = 1e-16


@dataclass(frozen=True)
class KendallMatrix:
    """Pairwise Kendall's tau (ties count as zero), symmetric, unit diagonal."""

    tau: np.ndarray


@dataclass(frozen=True)
class LatentCopulaModel:
    """Fitted truncated latent Gaussian copula.

    sigma_hat : latent correlation matrix (positive definite)
    delta_hat : per-variable truncation levels on the Gaussian scale
    marginals : sorted training values per variable, used as empirical
        quantile tables when sampling
    """

    sigma_hat: np.ndarray
    delta_hat: np.ndarray
    marginals: tuple


def kendall_tau_matrix(data) -> KendallMatrix:
    """Pairwise-definition Kendall's tau matrix of an n x p data matrix.

    tau_jk = 2/(n(n-1)) * sum_{i<i'} sign(Y_ij - Y_i'j) sign(Y_ik - Y_i'k);
    tied pairs contribute zero.
    """
    Y = np.asarray(data, dtype=float)
    if Y.ndim != 2:
        raise ValueError("data must be 2-d")
    n, p = Y.shape
    if n < 2:
        raise ValueError("need at least 2 observations")
    for j in range(p):
        if np.all(Y[:, j] == Y[0, j]):
            raise ConstantColumnError(f"column {j} is constant; tau is undefined")
    # sign(Y_ij - Y_i'j) over all ordered pairs, laid out as (p, n*n);
    # float32 keeps the +-1 dot products exact for n*n < 2^24
    S = np.sign(Y.T[:, :, None] - Y.T[:, None, :]).reshape(p, n * n).astype(np.float32)
    tau = (S @ S.T).astype(np.float64) / (n * (n - 1))
    np.fill_diagonal(tau, 1.0)
    return KendallMatrix(tau=tau)


def zero_truncation_levels(data) -> np.ndarray:
    """Moment estimate of the truncation levels from per-column zero rates.

    The zero fraction is clamped to [1/(4n), 1 - 1/(4n)] so columns with
    no zeros (or only zeros) still map to finite Gaussian quantiles.
    """
    Y = np.asarray(data, dtype=float)
    n = Y.shape[0]
    if n < 2:
        raise ValueError("need at least 2 observations")
    pi_hat = np.mean(Y == 0, axis=0)
    lo = 1.0 / (4.0 * n)
    return ndtri(np.clip(pi_hat, lo, 1.0 - lo))


def _cholesky_or_raise(sigma):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape[0] != sigma.shape[1] or not np.allclose(sigma, sigma.T, atol=1e-10):
        raise InvalidCorrelationError("correlation matrix must be symmetric")
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise InvalidCorrelationError("correlation matrix is not positive definite") from exc


def _genz_means(a, chol, w):
    """Genz recursion for P(X <= a) given Cholesky factor and uniforms w.

    a : (d,) finite upper limits, chol : (d, d), w : (n, d-1).
    Returns the integrand evaluated at each QMC point.
    """
    d = len(a)
    e = ndtr(a[0] / chol[0, 0])
    prod = np.full(w.shape[0], e)
    y = np.empty((w.shape[0], d - 1))
    for i in range(1, d):
        y[:, i - 1] = ndtri(np.clip(w[:, i - 1] * e, _TINY, 1.0 - _UEPS))
        num = a[i] - y[:, :i] @ chol[i, :i]
        e = ndtr(num / chol[i, i])
        prod *= e
    return prod


def phi4(a, sigma4, tol: float = 1e-6) -> float:
    """CDF of a zero-mean 4-d Gaussian with correlation ``sigma4`` at ``a``.

    Infinite limits are allowed: +inf coordinates are marginalized out and
    any -inf yields 0. The randomized QMC estimate uses scrambled Sobol
    batches with an internal fixed seed; batch size doubles until the
    3-sigma error estimate drops below ``tol`` or the point budget
    (2e5) is spent.
    """
    a = np.asarray(a, dtype=float)
    sigma4 = np.asarray(sigma4, dtype=float)
    if a.shape != (4,) or sigma4.shape != (4, 4):
        raise ValueError("phi4 expects a 4-vector and a 4x4 matrix")
    _cholesky_or_raise(sigma4)

    if np.any(np.isneginf(a)):
        return 0.0
    keep = ~np.isposinf(a)
    if not keep.any():
        return 1.0
    a = a[keep]
    sig = sigma4[np.ix_(keep, keep)]
    if len(a) == 1:
        return float(ndtr(a[0] / np.sqrt(sig[0, 0])))

    # most restrictive variable first improves the conditional decomposition
    order = np.argsort(a)
    chol = np.linalg.cholesky(sig[np.ix_(order, order)])
    a = a[order]

    d = len(a)
    n_batches = 8
    n = 2048
    total = 0
    seed = _QMC_SEED
    while True:
        means = np.empty(n_batches)
        for b in range(n_batches):
            w = qmc.Sobol(d - 1, scramble=True, seed=seed + b).random(n)
            means[b] = _genz_means(a, chol, w).mean()
        est = float(means.mean())
        err = 3.0 * float(means.std(ddof=1)) / np.sqrt(n_batches)
        total += n_batches * n
        if err <= tol or total >= 200_000:
            return est
        n *= 2
        seed += 1009


def _sigma4_pair(s: float):
    """The two 4x4 correlation matrices of the truncated/truncated bridge."""
    s4a = np.array(
        [
            [1.0, 0.0, 1.0 / _ROOT2, -s / _ROOT2],
            [0.0, 1.0, -s / _ROOT2, 1.0 / _ROOT2],
            [1.0 / _ROOT2, -s / _ROOT2, 1.0, -s],
            [-s / _ROOT2, 1.0 / _ROOT2, -s, 1.0],
        ]
    )
    s4b = np.array(
        [
            [1.0, s, 1.0 / _ROOT2, s / _ROOT2],
            [s, 1.0, s / _ROOT2, 1.0 / _ROOT2],
            [1.0 / _ROOT2, s / _ROOT2, 1.0, s],
            [s / _ROOT2, 1.0 / _ROOT2, s, 1.0],
        ]
    )
    return s4a, s4b


def bridge_tt(sigma_jk: float, delta_j: float, delta_k: float, tol: float = 1e-6) -> float:
    """Population Kendall's tau of a truncated pair with latent correlation
    ``sigma_jk`` and truncation levels ``delta_j``, ``delta_k``.

    Strictly increasing in ``sigma_jk``; zero at zero.
    """
    if not abs(sigma_jk) < 1.0:
        raise InvalidCorrelationError("|sigma_jk| must be < 1")
    s4a, s4b = _sigma4_pair(float(sigma_jk))
    limits = np.array([-delta_j, -delta_k, 0.0, 0.0])
    return -2.0 * phi4(limits, s4a, tol) + 2.0 * phi4(limits, s4b, tol)


def _phi4_batch(a, sigmas, n_points: int, seed: int = _QMC_SEED, chunk: int = 256) -> np.ndarray:
    """Batched 4-d Gaussian CDF, one scrambled Sobol stream shared by all
    batch members (finite limits only, no error estimate)."""
    a = np.asarray(a, dtype=float)
    chols = np.linalg.cholesky(np.asarray(sigmas, dtype=float))
    w = qmc.Sobol(3, scramble=True, seed=seed).random(n_points)
    out = np.empty(a.shape[0])
    for start in range(0, a.shape[0], chunk):
        sl = slice(start, min(start + chunk, a.shape[0]))
        ab, Cb = a[sl], chols[sl]
        b = ab.shape[0]
        e = ndtr(ab[:, 0, None] / Cb[:, 0, 0, None])
        prod = np.broadcast_to(e, (b, n_points)).copy()
        y = np.empty((b, n_points, 3))
        for i in range(1, 4):
            y[:, :, i - 1] = ndtri(np.clip(w[None, :, i - 1] * e, _TINY, 1.0 - _UEPS))
            num = ab[:, i, None] - np.einsum("bnk,bk->bn", y[:, :, :i], Cb[:, i, :i])
            e = ndtr(num / Cb[:, i, i, None])
            prod *= e
        out[sl] = prod.mean(axis=1)
    return out


def _bridge_batch(sig, dj, dk, n_points: int) -> np.ndarray:
    """Vectorized bridge values for per-pair (sigma, delta_j, delta_k)."""
    sig = np.asarray(sig, dtype=float)
    m = sig.shape[0]
    sigmas = np.empty((2 * m, 4, 4))
    for idx, s in enumerate(sig):
        s4a, s4b = _sigma4_pair(s)
        sigmas[idx] = s4a
        sigmas[m + idx] = s4b
    limits = np.column_stack([-np.asarray(dj, float), -np.asarray(dk, float), np.zeros(m), np.zeros(m)])
    a = np.vstack([limits, limits])
    probs = _phi4_batch(a, sigmas, n_points)
    return -2.0 * probs[:m] + 2.0 * probs[m:]


def invert_bridge(tau_hat: float, delta_j: float, delta_k: float, *, bracket_tol: float = 1e-6, phi4_tol: float = 1e-6) -> float:
    """Latent correlation whose bridge value equals ``tau_hat``.

    Root of the (strictly increasing) bridge on [-0.9999, 0.9999] by
    bracketing search; a ``tau_hat`` beyond the bridge range of that
    interval is clamped to the nearest endpoint with a warning.
    """
    if not (np.isfinite(delta_j) and np.isfinite(delta_k)):
        raise ValueError("truncation levels must be finite")
    if tau_hat == 0.0:
        return 0.0

    def g(s):
        return bridge_tt(s, delta_j, delta_k, tol=phi4_tol) - tau_hat

    lo, hi = -_SIGMA_BRACKET, _SIGMA_BRACKET
    g_lo, g_hi = g(lo), g(hi)
    if g_lo >= 0.0 or g_hi <= 0.0:
        clamped = lo if g_lo >= 0.0 else hi
        warnings.warn(
            f"tau_hat={tau_hat:.4g} outside the invertible range; clamped to sigma={clamped}",
            ClampedCorrelationWarning,
            stacklevel=2,
        )
        return clamped
    return float(brentq(g, lo, hi, xtol=bracket_tol))


def _invert_bridge_batch(tau, dj, dk, n_points: int = 4096) -> np.ndarray:
    """Vectorized bisection version of :func:`invert_bridge` used for
    whole-matrix fits; each pair advances one shared-sample bridge
    evaluation per iteration."""
    tau = np.asarray(tau, dtype=float)
    dj = np.asarray(dj, dtype=float)
    dk = np.asarray(dk, dtype=float)
    m = tau.shape[0]
    out = np.zeros(m)
    active = tau != 0.0
    if not active.any():
        return out

    lo = np.full(m, -_SIGMA_BRACKET)
    hi = np.full(m, _SIGMA_BRACKET)
    g_lo = _bridge_batch(lo[active], dj[active], dk[active], n_points)
    g_hi = _bridge_batch(hi[active], dj[active], dk[active], n_points)
    idx = np.flatnonzero(active)
    clamp_lo = idx[tau[idx] <= g_lo]
    clamp_hi = idx[tau[idx] >= g_hi]
    out[clamp_lo] = -_SIGMA_BRACKET
    out[clamp_hi] = _SIGMA_BRACKET
    n_clamped = len(clamp_lo) + len(clamp_hi)
    if n_clamped:
        warnings.warn(
            f"{n_clamped} pair(s) outside the invertible range; clamped to +-{_SIGMA_BRACKET}",
            ClampedCorrelationWarning,
            stacklevel=2,
        )
    active[clamp_lo] = False
    active[clamp_hi] = False
    if not active.any():
        return out

    idx = np.flatnonzero(active)
    lo_a, hi_a = lo[idx], hi[idx]
    # 21 halvings bring the 2*0.9999 bracket below 1e-6
    for _ in range(21):
        mid = 0.5 * (lo_a + hi_a)
        g_mid = _bridge_batch(mid, dj[idx], dk[idx], n_points)
        below = g_mid < tau[idx]
        lo_a = np.where(below, mid, lo_a)
        hi_a = np.where(below, hi_a, mid)
    out[idx] = 0.5 * (lo_a + hi_a)
    return out


def nearest_correlation(m, eig_floor: float = 1e-8) -> np.ndarray:
    """Project a symmetric matrix to a positive-definite correlation matrix.

    Eigenvalues are clipped at ``eig_floor``, the matrix is reconstructed
    and rescaled back to a unit diagonal.
    """
    m = np.asarray(m, dtype=float)
    if not np.allclose(m, m.T, atol=1e-10):
        raise ValueError("input must be symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    rebuilt = (vecs * np.clip(vals, eig_floor, None)) @ vecs.T
    d = np.sqrt(np.diag(rebuilt))
    out = rebuilt / np.outer(d, d)
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, 1.0)
    return out


def fit_tlnpn(data, *, qmc_points: int = 4096) -> LatentCopulaModel:
    """Fit the truncated latent Gaussian copula to an n x p count matrix.

    Pairwise bridge inversion of the Kendall's tau matrix, projection to
    the nearest positive-definite correlation, and storage of the
    empirical marginals.
    """
    Y = np.asarray(data, dtype=float)
    if Y.ndim != 2:
        raise ValueError("data must be 2-d")
    n, p = Y.shape
    if n < 10 or p < 2:
        raise ValueError("need n >= 10 and p >= 2")
    tau = kendall_tau_matrix(Y).tau
    delta = zero_truncation_levels(Y)

    ju, ku = np.triu_indices(p, k=1)
    sig_flat = _invert_bridge_batch(tau[ju, ku], delta[ju], delta[ku], n_points=qmc_points)
    sigma = np.eye(p)
    sigma[ju, ku] = sig_flat
    sigma[ku, ju] = sig_flat
    sigma = nearest_correlation(sigma)

    marginals = tuple(np.sort(Y[:, j]) for j in range(p))
    return LatentCopulaModel(sigma_hat=sigma, delta_hat=delta, marginals=marginals)


def _empirical_quantile(sorted_values: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Smallest order statistic whose empirical CDF reaches u."""
    m = len(sorted_values)
    idx = np.ceil(u * m).astype(np.int64) - 1
    return sorted_values[np.clip(idx, 0, m - 1)]


def sample_tlnpn(model: LatentCopulaModel, n: int, seed: int) -> np.ndarray:
    """Draw n rows: latent Gaussian with the fitted correlation, mapped
    through the normal CDF and each variable's empirical quantile table."""
    if n <= 0:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    p = model.sigma_hat.shape[0]
    chol = np.linalg.cholesky(model.sigma_hat)
    latent = rng.standard_normal((n, p)) @ chol.T
    u = ndtr(latent)
    out = np.empty((n, p))
    for j in range(p):
        out[:, j] = _empirical_quantile(model.marginals[j], u[:, j])
    return out
