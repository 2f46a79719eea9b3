"""Negative binomial, zero-inflated NB, and hurdle NB marginals.

Probability mass functions are evaluated in log space with log-gamma and
only exponentiated at the boundary, so small dispersion values and large
counts stay finite. Samplers are exact and deterministic given a seed.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import gammaln
from scipy.stats import nbinom

from .exceptions import DegenerateTruncationError, InvalidParameterError

__all__ = [
    "Flavor",
    "CountParams",
    "nb_log_pmf",
    "nb_pmf",
    "zinb_pmf",
    "hnb_pmf",
    "sample_count",
]

# total rejected draws tolerated before switching to inverse-CDF sampling
_ZT_REJECTION_CAP = 1_000_000


class Flavor(Enum):
    """Marginal family: plain NB, zero-inflated NB, or hurdle NB."""

    NB = "nb"
    ZINB = "zinb"
    HNB = "hnb"


@dataclass(frozen=True)
class CountParams:
    """Parameters of one count marginal.

    Parameters
    ----------
    mu : float
        Mean of the NB component, > 0.
    r : float
        Dispersion, > 0 (smaller means heavier overdispersion).
    pi : float
        Zero weight in [0, 1]: extra-zero probability for ZINB, hurdle
        probability for HNB. Unused for NB and stored as 0.
    flavor : Flavor
    """

    mu: float
    r: float
    pi: float = 0.0
    flavor: Flavor = Flavor.NB

    def __post_init__(self):
        mu, r, pi = float(self.mu), float(self.r), float(self.pi)
        if not (np.isfinite(mu) and mu > 0):
            raise InvalidParameterError(f"mu must be finite and > 0, got {self.mu}")
        if not (np.isfinite(r) and r > 0):
            raise InvalidParameterError(f"r must be finite and > 0, got {self.r}")
        if self.flavor is Flavor.NB:
            pi = 0.0
        elif not (np.isfinite(pi) and 0.0 <= pi <= 1.0):
            raise InvalidParameterError(f"pi must lie in [0, 1], got {self.pi}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "pi", pi)


def _check_counts(y) -> np.ndarray:
    y = np.asarray(y)
    if np.any(y < 0):
        raise ValueError("counts must be nonnegative")
    return y


def _nb_log_pmf_raw(y, mu, r):
    """log NB(y; mu, r), vectorized over y and mu."""
    y = np.asarray(y, dtype=float)
    # r*ln(r/(mu+r)) written via log1p so the mu -> 0 limit is exact
    log_p0 = -r * np.log1p(mu / r)
    with np.errstate(divide="ignore", invalid="ignore"):
        count_term = y * (np.log(mu) - np.log(mu + r))
    count_term = np.where(y == 0, 0.0, count_term)
    return gammaln(y + r) - gammaln(r) - gammaln(y + 1) + count_term + log_p0


def _log_nb_zero(mu, r):
    """log NB(0; mu, r) = -r*log(1 + mu/r)."""
    return -r * np.log1p(np.asarray(mu, dtype=float) / r)


def nb_log_pmf(y, params: CountParams):
    """Log pmf of the negative binomial with mean ``mu`` and dispersion ``r``.

    ``y`` may be a scalar or array of nonnegative integers.
    """
    if params.flavor is not Flavor.NB:
        raise InvalidParameterError("nb_log_pmf requires flavor NB")
    y = _check_counts(y)
    out = _nb_log_pmf_raw(y, params.mu, params.r)
    return float(out) if np.isscalar(y) or y.ndim == 0 else out


def nb_pmf(y, params: CountParams):
    """NB pmf; thin exponentiation of :func:`nb_log_pmf`."""
    return np.exp(nb_log_pmf(y, params))


def zinb_pmf(y, params: CountParams):
    """Zero-inflated NB pmf.

    P(0) = pi + (1-pi)*NB(0); P(y) = (1-pi)*NB(y) for y > 0.
    """
    if params.flavor is not Flavor.ZINB:
        raise InvalidParameterError("zinb_pmf requires flavor ZINB")
    y = _check_counts(y)
    pi = params.pi
    base = np.exp(_nb_log_pmf_raw(y, params.mu, params.r))
    out = np.where(np.asarray(y) == 0, pi + (1.0 - pi) * base, (1.0 - pi) * base)
    return float(out) if np.isscalar(y) or np.asarray(y).ndim == 0 else out


def hnb_pmf(y, params: CountParams):
    """Hurdle NB pmf.

    P(0) = pi exactly; P(y) = (1-pi)*NB(y)/(1-NB(0)) for y > 0, i.e. the
    zero-truncated NB reweighted by the continuation probability. The zero
    weight may sit below NB(0), which is how zero deflation is expressed.
    """
    if params.flavor is not Flavor.HNB:
        raise InvalidParameterError("hnb_pmf requires flavor HNB")
    y = _check_counts(y)
    arr = np.asarray(y)
    pi = params.pi
    if np.any(arr > 0):
        denom = -np.expm1(_log_nb_zero(params.mu, params.r))
        if denom <= 0.0:
            raise DegenerateTruncationError(
                f"1 - NB(0) underflowed for mu={params.mu}, r={params.r}"
            )
        positive = (1.0 - pi) * np.exp(_nb_log_pmf_raw(arr, params.mu, params.r)) / denom
    else:
        positive = np.zeros_like(arr, dtype=float)
    out = np.where(arr == 0, pi, positive)
    return float(out) if np.isscalar(y) or arr.ndim == 0 else out


def _sample_nb(rng: np.random.Generator, mu, r, size=None):
    """NB draws; mu may be scalar or per-draw vector."""
    mu = np.asarray(mu, dtype=float)
    p = r / (r + mu)
    return rng.negative_binomial(r, p, size=size if size is not None else mu.shape)


def _sample_zero_truncated_nb(rng: np.random.Generator, mu, r, size=None):
    """Zero-truncated NB draws by rejection, inverse CDF as fallback.

    Rejection redraws zero outcomes; after `_ZT_REJECTION_CAP` total
    rejections the remaining entries are sampled through the NB quantile
    function restricted to (NB(0), 1].
    """
    mu = np.broadcast_to(np.asarray(mu, dtype=float), size if size is not None else np.shape(mu)).copy()
    log_nb0 = _log_nb_zero(mu, r)
    if np.any(-np.expm1(log_nb0) <= 0.0):
        raise DegenerateTruncationError("1 - NB(0) underflowed; truncated NB undefined")
    y = _sample_nb(rng, mu, r)
    rejected = 0
    while True:
        mask = y == 0
        n_bad = int(mask.sum())
        if n_bad == 0:
            return y
        if rejected + n_bad > _ZT_REJECTION_CAP:
            break
        y[mask] = _sample_nb(rng, mu[mask], r)
        rejected += n_bad
    # inverse-CDF fallback: u uniform on (NB(0), 1]
    mask = y == 0
    nb0 = np.exp(log_nb0[mask])
    u = nb0 + (1.0 - nb0) * rng.random(int(mask.sum()))
    q = nbinom.ppf(u, r, r / (r + mu[mask]))
    y[mask] = np.maximum(q, 1).astype(y.dtype)
    return y


def _sample_zinb(rng: np.random.Generator, mu, r, pi, size=None):
    mu = np.asarray(mu, dtype=float)
    shape = size if size is not None else mu.shape
    y = _sample_nb(rng, np.broadcast_to(mu, shape), r)
    if np.any(np.asarray(pi) > 0):
        extra = rng.random(shape) < pi
        y = np.where(extra, 0, y)
    return y

def _sample_hnb(rng: np.random.Generator, mu, r, pi, size=None):
    mu = np.broadcast_to(np.asarray(mu, dtype=float), size if size is not None else np.shape(mu))
    shape = mu.shape
    at_zero = rng.random(shape) < pi
    y = np.zeros(shape, dtype=np.int64)
    if np.any(~at_zero):
        y[~at_zero] = _sample_zero_truncated_nb(rng, mu[~at_zero], r)
    return y


def sample_count(n: int, params: CountParams, seed: int) -> np.ndarray:
    """Draw ``n`` i.i.d. values from the flavored distribution.

    Deterministic given ``seed``; HNB positives come from the
    zero-truncated NB so ``pi`` is the exact zero probability.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    mu = np.full(n, params.mu)
    if params.flavor is Flavor.NB:
        return _sample_nb(rng, mu, params.r)
    if params.flavor is Flavor.ZINB:
        return _sample_zinb(rng, mu, params.r, params.pi)
    return _sample_hnb(rng, mu, params.r, params.pi)
