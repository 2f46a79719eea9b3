"""Synthetic population generators for the benchmark scenarios.

Three scenario families are covered: a univariate regression comparison
(with a zero-deflation sweep variant), a multivariate hurdle-NB population
driven by correlated Gaussian covariates, and a truncated-copula
population built on empirical marginals taken from a source count table.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, logit, ndtr

from .counts import Flavor, _log_nb_zero, _sample_hnb, _sample_zinb
from .copula import _empirical_quantile
from .exceptions import InfeasibleTargetError, SelectionError

__all__ = [
    "CorrKind",
    "CorrelationSpec",
    "Setting",
    "SettingConfig",
    "ar_correlation",
    "gd_covariance",
    "random_orthogonal",
    "sample_mvn",
    "gen_setting_one",
    "calibrate_gamma0",
    "calibrate_gamma0_structural",
    "resolve_setting_one_gamma0",
    "gen_setting_two",
    "gen_setting_three",
    "select_columns_by_zero_fraction",
]


class CorrKind(Enum):
    AR = "AR"
    GD = "GD"


@dataclass(frozen=True)
class CorrelationSpec:
    """Dependence structure for covariates or latent variables.

    AR: entries rho^|j-j'| (|rho| < 1). GD: covariance with geometrically
    decaying eigenvalues summing to 5 (0 < rho < 1) in a Haar-random
    orthogonal eigenbasis drawn from ``orthogonal_seed``.
    """

    kind: CorrKind
    rho: float
    p: int
    orthogonal_seed: int = 0

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be positive")
        if self.kind is CorrKind.AR and not abs(self.rho) < 1.0:
            raise ValueError("AR requires |rho| < 1")
        if self.kind is CorrKind.GD and not 0.0 < self.rho < 1.0:
            raise ValueError("GD requires 0 < rho < 1")


class Setting(Enum):
    ONE = "one"
    ONE_DEFLATION = "one-deflation"
    TWO = "two"
    THREE = "three"


@dataclass(frozen=True)
class SettingConfig:
    """Parameters of one scenario cell; fields unused by a scenario stay None.

    ``marginal_source`` (scenario three) is an n x p count matrix whose
    empirical distributions seed the copula population; ``zero_target``
    is the requested per-column zero proportion used to pick source
    columns.
    """

    setting: Setting
    n: int
    p: int = 1
    beta0: float = 0.0
    beta1: float = 0.0
    gamma0: float = 0.0
    gamma1: float = 0.0
    r: float = 1.0
    corr: Optional[CorrelationSpec] = None
    flavor: Flavor = Flavor.HNB
    zero_target: Optional[float] = None
    transform: str = "none"
    marginal_source: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.n <= 0 or self.p <= 0:
            raise ValueError("n and p must be positive")
        if self.r <= 0:
            raise ValueError("r must be positive")
        if self.transform not in ("none", "sqrt"):
            raise ValueError("transform must be 'none' or 'sqrt'")
        if self.setting in (Setting.TWO, Setting.THREE) and self.corr is None:
            raise ValueError("settings two/three need a CorrelationSpec")
        if self.setting is Setting.THREE and self.marginal_source is None:
            raise ValueError("setting three needs marginal_source")


def setting_one_config(flavor: Flavor, gamma0: float, **overrides) -> SettingConfig:
    """Univariate comparison defaults: n=500, beta0=ln 12, beta1=gamma1=2, r=0.5."""
    base = dict(
        setting=Setting.ONE,
        n=500,
        beta0=float(np.log(12.0)),
        beta1=2.0,
        gamma0=gamma0,
        gamma1=2.0,
        r=0.5,
        flavor=flavor,
    )
    base.update(overrides)
    return SettingConfig(**base)


def setting_one_deflation_config(gamma0: float, **overrides) -> SettingConfig:
    """Deflation sweep defaults: n=700, beta0=ln(6/7), beta1=0.1, gamma1=0, r=2."""
    base = dict(
        setting=Setting.ONE_DEFLATION,
        n=700,
        beta0=float(np.log(6.0 / 7.0)),
        beta1=0.1,
        gamma0=gamma0,
        gamma1=0.0,
        r=2.0,
        flavor=Flavor.HNB,
    )
    base.update(overrides)
    return SettingConfig(**base)


def setting_two_config(corr: CorrelationSpec, beta1: float, gamma0: float, gamma1: float, **overrides) -> SettingConfig:
    """Multivariate hurdle population defaults: n=1200, p=5, beta0=2.75, r=6."""
    base = dict(
        setting=Setting.TWO,
        n=1200,
        p=corr.p,
        beta0=2.75,
        beta1=beta1,
        gamma0=gamma0,
        gamma1=gamma1,
        r=6.0,
        corr=corr,
        flavor=Flavor.HNB,
    )
    base.update(overrides)
    return SettingConfig(**base)


def ar_correlation(spec: CorrelationSpec) -> np.ndarray:
    """AR correlation matrix: entry (j, j') = rho^|j-j'|."""
    if spec.kind is not CorrKind.AR:
        raise ValueError("spec.kind must be AR")
    idx = np.arange(spec.p)
    return spec.rho ** np.abs(idx[:, None] - idx[None, :])


def gd_covariance(spec: CorrelationSpec) -> np.ndarray:
    """Covariance with geometrically decaying eigenvalues (trace 5)."""
    if spec.kind is not CorrKind.GD:
        raise ValueError("spec.kind must be GD")
    j = np.arange(1, spec.p + 1)
    nu = 5.0 * (spec.rho ** (j - 1) - spec.rho**j) / (1.0 - spec.rho**spec.p)
    gamma = random_orthogonal(spec.p, spec.orthogonal_seed)
    return (gamma * nu) @ gamma.T


def realize_covariance(spec: CorrelationSpec) -> np.ndarray:
    """The covariance a spec describes (AR is already a correlation)."""
    return ar_correlation(spec) if spec.kind is CorrKind.AR else gd_covariance(spec)


def realize_correlation(spec: CorrelationSpec) -> np.ndarray:
    """Correlation version of :func:`realize_covariance` (GD gets rescaled);
    latent copula populations need unit variances."""
    cov = realize_covariance(spec)
    d = np.sqrt(np.diag(cov))
    return cov / np.outer(d, d)


def random_orthogonal(p: int, seed: int) -> np.ndarray:
    """Haar-distributed orthogonal matrix via sign-corrected QR."""
    if p < 1:
        raise ValueError("p must be positive")
    rng = np.random.default_rng(seed)
    q, rmat = np.linalg.qr(rng.standard_normal((p, p)))
    return q * np.sign(np.diag(rmat))


def sample_mvn(n: int, sigma: np.ndarray, seed: int) -> np.ndarray:
    """n i.i.d. rows from N(0, sigma) via the lower-triangular factor."""
    chol = np.linalg.cholesky(np.asarray(sigma, dtype=float))
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, sigma.shape[0])) @ chol.T


def gen_setting_one(config: SettingConfig, seed: int):
    """One covariate, one response: ln mu = b0 + b1 x, logit pi = g0 + g1 x.

    Returns (y, x).
    """
    if config.setting not in (Setting.ONE, Setting.ONE_DEFLATION):
        raise ValueError("config is not a univariate scenario")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(config.n)
    mu = np.exp(config.beta0 + config.beta1 * x)
    pi = expit(config.gamma0 + config.gamma1 * x)
    if config.flavor is Flavor.ZINB:
        y = _sample_zinb(rng, mu, config.r, pi)
    elif config.flavor is Flavor.HNB:
        y = _sample_hnb(rng, mu, config.r, pi)
    else:
        raise ValueError("setting one uses ZINB or HNB")
    return y, x


_CALIBRATION_DRAWS = 100_000


def _zero_prob_curve(config: SettingConfig, x: np.ndarray, structural: bool):
    """Mean zero probability as a function of gamma0, common random numbers."""
    mu = np.exp(config.beta0 + config.beta1 * x)
    nb0 = np.exp(_log_nb_zero(mu, config.r))

    def h(gamma0):
        pi = expit(gamma0 + config.gamma1 * x)
        if structural or config.flavor is Flavor.HNB:
            return float(pi.mean())
        return float((pi + (1.0 - pi) * nb0).mean())

    return h, nb0


def calibrate_gamma0(config: SettingConfig, target_zero: float, seed: int) -> float:
    """gamma0 whose Monte Carlo mean zero probability equals ``target_zero``.

    Uses 1e5 covariate draws with common random numbers, so the root is
    found on a smooth deterministic curve. For HNB with gamma1 = 0 the
    answer is the exact logit. A ZINB target below the NB zero floor is
    unreachable and raises.
    """
    if not 0.0 < target_zero < 1.0:
        raise ValueError("target_zero must lie in (0, 1)")
    if config.flavor is Flavor.HNB and config.gamma1 == 0.0:
        return float(logit(target_zero))
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(_CALIBRATION_DRAWS)
    h, nb0 = _zero_prob_curve(config, x, structural=False)
    if config.flavor is Flavor.ZINB:
        floor = float(nb0.mean())
        if target_zero <= h(-40.0):
            raise InfeasibleTargetError(
                f"target {target_zero} is below the NB zero floor {floor:.4f}"
            )
    return float(brentq(lambda g: h(g) - target_zero, -40.0, 40.0, xtol=1e-10))


def calibrate_gamma0_structural(config: SettingConfig, target_zero: float, seed: int) -> float:
    """gamma0 whose mean *structural* zero weight E[pi(x)] equals the target.

    Always feasible; used when the total-zero target sits below the ZINB
    floor.
    """
    if not 0.0 < target_zero < 1.0:
        raise ValueError("target_zero must lie in (0, 1)")
    if config.gamma1 == 0.0:
        return float(logit(target_zero))
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(_CALIBRATION_DRAWS)
    h, _ = _zero_prob_curve(config, x, structural=True)
    return float(brentq(lambda g: h(g) - target_zero, -40.0, 40.0, xtol=1e-10))


def resolve_setting_one_gamma0(config: SettingConfig, target_zero: float, seed: int):
    """Calibrate on total zeros, falling back to the structural weight when
    the total target is unreachable (ZINB below its zero floor).

    Returns (gamma0, mode) with mode in {"total", "structural"}.
    """
    try:
        return calibrate_gamma0(config, target_zero, seed), "total"
    except InfeasibleTargetError:
        return calibrate_gamma0_structural(config, target_zero, seed), "structural"


def gen_setting_two(config: SettingConfig, seed: int):
    """Correlated covariates, independent hurdle-NB responses per column.

    Covariate rows are N(0, Sigma) with Sigma from the correlation spec;
    column j uses ln mu_ij = b0 + b1 x_ij, logit pi_ij = g0 + g1 x_ij.
    Returns (Y, X).
    """
    if config.setting is not Setting.TWO:
        raise ValueError("config is not scenario two")
    ss = np.random.SeedSequence([int(seed), 2])
    seed_x, seed_y = ss.spawn(2)
    X = sample_mvn(config.n, realize_covariance(config.corr), seed_x)
    rng = np.random.default_rng(seed_y)
    Y = np.empty((config.n, config.p), dtype=np.int64)
    for j in range(config.p):
        mu = np.exp(config.beta0 + config.beta1 * X[:, j])
        pi = expit(config.gamma0 + config.gamma1 * X[:, j])
        Y[:, j] = _sample_hnb(rng, mu, config.r, pi)
    return Y, X


def _transform_source(values: np.ndarray, transform: str) -> np.ndarray:
    if transform == "sqrt":
        return np.round(np.sqrt(values))
    return np.asarray(values, dtype=float)


def select_columns_by_zero_fraction(values: np.ndarray, targets) -> np.ndarray:
    """Indices of the columns whose zero fractions sit nearest the targets.

    Greedy in target order; ties broken by column order. Raises when there
    are fewer columns than targets.
    """
    values = np.asarray(values)
    targets = np.asarray(targets, dtype=float)
    if values.shape[1] < len(targets):
        raise SelectionError(
            f"need {len(targets)} columns, source has {values.shape[1]}"
        )
    zf = np.mean(values == 0, axis=0)
    chosen = []
    available = np.ones(values.shape[1], dtype=bool)
    for t in targets:
        gaps = np.where(available, np.abs(zf - t), np.inf)
        pick = int(np.argmin(gaps))  # argmin takes the first, i.e. lowest index
        chosen.append(pick)
        available[pick] = False
    return np.asarray(chosen)


def gen_setting_three(config: SettingConfig, seed: int) -> np.ndarray:
    """Truncated-copula population built on empirical source marginals.

    The (optionally sqrt-and-round transformed) source columns closest to
    ``zero_target`` provide the marginals; latent Gaussians with the
    spec's correlation are pushed through the normal CDF and the
    empirical quantile tables.
    """
    if config.setting is not Setting.THREE:
        raise ValueError("config is not scenario three")
    source = _transform_source(np.asarray(config.marginal_source, dtype=float), config.transform)
    targets = np.full(config.p, config.zero_target if config.zero_target is not None else 0.5)
    cols = select_columns_by_zero_fraction(source, targets)
    tables = [np.sort(source[:, c]) for c in cols]

    sigma = realize_correlation(config.corr)
    latent = sample_mvn(config.n, sigma, seed)
    u = ndtr(latent)
    Y = np.empty((config.n, config.p))
    for j in range(config.p):
        Y[:, j] = _empirical_quantile(tables[j], u[:, j])
    return Y
