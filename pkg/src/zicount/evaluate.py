"""Goodness-of-fit machinery: Wasserstein distances, AMC, cross-validation.

The sample Wasserstein distance between two equally sized point clouds is
the exact optimum of a linear assignment problem (Euclidean ground
metric). Model comparison uses the arithmetic mean change (AMC) of the
hurdle-model distance against the copula-model distance: negative values
mean the copula model fit better.
"""

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.special import expit

from .copula import LatentCopulaModel, fit_tlnpn, sample_tlnpn
from .counts import Flavor, _sample_hnb
from .exceptions import ShapeError, UndefinedComparisonError, ZicountError
from .fitting import FitOptions, fit_intercept_only, fit_regression

__all__ = [
    "wasserstein_1d",
    "wasserstein_pd",
    "amc",
    "HurdleModel",
    "TlnpnModel",
    "make_model",
    "EvalRecord",
    "EvalReport",
    "kfold_cv",
    "random_split_eval",
]


def _check_order(order):
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")


def wasserstein_1d(x, y, order: int = 1) -> float:
    """Order-1 or order-2 Wasserstein distance between equal-size samples.

    Sorting both samples realizes the optimal one-dimensional coupling.
    """
    _check_order(order)
    x = np.sort(np.asarray(x, dtype=float).ravel())
    y = np.sort(np.asarray(y, dtype=float).ravel())
    if x.shape != y.shape:
        raise ShapeError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    diffs = np.abs(x - y)
    return float(np.mean(diffs**order) ** (1.0 / order))


def wasserstein_pd(X, Y, order: int = 1) -> float:
    """Exact sample Wasserstein distance between n x p point clouds.

    Minimizes the mean order-th power of Euclidean distances over row
    permutations (solved as a linear assignment problem) and takes the
    1/order root.
    """
    _check_order(order)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape != Y.shape:
        raise ShapeError(f"shape mismatch: {X.shape} vs {Y.shape}")
    cost = cdist(X, Y)
    if order == 2:
        cost = cost**2
    rows, cols = linear_sum_assignment(cost)
    return float(np.mean(cost[rows, cols]) ** (1.0 / order))


def amc(omega_hnb: float, omega_tlnpn: float) -> float:
    """Arithmetic mean change of two nonnegative distances.

    (omega_tlnpn - omega_hnb) / ((omega_tlnpn + omega_hnb) / 2); negative
    means the copula model produced the smaller distance.
    """
    if omega_hnb < 0 or omega_tlnpn < 0:
        raise ValueError("distances must be nonnegative")
    if omega_hnb == 0.0 and omega_tlnpn == 0.0:
        raise UndefinedComparisonError("AMC undefined when both distances are zero")
    return float((omega_tlnpn - omega_hnb) / ((omega_tlnpn + omega_hnb) / 2.0))


# ---------------------------------------------------------------------------
# model adapters


@dataclass(frozen=True)
class _FittedHurdle:
    fits: tuple
    use_covariates: bool

    def simulate(self, n: int, seed, X=None) -> np.ndarray:
        if self.use_covariates:
            if X is None:
                raise ValueError("covariate-based simulation needs X")
            if len(X) != n:
                raise ShapeError("X must have n rows")
        rng = np.random.default_rng(seed)
        p = len(self.fits)
        out = np.empty((n, p), dtype=np.int64)
        for j, fit in enumerate(self.fits):
            coef = fit.coefficients
            if self.use_covariates:
                design = np.column_stack([np.ones(n), X[:, j]])
            else:
                design = np.ones((n, 1))
            mu = np.exp(design @ coef.beta)
            pi = expit(design @ coef.gamma)
            out[:, j] = _sample_hnb(rng, mu, coef.r, pi)
        return out


@dataclass(frozen=True)
class _FittedTlnpn:
    model: LatentCopulaModel

    def simulate(self, n: int, seed, X=None) -> np.ndarray:
        return sample_tlnpn(self.model, n, seed)


class HurdleModel:
    """Per-column hurdle-NB model; optionally regressed on one covariate
    per column (column j of the covariate matrix)."""

    def __init__(self, use_covariates: bool = False, options: Optional[FitOptions] = None):
        self.use_covariates = use_covariates
        self.options = options or FitOptions()

    @property
    def name(self) -> str:
        return "hnb_cv" if self.use_covariates else "hnb"

    @property
    def requires_covariates(self) -> bool:
        return self.use_covariates

    def fit(self, Y, X=None) -> _FittedHurdle:
        Y = np.asarray(Y)
        if self.use_covariates:
            if X is None:
                raise ValueError(f"model {self.name} needs covariates")
            fits = tuple(
                fit_regression(
                    Y[:, j],
                    np.column_stack([np.ones(len(Y)), np.asarray(X)[:, j]]),
                    None,
                    Flavor.HNB,
                    self.options,
                )
                for j in range(Y.shape[1])
            )
        else:
            fits = tuple(fit_intercept_only(Y[:, j], Flavor.HNB, self.options) for j in range(Y.shape[1]))
        return _FittedHurdle(fits=fits, use_covariates=self.use_covariates)


class TlnpnModel:
    """Truncated latent Gaussian copula model (covariate-free)."""

    def __init__(self, qmc_points: int = 4096):
        self.qmc_points = qmc_points

    @property
    def name(self) -> str:
        return "tlnpn"

    @property
    def requires_covariates(self) -> bool:
        return False

    def fit(self, Y, X=None) -> _FittedTlnpn:
        return _FittedTlnpn(model=fit_tlnpn(np.asarray(Y), qmc_points=self.qmc_points))


def make_model(tag: str, qmc_points: int = 4096):
    """Model adapter from its report tag."""
    table = {
        "hnb": lambda: HurdleModel(use_covariates=False),
        "hnb_cv": lambda: HurdleModel(use_covariates=True),
        "tlnpn": lambda: TlnpnModel(qmc_points=qmc_points),
    }
    if tag not in table:
        raise ValueError(f"unknown model tag {tag!r}; expected one of {sorted(table)}")
    return table[tag]()


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class EvalRecord:
    """One (split, fold, model) evaluation outcome."""

    split: int
    fold: int
    model: str
    distance: float
    failed: bool = False
    error: str = ""
    marginal: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    corr_gap: Optional[float] = None
    residuals: Optional[np.ndarray] = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class EvalReport:
    """Per-fold distances, per-pair AMC values, and run fingerprints."""

    records: tuple
    amc: dict
    order: int
    seed: int
    fingerprint: str

    def __post_init__(self):
        for rec in self.records:
            if not rec.failed and not rec.distance >= 0.0:
                raise ValueError("distances must be nonnegative")
        for values in self.amc.values():
            for v in values:
                if not -2.0 <= v <= 2.0:
                    raise ValueError("AMC must lie in [-2, 2]")

    def distances(self, model: str) -> np.ndarray:
        return np.asarray([r.distance for r in self.records if r.model == model and not r.failed])

    def mean_distance(self, model: str) -> float:
        return float(self.distances(model).mean())

    def amc_values(self, pair: str) -> np.ndarray:
        return np.asarray(self.amc[pair])


def _fingerprint(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _model_names(models) -> list:
    names = [m.name for m in models]
    if len(set(names)) != len(names):
        raise ValueError("duplicate model tags")
    return names


def _corr_gap(test: np.ndarray, sim: np.ndarray) -> float:
    """Mean absolute off-diagonal gap between Pearson correlation matrices."""
    p = test.shape[1]
    if p < 2:
        return 0.0
    with np.errstate(invalid="ignore"):
        ct = np.corrcoef(test, rowvar=False)
        cs = np.corrcoef(sim, rowvar=False)
    mask = ~np.eye(p, dtype=bool)
    gap = np.abs(np.nan_to_num(ct) - np.nan_to_num(cs))[mask]
    return float(gap.mean())


def _evaluate_fold(models, Y_train, Y_test, X_train, X_test, split, fold, seed_seq, order, collect_extras):
    """Fit every model on the training block and score it on the test block."""
    records = []
    distances = {}
    n_test = len(Y_test)
    seeds = seed_seq.spawn(len(models))
    for model, sim_seed in zip(models, seeds):
        try:
            fitted = model.fit(Y_train, X_train)
            sim = fitted.simulate(n_test, sim_seed, X_test)
            dist = wasserstein_pd(Y_test, sim, order=order)
            marginal = np.array(
                [wasserstein_1d(Y_test[:, j], sim[:, j], order=order) for j in range(Y_test.shape[1])]
            )
            extras = {}
            if collect_extras:
                extras["corr_gap"] = _corr_gap(Y_test, sim)
                extras["residuals"] = np.sort(sim, axis=0) - np.sort(Y_test, axis=0)
            records.append(
                EvalRecord(split=split, fold=fold, model=model.name, distance=dist, marginal=marginal, **extras)
            )
            distances[model.name] = dist
        except (ZicountError, np.linalg.LinAlgError) as exc:
            records.append(
                EvalRecord(
                    split=split, fold=fold, model=model.name, distance=float("nan"), failed=True, error=str(exc)
                )
            )
    return records, distances


def _amc_pairs(model_names: Sequence[str]):
    """Every non-copula model is compared against the copula model."""
    if "tlnpn" not in model_names:
        return []
    return [(name, f"{name}_vs_tlnpn") for name in model_names if name != "tlnpn"]


def _kfold_indices(n: int, k: int, seed: int):
    """Shuffled fold index arrays; together they cover range(n) exactly once."""
    master = np.random.SeedSequence([int(seed), 0xCF])
    perm = np.random.default_rng(master.spawn(1)[0]).permutation(n)
    return perm, np.array_split(perm, k)


def kfold_cv(data, covariates=None, k: int = 5, models=None, sim_n: Optional[int] = None, seed: int = 0, order: int = 1, collect_extras: bool = False) -> EvalReport:
    """k-fold cross-validated prediction error for each model.

    Each fold: fit on the remaining k-1 folds, simulate a dataset of the
    held-out fold's size (covariate-based hurdle simulation uses the test
    fold's covariates; the rest simulate unconditionally), and record the
    Wasserstein distance to the held-out fold. AMC compares the
    fold-averaged distances of each hurdle variant against the copula
    model; failed fits are recorded and a fold is dropped only when every
    model fails on it.
    """
    _check_order(order)
    Y = np.asarray(data)
    if models is None:
        models = [HurdleModel(False), TlnpnModel()]
    names = _model_names(models)
    n = len(Y)
    if not 2 <= k <= n:
        raise ValueError("k must lie in [2, n]")
    if any(m.requires_covariates for m in models) and covariates is None:
        raise ValueError("a requested model needs covariates")
    X = None if covariates is None else np.asarray(covariates, dtype=float)

    perm, folds = _kfold_indices(n, k, seed)
    if sim_n is not None and any(abs(len(f) - sim_n) > 1 for f in folds):
        raise ValueError(f"sim_n={sim_n} does not match the fold sizes {[len(f) for f in folds]}")

    records = []
    per_model_folds = {name: [] for name in names}
    for fold_idx, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(perm, test_idx, assume_unique=True)
        fold_seq = np.random.SeedSequence([int(seed), 0xCF, 1 + fold_idx])
        recs, dists = _evaluate_fold(
            models,
            Y[train_idx],
            Y[test_idx],
            None if X is None else X[train_idx],
            None if X is None else X[test_idx],
            split=0,
            fold=fold_idx,
            seed_seq=fold_seq,
            order=order,
            collect_extras=collect_extras,
        )
        records.extend(recs)
        for name in names:
            if name in dists:
                per_model_folds[name].append((fold_idx, dists[name]))

    amc_out = {}
    for hurdle_name, key in _amc_pairs(names):
        h = dict(per_model_folds[hurdle_name])
        t = dict(per_model_folds["tlnpn"])
        common = sorted(set(h) & set(t))
        if common:
            amc_out[key] = [amc(float(np.mean([h[f] for f in common])), float(np.mean([t[f] for f in common])))]

    fingerprint = _fingerprint(
        dict(kind="kfold", n=int(n), p=int(Y.shape[1]), k=int(k), models=names, order=order, seed=int(seed))
    )
    return EvalReport(records=tuple(records), amc=amc_out, order=order, seed=int(seed), fingerprint=fingerprint)


def random_split_eval(data, folds: int, n_splits: int, models=None, seed: int = 0, order: int = 1, collect_extras: bool = False) -> EvalReport:
    """Repeated random-split validation (covariate-free protocols).

    Per split: shuffle the rows, train every model on all but one fold,
    simulate the held-out fold's size, and record joint and per-variable
    distances; AMC is aggregated across splits.
    """
    _check_order(order)
    Y = np.asarray(data)
    if models is None:
        models = [HurdleModel(False), TlnpnModel()]
    names = _model_names(models)
    if any(m.requires_covariates for m in models):
        raise ValueError("random-split evaluation is covariate-free")
    if n_splits < 1:
        raise ValueError("n_splits must be >= 1")
    n = len(Y)
    if not 2 <= folds <= n:
        raise ValueError("folds must lie in [2, n]")

    records = []
    amc_out = {key: [] for _, key in _amc_pairs(names)}
    for split in range(n_splits):
        split_seq = np.random.SeedSequence([int(seed), 0x5B, split])
        rng = np.random.default_rng(split_seq.spawn(1)[0])
        perm = rng.permutation(n)
        parts = np.array_split(perm, folds)
        test_idx, train_idx = parts[-1], np.concatenate(parts[:-1])
        recs, dists = _evaluate_fold(
            models,
            Y[train_idx],
            Y[test_idx],
            None,
            None,
            split=split,
            fold=folds - 1,
            seed_seq=split_seq,
            order=order,
            collect_extras=collect_extras,
        )
        records.extend(recs)
        for hurdle_name, key in _amc_pairs(names):
            if hurdle_name in dists and "tlnpn" in dists:
                amc_out[key].append(amc(dists[hurdle_name], dists["tlnpn"]))

    fingerprint = _fingerprint(
        dict(
            kind="random-split",
            n=int(n),
            p=int(Y.shape[1]),
            folds=int(folds),
            n_splits=int(n_splits),
            models=names,
            order=order,
            seed=int(seed),
        )
    )
    return EvalReport(records=tuple(records), amc=amc_out, order=order, seed=int(seed), fingerprint=fingerprint)
