import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize
from scipy.special import expit, logit

from zicount import (
    CountParams,
    FitOptions,
    Flavor,
    RegressionCoefficients,
    RegressionFit,
    aic,
    fit_intercept_only,
    fit_regression,
    hnb_loglik,
    hnb_pmf,
    nb_log_pmf,
    standard_errors,
    zinb_loglik,
    zinb_pmf,
)
from zicount.exceptions import DegenerateDataError, IllConditionedDesignError
from zicount.synth import gen_setting_one, setting_one_config


def pmf_sum_oracle(y, X, Z, coef, flavor):
    """Per-observation pmf log sum; the independent route the likelihoods must match."""
    mu = np.exp(np.asarray(X) @ coef.beta)
    total = 0.0
    if flavor is Flavor.ZINB:
        pi = expit(np.asarray(Z) @ coef.gamma)
        for yi, mi, pii in zip(y, mu, pi):
            total += math.log(zinb_pmf(int(yi), CountParams(mi, coef.r, pii, Flavor.ZINB)))
    else:
        pi = expit(np.asarray(X) @ coef.gamma)
        for yi, mi, pii in zip(y, mu, pi):
            total += math.log(hnb_pmf(int(yi), CountParams(mi, coef.r, pii, Flavor.HNB)))
    return total


class TestZinbLoglik:
    def test_zero_inflation_off_limit(self):
        y = np.array([0])
        X = np.ones((1, 1))
        coef = RegressionCoefficients(beta=[0.7], gamma=[-40.0], log_r=0.3)
        terms = zinb_loglik(y, X, X, coef)
        nb0 = nb_log_pmf(0, CountParams(math.exp(0.7), coef.r, flavor=Flavor.NB))
        assert terms.total == pytest.approx(nb0, abs=1e-10)

    def test_matches_pmf_sum_oracle(self):
        rng = np.random.default_rng(0)
        y = np.array([0, 3, 7])
        X = np.column_stack([np.ones(3), rng.normal(size=3)])
        coef = RegressionCoefficients(beta=[0.5, 0.3], gamma=[-0.4, 0.8], log_r=-0.2)
        terms = zinb_loglik(y, X, X, coef)
        assert terms.total == pytest.approx(terms.l1 + terms.l2 + terms.l3 - terms.l4, abs=1e-12)
        assert terms.total == pytest.approx(pmf_sum_oracle(y, X, X, coef, Flavor.ZINB), abs=1e-8)

    def test_l2_empty_when_all_zero(self):
        y = np.zeros(5, dtype=int)
        X = np.ones((5, 1))
        coef = RegressionCoefficients(beta=[0.1], gamma=[0.2], log_r=0.0)
        terms = zinb_loglik(y, X, X, coef)
        assert terms.l2 == 0.0

    def test_overflow_raises(self):
        y = np.array([0, 1, 2])
        X = np.full((3, 1), 500.0)
        coef = RegressionCoefficients(beta=[2.0], gamma=[0.0], log_r=0.0)
        with pytest.raises(IllConditionedDesignError):
            zinb_loglik(y, X, X, coef)


class TestHnbLoglik:
    def test_all_zero_only_hurdle_term(self):
        y = np.zeros(4, dtype=int)
        X = np.ones((4, 1))
        coef = RegressionCoefficients(beta=[0.5], gamma=[logit(0.3)], log_r=0.0)
        assert hnb_loglik(y, X, coef) == pytest.approx(4 * math.log(0.3), abs=1e-10)

    def test_matches_pmf_sum_oracle(self):
        rng = np.random.default_rng(1)
        y = np.array([0, 2, 5])
        X = np.column_stack([np.ones(3), rng.normal(size=3)])
        coef = RegressionCoefficients(beta=[0.8, -0.3], gamma=[0.1, 0.5], log_r=0.4)
        assert hnb_loglik(y, X, coef) == pytest.approx(pmf_sum_oracle(y, X, None, coef, Flavor.HNB), abs=1e-8)

    def test_collapses_to_nb_when_pi_matches_nb_zero_mass(self):
        mu, r = 3.0, 2.0
        pi = float(np.exp(-r * np.log1p(mu / r)))
        y = np.array([0, 1, 4, 0, 2])
        X = np.ones((len(y), 1))
        coef = RegressionCoefficients(beta=[math.log(mu)], gamma=[logit(pi)], log_r=math.log(r))
        nb = sum(nb_log_pmf(int(v), CountParams(mu, r, flavor=Flavor.NB)) for v in y)
        assert hnb_loglik(y, X, coef) == pytest.approx(nb, abs=1e-8)


@given(
    n=st.integers(2, 12),
    beta0=st.floats(-1.0, 2.5),
    beta1=st.floats(-1.0, 1.0),
    gamma0=st.floats(-2.0, 2.0),
    gamma1=st.floats(-1.0, 1.0),
    log_r=st.floats(-1.5, 1.5),
    seed=st.integers(0, 2**31),
)
@settings(max_examples=80, deadline=None)
def test_likelihood_equivalence_property(n, beta0, beta1, gamma0, gamma1, log_r, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    X = np.column_stack([np.ones(n), x])
    y = rng.poisson(np.exp(np.clip(beta0 + beta1 * x, -10, 3)))
    coef = RegressionCoefficients(beta=[beta0, beta1], gamma=[gamma0, gamma1], log_r=log_r)
    assert zinb_loglik(y, X, X, coef).total == pytest.approx(
        pmf_sum_oracle(y, X, X, coef, Flavor.ZINB), abs=1e-8
    )
    assert hnb_loglik(y, X, coef) == pytest.approx(
        pmf_sum_oracle(y, X, None, coef, Flavor.HNB), abs=1e-8
    )


def _joint_hnb_fit_oracle(y, X):
    """Maximize hnb_loglik over all parameters at once (no factorization)."""
    q = X.shape[1]

    def negll(theta):
        coef = RegressionCoefficients(theta[:q], theta[q : 2 * q], float(np.clip(theta[-1], -15, 15)))
        val = hnb_loglik(y, X, coef)
        return -val if np.isfinite(val) else 1e12

    theta0 = np.zeros(2 * q + 1)
    theta0[0] = math.log(max(y.mean(), 0.5))
    res = minimize(negll, theta0, method="L-BFGS-B", options=dict(maxiter=500, ftol=1e-12, gtol=1e-7))
    return -res.fun


class TestFitRegression:
    def test_setting_one_coefficient_recovery(self):
        cfg = setting_one_config(Flavor.ZINB, gamma0=-2.8)
        truth = np.array([cfg.beta0, cfg.beta1, cfg.gamma0, cfg.gamma1])
        hits = 0
        for rep in range(10):
            y, x = gen_setting_one(cfg, seed=1000 + rep)
            X = np.column_stack([np.ones(len(y)), x])
            fit = fit_regression(y, X, X, Flavor.ZINB)
            se = standard_errors(y, X, X, fit)
            est = np.concatenate([fit.coefficients.beta, fit.coefficients.gamma])
            ok = np.all(np.abs(est - truth) <= 3 * se[:4])
            hits += bool(ok)
        assert hits >= 9

    def test_nb_data_pushes_zinb_weight_to_boundary(self):
        rng = np.random.default_rng(7)
        n = 800
        x = rng.normal(size=n)
        mu = np.exp(1.0 + 0.5 * x)
        y = rng.negative_binomial(2.0, 2.0 / (2.0 + mu))
        X = np.column_stack([np.ones(n), x])
        fit = fit_regression(y, X, np.ones((n, 1)), Flavor.ZINB)
        pi_hat = expit(fit.coefficients.gamma[0])
        assert pi_hat < 0.02
        # the mixture must not fit worse than the plain-NB oracle it nests
        nb_ll = -_ztnb_style_nb_negll(y, X)
        assert fit.loglik >= nb_ll - 1e-4

    def test_intercept_only_equivalence(self):
        cfg = setting_one_config(Flavor.ZINB, gamma0=-1.0, beta1=0.0, gamma1=0.0, n=400)
        y, _ = gen_setting_one(cfg, seed=5)
        ones = np.ones((len(y), 1))
        full = fit_regression(y, ones, ones, Flavor.ZINB)
        reduced = fit_intercept_only(y, Flavor.ZINB)
        assert reduced.loglik == pytest.approx(full.loglik, abs=1e-6)

    def test_hnb_factorized_equals_joint(self):
        cfg = setting_one_config(Flavor.HNB, gamma0=-0.5, n=300)
        y, x = gen_setting_one(cfg, seed=9)
        X = np.column_stack([np.ones(len(y)), x])
        fit = fit_regression(y, X, None, Flavor.HNB)
        assert fit.loglik == pytest.approx(_joint_hnb_fit_oracle(y, X), abs=1e-6)

    def test_monotone_trace(self):
        cfg = setting_one_config(Flavor.ZINB, gamma0=-1.5, n=300)
        y, x = gen_setting_one(cfg, seed=11)
        X = np.column_stack([np.ones(len(y)), x])
        for flavor in (Flavor.ZINB, Flavor.HNB):
            fit = fit_regression(y, X, X if flavor is Flavor.ZINB else None, flavor)
            for segment in fit.trace:
                assert np.all(np.diff(segment) >= -1e-7)

    def test_z_must_match_x_for_hnb(self):
        y = np.array([0, 1, 2, 0, 3, 1, 0, 2])
        X = np.column_stack([np.ones(8), np.arange(8.0)])
        Z = np.ones((8, 1))
        with pytest.raises(ValueError):
            fit_regression(y, X, Z, Flavor.HNB)

    def test_degenerate_all_zero_hnb(self):
        with pytest.raises(DegenerateDataError):
            fit_regression(np.zeros(20, dtype=int), np.ones((20, 1)), None, Flavor.HNB)

    def test_too_few_observations(self):
        with pytest.raises(DegenerateDataError):
            fit_regression(np.array([0, 1, 2]), np.ones((3, 2)), np.ones((3, 2)), Flavor.ZINB)


def _ztnb_style_nb_negll(y, X):
    """Plain NB MLE as an oracle for nesting checks; returns min negll."""
    def negll(theta):
        beta = theta[:-1]
        r = math.exp(float(np.clip(theta[-1], -15, 15)))
        mu = np.exp(np.clip(X @ beta, -30, 30))
        from scipy.special import gammaln

        ll = (
            gammaln(y + r)
            - gammaln(r)
            - gammaln(y + 1.0)
            + y * np.log(mu)
            - y * np.log(mu + r)
            - r * np.log1p(mu / r)
        ).sum()
        return -float(ll)

    theta0 = np.zeros(X.shape[1] + 1)
    theta0[0] = math.log(max(y.mean(), 0.5))
    return minimize(negll, theta0, method="L-BFGS-B", options=dict(maxiter=500)).fun


class TestFitInterceptOnly:
    def test_hnb_zero_share_is_exact(self):
        y = np.array([0, 0, 0, 1, 2, 3, 4, 5, 6, 7])  # 30% zeros
        fit = fit_intercept_only(y, Flavor.HNB)
        assert expit(fit.coefficients.gamma[0]) == pytest.approx(0.3, abs=1e-12)

    def test_zinb_boundary_when_zeros_scarce(self):
        rng = np.random.default_rng(3)
        mu, r = 1.2, 3.0
        y = rng.negative_binomial(r, r / (r + mu), size=600)
        if not (y == 0).any():
            y[0] = 0
        fit = fit_intercept_only(y, Flavor.ZINB)
        assert expit(fit.coefficients.gamma[0]) < 0.05

    def test_nb_mle_beats_moment_start(self):
        rng = np.random.default_rng(4)
        y = rng.negative_binomial(1.5, 1.5 / (1.5 + 4.0), size=500)
        fit = fit_intercept_only(y, Flavor.NB)
        assert fit.n_params == 2
        mu0 = max(float(np.mean(y)), 1e-6)
        v = float(np.var(y))
        r0 = mu0 * mu0 / (v - mu0) if v > mu0 else 100.0
        moment = RegressionCoefficients(beta=[math.log(mu0)], gamma=[], log_r=math.log(r0))
        moment_ll = sum(
            nb_log_pmf(int(v_), CountParams(mu0, moment.r, flavor=Flavor.NB)) for v_ in y
        )
        assert fit.loglik >= moment_ll - 1e-9

    def test_needs_three_observations(self):
        with pytest.raises(DegenerateDataError):
            fit_intercept_only(np.array([0, 1]), Flavor.HNB)


class TestAic:
    def test_direct_formula(self):
        coef = RegressionCoefficients(beta=[0.0], gamma=[0.0], log_r=0.0)
        fit = RegressionFit(coef, loglik=-100.0, n_params=3, aic=206.0, flavor=Flavor.HNB, converged=True, n_obs=10)
        assert aic(fit) == 206.0

    def test_smaller_model_wins_at_equal_loglik(self):
        coef = RegressionCoefficients(beta=[0.0], gamma=[0.0], log_r=0.0)
        small = RegressionFit(coef, -50.0, 3, 106.0, Flavor.HNB, True, 10)
        large = RegressionFit(coef, -50.0, 4, 108.0, Flavor.HNB, True, 10)
        assert aic(large) - aic(small) == 2.0

    def test_identity_enforced(self):
        coef = RegressionCoefficients(beta=[0.0], gamma=[0.0], log_r=0.0)
        with pytest.raises(ValueError):
            RegressionFit(coef, loglik=-100.0, n_params=3, aic=205.0, flavor=Flavor.HNB, converged=True, n_obs=10)
