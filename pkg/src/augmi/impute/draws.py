"""Proper parametric imputation draws (parameter uncertainty propagated)."""

from __future__ import annotations

import logging

import numpy as np
from scipy.special import expit, softmax

from ..estimators import (
    DesignMatrix,
    FitError,
    fit_linear,
    fit_logistic,
    fit_multinomial,
)
from ..tabular import RngStream

log = logging.getLogger(__name__)

RIDGE = 1e-4


def _mvn(mean, cov, gen: np.random.Generator) -> np.ndarray:
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(cov)
        L = V * np.sqrt(np.clip(w, 0.0, None))
    return mean + L @ gen.standard_normal(len(mean))


def _intercept_only(X: DesignMatrix) -> DesignMatrix:
    return DesignMatrix(np.ones((X.shape[0], 1)), ("(Intercept)",))


def _reduce_if_small(X_obs: DesignMatrix, X_mis: DesignMatrix):
    """Drop to an intercept-only model when there are too few observed rows."""
    if X_obs.shape[0] >= X_obs.shape[1] + 2:
        return X_obs, X_mis
    log.debug("only %d observed rows for %d predictors; using intercept only", *X_obs.shape)
    return _intercept_only(X_obs), _intercept_only(X_mis)


def _fit_with_fallback(fit, X, y, **kw):
    try:
        return fit(X, y, **kw)
    except (FitError, np.linalg.LinAlgError) as e:
        log.debug("%s failed (%s); refitting with ridge %g", fit.__name__, e, RIDGE)
        return fit(X, y, ridge=RIDGE, **kw)


def impute_norm(X_obs: DesignMatrix, y_obs, X_mis: DesignMatrix, rng: RngStream) -> np.ndarray:
    """Bayesian linear-regression draw.

    sigma^2 from its scaled inverse-chi-square posterior, beta from
    N(beta_hat, sigma^2 (X'X)^-1), then a noisy prediction.
    """
    X_obs, X_mis = _reduce_if_small(X_obs, X_mis)
    fit = _fit_with_fallback(fit_linear, X_obs, y_obs)
    n, p = X_obs.shape
    g = rng.gen
    rss = fit.dispersion * (n - p)
    sigma = np.sqrt(rss / g.chisquare(n - p)) if rss > 0 else 0.0
    beta = _mvn(fit.coefficients, sigma**2 * fit.unscaled_covariance, g) if sigma > 0 else fit.coefficients
    return X_mis.matrix @ beta + sigma * g.standard_normal(X_mis.shape[0])


def impute_logistic(X_obs: DesignMatrix, y_obs, X_mis: DesignMatrix, rng: RngStream) -> np.ndarray:
    """0/1 draws from a logistic model with beta ~ N(beta_hat, V_hat)."""
    X_obs, X_mis = _reduce_if_small(X_obs, X_mis)
    fit = _fit_with_fallback(fit_logistic, X_obs, y_obs)
    g = rng.gen
    beta = _mvn(fit.coefficients, fit.covariance, g)
    p = expit(X_mis.matrix @ beta)
    return (g.random(len(p)) < p).astype(np.int64)


def impute_multinomial(
    X_obs: DesignMatrix, y_obs, X_mis: DesignMatrix, rng: RngStream, n_levels: int
) -> np.ndarray:
    """Category codes drawn from a baseline-category logit with perturbed coefficients."""
    X_obs, X_mis = _reduce_if_small(X_obs, X_mis)
    levels = [str(k) for k in range(n_levels)]
    fit = _fit_with_fallback(fit_multinomial, X_obs, y_obs, levels=levels)
    g = rng.gen
    theta = _mvn(fit.coefficients, fit.covariance, g)
    B = theta.reshape(n_levels - 1, X_obs.shape[1]).T
    eta = np.column_stack([np.zeros(X_mis.shape[0]), X_mis.matrix @ B])
    P = softmax(eta, axis=1)
    u = g.random(len(P))
    return np.minimum((u[:, None] > np.cumsum(P, axis=1)).sum(axis=1), n_levels - 1)
