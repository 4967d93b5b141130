"""Logistic, baseline-category multinomial and linear regression by maximum likelihood."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.special import expit, log_softmax, logsumexp

from .design import DesignMatrix, FitResult, SeparationError

SCORE_TOL = 1e-8
LOGLIK_RTOL = 1e-10
MAX_ITER = 50
SEPARATION_BOUND = 30.0


def _penalty(A: np.ndarray, ridge: float) -> np.ndarray:
    # scale-aware L2 penalty: ridge * diag(X'X), unit scale for all-zero columns
    d = np.einsum("ij,ij->j", A, A)
    return ridge * np.where(d > 0, d, 1.0)


def _newton(loglik, score_info, theta0, max_iter, tol=SCORE_TOL, norm=np.inf):
    """Damped Newton ascent with step-halving.

    Returns (theta, loglik, converged, iterations, history).  Stops when the
    score norm (max-norm by default) drops below ``tol``, or when the relative loglik change
    falls below LOGLIK_RTOL (then one polishing step is attempted).
    """
    theta = theta0
    ll = loglik(theta)
    history = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        score, info = score_info(theta)
        if np.linalg.norm(score, norm) < tol:
            converged = True
            break
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(info, score, rcond=None)[0]
        if not score @ step > 0:
            # information not positive definite here: fall back to scaled ascent
            step = score / (np.abs(np.diag(info)).max() + 1.0)
        t = 1.0
        while True:
            cand = theta + t * step
            ll_new = loglik(cand)
            if np.isfinite(ll_new) and ll_new >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
            if t < 1e-10:
                cand, ll_new = theta, ll
                break
        small = abs(ll_new - ll) <= LOGLIK_RTOL * max(abs(ll), 1.0)
        theta, ll = cand, ll_new
        history.append(ll)
        if small:
            converged = True
            score, info = score_info(theta)
            try:
                polished = theta + np.linalg.solve(info, score)
                ll_p = loglik(polished)
                if np.isfinite(ll_p) and ll_p >= ll - 1e-12 * abs(ll):
                    theta, ll = polished, ll_p
                    history.append(ll)
            except np.linalg.LinAlgError:
                pass
            break
    return theta, ll, converged, it, history


def _covariance(info: np.ndarray) -> np.ndarray:
    cov = np.linalg.inv(info)
    return (cov + cov.T) / 2


def fit_logistic(X: DesignMatrix, y, ridge: float = 0.0, max_iter: int = MAX_ITER) -> FitResult:
    """Logistic regression by iteratively reweighted least squares.

    ``ridge > 0`` maximizes the penalized likelihood
    l(b) - ridge/2 * sum_j diag(X'X)_j b_j^2, which always has a finite
    solution; the separation checks are skipped in that case.
    """
    A = X.matrix
    y = np.asarray(y, dtype=float)
    n, p = A.shape
    if n <= p:
        raise ValueError(f"need more rows than columns ({n} <= {p})")
    if ridge == 0.0:
        if y.min() == y.max():
            raise SeparationError("outcome has a single class")
        X.check_rank()
    pen = _penalty(A, ridge)

    def loglik(b):
        eta = A @ b
        return float(np.sum(y * eta - np.logaddexp(0.0, eta)) - 0.5 * np.sum(pen * b * b))

    def score_info(b):
        mu = expit(A @ b)
        w = mu * (1 - mu)
        score = A.T @ (y - mu) - pen * b
        info = (A * w[:, None]).T @ A + np.diag(pen)
        return score, info

    b, ll, converged, it, history = _newton(loglik, score_info, np.zeros(p), max_iter)
    if ridge == 0.0 and (not converged or np.max(np.abs(b)) > SEPARATION_BOUND):
        raise SeparationError(
            f"coefficients diverging (max |b| = {np.max(np.abs(b)):.3g}, converged={converged})"
        )
    cov = _covariance(score_info(b)[1])
    return FitResult(X.labels, b, np.sqrt(np.diag(cov)), ll, converged, it, cov,
                     loglik_history=tuple(history))


def fit_multinomial(
    X: DesignMatrix,
    y,
    levels: Sequence[str],
    ref_level: str | None = None,
    ridge: float = 0.0,
    max_iter: int = MAX_ITER,
) -> FitResult:
    """Baseline-category logit model; ``y`` holds integer codes into ``levels``.

    Coefficients are ordered level-major: for each non-reference level, one
    block of len(X.labels) entries labelled ``"<level>:<column>"``.
    """
    A = X.matrix
    n, p = A.shape
    levels = [str(lv) for lv in levels]
    K = len(levels)
    ref = 0 if ref_level is None else levels.index(str(ref_level))
    y = np.asarray(y, dtype=np.int64)
    if K < 2:
        raise ValueError("need at least two levels")
    counts = np.bincount(y, minlength=K)
    if ridge == 0.0:
        if np.any(counts == 0):
            empty = [levels[k] for k in np.flatnonzero(counts == 0)]
            raise SeparationError(f"empty categories: {empty}")
        X.check_rank()
    if n <= p:
        raise ValueError(f"need more rows than columns ({n} <= {p})")
    others = [k for k in range(K) if k != ref]
    Y = (y[:, None] == np.array(others)[None, :]).astype(float)
    pen1 = _penalty(A, ridge)
    pen = np.tile(pen1, K - 1)

    def eta_full(theta):
        B = theta.reshape(K - 1, p).T
        return np.column_stack([np.zeros(n), A @ B])

    def loglik(theta):
        eta = eta_full(theta)
        return float(np.sum(Y * eta[:, 1:]) - np.sum(logsumexp(eta, axis=1))
                     - 0.5 * np.sum(pen * theta * theta))

    def score_info(theta):
        P = np.exp(log_softmax(eta_full(theta), axis=1))[:, 1:]
        score = ((Y - P).T @ A).ravel() - pen * theta
        info = np.empty(((K - 1) * p, (K - 1) * p))
        for j in range(K - 1):
            for k in range(j, K - 1):
                w = P[:, j] * ((j == k) - P[:, k])
                blk = (A * w[:, None]).T @ A
                info[j * p:(j + 1) * p, k * p:(k + 1) * p] = blk
                info[k * p:(k + 1) * p, j * p:(j + 1) * p] = blk.T
        return score, info + np.diag(pen)

    theta0 = np.zeros((K - 1) * p)
    if "(Intercept)" in X.labels:
        # start at the saturated intercept-only solution
        i0 = X.labels.index("(Intercept)")
        c = np.maximum(counts, 0.5)
        for j, k in enumerate(others):
            theta0[j * p + i0] = np.log(c[k] / c[ref])
    theta, ll, converged, it, history = _newton(loglik, score_info, theta0, max_iter)
    if ridge == 0.0 and (not converged or np.max(np.abs(theta)) > SEPARATION_BOUND):
        raise SeparationError(
            f"coefficients diverging (max |b| = {np.max(np.abs(theta)):.3g}, converged={converged})"
        )
    cov = _covariance(score_info(theta)[1])
    labels = tuple(f"{levels[k]}:{lab}" for k in others for lab in X.labels)
    return FitResult(labels, theta, np.sqrt(np.diag(cov)), ll, converged, it, cov,
                     loglik_history=tuple(history))


def fit_linear(X: DesignMatrix, y, ridge: float = 0.0) -> FitResult:
    """Ordinary least squares; residual variance uses divisor n - p."""
    A = X.matrix
    y = np.asarray(y, dtype=float)
    n, p = A.shape
    if n <= p:
        raise ValueError(f"need more rows than columns ({n} <= {p})")
    if ridge == 0.0:
        X.check_rank()
    xtx = A.T @ A + np.diag(_penalty(A, ridge))
    b = np.linalg.solve(xtx, A.T @ y)
    resid = y - A @ b
    sigma2 = float(resid @ resid) / (n - p)
    xtx_inv = np.linalg.inv(xtx)
    xtx_inv = (xtx_inv + xtx_inv.T) / 2
    cov = xtx_inv * sigma2
    if sigma2 > 0:
        ll = -0.5 * n * (np.log(2 * np.pi * sigma2 * (n - p) / n) + 1)
    else:
        ll = np.inf
    return FitResult(X.labels, b, np.sqrt(np.diag(cov)), float(ll), True, 1, cov, sigma2,
                     unscaled_covariance=xtx_inv)
