"""Proportional-hazards Weibull regression with delayed entry and right censoring.

Hazard (a/b)(t/b)^(a-1) exp(x'beta); each subject contributes the likelihood
of its follow-up from entry to exit, conditional on being event-free at entry:

    delta * [log a - a log b + (a-1) log t + x'beta]
        - exp(x'beta) * [(t/b)^a - (entry/b)^a]

Optimised over theta = (log a, log b, beta) by damped Newton with the
analytic gradient and Hessian.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize_scalar

from .design import ConvergenceError, DesignMatrix, FitResult
from .glm import _covariance, _newton

GRAD_TOL = 1e-8
MAX_ITER = 100


def _check_inputs(entry, exit, delta):
    entry = np.asarray(entry, float)
    exit = np.asarray(exit, float)
    delta = np.asarray(delta, float)
    if not (entry.shape == exit.shape == delta.shape):
        raise ValueError("entry, exit and delta must have equal length")
    if np.any(entry < 0):
        raise ValueError("entry times must be non-negative")
    if np.any(entry >= exit):
        raise ValueError("entry must be strictly before exit on every row")
    if not np.isin(delta, (0, 1)).all():
        raise ValueError("delta must be 0/1")
    if delta.sum() == 0:
        raise ValueError("no events: all rows censored")
    return entry, exit, delta


class _Terms:
    """Per-row pieces shared by the log-likelihood, gradient and Hessian."""

    def __init__(self, theta, A, entry, exit, delta, fixed_log_shape=None):
        if fixed_log_shape is None:
            la, lb, beta = theta[0], theta[1], theta[2:]
        else:
            la, lb, beta = fixed_log_shape, theta[0], theta[1:]
        a = np.exp(la)
        self.a, self.delta = a, delta
        self.L = np.log(exit) - lb
        pos = entry > 0
        self.M = np.where(pos, np.log(np.where(pos, entry, 1.0)) - lb, 0.0)
        self.pos = pos
        self.elp = np.exp(A @ beta) if A.shape[1] else np.ones(len(exit))
        self.u = np.exp(a * self.L)
        self.v = np.where(pos, np.exp(a * self.M), 0.0)
        self.H = self.elp * (self.u - self.v)
        self.log_exit = np.log(exit)
        self.lp = A @ beta if A.shape[1] else np.zeros(len(exit))
        self.la = la

    def loglik(self):
        d = self.delta
        return float(np.sum(d * (self.la + self.a * self.L - self.log_exit + self.lp)) - np.sum(self.H))


def weibull_lt_loglik(theta, A, entry, exit, delta, fixed_log_shape=None) -> float:
    return _Terms(np.asarray(theta, float), A, entry, exit, delta, fixed_log_shape).loglik()


def weibull_lt_gradient(theta, A, entry, exit, delta, fixed_log_shape=None):
    """Score and observed information at ``theta``."""
    T = _Terms(np.asarray(theta, float), A, entry, exit, delta, fixed_log_shape)
    a, d, H, elp = T.a, T.delta, T.H, T.elp
    aL, aM = a * T.L, np.where(T.pos, a * T.M, 0.0)
    dH_da = elp * (T.u * aL - T.v * aM)
    d2H_da2 = elp * (T.u * aL * (aL + 1) - T.v * aM * (aM + 1))

    g_a = np.sum(d * (1 + aL)) - np.sum(dH_da)
    g_b = a * np.sum(H - d)
    g_beta = A.T @ (d - H)

    h_aa = np.sum(d * aL) - np.sum(d2H_da2)
    h_ab = a * np.sum(H - d) + a * np.sum(dH_da)
    h_bb = -a * a * np.sum(H)
    h_beta_a = -(A.T @ dH_da)
    h_beta_b = a * (A.T @ H)
    h_beta_beta = -(A * H[:, None]).T @ A

    if fixed_log_shape is None:
        grad = np.concatenate([[g_a, g_b], g_beta])
        k = A.shape[1]
        hess = np.empty((k + 2, k + 2))
        hess[0, 0], hess[0, 1], hess[1, 1] = h_aa, h_ab, h_bb
        hess[1, 0] = h_ab
        hess[2:, 0] = hess[0, 2:] = h_beta_a
        hess[2:, 1] = hess[1, 2:] = h_beta_b
        hess[2:, 2:] = h_beta_beta
    else:
        grad = np.concatenate([[g_b], g_beta])
        k = A.shape[1]
        hess = np.empty((k + 1, k + 1))
        hess[0, 0] = h_bb
        hess[1:, 0] = hess[0, 1:] = h_beta_b
        hess[1:, 1:] = h_beta_beta
    return grad, -hess


def _profile_start(entry, exit, delta):
    """Starting (log a, log b) from the covariate-free profile likelihood."""
    D = delta.sum()
    sum_log_t = np.sum(delta * np.log(exit))
    scale = exit.max()

    def negprof(la):
        a = np.exp(la)
        s = np.sum((exit / scale) ** a - (entry / scale) ** a)
        # b^a = scale^a * s / D
        log_b = np.log(scale) + np.log(s / D) / a
        return -(D * la - a * D * log_b + (a - 1) * sum_log_t - D)

    la = minimize_scalar(negprof, bounds=(-4.0, 4.0), method="bounded").x
    a = np.exp(la)
    s = np.sum((exit / scale) ** a - (entry / scale) ** a)
    return la, np.log(scale) + np.log(s / D) / a


def fit_weibull_lt(
    X: DesignMatrix,
    entry,
    exit,
    delta,
    shape: float | None = None,
    max_iter: int = MAX_ITER,
) -> FitResult:
    """Maximum-likelihood left-truncated Weibull PH fit.

    ``X`` must not contain an intercept column (the scale absorbs it).  The
    result reports ``shape`` and ``scale`` on their natural scale with
    delta-method standard errors; ``covariance`` is on the
    (log shape, log scale, beta) scale.  Passing ``shape`` fixes it.
    """
    if "(Intercept)" in X.labels:
        raise ValueError("Weibull design must not include an intercept")
    entry, exit, delta = _check_inputs(entry, exit, delta)
    A = X.matrix
    if A.shape[1]:
        X.check_rank()
    la0, lb0 = _profile_start(entry, exit, delta)
    fixed = None if shape is None else float(np.log(shape))
    theta0 = np.concatenate([[la0, lb0] if fixed is None else [lb0], np.zeros(A.shape[1])])
    if fixed is not None:
        # closed-form scale for the fixed shape at beta = 0
        a = shape
        theta0[0] = np.log(np.sum(exit**a - entry**a) / delta.sum()) / a

    def loglik(th):
        return weibull_lt_loglik(th, A, entry, exit, delta, fixed)

    def score_info(th):
        return weibull_lt_gradient(th, A, entry, exit, delta, fixed)

    theta, ll, converged, it, history = _newton(
        loglik, score_info, theta0, max_iter, tol=GRAD_TOL, norm=2
    )
    if not converged:
        raise ConvergenceError(f"Weibull fit did not converge in {max_iter} iterations")
    cov = _covariance(score_info(theta)[1])
    se_raw = np.sqrt(np.diag(cov))
    if fixed is None:
        a, b = np.exp(theta[0]), np.exp(theta[1])
        coef = np.concatenate([[a, b], theta[2:]])
        se = np.concatenate([[a * se_raw[0], b * se_raw[1]], se_raw[2:]])
        labels = ("shape", "scale", *X.labels)
    else:
        b = np.exp(theta[0])
        coef = np.concatenate([[b], theta[1:]])
        se = np.concatenate([[b * se_raw[0]], se_raw[1:]])
        labels = ("scale", *X.labels)
    return FitResult(labels, coef, se, ll, converged, it, cov, loglik_history=tuple(history))
