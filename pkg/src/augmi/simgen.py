"""Synthetic survey + register data: five covariates, binary or delayed-entry outcome."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .tabular import (
    ENTRY_TIME,
    EVENT_INDICATOR,
    EVENT_TIME,
    Column,
    Dataset,
    RngStream,
    categorical,
    continuous,
)

X5_LEVELS = ("1", "2", "3", "4")
COVARIATES = ("x1", "x2", "x3", "x4", "x5")
SURVEY_COVARIATES = ("x3", "x4", "x5")

# x5 linear predictors: intercepts per category, shared slope on (x1..x4)
X5_INTERCEPTS = np.array([0.0, -2.0, 0.0, -2.0])
X5_SLOPES = np.array([0.5, 0.2, 0.1, 0.2])


@dataclass(frozen=True)
class BinaryOutcomeParams:
    intercept: float = -1.0
    beta: tuple[float, ...] = (0.05, 0.2, 0.1, 0.02)
    category_log_odds: tuple[float, ...] = (np.log(5), np.log(2), np.log(1.5))

    def __post_init__(self):
        if len(self.beta) != 4 or len(self.category_log_odds) != len(X5_LEVELS) - 1:
            raise ValueError("coefficient lengths do not match the covariate layout")

    def truth(self) -> dict[str, float]:
        out = {"(Intercept)": self.intercept}
        out.update(zip(("x1", "x2", "x3", "x4"), self.beta))
        out.update((f"x5[{lv}]", v) for lv, v in zip(X5_LEVELS[1:], self.category_log_odds))
        return out


@dataclass(frozen=True)
class WeibullParams:
    shape: float = 7.5
    scale: float = 84.0
    beta: tuple[float, ...] = (0.05, 0.2, 0.1, 0.02)
    category_log_hr: tuple[float, ...] = (np.log(5), np.log(2), np.log(1.5))
    censor_age: float = 100.0
    entry_low: float = 0.0
    entry_high: float = 50.0

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("Weibull shape and scale must be positive")
        if not self.entry_low < self.entry_high < self.censor_age:
            raise ValueError("need entry_low < entry_high < censor_age")
        if len(self.beta) != 4 or len(self.category_log_hr) != len(X5_LEVELS) - 1:
            raise ValueError("coefficient lengths do not match the covariate layout")

    def truth(self) -> dict[str, float]:
        out = {"shape": self.shape, "scale": self.scale}
        out.update(zip(("x1", "x2", "x3", "x4"), self.beta))
        out.update((f"x5[{lv}]", v) for lv, v in zip(X5_LEVELS[1:], self.category_log_hr))
        return out


def x5_probabilities(x1, x2, x3, x4) -> np.ndarray:
    """Category probabilities of x5 for each row, shape (n, 4)."""
    s = np.column_stack(np.broadcast_arrays(x1, x2, x3, x4)).astype(float) @ X5_SLOPES
    lin = X5_INTERCEPTS[None, :] + s[:, None]
    lin[:, 0] = 0.0
    lin -= lin.max(axis=1, keepdims=True)
    p = np.exp(lin)
    return p / p.sum(axis=1, keepdims=True)


def _draw_categories(p: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    u = gen.random(len(p))
    cdf = np.cumsum(p, axis=1)
    return np.minimum((u[:, None] > cdf).sum(axis=1), p.shape[1] - 1)


def gen_covariates(n: int, rng: RngStream) -> Dataset:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    g = rng.gen
    x1 = g.normal(2.0, 1.0, n)
    x2 = g.normal(-2.0, 1.0, n)
    x3 = g.normal(0.5 * x1 + 0.5 * x2, 2.0)
    x4 = g.normal(0.3 * x1 + 0.3 * x2 + 0.3 * x3, 2.0)
    x5 = _draw_categories(x5_probabilities(x1, x2, x3, x4), g)
    return Dataset(
        [
            continuous("x1", x1),
            continuous("x2", x2),
            continuous("x3", x3),
            continuous("x4", x4),
            categorical("x5", x5, X5_LEVELS),
        ]
    )


def _require_covariates(ds: Dataset):
    for name in COVARIATES:
        if ds[name].n_missing:
            raise ValueError(f"covariate {name!r} has missing cells")


def linear_predictor(ds: Dataset, beta, category_effects, intercept=0.0) -> np.ndarray:
    X = np.column_stack([ds[c].values for c in ("x1", "x2", "x3", "x4")])
    effects = np.concatenate([[0.0], category_effects])
    return intercept + X @ np.asarray(beta, float) + effects[ds["x5"].values]


def gen_binary_outcome(ds: Dataset, params: BinaryOutcomeParams, rng: RngStream) -> Dataset:
    _require_covariates(ds)
    lp = linear_predictor(ds, params.beta, params.category_log_odds, params.intercept)
    y = (rng.gen.random(ds.row_count) < expit(lp)).astype(np.int64)
    return ds.with_columns(Column("Y", EVENT_INDICATOR, y))


def sample_trunc_weibull(entry, lp, params: WeibullParams, rng: RngStream) -> np.ndarray:
    """Draw T | T > entry for T ~ Weibull(shape, scale * exp(-lp / shape)).

    Exact inverse CDF of the conditional survival
    exp(-((t/b_e)^a - (entry/b_e)^a)); vectorised over ``entry`` and ``lp``.
    """
    entry, lp = np.broadcast_arrays(np.asarray(entry, float), np.asarray(lp, float))
    if not np.isfinite(lp).all():
        raise ValueError("linear predictor must be finite")
    if np.any(entry < 0) or np.any(entry >= params.censor_age):
        raise ValueError("entry ages must lie in [0, censor_age)")
    u = rng.gen.random(entry.shape)
    return trunc_weibull_quantile(entry, lp, u, params.shape, params.scale)


def trunc_weibull_quantile(entry, lp, u, a, b):
    be = b * np.exp(-lp / a)
    return be * ((entry / be) ** a - np.log(u)) ** (1.0 / a)


def gen_tte_outcome(ds: Dataset, params: WeibullParams, rng: RngStream) -> Dataset:
    """Append delayed entry ``xt``, exit age ``t`` and event indicator ``delta``."""
    _require_covariates(ds)
    lp = linear_predictor(ds, params.beta, params.category_log_hr)
    g = rng.gen
    entry = g.uniform(params.entry_low, params.entry_high, ds.row_count)
    t_star = sample_trunc_weibull(entry, lp, params, rng)
    exit_age = np.minimum(t_star, params.censor_age)
    delta = (t_star <= params.censor_age).astype(np.int64)
    return ds.with_columns(
        Column("xt", ENTRY_TIME, entry),
        Column("t", EVENT_TIME, exit_age),
        Column("delta", EVENT_INDICATOR, delta),
    )
