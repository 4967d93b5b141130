from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.tree import DecisionTreeClassifier, DecisionTreeRegressor

from ..estimators import DesignMatrix
from ..tabular import RngStream
from .draws import impute_logistic, impute_multinomial, impute_norm

MIN_OBSERVED = 10


@dataclass(frozen=True)
class TreeControls:
    min_leaf: int = 5
    max_depth: int = 10
    ccp_alpha: float = 0.0


def _with_intercept(m: np.ndarray) -> DesignMatrix:
    m = np.column_stack([np.ones(len(m)), m])
    return DesignMatrix(m, ("(Intercept)", *(f"v{j}" for j in range(m.shape[1] - 1))))


def donor_draw(leaf_obs: np.ndarray, leaf_mis: np.ndarray, y_obs: np.ndarray, gen) -> np.ndarray:
    """For each missing row, a uniformly chosen observed value from the same leaf."""
    order = np.argsort(leaf_obs, kind="stable")
    sorted_leaves = leaf_obs[order]
    start = np.searchsorted(sorted_leaves, leaf_mis, side="left")
    count = np.searchsorted(sorted_leaves, leaf_mis, side="right") - start
    if np.any(count == 0):
        raise ValueError("missing row routed to a leaf without observed rows")
    pick = start + np.floor(gen.random(len(leaf_mis)) * count).astype(np.int64)
    return y_obs[order[np.minimum(pick, start + count - 1)]]


def impute_cart(
    X_obs: np.ndarray,
    y_obs,
    X_mis: np.ndarray,
    rng: RngStream,
    kind: str = "continuous",
    n_levels: int | None = None,
    controls: TreeControls = TreeControls(),
) -> np.ndarray:
    """CART donor imputation.

    ``X_*`` are plain predictor matrices (categoricals already one-hot, no
    intercept).  ``kind`` is ``"continuous"`` (variance-reduction splits) or
    ``"categorical"`` (Gini, ``y_obs`` holds level codes).  With fewer than
    MIN_OBSERVED observed rows the matching parametric draw is used instead.
    """
    y_obs = np.asarray(y_obs)
    X_obs = np.asarray(X_obs, float)
    X_mis = np.asarray(X_mis, float)
    if len(y_obs) < MIN_OBSERVED:
        Xo, Xm = _with_intercept(X_obs), _with_intercept(X_mis)
        if kind == "continuous":
            return impute_norm(Xo, y_obs, Xm, rng)
        n_levels = n_levels or int(y_obs.max()) + 1
        if n_levels <= 2:
            return impute_logistic(Xo, y_obs, Xm, rng)
        return impute_multinomial(Xo, y_obs, Xm, rng, n_levels)
    if len(X_mis) == 0:
        return y_obs[:0].copy()
    g = rng.gen
    tree_cls = DecisionTreeRegressor if kind == "continuous" else DecisionTreeClassifier
    tree = tree_cls(
        min_samples_leaf=controls.min_leaf,
        max_depth=controls.max_depth,
        ccp_alpha=controls.ccp_alpha,
        random_state=int(g.integers(2**31 - 1)),
    )
    tree.fit(X_obs, y_obs)
    return donor_draw(tree.apply(X_obs), tree.apply(X_mis), y_obs, g)
