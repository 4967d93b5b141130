from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from ..estimators import kendall_tau, nelson_aalen
from ..tabular import Dataset

log = logging.getLogger(__name__)

TTE_CHOICES = ("nelson-aalen", "time", "log-time", "none")
DERIVED_NAMES = {"nelson-aalen": "na_hazard", "time": "fu_time", "log-time": "log_fu_time"}


def build_tte_predictors(entry, exit, delta, choice: str) -> dict[str, np.ndarray]:
    """Outcome-derived imputation predictors for a delayed-entry survival outcome.

    Always contains the event indicator; adds the cumulative hazard over
    (entry, exit], the follow-up length, or its log, depending on ``choice``.
    """
    if choice not in TTE_CHOICES:
        raise ValueError(f"unknown tte predictor {choice!r}; expected one of {TTE_CHOICES}")
    entry = np.asarray(entry, float)
    exit = np.asarray(exit, float)
    delta = np.asarray(delta, float)
    out = {"delta": delta}
    if choice == "nelson-aalen":
        out["na_hazard"] = nelson_aalen(entry, exit, delta)
    elif choice == "time":
        out["fu_time"] = exit - entry
    elif choice == "log-time":
        fu = exit - entry
        if np.any(fu <= 0):
            raise ValueError("log-time predictor needs strictly positive follow-up")
        out["log_fu_time"] = np.log(fu)
    return out


def _values_for_tau(ds: Dataset, name: str):
    c = ds[name]
    return c.values.astype(float), c.observed


def select_predictors(
    ds: Dataset,
    target: str,
    candidates: Sequence[str],
    outcome_cols: Sequence[str],
    threshold: float,
    reference: str | None = None,
) -> list[str]:
    """Keep candidates with |tau| against the outcome at or above ``threshold``.

    ``reference`` names the column tau is computed against (default: the
    first outcome column).  Outcome columns among the candidates are always
    kept; candidates whose tau is undefined are skipped with a warning.
    """
    if not 0 <= threshold <= 1:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    if threshold == 0:
        return list(candidates)
    ref = reference or outcome_cols[0]
    ry, oy = _values_for_tau(ds, ref)
    kept = []
    for name in candidates:
        if name == target:
            continue
        if name in outcome_cols or name == ref:
            kept.append(name)
            continue
        x, ox = _values_for_tau(ds, name)
        try:
            tau = kendall_tau(x, ry, ox, oy)
        except ValueError as e:
            log.warning("skipping predictor %r for %r: %s", name, target, e)
            continue
        if abs(tau) >= threshold:
            kept.append(name)
    return kept
