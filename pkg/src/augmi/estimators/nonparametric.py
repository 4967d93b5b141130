from __future__ import annotations

import numpy as np
from scipy import stats


def _complete_pairs(x, y, x_observed=None, y_observed=None):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y must have equal length")
    keep = ~(np.isnan(x) | np.isnan(y))
    if x_observed is not None:
        keep &= np.asarray(x_observed, bool)
    if y_observed is not None:
        keep &= np.asarray(y_observed, bool)
    return x[keep], y[keep]


def kendall_tau(x, y, x_observed=None, y_observed=None) -> float:
    """Tie-corrected Kendall tau-b over complete pairs.

    Missing members are given either as NaN or through the ``*_observed``
    masks.  Categorical inputs should be passed as level indices.
    """
    x, y = _complete_pairs(x, y, x_observed, y_observed)
    if len(x) < 2:
        raise ValueError("fewer than 2 complete pairs")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValueError("kendall tau undefined: a margin has zero variance")
    return float(stats.kendalltau(x, y, variant="b").statistic)


def _check_survival(entry, exit, delta):
    entry = np.asarray(entry, dtype=float)
    exit = np.asarray(exit, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if exit.size == 0:
        raise ValueError("empty input")
    if not (entry.shape == exit.shape == delta.shape):
        raise ValueError("entry, exit and delta must have equal length")
    if np.any(entry >= exit):
        raise ValueError("entry must be strictly before exit on every row")
    return entry, exit, delta


def nelson_aalen_curve(entry, exit, delta):
    """Jump times and cumulative hazard of the delayed-entry Nelson-Aalen estimator.

    Subject i is at risk at s when entry_i < s <= exit_i, so a censoring at
    an event time still counts in that event's risk set.
    """
    entry, exit, delta = _check_survival(entry, exit, delta)
    times, d = np.unique(exit[delta == 1], return_counts=True)
    exit_sorted = np.sort(exit)
    entry_sorted = np.sort(entry)
    at_risk = (len(exit) - np.searchsorted(exit_sorted, times, side="left")) - (
        len(entry) - np.searchsorted(entry_sorted, times, side="left")
    )
    return times, np.cumsum(d / at_risk)


def _step(times, cumhaz, t):
    idx = np.searchsorted(times, t, side="right") - 1
    return np.where(idx >= 0, cumhaz[np.maximum(idx, 0)], 0.0)


def nelson_aalen(entry, exit, delta) -> np.ndarray:
    """Per-row cumulative hazard accrued over (entry, exit].

    With all entries zero this is the usual H(exit_i).
    """
    times, cumhaz = nelson_aalen_curve(entry, exit, delta)
    entry = np.asarray(entry, dtype=float)
    exit = np.asarray(exit, dtype=float)
    if times.size == 0:
        return np.zeros(len(exit))
    return _step(times, cumhaz, exit) - _step(times, cumhaz, entry)
