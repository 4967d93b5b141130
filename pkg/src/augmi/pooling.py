"""Rubin's rules and the MI-vs-CCA accuracy statistics across replicates."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .estimators import FitResult


@dataclass(frozen=True)
class PooledResult:
    labels: tuple[str, ...]
    estimate: np.ndarray
    within: np.ndarray
    between: np.ndarray
    total: np.ndarray
    m: int

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(self.total)

    def __getitem__(self, label: str) -> tuple[float, float]:
        i = self.labels.index(label)
        return float(self.estimate[i]), float(self.se[i])


def pool_rubin(fits: Sequence[FitResult]) -> PooledResult:
    m = len(fits)
    if m < 3:
        raise ValueError(f"need at least 3 imputations, got {m}")
    labels = fits[0].labels
    for f in fits[1:]:
        if f.labels != labels:
            raise ValueError("coefficient labels differ between fits")
    est = np.array([f.coefficients for f in fits], dtype=float)
    se = np.array([f.standard_errors for f in fits], dtype=float)
    qbar = est.mean(axis=0)
    ubar = (se**2).mean(axis=0)
    b = est.var(axis=0, ddof=1)
    return PooledResult(labels, qbar, ubar, b, ubar + (1 + 1 / m) * b, m)


def _as_arrays(*xs):
    arrs = [np.asarray(x, dtype=float) for x in xs]
    if any(a.size == 0 for a in arrs):
        raise ValueError("empty input")
    return arrs


def metric_d(mi_estimates, cca_estimates, truth) -> float:
    """Share of replicates where MI is strictly closer to the truth than CCA."""
    mi, cca = _as_arrays(mi_estimates, cca_estimates)
    if mi.shape != cca.shape:
        raise ValueError("MI and CCA estimate vectors differ in length")
    t = np.asarray(truth, dtype=float)
    return float(np.mean(np.abs(mi - t) < np.abs(cca - t)))


def metric_mae(estimates, truth) -> float:
    (e,) = _as_arrays(estimates)
    return float(np.mean(np.abs(np.asarray(truth, float) - e)))


def metric_rmse(estimates, truth) -> float:
    (e,) = _as_arrays(estimates)
    return float(np.sqrt(np.mean((np.asarray(truth, float) - e) ** 2)))


METHODS = ("mi", "cca")


@dataclass(frozen=True)
class MetricsReport:
    """coefficient -> method -> {"d", "mae", "rmse"}.

    For CCA, ``d`` is the mirrored share (CCA strictly closer than MI).
    """

    cells: dict
    K: int
    truth: dict

    def to_json(self) -> str:
        return json.dumps(
            {"K": self.K, "truth": self.truth, "metrics": self.cells}, indent=2, sort_keys=False
        )

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["coefficient", "method", "d", "mae", "rmse", "K"])
            for coef, by_method in self.cells.items():
                for method, vals in by_method.items():
                    w.writerow([coef, method, repr(vals["d"]), repr(vals["mae"]),
                                repr(vals["rmse"]), self.K])


def metrics_report(
    mi: Mapping[str, Sequence[float]],
    cca: Mapping[str, Sequence[float]],
    truth: Mapping[str, float | Sequence[float]],
) -> MetricsReport:
    """Build the report from per-coefficient estimate sequences over K replicates.

    ``truth`` values may be scalars or per-replicate sequences.
    """
    cells = {}
    K = None
    for coef in mi:
        m_est = np.asarray(mi[coef], float)
        c_est = np.asarray(cca[coef], float)
        t = np.asarray(truth[coef], float)
        K = len(m_est)
        cells[coef] = {
            "mi": {"d": metric_d(m_est, c_est, t), "mae": metric_mae(m_est, t),
                   "rmse": metric_rmse(m_est, t)},
            "cca": {"d": metric_d(c_est, m_est, t), "mae": metric_mae(c_est, t),
                    "rmse": metric_rmse(c_est, t)},
        }
    truth_out = {
        k: (float(v) if np.ndim(v) == 0 else [float(x) for x in v]) for k, v in truth.items()
    }
    return MetricsReport(cells, K or 0, truth_out)
