from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..tabular import CATEGORICAL, Dataset


class FitError(Exception):
    """Base class for analysis-model failures."""


class SeparationError(FitError):
    pass


class RankDeficiencyError(FitError):
    pass


class ConvergenceError(FitError):
    pass


@dataclass(frozen=True)
class DesignMatrix:
    matrix: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[1] != len(self.labels):
            raise ValueError("design matrix shape does not match labels")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def shape(self):
        return self.matrix.shape

    def rows(self, idx) -> "DesignMatrix":
        return DesignMatrix(self.matrix[idx], self.labels)

    def check_rank(self):
        if np.linalg.matrix_rank(self.matrix) < self.matrix.shape[1]:
            raise RankDeficiencyError(f"design matrix not of full column rank: {self.labels}")


@dataclass(frozen=True)
class FitResult:
    labels: tuple[str, ...]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    loglik: float
    converged: bool
    iterations: int
    # covariance of the fitted (possibly transformed) parameter vector
    covariance: np.ndarray | None = None
    # residual variance for linear models
    dispersion: float | None = None
    unscaled_covariance: np.ndarray | None = None
    loglik_history: tuple[float, ...] = ()

    def __getitem__(self, label: str) -> float:
        return float(self.coefficients[self.labels.index(label)])

    def se(self, label: str) -> float:
        return float(self.standard_errors[self.labels.index(label)])

    def as_dict(self) -> dict[str, tuple[float, float]]:
        return {
            k: (float(b), float(s))
            for k, b, s in zip(self.labels, self.coefficients, self.standard_errors)
        }


def design_matrix(
    ds: Dataset, covariates: Sequence[str], intercept: bool = True
) -> DesignMatrix:
    """Intercept, continuous covariates as-is, categoricals dummy-coded vs level 1.

    Values at missing cells are used as stored; callers select complete rows
    first when that matters.
    """
    cols, labels = [], []
    if intercept:
        cols.append(np.ones(ds.row_count))
        labels.append("(Intercept)")
    for name in covariates:
        c = ds[name]
        if c.kind == CATEGORICAL:
            for k, lv in enumerate(c.levels[1:], start=1):
                cols.append((c.values == k).astype(float))
                labels.append(f"{name}[{lv}]")
        else:
            cols.append(c.values.astype(float))
            labels.append(name)
    m = np.column_stack(cols) if cols else np.empty((ds.row_count, 0))
    return DesignMatrix(m, tuple(labels))
