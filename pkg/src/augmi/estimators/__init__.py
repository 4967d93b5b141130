from .design import (
    ConvergenceError,
    DesignMatrix,
    FitError,
    FitResult,
    RankDeficiencyError,
    SeparationError,
    design_matrix,
)
from .glm import fit_linear, fit_logistic, fit_multinomial
from .nonparametric import kendall_tau, nelson_aalen, nelson_aalen_curve
from .weibull import fit_weibull_lt, weibull_lt_gradient, weibull_lt_loglik

__all__ = [
    "ConvergenceError",
    "DesignMatrix",
    "FitError",
    "FitResult",
    "RankDeficiencyError",
    "SeparationError",
    "design_matrix",
    "fit_linear",
    "fit_logistic",
    "fit_multinomial",
    "fit_weibull_lt",
    "kendall_tau",
    "nelson_aalen",
    "nelson_aalen_curve",
    "weibull_lt_gradient",
    "weibull_lt_loglik",
]
