from .cart import TreeControls, impute_cart
from .draws import impute_logistic, impute_multinomial, impute_norm
from .fcs import (
    ImputationConfig,
    ImputationError,
    ImputationModelSpec,
    SurvivalColumns,
    TraceStats,
    default_specs,
    fcs_impute,
)
from .predictors import build_tte_predictors, select_predictors

__all__ = [
    "ImputationConfig",
    "ImputationError",
    "ImputationModelSpec",
    "SurvivalColumns",
    "TraceStats",
    "TreeControls",
    "build_tte_predictors",
    "default_specs",
    "fcs_impute",
    "impute_cart",
    "impute_logistic",
    "impute_multinomial",
    "impute_norm",
    "select_predictors",
]
