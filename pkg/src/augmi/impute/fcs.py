"""Chained-equations (fully conditional specification) multiple imputation."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..estimators import DesignMatrix, nelson_aalen
from ..tabular import CATEGORICAL, CONTINUOUS, EVENT_INDICATOR, Column, Dataset, RngStream
from .cart import TreeControls, impute_cart
from .draws import impute_logistic, impute_multinomial, impute_norm
from .predictors import DERIVED_NAMES, TTE_CHOICES, build_tte_predictors, select_predictors

log = logging.getLogger(__name__)

METHODS = ("norm-draw", "logistic-draw", "multinomial-draw", "cart-donor")


class ImputationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ImputationModelSpec:
    target: str
    method: str
    predictors: tuple[str, ...]
    tte_predictor: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "predictors", tuple(self.predictors))
        if self.method not in METHODS:
            raise ValueError(f"unknown imputation method {self.method!r}")
        if self.tte_predictor not in TTE_CHOICES:
            raise ValueError(f"unknown tte predictor {self.tte_predictor!r}")
        if self.target in self.predictors:
            raise ValueError(f"{self.target!r} cannot predict itself")

    def check_kind(self, ds: Dataset):
        col = ds[self.target]
        n_levels = len(col.levels) if col.kind == CATEGORICAL else 2
        ok = {
            "norm-draw": col.kind == CONTINUOUS,
            "logistic-draw": col.kind == EVENT_INDICATOR or (col.kind == CATEGORICAL and n_levels == 2),
            "multinomial-draw": col.kind == CATEGORICAL and n_levels > 2,
            "cart-donor": col.kind in (CONTINUOUS, CATEGORICAL, EVENT_INDICATOR),
        }[self.method]
        if not ok:
            raise ValueError(f"method {self.method!r} does not fit {col.kind} column {self.target!r}")


@dataclass(frozen=True)
class SurvivalColumns:
    entry: str = "xt"
    exit: str = "t"
    event: str = "delta"


@dataclass(frozen=True)
class ImputationConfig:
    specs: tuple[ImputationModelSpec, ...]
    m: int = 25
    iterations: int = 15
    # "all" or a |tau| threshold in [0, 1]
    predictor_selection: str | float = "all"
    outcome: str | None = None
    survival: SurvivalColumns | None = None
    tree: TreeControls = field(default_factory=TreeControls)

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))
        if self.m < 3:
            raise ValueError(f"m must be >= 3, got {self.m}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        sel = self.predictor_selection
        if sel != "all" and not (isinstance(sel, (int, float)) and 0 <= sel <= 1):
            raise ValueError(f"predictor_selection must be 'all' or a threshold in [0, 1], got {sel!r}")
        targets = [s.target for s in self.specs]
        if len(set(targets)) != len(targets):
            raise ValueError("duplicate imputation targets")


@dataclass(frozen=True)
class TraceStats:
    """Mean and SD of the imputed cells per (chain, iteration, column)."""

    columns: tuple[str, ...]
    mean: np.ndarray
    sd: np.ndarray

    def rows(self):
        m, iters, _ = self.mean.shape
        for j in range(m):
            for it in range(iters):
                for c, name in enumerate(self.columns):
                    yield j + 1, it + 1, name, float(self.mean[j, it, c]), float(self.sd[j, it, c])

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["chain", "iteration", "column", "mean", "sd"])
            for row in self.rows():
                w.writerow([row[0], row[1], row[2], repr(row[3]), repr(row[4])])


def default_specs(
    ds: Dataset,
    family: str = "glm",
    tte_predictor: str = "none",
    exclude: Sequence[str] = (),
) -> list[ImputationModelSpec]:
    """One spec per incomplete column; every other non-excluded column predicts.

    ``family`` is ``"glm"`` (norm/logistic/multinomial by column kind) or
    ``"cart"``.
    """
    specs = []
    for target in ds.incomplete_columns():
        col = ds[target]
        if family == "cart":
            method = "cart-donor"
        elif col.kind == CONTINUOUS:
            method = "norm-draw"
        elif col.kind == CATEGORICAL and len(col.levels) > 2:
            method = "multinomial-draw"
        else:
            method = "logistic-draw"
        preds = tuple(n for n in ds.names if n != target and n not in exclude)
        specs.append(ImputationModelSpec(target, method, preds, tte_predictor))
    return specs


class _Work:
    """Mutable per-chain copy of the dataset values."""

    def __init__(self, ds: Dataset):
        self.ds = ds
        self.values = {c.name: np.array(c.values, copy=True) for c in ds.columns}

    def design(self, names, extra: dict, rows, intercept: bool):
        cols, labels = [], []
        if intercept:
            cols.append(np.ones(len(rows)))
            labels.append("(Intercept)")
        for name in names:
            col = self.ds[name]
            v = self.values[name][rows]
            if col.kind == CATEGORICAL:
                for k in range(1, len(col.levels)):
                    cols.append((v == k).astype(float))
                    labels.append(f"{name}[{col.levels[k]}]")
            else:
                cols.append(v.astype(float))
                labels.append(name)
        for name, v in extra.items():
            cols.append(v[rows])
            labels.append(name)
        return DesignMatrix(np.column_stack(cols), tuple(labels))


def _resolve_predictors(ds: Dataset, config: ImputationConfig):
    """Map each target to (predictor columns, derived outcome predictors)."""
    surv = config.survival
    derived_cache: dict[str, dict[str, np.ndarray]] = {}
    reference_ds = ds
    reference = config.outcome
    if surv is not None:
        entry, exit, event = (ds[surv.entry].values, ds[surv.exit].values, ds[surv.event].values)
        for name in (surv.entry, surv.exit, surv.event):
            if ds[name].n_missing:
                raise ImputationError(f"survival column {name!r} must be fully observed")
        # tau for censored outcomes is taken against the per-row cumulative hazard
        reference = "__na_reference__"
        reference_ds = ds.with_columns(
            Column(reference, CONTINUOUS, nelson_aalen(entry, exit, event))
        )
    resolved = {}
    for spec in config.specs:
        outcome_cols = [c for c in (config.outcome,) if c]
        extra: dict[str, np.ndarray] = {}
        if surv is not None:
            if spec.tte_predictor not in derived_cache:
                derived_cache[spec.tte_predictor] = build_tte_predictors(
                    entry, exit, event, spec.tte_predictor
                )
            derived = derived_cache[spec.tte_predictor]
            extra[surv.event] = derived["delta"]
            if spec.tte_predictor in DERIVED_NAMES:
                key = DERIVED_NAMES[spec.tte_predictor]
                extra[key] = derived[key]
            extra[surv.entry] = np.asarray(entry, float)
            skip = {surv.entry, surv.exit, surv.event}
        else:
            skip = set()
        candidates = [p for p in spec.predictors if p not in skip]
        if config.predictor_selection != "all" and reference is not None:
            candidates = select_predictors(
                reference_ds, spec.target, candidates, outcome_cols,
                float(config.predictor_selection), reference=reference,
            )
        for oc in outcome_cols:
            if oc not in candidates and oc != spec.target:
                candidates.append(oc)
        resolved[spec.target] = (candidates, extra)
    return resolved


def _impute_one(spec, work: _Work, preds, extra, obs_rows, mis_rows, rng, config):
    col = work.ds[spec.target]
    y_obs = work.values[spec.target][obs_rows]
    if spec.method == "cart-donor":
        Xo = work.design(preds, extra, obs_rows, intercept=False).matrix
        Xm = work.design(preds, extra, mis_rows, intercept=False).matrix
        kind = "continuous" if col.kind == CONTINUOUS else "categorical"
        n_levels = len(col.levels) if col.kind == CATEGORICAL else 2
        return impute_cart(Xo, y_obs, Xm, rng, kind, n_levels, config.tree)
    Xo = work.design(preds, extra, obs_rows, intercept=True)
    Xm = work.design(preds, extra, mis_rows, intercept=True)
    if spec.method == "norm-draw":
        return impute_norm(Xo, y_obs, Xm, rng)
    if spec.method == "logistic-draw":
        return impute_logistic(Xo, y_obs, Xm, rng)
    return impute_multinomial(Xo, y_obs, Xm, rng, len(col.levels))


def _run_chain(ds, config, resolved, order, rng: RngStream, chain: int):
    work = _Work(ds)
    g = rng.gen
    obs_idx = {t: np.flatnonzero(ds[t].observed) for t in order}
    mis_idx = {t: np.flatnonzero(~ds[t].observed) for t in order}
    for t in order:
        observed_vals = ds[t].values[obs_idx[t]]
        if observed_vals.size == 0:
            raise ImputationError(f"column {t!r} has no observed values")
        work.values[t][mis_idx[t]] = g.choice(observed_vals, size=len(mis_idx[t]))
    specs = {s.target: s for s in config.specs}
    mean = np.empty((config.iterations, len(order)))
    sd = np.empty_like(mean)
    for it in range(config.iterations):
        for c, t in enumerate(order):
            preds, extra = resolved[t]
            try:
                new = _impute_one(specs[t], work, preds, extra, obs_idx[t], mis_idx[t], rng, config)
            except Exception as e:
                raise ImputationError(
                    f"chain {chain}, sweep {it + 1}, column {t!r}: {type(e).__name__}: {e}"
                ) from e
            work.values[t][mis_idx[t]] = new
            mean[it, c] = np.mean(new)
            sd[it, c] = np.std(new, ddof=1) if len(new) > 1 else 0.0
    completed = Dataset(
        ds[name].replace(values=work.values[name], observed=np.ones(ds.row_count, bool))
        if name in mis_idx else ds[name]
        for name in ds.names
    )
    return completed, mean, sd


def fcs_impute(ds: Dataset, config: ImputationConfig, rng: RngStream):
    """Run ``config.m`` independent chains; return (completed datasets, TraceStats).

    Chain j draws from ``rng.child(j)``.  Incomplete columns are visited in
    order of increasing missing count, starting from random draws of each
    column's observed values.
    """
    incomplete = ds.incomplete_columns()
    if not incomplete:
        raise ValueError("nothing to impute: dataset has no missing cells")
    specs = {s.target: s for s in config.specs}
    unspecified = [c for c in incomplete if c not in specs]
    if unspecified:
        raise ValueError(f"no imputation spec for incomplete columns {unspecified}")
    for s in config.specs:
        s.check_kind(ds)
        for p in s.predictors:
            ds[p]
    order = sorted(incomplete, key=lambda c: ds[c].n_missing)
    resolved = _resolve_predictors(ds, config)
    log.debug("predictors: %s", {t: v[0] for t, v in resolved.items()})
    outputs = [
        _run_chain(ds, config, resolved, order, rng.child(j), j + 1) for j in range(config.m)
    ]
    trace = TraceStats(
        tuple(order),
        np.stack([o[1] for o in outputs]),
        np.stack([o[2] for o in outputs]),
    )
    return [o[0] for o in outputs], trace
