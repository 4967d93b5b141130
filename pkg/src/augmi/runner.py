"""Replicate loop: generate -> mask -> {CCA fit, FCS impute -> fit -> pool} -> metrics."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from dataclasses import dataclass, field
from multiprocessing import get_context
from pathlib import Path

from . import simgen
from .config import TTE_METHOD_MAP, ScenarioConfig, resolve_workers
from .estimators import FitResult, design_matrix, fit_logistic, fit_weibull_lt
from .impute import ImputationConfig, SurvivalColumns, TraceStats, default_specs, fcs_impute
from .pooling import MetricsReport, metrics_report, pool_rubin
from .tabular import Dataset, RngStream, complete_rows, mask_cells

log = logging.getLogger(__name__)

RECORD_FIELDS = (
    "replicate", "status", "error", "coefficient", "truth",
    "cca_estimate", "cca_se", "mi_estimate", "mi_se", "cca_converged", "mi_converged",
)
SUCCESS_SHARE = 0.95


@dataclass
class ReplicateRecord:
    replicate: int
    status: str = "ok"
    error: str = ""
    coefficients: dict = field(default_factory=dict)
    seconds: float = 0.0
    cca_converged: bool = False
    mi_converged: bool = False
    trace: TraceStats | None = None

    def rows(self):
        if self.status != "ok":
            yield [self.replicate, self.status, self.error] + [""] * (len(RECORD_FIELDS) - 3)
            return
        for coef, v in self.coefficients.items():
            yield [self.replicate, "ok", "", coef, repr(v["truth"]), repr(v["cca_estimate"]),
                   repr(v["cca_se"]), repr(v["mi_estimate"]), repr(v["mi_se"]),
                   int(self.cca_converged), int(self.mi_converged)]


def analysis_fit(ds: Dataset, outcome: str) -> FitResult:
    covs = list(simgen.COVARIATES)
    if outcome == "binary":
        return fit_logistic(design_matrix(ds, covs), ds["Y"].values)
    X = design_matrix(ds, covs, intercept=False)
    return fit_weibull_lt(X, ds["xt"].values, ds["t"].values, ds["delta"].values)


def generate(config: ScenarioConfig, rng: RngStream) -> Dataset:
    ds = simgen.gen_covariates(config.n, rng.child(0))
    if config.outcome == "binary":
        return simgen.gen_binary_outcome(ds, simgen.BinaryOutcomeParams(), rng.child(1))
    return simgen.gen_tte_outcome(ds, simgen.WeibullParams(), rng.child(1))


def generating_truth(outcome: str) -> dict[str, float]:
    params = simgen.BinaryOutcomeParams() if outcome == "binary" else simgen.WeibullParams()
    return {k: float(v) for k, v in params.truth().items()}


def imputation_config(config: ScenarioConfig, ds: Dataset) -> ImputationConfig:
    mi = config.mi
    if config.outcome == "binary":
        specs = default_specs(ds, mi.method)
        return ImputationConfig(specs, mi.m, mi.iterations, mi.predictor_selection, outcome="Y")
    family, tte_pred = TTE_METHOD_MAP[mi.method]
    surv = SurvivalColumns("xt", "t", "delta")
    specs = default_specs(ds, family, tte_pred, exclude=("xt", "t", "delta"))
    return ImputationConfig(
        specs, mi.m, mi.iterations, mi.predictor_selection, survival=surv
    )


def run_replicate(config: ScenarioConfig, k: int) -> ReplicateRecord:
    """Replicate ``k`` (1-based), fully determined by (config.seed, k)."""
    t0 = time.perf_counter()
    rec = ReplicateRecord(k)
    rng = RngStream(config.seed, k)
    try:
        full = generate(config, rng)
        if config.truth == "full-data":
            ffit = analysis_fit(full, config.outcome)
            truth = dict(zip(ffit.labels, map(float, ffit.coefficients)))
        else:
            truth = generating_truth(config.outcome)
        masked = mask_cells(
            full, simgen.SURVEY_COVARIATES, config.observed_fraction, rng.child(2),
            row_joint=config.row_joint_mask,
        )
        cca = analysis_fit(complete_rows(masked), config.outcome)
        if not masked.incomplete_columns():
            log.info("replicate %d: nothing to impute; MI reuses the CCA fit", k)
            mi_est, mi_se, mi_conv = cca.coefficients, cca.standard_errors, cca.converged
        else:
            imps, trace = fcs_impute(masked, imputation_config(config, masked), rng.child(3))
            fits = [analysis_fit(d, config.outcome) for d in imps]
            pooled = pool_rubin(fits)
            mi_est, mi_se = pooled.estimate, pooled.se
            mi_conv = all(f.converged for f in fits)
            if k == 1:
                rec.trace = trace
        rec.coefficients = {
            lab: {
                "truth": float(truth[lab]),
                "cca_estimate": float(cca.coefficients[i]),
                "cca_se": float(cca.standard_errors[i]),
                "mi_estimate": float(mi_est[i]),
                "mi_se": float(mi_se[i]),
            }
            for i, lab in enumerate(cca.labels)
        }
        rec.cca_converged, rec.mi_converged = cca.converged, mi_conv
    except Exception as e:  # recorded, never fatal for the scenario
        log.warning("replicate %d failed: %s: %s", k, type(e).__name__, e)
        rec.status = "failed"
        rec.error = f"{type(e).__name__}: {e}"
        rec.coefficients = {}
    rec.seconds = time.perf_counter() - t0
    return rec


def _worker(args):
    config, k = args
    return run_replicate(config, k)


def write_records(path, records) -> None:
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_FIELDS)
        for rec in sorted(records, key=lambda r: r.replicate):
            w.writerows(rec.rows())
    os.replace(tmp, path)


def read_records(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def metrics_from_records(rows: list[dict], truth: dict | None = None) -> MetricsReport:
    """Recompute the metrics report from records.csv rows.

    Without ``truth`` the per-replicate truth column is used.
    """
    ok = sorted(
        (r for r in rows if r["status"] == "ok"),
        key=lambda r: int(r["replicate"]),
    )
    mi, cca, tr = {}, {}, {}
    for r in ok:
        c = r["coefficient"]
        mi.setdefault(c, []).append(float(r["mi_estimate"]))
        cca.setdefault(c, []).append(float(r["cca_estimate"]))
        tr.setdefault(c, []).append(float(r["truth"]))
    if truth is not None:
        missing = sorted(set(mi) - set(truth))
        if missing:
            raise ValueError(f"truth lacks coefficients {missing}")
        tr = {c: float(truth[c]) for c in mi}
    else:
        tr = {c: (v[0] if len(set(v)) == 1 else v) for c, v in tr.items()}
    return metrics_report(mi, cca, tr)


@dataclass
class ScenarioResult:
    records: list[ReplicateRecord]
    metrics: MetricsReport
    trace: TraceStats | None
    n_failed: int

    @property
    def success_share(self) -> float:
        return 1 - self.n_failed / max(len(self.records), 1)

    @property
    def ok(self) -> bool:
        return self.success_share >= SUCCESS_SHARE


def run_scenario(config: ScenarioConfig, workers: int | None = None) -> ScenarioResult:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "config_resolved.json", "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2)
        fh.write("\n")
    with open(out / "truth.json", "w", encoding="utf-8") as fh:
        json.dump(generating_truth(config.outcome), fh, indent=2)
        fh.write("\n")

    n_workers = resolve_workers(config, workers)
    tasks = [(config, k) for k in range(1, config.replicates + 1)]
    records: list[ReplicateRecord] = []
    records_path = out / "records.csv"
    # crash-safe: append each record as it lands, rewrite sorted at the end
    with open(records_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_FIELDS)
        if n_workers == 1:
            results = map(_worker, tasks)
            pool = None
        else:
            pool = get_context("spawn").Pool(n_workers)
            results = pool.imap_unordered(_worker, tasks)
        try:
            for rec in results:
                records.append(rec)
                w.writerows(rec.rows())
                fh.flush()
                log.info("replicate %d %s (%.1fs)", rec.replicate, rec.status, rec.seconds)
        finally:
            if pool is not None:
                pool.close()
                pool.join()
    write_records(records_path, records)
    with open(out / "timings.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["replicate", "seconds"])
        for rec in sorted(records, key=lambda r: r.replicate):
            w.writerow([rec.replicate, f"{rec.seconds:.3f}"])

    metrics = metrics_from_records(read_records(records_path))
    metrics.write_json(out / "metrics.json")
    metrics.write_csv(out / "metrics.csv")
    trace = next((r.trace for r in records if r.replicate == 1), None)
    if trace is not None:
        trace.write_csv(out / "trace_rep1.csv")
    n_failed = sum(r.status != "ok" for r in records)
    if n_failed:
        log.warning("%d of %d replicates failed", n_failed, len(records))
    return ScenarioResult(sorted(records, key=lambda r: r.replicate), metrics, trace, n_failed)
