import json

import numpy as np
import pytest

from augmi import cli
from augmi.config import (
    ConfigError,
    MIConfig,
    ScenarioConfig,
    available_cores,
    config_from_dict,
    parse_config,
    resolve_workers,
)
from augmi.runner import metrics_from_records, read_records, run_replicate, run_scenario

MINIMAL = {"outcome": "binary", "n": 1000, "observed_fraction": 0.2, "replicates": 3, "seed": 1}


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return path


def small(tmp_path, **kw):
    base = dict(outcome="binary", n=400, observed_fraction=0.3, replicates=3, seed=5,
                mi=MIConfig(m=3, iterations=2), parallelism=1, output_dir=str(tmp_path))
    base.update(kw)
    return ScenarioConfig(**base)


def test_config_defaults(tmp_path):
    cfg = parse_config(write_json(tmp_path / "c.json", MINIMAL))
    assert (cfg.mi.m, cfg.mi.iterations, cfg.mi.method) == (25, 15, "glm")
    assert cfg.parallelism == available_cores()


def test_config_validation_names_fields(tmp_path):
    with pytest.raises(ConfigError, match="observed_fraction"):
        config_from_dict({**MINIMAL, "observed_fraction": 0})
    with pytest.raises(ConfigError, match="unknown config keys"):
        config_from_dict({**MINIMAL, "replicate": 3})
    with pytest.raises(ConfigError, match="mi"):
        config_from_dict({**MINIMAL, "mi": {"iteration": 3}})
    with pytest.raises(ConfigError, match="missing"):
        config_from_dict({"outcome": "binary"})
    with pytest.raises(ConfigError, match="malformed"):
        (tmp_path / "bad.json").write_text("{")
        parse_config(tmp_path / "bad.json")


def test_method_compatibility():
    tte = config_from_dict({**MINIMAL, "outcome": "tte", "mi": {"method": "nelson-aalen"}})
    assert tte.mi.method == "nelson-aalen"
    with pytest.raises(ConfigError, match="mi.method"):
        config_from_dict({**MINIMAL, "mi": {"method": "nelson-aalen"}})


def test_desk_preset_overrides():
    cfg = config_from_dict({**MINIMAL, "mi": {"m": 5}}, preset="desk")
    assert (cfg.n, cfg.replicates, cfg.mi.m, cfg.mi.iterations) == (20_000, 50, 10, 10)


def test_worker_priority(monkeypatch):
    cfg = config_from_dict({**MINIMAL, "parallelism": 2})
    monkeypatch.delenv("AUGMI_WORKERS", raising=False)
    assert resolve_workers(cfg) == 2
    monkeypatch.setenv("AUGMI_WORKERS", "3")
    assert resolve_workers(cfg) == 3
    assert resolve_workers(cfg, 4) == 4


def test_full_observation_reuses_cca(tmp_path):
    res = run_scenario(small(tmp_path, observed_fraction=1.0, replicates=5))
    assert len(res.records) == 5 and res.n_failed == 0
    for rec in res.records:
        for v in rec.coefficients.values():
            assert v["mi_estimate"] == v["cca_estimate"]
            assert v["mi_se"] == v["cca_se"]


def test_replicate_is_deterministic(tmp_path):
    cfg = small(tmp_path, outcome="tte", mi=MIConfig(m=3, iterations=2, method="cart"))
    a, b = run_replicate(cfg, 2), run_replicate(cfg, 2)
    assert a.status == "ok"
    assert list(a.rows()) == list(b.rows())
    assert list(a.rows()) != list(run_replicate(cfg, 3).rows())


def test_parallel_schedule_is_bit_identical(tmp_path):
    one = run_scenario(small(tmp_path / "one", replicates=8), workers=1)
    many = run_scenario(small(tmp_path / "many", replicates=8), workers=8)
    assert one.n_failed == many.n_failed == 0
    a = (tmp_path / "one" / "records.csv").read_bytes()
    b = (tmp_path / "many" / "records.csv").read_bytes()
    assert a == b
    assert (tmp_path / "one" / "metrics.json").read_bytes() == (tmp_path / "many" / "metrics.json").read_bytes()


def test_outputs_and_metrics_recompute(tmp_path, capsys):
    run_scenario(small(tmp_path))
    for name in ("records.csv", "metrics.json", "metrics.csv", "trace_rep1.csv",
                 "config_resolved.json", "truth.json", "timings.csv"):
        assert (tmp_path / name).exists(), name
    rows = read_records(tmp_path / "records.csv")
    assert {r["replicate"] for r in rows} == {"1", "2", "3"}
    assert len({r["coefficient"] for r in rows}) == 8
    out = tmp_path / "again.json"
    assert cli.main(["metrics", "--records", str(tmp_path / "records.csv"),
                     "--truth", str(tmp_path / "truth.json"), "--out", str(out)]) == 0
    assert out.read_bytes() == (tmp_path / "metrics.json").read_bytes()
    assert cli.main(["metrics", "--records", str(tmp_path / "records.csv")]) == 0
    assert json.loads(capsys.readouterr().out)["K"] == 3


def test_failed_replicates_are_recorded(tmp_path):
    # 12 rows at 1% observed leaves no complete rows for the CCA fit
    res = run_scenario(small(tmp_path, n=12, observed_fraction=0.01, replicates=4))
    assert res.n_failed == 4 and not res.ok
    rows = read_records(tmp_path / "records.csv")
    assert len(rows) == 4 and all(r["status"] == "failed" and r["error"] for r in rows)


def test_cli_exit_codes(tmp_path):
    cfg = write_json(tmp_path / "c.json", {**MINIMAL, "n": 300, "replicates": 2,
                                           "mi": {"m": 3, "iterations": 1}, "parallelism": 1})
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    bad = write_json(tmp_path / "bad.json", {**MINIMAL, "observed_fraction": 2})
    assert cli.main(["simulate", "--config", str(bad)]) == 2
    fail = write_json(tmp_path / "f.json", {**MINIMAL, "n": 12, "observed_fraction": 0.01,
                                            "replicates": 2, "parallelism": 1})
    assert cli.main(["simulate", "--config", str(fail), "--out", str(tmp_path / "f")]) == 1


def test_metrics_truth_override():
    rows = [
        {"replicate": "1", "status": "ok", "coefficient": "x", "truth": "1.0",
         "mi_estimate": "1.1", "cca_estimate": "1.2"},
        {"replicate": "2", "status": "failed", "coefficient": "", "truth": "",
         "mi_estimate": "", "cca_estimate": ""},
    ]
    rep = metrics_from_records(rows)
    assert rep.K == 1 and rep.cells["x"]["mi"]["d"] == 1.0
    rep = metrics_from_records(rows, {"x": 1.3})
    assert rep.cells["x"]["mi"]["d"] == 0.0
    with pytest.raises(ValueError):
        metrics_from_records(rows, {"y": 0.0})
    assert np.isclose(rep.cells["x"]["cca"]["mae"], 0.1)
