import logging

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from augmi import simgen
from augmi.estimators import DesignMatrix, fit_linear
from augmi.impute import (
    ImputationConfig,
    ImputationModelSpec,
    SurvivalColumns,
    build_tte_predictors,
    default_specs,
    fcs_impute,
    impute_cart,
    impute_logistic,
    impute_multinomial,
    impute_norm,
    select_predictors,
)
from augmi.impute.cart import MIN_OBSERVED, donor_draw
from augmi.tabular import (
    CATEGORICAL,
    Dataset,
    RngStream,
    categorical,
    continuous,
    mask_cells,
)


def with_intercept(x):
    x = np.atleast_2d(np.asarray(x, float).T).T
    return DesignMatrix(np.column_stack([np.ones(len(x)), x]),
                        ["(Intercept)", *(f"v{j}" for j in range(x.shape[1]))])


# outcome-derived predictors


def test_tte_predictors_time_and_errors():
    out = build_tte_predictors([0.0, 2.0], [5.0, 4.0], [1, 0], "time")
    np.testing.assert_array_equal(out["fu_time"], [5.0, 2.0])
    np.testing.assert_array_equal(out["delta"], [1.0, 0.0])
    assert set(build_tte_predictors([0.0], [1.0], [1], "none")) == {"delta"}
    np.testing.assert_allclose(build_tte_predictors([0.0], [np.e], [1], "log-time")["log_fu_time"], [1.0])
    with pytest.raises(ValueError):
        build_tte_predictors([1.0], [1.0], [1], "log-time")
    with pytest.raises(ValueError):
        build_tte_predictors([0.0], [1.0], [1], "age")


def test_tte_predictors_nelson_aalen_rows():
    out = build_tte_predictors([0.0, 2, 3], [5.0, 4, 6], [1, 1, 0], "nelson-aalen")
    np.testing.assert_allclose(out["na_hazard"], [5 / 6, 1 / 3, 5 / 6], atol=1e-9)


def tau_ds():
    return Dataset([
        continuous("y", [1.0, 2, 3, 4]),
        continuous("a", [1.0, 3, 2, 4]),
        continuous("b", [4.0, 3, 2, 1]),
        continuous("t", [0.0, 0, 0, 0], observed=[False] * 4),
    ])


def test_select_predictors_threshold():
    ds = tau_ds()
    assert select_predictors(ds, "t", ["a", "b"], ["y"], 0.0) == ["a", "b"]
    # tau(a, y) = 4/6 falls short of 0.7, tau(b, y) = -1 passes
    assert select_predictors(ds, "t", ["a", "b", "y"], ["y"], 0.7) == ["b", "y"]
    assert select_predictors(ds, "t", ["a", "b"], ["y"], 0.6) == ["a", "b"]
    with pytest.raises(ValueError):
        select_predictors(ds, "t", ["a"], ["y"], 1.5)


def test_select_predictors_keeps_identical_and_skips_degenerate(caplog):
    ds = tau_ds().with_columns(continuous("copy", [1.0, 2, 3, 4]), continuous("flat", [1.0] * 4))
    with caplog.at_level(logging.WARNING):
        assert select_predictors(ds, "t", ["copy", "flat"], ["y"], 0.99) == ["copy"]
    assert "flat" in caplog.text


# parametric draws


def test_norm_exact_target_returns_prediction():
    x = np.arange(10.0)
    Xm = with_intercept([20.0, -3.0])
    got = impute_norm(with_intercept(x), 1 + 2 * x, Xm, RngStream(0))
    np.testing.assert_allclose(got, [41.0, -5.0], atol=1e-9)


def test_norm_draws_centre_on_least_squares_prediction():
    g = np.random.default_rng(1)
    x = g.normal(size=50)
    y = 0.5 + x + g.normal(size=50)
    Xo, Xm = with_intercept(x), with_intercept([1.5])
    fit = fit_linear(Xo, y)
    pred = float((Xm.matrix @ fit.coefficients)[0])
    n_draws = 10_000
    draws = np.array([impute_norm(Xo, y, Xm, RngStream(5, k))[0] for k in range(n_draws)])
    assert abs(draws.mean() - pred) < 3 * draws.std() / np.sqrt(n_draws)
    assert not np.all(draws == draws[0])


def test_logistic_all_ones_uses_ridge():
    # every call redraws beta, so average over independent calls
    x = np.linspace(-1, 1, 400)
    Xo, Xm = with_intercept(x), with_intercept([0.0])
    got = np.array([impute_logistic(Xo, np.ones(400, int), Xm, RngStream(2, k))[0] for k in range(1000)])
    assert set(np.unique(got)) <= {0, 1}
    assert got.mean() >= 0.9


def test_multinomial_draws_are_valid_codes():
    g = np.random.default_rng(3)
    x = g.normal(size=200)
    y = g.integers(0, 4, 200)
    got = impute_multinomial(with_intercept(x), y, with_intercept(g.normal(size=500)), RngStream(3), 4)
    assert set(np.unique(got)) <= {0, 1, 2, 3}
    assert len(np.unique(got)) == 4


def test_small_sample_falls_back_to_intercept_only():
    Xo = with_intercept(np.column_stack([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0]]))
    Xm = with_intercept(np.column_stack([[5.0], [5.0]]))
    out = impute_norm(Xo, [1.0, 2.0, 3.0], Xm, RngStream(4))
    assert np.isfinite(out).all()


# CART


def test_cart_constant_target():
    g = np.random.default_rng(4)
    X = g.normal(size=(30, 2))
    got = impute_cart(X, np.full(30, 7.5), g.normal(size=(12, 2)), RngStream(0))
    assert np.all(got == 7.5)


def test_cart_threshold_separation_exhaustive():
    x = np.arange(20.0)
    y = np.where(x < 10, 3.0, 8.0)
    obs = np.ones(20, bool)
    obs[[2, 5, 13, 17]] = False
    got = impute_cart(x[obs, None], y[obs], x[~obs, None], RngStream(1))
    np.testing.assert_array_equal(got, y[~obs])
    got = impute_cart(x[obs, None], (y[obs] > 5).astype(int), x[~obs, None], RngStream(1),
                      kind="categorical", n_levels=2)
    np.testing.assert_array_equal(got, (y[~obs] > 5).astype(int))


def test_cart_donor_draw_is_uniform_within_leaf():
    leaf_obs = np.array([1, 1, 1, 2])
    y_obs = np.array([10.0, 20.0, 30.0, 40.0])
    got = donor_draw(leaf_obs, np.full(30_000, 1), y_obs, np.random.default_rng(0))
    freq = np.array([(got == v).mean() for v in (10.0, 20.0, 30.0)])
    assert np.all(np.abs(freq - 1 / 3) < 0.015)
    assert np.all(donor_draw(leaf_obs, np.array([2, 2]), y_obs, np.random.default_rng(1)) == 40.0)


def test_cart_small_sample_fallback():
    out = impute_cart(np.arange(5.0)[:, None], np.arange(5.0), np.array([[2.5]]), RngStream(2))
    assert np.isfinite(out).all()


@settings(max_examples=30, deadline=None)
@given(st.integers(10, 60), st.integers(0, 10_000))
def test_cart_donors_come_from_observed(n, seed):
    g = np.random.default_rng(seed)
    X = g.normal(size=(n, 2))
    y = np.round(g.normal(size=n), 1)
    got = impute_cart(X, y, g.normal(size=(15, 2)), RngStream(seed))
    assert set(got) <= set(y)


# chained equations


def mixed_ds(n=60, seed=0, p_obs=0.6):
    g = np.random.default_rng(seed)
    x1 = g.normal(size=n)
    ds = Dataset([
        continuous("x1", x1),
        continuous("x2", x1 + g.normal(size=n)),
        categorical("c", g.integers(0, 3, n), ["a", "b", "c"]),
        categorical("y", (g.random(n) < 0.5).astype(int), ["0", "1"]),
    ])
    return mask_cells(ds, ["x2", "c"], p_obs, RngStream(seed), row_joint=False)


def glm_config(ds, m=3, iterations=3, **kw):
    return ImputationConfig(default_specs(ds), m=m, iterations=iterations, **kw)


def test_fcs_nothing_to_impute():
    ds = Dataset([continuous("a", [1.0, 2.0, 3.0])])
    with pytest.raises(ValueError, match="nothing to impute"):
        fcs_impute(ds, ImputationConfig([], m=3, iterations=1), RngStream(0))


def test_fcs_config_checks():
    ds = mixed_ds()
    with pytest.raises(ValueError):
        ImputationConfig(default_specs(ds), m=2)
    with pytest.raises(ValueError):
        ImputationModelSpec("x2", "norm-draw", ["x2"])
    with pytest.raises(ValueError):
        ImputationModelSpec("c", "norm-draw", ["x1"]).check_kind(ds)
    with pytest.raises(ValueError):
        fcs_impute(ds, ImputationConfig(default_specs(ds)[:1], m=3, iterations=1), RngStream(0))


def test_fcs_m_datasets_share_observed_cells():
    ds = mixed_ds()
    imps, trace = fcs_impute(ds, glm_config(ds, m=5, outcome="y"), RngStream(1))
    assert len(imps) == 5
    miss = ~ds["x2"].observed
    for d in imps:
        assert d.row_count == ds.row_count
        assert all(d[c].n_missing == 0 for c in d.names)
        np.testing.assert_array_equal(d["x2"].values[~miss], ds["x2"].values[~miss])
    assert not np.array_equal(imps[0]["x2"].values[miss], imps[1]["x2"].values[miss])
    assert trace.mean.shape == (5, 3, 2)
    assert trace.columns == tuple(sorted(ds.incomplete_columns(), key=lambda c: ds[c].n_missing))


def test_fcs_same_seed_same_output():
    ds = mixed_ds(seed=3)
    cfg = glm_config(ds, outcome="y", predictor_selection=0.05)
    a, ta = fcs_impute(ds, cfg, RngStream(9))
    b, tb = fcs_impute(ds, cfg, RngStream(9))
    assert all(x == y and np.array_equal(x["x2"].values, y["x2"].values) for x, y in zip(a, b))
    np.testing.assert_array_equal(ta.mean, tb.mean)


def test_fcs_trace_sd_bounded():
    ds = simgen.gen_binary_outcome(simgen.gen_covariates(2000, RngStream(5)),
                                   simgen.BinaryOutcomeParams(), RngStream(6))
    ds = mask_cells(ds, simgen.SURVEY_COVARIATES, 0.2, RngStream(7))
    imps, trace = fcs_impute(ds, glm_config(ds, m=3, iterations=5, outcome="Y"), RngStream(8))
    for c, name in enumerate(trace.columns):
        if ds[name].kind == CATEGORICAL:
            continue
        obs_sd = ds[name].values[ds[name].observed].std()
        final = trace.sd[:, -1, c]
        assert np.all((final > 0.1 * obs_sd) & (final < 10 * obs_sd)), name


def test_fcs_survival_predictors():
    ds = simgen.gen_tte_outcome(simgen.gen_covariates(800, RngStream(1)), simgen.WeibullParams(), RngStream(2))
    ds = mask_cells(ds, simgen.SURVEY_COVARIATES, 0.3, RngStream(3))
    for family, choice in (("glm", "nelson-aalen"), ("glm", "log-time"), ("cart", "time")):
        specs = default_specs(ds, family, choice, exclude=("xt", "t", "delta"))
        cfg = ImputationConfig(specs, m=3, iterations=2, predictor_selection=0.05,
                               survival=SurvivalColumns())
        imps, _ = fcs_impute(ds, cfg, RngStream(4))
        for d in imps:
            assert np.isfinite(d["x3"].values).all()
            assert set(np.unique(d["x5"].values)) <= {0, 1, 2, 3}


def test_fcs_trace_csv(tmp_path):
    ds = mixed_ds()
    _, trace = fcs_impute(ds, glm_config(ds, outcome="y"), RngStream(1))
    path = tmp_path / "trace.csv"
    trace.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "chain,iteration,column,mean,sd"
    assert len(lines) == 1 + 3 * 3 * 2


@st.composite
def small_problems(draw):
    n = draw(st.integers(15, 40))
    seed = draw(st.integers(0, 10_000))
    p_obs = draw(st.floats(0.3, 0.9))
    family = draw(st.sampled_from(["glm", "cart"]))
    return n, seed, p_obs, family


@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(small_problems())
def test_fcs_properties(problem):
    n, seed, p_obs, family = problem
    ds = mixed_ds(n, seed, p_obs)
    if not ds.incomplete_columns():
        return
    cfg = ImputationConfig(default_specs(ds, family), m=3, iterations=2, outcome="y")
    imps, _ = fcs_impute(ds, cfg, RngStream(seed))
    again, _ = fcs_impute(ds, cfg, RngStream(seed))
    for d, e in zip(imps, again):
        for name in ds.names:
            obs = ds[name].observed
            # observed cells bit-identical
            assert ds[name].values[obs].tobytes() == d[name].values[obs].tobytes()
            assert np.array_equal(d[name].values, e[name].values)
        assert np.isfinite(d["x2"].values).all()
        assert set(np.unique(d["c"].values)) <= {0, 1, 2}
        if family == "cart" and ds["x2"].observed.sum() >= MIN_OBSERVED:
            miss = ~ds["x2"].observed
            assert set(d["x2"].values[miss]) <= set(ds["x2"].values[~miss])
