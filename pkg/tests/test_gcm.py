import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.stats import norm

from genlava.gcm import (
    DegenerateStatisticError,
    Fixed,
    GcmResult,
    decide,
    gcm_edge_test,
    gcm_statistic,
    normal_quantile,
    residuals,
    tuning_seeds,
    two_sided_p_value,
)
from genlava.glm import IDENTITY, LOGISTIC, Dataset
from genlava.penalty import PenaltyParams
from genlava.selection import LASSO, CvConfig
from genlava.simulate import ScenarioConfig, draw_scenario
from genlava.solver import SolverOptions, fit_lasso, fit_lava

vectors = st.lists(st.floats(-10, 10), min_size=3, max_size=30)


def test_residual_examples():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((10, 3))
    d = Dataset(X @ np.array([1.0, -2.0, 0.5]), X)
    fit = fit_lava(d, IDENTITY, PenaltyParams(0.0, 1.0), SolverOptions(kkt_tol=1e-8))
    np.testing.assert_allclose(residuals(d, IDENTITY, fit), 0.0, atol=1e-7)

    d = Dataset([1.0, 0.0], [[1.0], [2.0]])
    fit = fit_lasso(d, LOGISTIC, 10.0)
    assert not fit.theta_hat.any()
    np.testing.assert_array_equal(residuals(d, LOGISTIC, fit), [0.5, -0.5])


def test_statistic_examples():
    assert gcm_statistic([1.0, -1.0], [1.0, 1.0]) == 0.0
    assert gcm_statistic([2.0, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0, 1.0]) == pytest.approx(1.154701, abs=1e-6)
    with pytest.raises(DegenerateStatisticError):
        gcm_statistic([1.0, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        gcm_statistic([1.0], [1.0])
    with pytest.raises(ValueError):
        gcm_statistic([1.0, 2.0], [1.0, 2.0, 3.0])


def test_statistic_matches_direct_formula():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal(50), rng.standard_normal(50)
    R = a * b
    expected = math.sqrt(50) * R.mean() / R.std(ddof=0)
    assert gcm_statistic(a, b) == pytest.approx(expected, rel=1e-12)


def test_normal_quantile():
    assert normal_quantile(0.5) == 0.0
    assert normal_quantile(0.975) == pytest.approx(1.95996398, abs=1e-8)
    assert normal_quantile(0.84134475) == pytest.approx(1.0, abs=1e-6)
    for prob in np.linspace(1e-6, 1 - 1e-6, 101):
        assert abs(normal_quantile(prob) - norm.ppf(prob)) <= 1e-8
    for bad in (0.0, 1.0, -0.1, math.nan):
        with pytest.raises(ValueError):
            normal_quantile(bad)


def test_p_value_against_reference_cdf():
    for t in np.linspace(-8, 8, 161):
        assert abs(two_sided_p_value(t) - 2 * norm.sf(abs(t))) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(a=vectors, seed=st.integers(0, 1000), c=st.floats(0.1, 10))
def test_statistic_symmetries(a, seed, c):
    a = np.array(a)
    b = np.random.default_rng(seed).standard_normal(a.size)
    R = a * b
    assume(np.mean(R * R) - R.mean() ** 2 > 1e-6)
    t = gcm_statistic(a, b)
    assert gcm_statistic(c * a, b) == pytest.approx(t, rel=1e-9, abs=1e-9)
    assert gcm_statistic(-c * a, b) == pytest.approx(-t, rel=1e-9, abs=1e-9)
    assert gcm_statistic(b, a) == t
    perm = np.random.default_rng(seed + 1).permutation(a.size)
    assert gcm_statistic(a[perm], b[perm]) == pytest.approx(t, rel=1e-9, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(t1=st.floats(0, 30), t2=st.floats(0, 30))
def test_p_value_is_monotone_in_abs_t(t1, t2):
    if t1 < t2:
        assert two_sided_p_value(t1) >= two_sided_p_value(t2)
    assert two_sided_p_value(-t1) == two_sided_p_value(t1)
    assert 0.0 <= two_sided_p_value(t1) <= 1.0


def test_decision_rule():
    z = normal_quantile(0.975)
    assert decide(z + 1e-9, 0.05)
    assert not decide(z, 0.05)
    assert not decide(-1.0, 0.05)


def small_null(seed=0, n=200, p=20, b=0.0):
    cfg = ScenarioConfig(n=n, p=p, q=2, s=3, nu=1.0, design="expdecay", response="linear-w",
                         b_effect=b, seed=seed)
    return draw_scenario(cfg, 0).data


def test_edge_test_fixed_tuning():
    d = small_null()
    tuning = Fixed(PenaltyParams.from_gamma(0.02, 1.0), PenaltyParams.from_gamma(0.05, 1.0))
    res = gcm_edge_test(d, LOGISTIC, IDENTITY, tuning, alpha=0.05)
    assert isinstance(res, GcmResult)
    assert 0.0 <= res.p_value <= 1.0
    assert abs(res.p_value - 2 * (1 - norm.cdf(abs(res.t_stat)))) <= 1e-9
    assert res.reject == (abs(res.t_stat) > normal_quantile(0.975))
    assert res.n_used == d.n
    assert res.fit_y_summary[1] and res.fit_w_summary[1]
    # the critical value z_{1 - alpha/2} shrinks to 0 as alpha -> 1 and grows as alpha -> 0
    assert gcm_edge_test(d, LOGISTIC, IDENTITY, tuning, alpha=0.9999).reject
    assert not gcm_edge_test(d, LOGISTIC, IDENTITY, tuning, alpha=1e-4).reject


def test_edge_test_cv_is_deterministic_and_thread_safe():
    d = small_null(seed=3)
    cfg = CvConfig(n_folds=4, n_lambda1=8, seed=11)
    a = gcm_edge_test(d, LOGISTIC, IDENTITY, cfg)
    b = gcm_edge_test(d, LOGISTIC, IDENTITY, cfg, n_jobs=2)
    assert a == b
    c = gcm_edge_test(d, LOGISTIC, IDENTITY, cfg, method=LASSO)
    assert c.t_stat != a.t_stat


def test_tuning_seeds_are_independent():
    s1, s2 = tuning_seeds(5)
    assert s1 != s2
    assert tuning_seeds(5) == (s1, s2)
    assert tuning_seeds(6) != (s1, s2)


def test_edge_test_degenerate_when_w_equals_y():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((30, 3))
    y = X @ np.array([1.0, 2.0, -1.0])
    d = Dataset(y, X, y)
    tuning = Fixed(PenaltyParams(0.0, 1.0), PenaltyParams(0.0, 1.0))
    with pytest.raises(DegenerateStatisticError):
        gcm_edge_test(d, IDENTITY, IDENTITY, tuning)


def test_edge_test_input_validation():
    d = Dataset([0.0, 1.0, 1.0], [[1.0], [2.0], [3.0]])
    tuning = Fixed(PenaltyParams(0.1, 1.0), PenaltyParams(0.1, 1.0))
    with pytest.raises(ValueError, match="w column"):
        gcm_edge_test(d, LOGISTIC, IDENTITY, tuning)
    d = Dataset([0.0, 1.0, 1.0], [[1.0], [2.0], [3.0]], [0.1, 0.2, 0.4])
    with pytest.raises(ValueError):
        gcm_edge_test(d, LOGISTIC, IDENTITY, tuning, alpha=1.0)


def test_result_csv(tmp_path):
    res = GcmResult(1.5, 0.1336, False, 0.05, 100, (1e-7, True), (1e-7, True))
    res.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines == ["t_stat,p_value,reject,alpha,n", "1.5,0.1336,false,0.05,100"]
