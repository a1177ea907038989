import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from genlava.simulate import (
    GammaDecay,
    ResponseKind,
    ScenarioConfig,
    bernoulli,
    design_sigma,
    draw_scenario,
    expdecay_sigma,
    sample_beta0,
    sample_delta,
    sample_design,
    sample_gamma,
    sample_w_and_y,
    toeplitz_sigma,
    unit_ones,
    with_b_effect,
)


def rng(seed=0):
    return np.random.default_rng(seed)


def test_toeplitz_entries():
    S = toeplitz_sigma(3)
    assert S[0, 1] == 0.9 and S[1, 2] == 0.9
    assert S[0, 2] == pytest.approx(0.81, abs=1e-15)
    np.testing.assert_array_equal(np.diag(S), 1.0)


def test_expdecay_small_cases():
    np.testing.assert_array_equal(expdecay_sigma(1), [[1.0]])
    np.testing.assert_allclose(expdecay_sigma(2), [[1.0, -0.9], [-0.9, 1.0]], atol=1e-15)


@pytest.mark.parametrize("p", [1, 2, 3, 7, 40])
def test_expdecay_matches_numerical_inverse(p):
    S0 = np.linalg.inv(toeplitz_sigma(p))
    d = 1 / np.sqrt(np.diag(S0))
    np.testing.assert_allclose(expdecay_sigma(p), S0 * d[:, None] * d[None, :], atol=1e-10)


@pytest.mark.parametrize("kind", ["toeplitz", "expdecay"])
@pytest.mark.parametrize("p", [1, 2, 5, 50, 200])
def test_sigma_is_valid_correlation(kind, p):
    S = design_sigma(kind, p)
    assert np.array_equal(S, S.T)
    assert np.max(np.abs(np.diag(S) - 1.0)) <= 1e-12
    assert np.linalg.eigvalsh(S).min() > 0


def test_sigma_rejects_empty():
    with pytest.raises(ValueError):
        toeplitz_sigma(0)
    with pytest.raises(ValueError):
        expdecay_sigma(0)


def test_gamma_zero_scale_and_determinism():
    assert np.all(sample_gamma(3, 6, 0.0, rng()) == 0)
    np.testing.assert_array_equal(sample_gamma(3, 6, 1.0, rng(4)), sample_gamma(3, 6, 1.0, rng(4)))
    assert sample_gamma(0, 6, 1.0, rng()).shape == (0, 6)
    with pytest.raises(ValueError):
        sample_gamma(-1, 6, 1.0, rng())


def test_gamma_variance_decays_over_variables():
    nu = 2.0
    G = sample_gamma(100_000, 4, nu, rng(1), decay=GammaDecay.VARIABLES)
    k = np.arange(1, 5)
    np.testing.assert_allclose(G.var(axis=0), nu**2 / k**2, rtol=0.05)


def test_gamma_variance_decays_over_factors_by_default():
    nu = 2.0
    G = sample_gamma(4, 100_000, nu, rng(2))
    j = np.arange(1, 5)
    np.testing.assert_allclose(G.var(axis=1), nu**2 / j**2, rtol=0.05)


@settings(max_examples=50, deadline=None)
@given(p=st.integers(1, 60), data=st.data())
def test_beta0_structure(p, data):
    s = data.draw(st.integers(1, p))
    beta, support = sample_beta0(p, s, rng(data.draw(st.integers(0, 10_000))))
    assert np.count_nonzero(beta) == s
    assert len(set(support.tolist())) == s
    assert set(np.abs(beta[support])) == {1.0}


def test_beta0_full_support_and_errors():
    beta, _ = sample_beta0(6, 6, rng())
    assert np.all(beta != 0)
    with pytest.raises(ValueError):
        sample_beta0(3, 4, rng())


def test_beta0_signs_are_balanced():
    g = rng(3)
    signs = np.concatenate([sample_beta0(20, 1, g)[0] for _ in range(10_000)])
    nonzero = signs[signs != 0]
    assert abs(nonzero.mean()) < 3 / np.sqrt(nonzero.size)


@pytest.mark.parametrize("q", [1, 2, 5, 20])
def test_unit_ones_norm(q):
    d = unit_ones(q)
    assert abs(np.linalg.norm(d) - 1.0) <= 1e-15
    assert np.all(d == d[0])


def test_rademacher_delta():
    d = sample_delta(50, "rademacher", rng())
    assert set(d) <= {-1.0, 1.0}


def test_design_without_confounding_is_z():
    X, U, Z = sample_design(10, toeplitz_sigma(4), np.zeros((0, 4)), rng())
    assert U.shape == (10, 0)
    np.testing.assert_array_equal(X, Z)


def test_design_covariance():
    p = 5
    Sigma = expdecay_sigma(p)
    Gamma = sample_gamma(2, p, 1.0, rng(5))
    X, _, _ = sample_design(100_000, Sigma, Gamma, rng(6))
    target = Sigma + Gamma.T @ Gamma
    emp = np.cov(X, rowvar=False)
    # 5% of each entry, floored at 5% of the diagonal scale for near-zero entries
    tol = 0.05 * np.maximum(np.abs(target), np.sqrt(np.outer(np.diag(target), np.diag(target))))
    assert np.all(np.abs(emp - target) <= tol)


def test_design_rejects_non_pd_sigma():
    with pytest.raises(np.linalg.LinAlgError):
        sample_design(3, np.ones((2, 2)) * 2 - np.eye(2) * 3, np.zeros((1, 2)), rng())
    with pytest.raises(ValueError):
        sample_design(3, np.eye(3), np.zeros((1, 2)), rng())


def test_null_class_balance():
    n = 20_000
    y = bernoulli(np.zeros(n), rng(8).random(n))
    assert abs(y.mean() - 0.5) < 3 * 0.5 / np.sqrt(n)


def test_w_is_standard_normal_without_signal():
    n = 100_000
    g = rng(9)
    X = g.standard_normal((n, 3))
    U = g.standard_normal((n, 2))
    w, y = sample_w_and_y(X, U, np.zeros(3), np.zeros(2), np.zeros(3), np.zeros(2), 0.0, g)
    assert w.var() == pytest.approx(1.0, rel=0.05)
    assert set(np.unique(y)) <= {0.0, 1.0}


def test_scenario_is_pure_function_of_config_and_rep():
    cfg = ScenarioConfig(n=50, p=8, q=2, s=2, seed=12, response="linear-w", b_effect=0.1)
    a, b = draw_scenario(cfg, 3), draw_scenario(cfg, 3)
    for name in ("Gamma", "beta0", "beta_w", "delta_w", "U", "Z"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    np.testing.assert_array_equal(a.data.X, b.data.X)
    np.testing.assert_array_equal(a.data.y, b.data.y)
    np.testing.assert_array_equal(a.data.w, b.data.w)
    c = draw_scenario(cfg, 4)
    assert not np.array_equal(a.data.X, c.data.X)


def test_b_effect_reuses_design_and_w():
    cfg = ScenarioConfig(n=200, p=6, q=2, s=2, seed=1, response=ResponseKind.LINEAR_W)
    a = draw_scenario(cfg, 0)
    b = draw_scenario(with_b_effect(cfg, 0.2), 0)
    np.testing.assert_array_equal(a.data.X, b.data.X)
    np.testing.assert_array_equal(a.data.w, b.data.w)
    assert np.mean(a.data.y != b.data.y) < 0.2


def test_response_kinds():
    for kind in ResponseKind:
        sc = draw_scenario(ScenarioConfig(n=30, p=5, q=1, s=2, response=kind))
        assert sc.data.n == 30
        assert (sc.data.w is not None) == (kind is ResponseKind.LINEAR_W)
        if kind is not ResponseKind.LINEAR:
            assert set(np.unique(sc.data.y)) <= {0.0, 1.0}


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(n=1, p=5)
    with pytest.raises(ValueError):
        ScenarioConfig(n=10, p=5, s=6)
    with pytest.raises(ValueError):
        ScenarioConfig(n=10, p=5, s=0)
    with pytest.raises(ValueError):
        ScenarioConfig(n=10, p=5, nu=-1)
    with pytest.raises(ValueError):
        ScenarioConfig(n=10, p=5, design="circulant")


def population_bias(decay, p, reps=8):
    """Median ||Cov(X)^{-1} Gamma' delta0||_2: the confounding bias of the population regression."""
    out = []
    for r in range(reps):
        sc = draw_scenario(ScenarioConfig(n=2, p=p, q=5, s=1, gamma_decay=decay), r)
        C = sc.Sigma + sc.Gamma.T @ sc.Gamma
        out.append(np.linalg.norm(np.linalg.solve(C, sc.Gamma.T @ sc.delta0)))
    return float(np.median(out))


def test_factor_decay_gives_dense_confounding():
    small, large = population_bias("factors", 50), population_bias("factors", 800)
    assert large < 0.5 * small
    # with decay over variables the bias does not shrink with p
    assert population_bias("variables", 800) > 0.8 * population_bias("variables", 50)
