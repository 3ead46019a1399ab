import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agglearn.bagging import AggregateDataset, BagAssignment, assign_bags
from agglearn.errors import DomainError, SingularSystem
from agglearn.estimator import (
    conditional_bias_variance,
    expand_bag_means,
    fit_bag_level,
    fit_instance_level,
    fit_interpolating,
    hat_matrix,
    interpolating_gradient,
    interpolating_objective,
    normal_equations,
)
from oracles import dense_hat_matrix, fraction_fit


def make_problem(rng, n=60, d=5, k=3, sigma=0.5):
    X = rng.normal(size=(n, d))
    theta0 = rng.normal(size=d)
    y = X @ theta0 + sigma * rng.normal(size=n)
    a = assign_bags(n, k, rng)
    return AggregateDataset.from_responses(X, y, a), theta0


def lstsq(A, b):
    return np.linalg.lstsq(A, b, rcond=None)[0]


def test_small_example_matches_exact_rational_oracle():
    X = [[1, 0], [0, 1], [1, 1], [1, -1]]
    bags = [[0, 1], [2, 3]]
    exact = fraction_fit(X, bags, [1, Fraction(1, 2)], Fraction(1, 2))
    agg = AggregateDataset(np.array(X, float), np.array([1.0, 0.5]), BagAssignment.from_bags(bags))
    theta = fit_interpolating(agg, 0.5).theta_hat
    assert np.allclose(theta, [float(v) for v in exact], rtol=0, atol=1e-14)


def test_singleton_bags_give_least_squares(rng):
    X = rng.normal(size=(30, 4))
    y = rng.normal(size=30)
    a = assign_bags(30, 1, rng)
    agg = AggregateDataset.from_responses(X, y, a)
    ols = lstsq(X, y)
    for rho in (0.0, 0.3, 1.0):
        assert np.allclose(fit_interpolating(agg, rho).theta_hat, ols, atol=1e-12)


def test_instance_level_is_least_squares_on_expanded_means(rng):
    agg, _ = make_problem(rng)
    expanded = expand_bag_means(agg.bag_means, agg.assignment)
    target = lstsq(agg.features, expanded)
    assert np.allclose(fit_instance_level(agg).theta_hat, target, atol=1e-12)
    assert np.array_equal(fit_instance_level(agg).theta_hat, fit_interpolating(agg, 1.0).theta_hat)


def test_bag_level_is_least_squares_on_bag_means(rng):
    agg, _ = make_problem(rng, n=90, d=4, k=3)
    xbar = agg.features[agg.assignment.bags].mean(axis=1)
    assert np.allclose(fit_bag_level(agg).theta_hat, lstsq(xbar, agg.bag_means), atol=1e-12)


def test_bag_level_underdetermined(rng):
    agg, _ = make_problem(rng, n=12, d=5, k=3)  # 4 bags, 5 features
    with pytest.raises(SingularSystem):
        fit_bag_level(agg)
    with pytest.raises(SingularSystem):
        fit_interpolating(agg, 0.0)
    fit_interpolating(agg, 0.2)  # instance term restores full rank


def test_rank_deficient_features_rejected(rng):
    X = rng.normal(size=(20, 3))
    X[:, 2] = X[:, 0] + X[:, 1]
    agg = AggregateDataset(X, rng.normal(size=10), assign_bags(20, 2, rng))
    with pytest.raises(SingularSystem):
        fit_interpolating(agg, 0.5)


def test_rho_domain(rng):
    agg, _ = make_problem(rng)
    with pytest.raises(DomainError):
        fit_interpolating(agg, 1.01)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_gram_path_matches_dense_hat_matrix(seed, rho):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 5))
    m = int(rng.integers(4, 64 // k + 1))
    d = int(rng.integers(1, 4))
    X = rng.normal(size=(m * k, d))
    y = rng.normal(size=m * k)
    a = assign_bags(m * k, k, rng)
    agg = AggregateDataset.from_responses(X, y, a)
    theta = fit_interpolating(agg, rho).theta_hat
    B = dense_hat_matrix(X, a, rho)
    assert np.allclose(theta, B @ y, rtol=1e-8, atol=1e-8)
    assert np.allclose(hat_matrix(X, a, rho), B, rtol=1e-8, atol=1e-8)


def test_normal_equation_residual_and_json(rng):
    agg, _ = make_problem(rng, n=120, d=8, k=4)
    G, b = normal_equations(agg, 0.37)
    fit = fit_interpolating(agg, 0.37)
    assert np.linalg.norm(G @ fit.theta_hat - b) <= 1e-8 * np.linalg.norm(b)
    assert np.all(np.isfinite(fit.theta_hat))
    assert fit.gram_condition_estimate >= 1.0
    obj = json.loads(fit.to_json())
    assert obj["rho"] == 0.37 and np.allclose(obj["theta"], fit.theta_hat)


def test_fit_is_a_local_minimum(rng):
    agg, _ = make_problem(rng)
    rho = 0.4
    theta = fit_interpolating(agg, rho).theta_hat
    best = interpolating_objective(theta, agg, rho)
    for _ in range(100):
        delta = rng.normal(size=theta.size)
        delta *= 1e-3 / np.linalg.norm(delta)
        assert best <= interpolating_objective(theta + delta, agg, rho)


def test_gradient_matches_finite_differences(rng):
    agg, _ = make_problem(rng)
    for rho in (0.0, 0.25, 1.0):
        theta = rng.normal(size=agg.features.shape[1])
        grad = interpolating_gradient(theta, agg, rho)
        h = 1e-5
        fd = np.array(
            [
                (interpolating_objective(theta + h * e, agg, rho) - interpolating_objective(theta - h * e, agg, rho)) / (2 * h)
                for e in np.eye(theta.size)
            ]
        )
        assert np.linalg.norm(grad - fd) <= 1e-5 * np.linalg.norm(grad)


def test_objective_agrees_with_loss_module(rng):
    from agglearn.losses import interpolating_loss

    agg, _ = make_problem(rng)
    theta = rng.normal(size=agg.features.shape[1])
    f = agg.features @ theta
    assert interpolating_objective(theta, agg, 0.6) == pytest.approx(interpolating_loss(f, agg, 0.6), rel=1e-12)


# conditional bias and variance ---------------------------------------------


def test_unbiased_cases(rng):
    X = rng.normal(size=(40, 3))
    theta0 = rng.normal(size=3)
    assert conditional_bias_variance(X, assign_bags(40, 1, rng), 0.6, theta0, 1.0).bias_sq == 0.0
    cr = conditional_bias_variance(X, assign_bags(40, 4, rng), 0.0, theta0, 1.0)
    assert cr.bias_sq == 0.0
    assert cr.risk == cr.bias_sq + cr.variance


def test_conditional_formulas_match_dense_oracle(rng):
    X = rng.normal(size=(48, 4))
    a = assign_bags(48, 3, rng)
    theta0 = rng.normal(size=4)
    rho, sigma = 0.35, 0.8
    B = dense_hat_matrix(X, a, rho)
    cr = conditional_bias_variance(X, a, rho, theta0, sigma)
    bias = B @ X @ theta0 - theta0
    assert cr.bias_sq == pytest.approx(bias @ bias, rel=1e-10)
    assert cr.variance == pytest.approx(sigma**2 * np.sum(B**2), rel=1e-10)


def test_variance_and_risk_match_noise_resampling(rng):
    n, d, k, rho, sigma, draws = 200, 20, 2, 0.5, 1.0, 20_000
    X = rng.normal(size=(n, d))
    theta0 = rng.normal(size=d)
    theta0 /= np.linalg.norm(theta0)
    a = assign_bags(n, k, rng)
    cr = conditional_bias_variance(X, a, rho, theta0, sigma)

    # independent path: refit from fresh bag means for every noise draw
    mean_fit = fit_interpolating(AggregateDataset.from_responses(X, X @ theta0, a), rho).theta_hat
    dev = np.empty(draws)
    err = np.empty(draws)
    for i in range(draws):
        y = X @ theta0 + sigma * rng.normal(size=n)
        theta = fit_interpolating(AggregateDataset.from_responses(X, y, a), rho).theta_hat
        dev[i] = np.sum((theta - mean_fit) ** 2)
        err[i] = np.sum((theta - theta0) ** 2)
    se_var = dev.std(ddof=1) / np.sqrt(draws)
    se_risk = err.std(ddof=1) / np.sqrt(draws)
    assert abs(dev.mean() - cr.variance) <= 3 * se_var
    assert abs(err.mean() - cr.risk) <= 3 * se_risk
    assert np.sum((mean_fit - theta0) ** 2) == pytest.approx(cr.bias_sq, rel=1e-9)
