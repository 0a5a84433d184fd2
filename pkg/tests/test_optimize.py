import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings
from hypothesis import strategies as st

from flyqc.optimize import (OptimizationError, OptimizerConfig, finite_difference_gradient,
                            minimize, projected_gradient, strong_wolfe, two_loop)


def test_rosenbrock_converges():
    x0 = np.array([-1.2, 1.0, -0.5, 0.8])
    r = minimize(scipy.optimize.rosen, scipy.optimize.rosen_der, x0,
                 config=OptimizerConfig(max_iters=2000, grad_tol=1e-8, objective_tol=0))
    assert r.reason == "grad_tol"
    assert np.allclose(r.x, 1, atol=1e-6)
    assert r.trace[-1] == r.fun and np.all(np.diff(r.trace) <= 0)


def test_bounded_quadratic_lands_on_bound():
    c = np.array([2.0, -3.0, 0.5])
    f = lambda x: 0.5 * np.sum((x - c) ** 2)  # noqa: E731
    g = lambda x: x - c  # noqa: E731
    r = minimize(f, g, np.zeros(3), (np.full(3, -1.0), np.full(3, 1.0)),
                 OptimizerConfig(grad_tol=1e-10))
    assert np.allclose(r.x, [1.0, -1.0, 0.5], atol=1e-8)


def test_x0_outside_bounds_rejected():
    with pytest.raises(ValueError):
        minimize(lambda x: 0.0, lambda x: x, np.array([2.0]), (np.array([0.0]), np.array([1.0])))


def test_non_finite_start_raises():
    with pytest.raises(OptimizationError):
        minimize(lambda x: np.nan, lambda x: x, np.zeros(2))


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(c1=0.9, c2=0.1)
    with pytest.raises(ValueError):
        OptimizerConfig(memory=-1)


def test_projected_gradient_zeroes_blocked_components():
    x = np.array([0.0, 1.0, 0.5])
    g = np.array([1.0, -1.0, 1.0])
    pg = projected_gradient(x, g, np.zeros(3), np.ones(3))
    assert np.array_equal(pg, [0.0, 0.0, 1.0])


@settings(max_examples=20)
@given(st.integers(0, 2 ** 32 - 1))
def test_two_loop_satisfies_latest_secant(seed):
    r = np.random.default_rng(seed)
    a = r.normal(size=(6, 6))
    h = a @ a.T + 6 * np.eye(6)
    pairs = []
    for _ in range(4):
        s = r.normal(size=6)
        y = h @ s
        pairs.append((s, y, 1.0 / (s @ y)))
    s, y, _ = pairs[-1]
    assert np.allclose(two_loop(y, pairs), -s)


def test_two_loop_without_memory_is_steepest_descent():
    g = np.array([1.0, -2.0])
    assert np.array_equal(two_loop(g, []), -g)


def test_strong_wolfe_conditions():
    f = lambda a: (a - 3.0) ** 2 + 0.1 * np.sin(4 * a)  # noqa: E731
    df = lambda a: 2 * (a - 3.0) + 0.4 * np.cos(4 * a)  # noqa: E731
    phi = lambda a: (f(a), df(a), a)  # noqa: E731
    f0, g0 = f(0.0), df(0.0)
    alpha, fa, _, ok = strong_wolfe(phi, f0, g0, 0.1, 1e-4, 0.9, 30)
    assert ok
    assert fa <= f0 + 1e-4 * alpha * g0
    assert abs(df(alpha)) <= 0.9 * abs(g0)


def test_finite_difference_gradient():
    f = lambda x: np.sum(np.sin(x) * x ** 2)  # noqa: E731
    x = np.linspace(-1, 1, 7)
    exact = np.cos(x) * x ** 2 + 2 * x * np.sin(x)
    assert np.allclose(finite_difference_gradient(f, x), exact, atol=1e-8)
    with pytest.raises(ValueError):
        finite_difference_gradient(f, x, h=0)


def test_minimize_is_deterministic():
    x0 = np.array([-1.0, 2.0, 0.3])
    runs = [minimize(scipy.optimize.rosen, scipy.optimize.rosen_der, x0,
                     config=OptimizerConfig(max_iters=50)) for _ in range(2)]
    assert np.array_equal(runs[0].x, runs[1].x) and runs[0].trace == runs[1].trace


def test_iteration_cap_reported():
    r = minimize(scipy.optimize.rosen, scipy.optimize.rosen_der, np.array([-1.2, 1.0]),
                 config=OptimizerConfig(max_iters=3, objective_tol=0))
    assert r.reason == "max_iters" and r.n_iters == 3 and r.n_evals >= 4
