import numpy as np
import pytest

from epitrend.optimize import central_hessian, minimize_bfgs


def quadratic(x):
    return float((x[0] - 3.0) ** 2 + 2.0 * (x[1] + 1.0) ** 2)


def quadratic_grad(x):
    return np.array([2.0 * (x[0] - 3.0), 4.0 * (x[1] + 1.0)])


def rosenbrock(x):
    return float((1 - x[0]) ** 2 + 100.0 * (x[1] - x[0] ** 2) ** 2)


def rosenbrock_grad(x):
    return np.array([
        -2.0 * (1 - x[0]) - 400.0 * x[0] * (x[1] - x[0] ** 2),
        200.0 * (x[1] - x[0] ** 2),
    ])


def test_quadratic_bowl():
    res = minimize_bfgs(quadratic, quadratic_grad, np.zeros(2))
    assert res.converged
    assert res.x == pytest.approx([3.0, -1.0], abs=1e-6)


def test_rosenbrock_from_standard_start():
    res = minimize_bfgs(rosenbrock, rosenbrock_grad, np.array([-1.2, 1.0]),
                        max_iterations=500)
    assert res.converged
    assert res.x == pytest.approx([1.0, 1.0], abs=1e-5)


def test_iteration_cap_reported():
    res = minimize_bfgs(rosenbrock, rosenbrock_grad, np.array([-1.2, 1.0]),
                        max_iterations=3)
    assert not res.converged
    assert res.iterations == 3


def test_non_finite_start_fails_cleanly():
    res = minimize_bfgs(lambda x: float("nan"), lambda x: np.zeros(1), np.zeros(1))
    assert not res.converged
    assert res.message == "non-finite start"


def test_central_hessian_matches_analytic():
    def f(x):
        return float(x[0] ** 3 + 2.0 * x[0] * x[1] + 4.0 * x[1] ** 2)

    x = np.array([1.5, -0.5])
    hess = central_hessian(f, x)
    expected = np.array([[6.0 * x[0], 2.0], [2.0, 8.0]])
    assert hess == pytest.approx(expected, rel=1e-5)
