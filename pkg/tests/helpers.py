"""Shared simulators and independent optimizer oracles for the test suite.

The oracles re-derive the likelihoods with plain numpy and maximize them
with scipy's generic optimizers, staying off the package's own fitting
paths (IRLS, in-house BFGS).
"""

from __future__ import annotations

import datetime

import numpy as np
from scipy.optimize import minimize

from epitrend import CountSeries, ResponseKind

T0 = datetime.date(2020, 3, 1)


def make_series(counts, population=10**6, response=ResponseKind.CUMULATIVE_CASES,
                unit_id="U1", unit_name="Testville", lat=45.0, lon=9.0,
                sub_threshold=False) -> CountSeries:
    return CountSeries(unit_id, unit_name, lat, lon, population, response, T0,
                       tuple(int(c) for c in counts), sub_threshold)


def simulate_poly_series(rng: np.random.Generator, degree: int, population=10**6,
                         n_days=None) -> tuple[CountSeries, np.ndarray]:
    """Poisson draws from a random log-polynomial hazard with sane count sizes."""
    if n_days is None:
        n_days = int(rng.integers(31, 61))
    t = np.arange(n_days, dtype=float)
    while True:
        beta = np.zeros(degree + 1)
        beta[0] = rng.uniform(-12.0, -9.0)
        beta[1] = rng.uniform(0.05, 0.30)
        if degree >= 2:
            beta[2] = rng.uniform(-0.006, -0.001)
        if degree >= 3:
            beta[3] = rng.uniform(-4e-5, 6e-5)
        eta = np.polynomial.polynomial.polyval(t, beta)
        lam = population * np.exp(eta)
        if 20.0 < lam.max() < 2e5 and lam.min() > 1e-3:
            break
    y = rng.poisson(lam)
    return make_series(y, population), beta


def simulate_logistic_series(rng, population, plateau, beta0, beta1, n_days,
                             noiseless=False) -> CountSeries:
    t = np.arange(n_days, dtype=float)
    h = plateau / (1.0 + np.exp(-(beta0 + beta1 * t)))
    mean = population * h
    y = np.round(mean).astype(int) if noiseless else rng.poisson(mean)
    return make_series(y, population)


# --- independent oracles ---

def oracle_poly_max_ll(counts, population, degree) -> float:
    """Generic maximization of the Poisson log-polynomial likelihood.

    Works in a scaled-time parameterization (u = t / T) for conditioning;
    the maximum log-likelihood value is parameterization-invariant.
    """
    y = np.asarray(counts, dtype=float)
    t = np.arange(y.size, dtype=float)
    span = max(t[-1], 1.0)
    X = np.vander(t / span, degree + 1, increasing=True)

    def nll(alpha):
        eta = X @ alpha
        return -(y @ eta - population * np.exp(eta).sum())

    def grad(alpha):
        lam = population * np.exp(X @ alpha)
        return -(X.T @ (y - lam))

    def hess(alpha):
        lam = population * np.exp(X @ alpha)
        return (X.T * lam) @ X

    a0 = np.zeros(degree + 1)
    a0[0] = np.log((y.mean() + 0.5) / population)
    rough = minimize(nll, a0, jac=grad, method="BFGS",
                     options={"gtol": 1e-8, "maxiter": 2000})
    polished = minimize(nll, rough.x, jac=grad, hess=hess, method="trust-exact",
                        options={"gtol": 1e-10, "maxiter": 200})
    best = min(rough.fun, polished.fun)
    return -best + y.sum() * np.log(population)


def _oracle_logistic_ll(theta, t, y, population):
    # Re-derived with raw numpy on purpose; see module docstring.
    gamma, beta0, beta1 = theta
    eta = beta0 + beta1 * t
    log_sig_eta = np.where(eta < 0, eta - np.log1p(np.exp(np.minimum(eta, 0))),
                           -np.log1p(np.exp(-np.maximum(eta, 0))))
    log_k = gamma - np.log1p(np.exp(gamma)) if gamma < 0 else -np.log1p(np.exp(-gamma))
    log_h = log_k + log_sig_eta
    return float(np.sum(y * log_h - population * np.exp(log_h)))


def oracle_logistic_max_ll(counts, population, starts) -> float:
    """Best logistic log-likelihood over generic optimizer runs from ``starts``."""
    y = np.asarray(counts, dtype=float)
    t = np.arange(y.size, dtype=float)

    def nll(theta):
        return -_oracle_logistic_ll(theta, t, y, population)

    best = np.inf
    for start in starts:
        sim = minimize(nll, np.asarray(start, dtype=float), method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-12, "maxiter": 8000,
                                "maxfev": 8000})
        best = min(best, sim.fun)
        polish = minimize(nll, sim.x, method="BFGS",
                          options={"gtol": 1e-10, "maxiter": 1000})
        if np.isfinite(polish.fun):
            best = min(best, polish.fun)
    return -best


def finite_difference_slope_curvature(f, t, step=1e-3):
    """Fourth-order central differences of a scalar function of time.

    The five-point stencils keep truncation error negligible so the step
    can be large enough to stay clear of rounding noise.
    """
    h = step
    fm2, fm1, f0, fp1, fp2 = f(t - 2 * h), f(t - h), f(t), f(t + h), f(t + 2 * h)
    slope = (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h)
    curvature = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h)
    return slope, curvature
