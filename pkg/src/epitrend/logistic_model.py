"""Logistic-hazard Poisson model for cumulative count series.

The hazard is h(t) = K * expit(beta0 + beta1*t) with plateau
K = expit(gamma) in (0, 1). The unconstrained (gamma, beta0, beta1)
parameterization makes a generic quasi-Newton maximizer applicable; the
Poisson log-likelihood sum(Y*ln h - N*h) is maximized directly with its
analytic gradient, and the covariance comes from a central
finite-difference Hessian at the optimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit, logit

from .domain import CountSeries, LogisticFit
from .errors import DegenerateSlope, NotConverged, NotCumulative, SeriesTooShort
from .optimize import central_hessian, minimize_bfgs

# Two-sided 95% standard-normal quantile used for the flex interval.
Z95 = 1.959964

# A fit only counts as converged if ||grad l||_2 <= this times (1 + |l|).
_GRADIENT_CHECK_RTOL = 1e-6

_MIN_LENGTH = 5


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs for the quasi-Newton maximization."""

    max_iterations: int = 200
    gradient_rtol: float = 1e-8
    restarts: int = 2  # extra perturbed starts tried if the first fails
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.gradient_rtol <= 0:
            raise ValueError("gradient_rtol must be > 0")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")


def hazard(gamma: float, beta0: float, beta1: float, t) -> np.ndarray:
    """h(t) = expit(gamma) * expit(beta0 + beta1*t), in (0, K) for finite t."""
    return expit(gamma) * expit(beta0 + beta1 * np.asarray(t, dtype=float))


def log_likelihood(theta: np.ndarray, t: np.ndarray, y: np.ndarray, n_pop: float) -> float:
    """sum(y*ln h - N*h) at theta = (gamma, beta0, beta1), log(y!) omitted."""
    gamma, beta0, beta1 = theta
    eta = beta0 + beta1 * t
    log_h = log_expit(gamma) + log_expit(eta)
    h = np.exp(log_h)
    return float(np.sum(y * log_h - n_pop * h))


def _gradient(theta: np.ndarray, t: np.ndarray, y: np.ndarray, n_pop: float) -> np.ndarray:
    gamma, beta0, beta1 = theta
    s = expit(beta0 + beta1 * t)
    resid = y - n_pop * expit(gamma) * s
    one_minus_s = expit(-(beta0 + beta1 * t))
    return np.array([
        expit(-gamma) * resid.sum(),
        float(np.sum(one_minus_s * resid)),
        float(np.sum(t * one_minus_s * resid)),
    ])


def _initial_theta(t: np.ndarray, y: np.ndarray, n_pop: float) -> np.ndarray:
    # Start on the right branch: plateau guess above the data, then a
    # least-squares line through the empirical logits.
    k_init = min(0.9, 2.0 * y.max() / n_pop)
    k_init = max(k_init, 1e-8)
    frac = np.clip(y / (n_pop * k_init), 1e-6, 1.0 - 1e-6)
    emp_logit = logit(frac)
    slope, intercept = np.polyfit(t, emp_logit, 1)
    return np.array([logit(k_init), intercept, slope])


def fit_logistic(series: CountSeries, config: OptimizerConfig = OptimizerConfig()) -> LogisticFit:
    """Fit the logistic-hazard model to a cumulative series.

    Parameters
    ----------
    series : CountSeries
        Must carry a cumulative response and at least 5 observations.
    config : OptimizerConfig
        Iteration cap, gradient tolerance and restart policy. Restarts are
        seeded, so repeated runs reproduce the same fit.

    Returns
    -------
    LogisticFit
        ``converged`` is False when the optimizer hit its iteration cap,
        the gradient norm stayed above tolerance, or the finite-difference
        Hessian is not negative definite at the reported optimum; the
        partial state is still returned. ``flex_time``/``flex_ci`` are NaN
        unless converged with a nonzero slope.

    Raises
    ------
    NotCumulative
        For current-occupancy responses.
    SeriesTooShort
        With fewer than 5 observations.
    """
    if not series.is_cumulative:
        raise NotCumulative(
            f"unit {series.unit_id!r}: logistic hazard applies to cumulative responses only"
        )
    y = np.asarray(series.counts, dtype=float)
    if y.size < _MIN_LENGTH:
        raise SeriesTooShort(
            f"unit {series.unit_id!r}: logistic fit needs >= {_MIN_LENGTH} observations"
        )
    t = np.arange(y.size, dtype=float)
    n_pop = float(series.population)

    def neg_ll(theta):
        return -log_likelihood(theta, t, y, n_pop)

    def neg_grad(theta):
        return -_gradient(theta, t, y, n_pop)

    rng = np.random.default_rng(config.seed)
    theta0 = _initial_theta(t, y, n_pop)
    perturb_scale = np.array([0.5, 1.0, 0.1])

    best = None
    best_ok = False
    total_iterations = 0
    for attempt in range(config.restarts + 1):
        start = theta0 if attempt == 0 else theta0 + rng.normal(size=3) * perturb_scale
        res = minimize_bfgs(neg_ll, neg_grad, start,
                            max_iterations=config.max_iterations,
                            gradient_rtol=config.gradient_rtol)
        total_iterations += res.iterations
        ll = -res.fun
        grad_ok = (
            np.isfinite(ll)
            and np.linalg.norm(res.grad) <= _GRADIENT_CHECK_RTOL * (1.0 + abs(ll))
        )
        ok = res.converged and grad_ok
        if best is None or (ok and not best_ok) or (ok == best_ok and ll > -best.fun):
            best, best_ok = res, ok
        if ok:
            break

    theta = best.x
    ll = -best.fun
    gamma, beta0, beta1 = (float(v) for v in theta)
    nan_cov = np.full((3, 3), np.nan)

    if not best_ok:
        return LogisticFit(gamma, beta0, beta1, nan_cov, ll, converged=False,
                           iterations=total_iterations,
                           flex_time=np.nan, flex_ci=(np.nan, np.nan))

    hess = central_hessian(lambda th: log_likelihood(th, t, y, n_pop), theta)
    try:
        lower = np.linalg.cholesky(-hess)
    except np.linalg.LinAlgError:
        return LogisticFit(gamma, beta0, beta1, nan_cov, ll, converged=False,
                           iterations=total_iterations,
                           flex_time=np.nan, flex_ci=(np.nan, np.nan))
    identity = np.eye(3)
    inv_lower = np.linalg.solve(lower, identity)
    cov = inv_lower.T @ inv_lower
    cov = (cov + cov.T) / 2.0

    if beta1 != 0.0:
        flex, ci = _flex_interval(beta0, beta1, cov)
    else:
        flex, ci = np.nan, (np.nan, np.nan)
    return LogisticFit(gamma, beta0, beta1, cov, ll, converged=True,
                       iterations=total_iterations, flex_time=flex, flex_ci=ci)


def _flex_interval(beta0: float, beta1: float, cov: np.ndarray) -> tuple[float, tuple[float, float]]:
    flex = -beta0 / beta1
    grad = np.array([0.0, -1.0 / beta1, beta0 / beta1 ** 2])
    var = float(grad @ cov @ grad)
    half = Z95 * np.sqrt(max(var, 0.0))
    return flex, (flex - half, flex + half)


def inflection(fit: LogisticFit) -> tuple[float, tuple[float, float]]:
    """Inflection point -beta0/beta1 with its 95% delta-method interval.

    The variance is grad' Sigma grad with grad = (0, -1/beta1, beta0/beta1^2)
    over (gamma, beta0, beta1) and Sigma the fit covariance.

    Raises NotConverged / DegenerateSlope on unusable fits.
    """
    if not fit.converged:
        raise NotConverged("inflection requires a converged fit")
    if fit.beta1 == 0.0:
        raise DegenerateSlope("inflection undefined for beta1 = 0")
    return _flex_interval(fit.beta0, fit.beta1, fit.covariance)


def logistic_derivatives(fit: LogisticFit, t) -> tuple[float, float]:
    """Hazard-scale slope and curvature of the fitted logistic at time t.

    slope     = K*b1*e^eta/(1+e^eta)^2        = K*b1*s*(1-s)
    curvature = K*b1^2*e^eta*(1-e^eta)/(1+e^eta)^3 = K*b1^2*s*(1-s)*(1-2s)

    with s = expit(eta), eta = beta0 + beta1*t. Multiply by N for the
    count scale.
    """
    if not fit.converged:
        raise NotConverged("logistic_derivatives requires a converged fit")
    k = fit.plateau
    eta = fit.beta0 + fit.beta1 * t
    s = expit(eta)
    comp = expit(-eta)  # 1 - s, accurate deep into the tails
    slope = k * fit.beta1 * s * comp
    curvature = k * fit.beta1 ** 2 * s * comp * (comp - s)
    return float(slope), float(curvature)
