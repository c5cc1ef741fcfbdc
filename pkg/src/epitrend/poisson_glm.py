"""Log-polynomial Poisson regression with a log-population offset.

Fits degree-d (d in {1, 2, 3}) models

    Y_t ~ Poisson(lambda_t),   log(lambda_t) = log(N) + sum_k beta_k t^k

by iteratively reweighted least squares. The time covariate is used raw
(t = 0, 1, 2, ...), not centered or orthogonalized, so the reported
coefficients feed the derivative formulas directly; the resulting
conditioning risk at degree 3 is handled as non-convergence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .domain import CountSeries, PolyFit
from .errors import InvalidDegree, NotConverged, SeriesTooShort


@dataclass(frozen=True)
class IrlsConfig:
    """Stopping rules for the IRLS loop.

    ``divergence_cap`` bounds the linear predictor; beyond it (or on any
    non-finite working quantity) the fit is declared diverged. 700 is just
    below where exp() overflows.
    """

    max_iterations: int = 50
    relative_deviance_tolerance: float = 1e-8
    divergence_cap: float = 700.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.relative_deviance_tolerance <= 0:
            raise ValueError("relative_deviance_tolerance must be > 0")
        if self.divergence_cap <= 0:
            raise ValueError("divergence_cap must be > 0")


def design_matrix(n_obs: int, degree: int) -> np.ndarray:
    """Raw polynomial design: column k is t**k for t = 0..n_obs-1."""
    t = np.arange(n_obs, dtype=float)
    return np.vander(t, degree + 1, increasing=True)


def poisson_log_likelihood(y: np.ndarray, lam: np.ndarray) -> float:
    """sum(y*log(lam) - lam), omitting the log(y!) constant."""
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(lam), 0.0)
    return float(np.sum(term - lam))


def _deviance(y: np.ndarray, lam: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        ylogy = np.where(y > 0, y * np.log(y / lam), 0.0)
    return float(2.0 * np.sum(ylogy - (y - lam)))


def fit_poly(series: CountSeries, degree: int, config: IrlsConfig = IrlsConfig()) -> PolyFit:
    """Fit the degree-d log-polynomial model to one unit's series.

    Parameters
    ----------
    series : CountSeries
        Daily counts with the population offset.
    degree : int
        Polynomial degree, 1, 2 or 3.
    config : IrlsConfig
        Iteration cap and deviance tolerance.

    Returns
    -------
    PolyFit
        Coefficients, covariance ``(X' W X)^-1``, log-likelihood and
        convergence status. On divergence, iteration exhaustion or a
        singular weighted solve the partial state is returned with
        ``converged=False`` (callers route on the flag; see selection).

    Raises
    ------
    InvalidDegree
        If ``degree`` is not 1, 2 or 3.
    SeriesTooShort
        If the series has fewer than ``degree + 2`` observations.
    """
    if degree not in (1, 2, 3):
        raise InvalidDegree(f"degree must be 1, 2 or 3, got {degree}")
    y = np.asarray(series.counts, dtype=float)
    n = y.size
    if n < degree + 2:
        raise SeriesTooShort(
            f"unit {series.unit_id!r}: {n} observations cannot support degree {degree}"
        )

    X = design_matrix(n, degree)
    offset = np.log(float(series.population))
    nan_cov = np.full((degree + 1, degree + 1), np.nan)

    # Safe start for all-positive and sparse series alike.
    beta = np.zeros(degree + 1)
    beta[0] = np.log((y.mean() + 0.5) / series.population)

    if y.max() == 0.0:
        # All-zero data drives beta0 to -inf; the MLE does not exist.
        lam = np.exp(offset + X @ beta)
        return PolyFit(degree, beta, nan_cov, poisson_log_likelihood(y, lam),
                       converged=False, iterations=0)

    eta = offset + X @ beta
    lam = np.exp(eta)
    dev = _deviance(y, lam)
    converged = False
    iterations = 0
    score_scale = 0.0

    for iterations in range(1, config.max_iterations + 1):
        # Newton step via weighted least squares on the working response.
        z = (eta - offset) + (y - lam) / lam
        XtW = X.T * lam
        try:
            cho = scipy.linalg.cho_factor(XtW @ X, lower=True)
        except scipy.linalg.LinAlgError:
            return PolyFit(degree, beta, nan_cov, poisson_log_likelihood(y, lam),
                           converged=False, iterations=iterations)
        beta = scipy.linalg.cho_solve(cho, XtW @ z)

        eta = offset + X @ beta
        if not np.all(np.isfinite(eta)) or np.abs(eta).max() > config.divergence_cap:
            return PolyFit(degree, beta, nan_cov, -np.inf,
                           converged=False, iterations=iterations)
        lam = np.exp(eta)
        new_dev = _deviance(y, lam)
        if not np.isfinite(new_dev):
            return PolyFit(degree, beta, nan_cov, poisson_log_likelihood(y, lam),
                           converged=False, iterations=iterations)

        score = X.T @ (y - lam)
        score_scale = 1e-6 * lam.sum()
        dev_settled = abs(new_dev - dev) / (abs(new_dev) + 0.1) < config.relative_deviance_tolerance
        dev = new_dev
        if dev_settled and np.abs(score).max() <= score_scale:
            converged = True
            break

    ll = poisson_log_likelihood(y, lam)
    if not converged:
        return PolyFit(degree, beta, nan_cov, ll, converged=False, iterations=iterations)

    try:
        cho = scipy.linalg.cho_factor((X.T * lam) @ X, lower=True)
        cov = scipy.linalg.cho_solve(cho, np.eye(degree + 1))
    except scipy.linalg.LinAlgError:
        return PolyFit(degree, beta, nan_cov, ll, converged=False, iterations=iterations)
    cov = (cov + cov.T) / 2.0
    return PolyFit(degree, beta, cov, ll, converged=True, iterations=iterations)


def linear_predictor(fit: PolyFit, t) -> np.ndarray:
    """Polynomial part of the log rate at time t (offset excluded)."""
    return np.polynomial.polynomial.polyval(t, fit.beta)


def predict(fit: PolyFit, series: CountSeries, t) -> float:
    """Predicted count N * exp(polynomial at t); strictly positive.

    Raises NotConverged when called on a failed fit.
    """
    if not fit.converged:
        raise NotConverged("predict requires a converged fit")
    return series.population * np.exp(linear_predictor(fit, t))
