import math

import numpy as np
import pytest
from scipy.special import expit

from epitrend import LogisticFit, OptimizerConfig, ResponseKind, fit_logistic, inflection
from epitrend.errors import DegenerateSlope, NotConverged, NotCumulative, SeriesTooShort
from epitrend.logistic_model import Z95, hazard, log_likelihood, logistic_derivatives

from helpers import (
    finite_difference_slope_curvature,
    make_series,
    oracle_logistic_max_ll,
    simulate_logistic_series,
)


def _stub_fit(gamma=0.0, beta0=-5.0, beta1=0.25, cov=None, converged=True,
              flex=None, ci=None):
    if cov is None:
        cov = np.diag([1.0, 0.04, 0.0001])
    if flex is None:
        flex = -beta0 / beta1 if beta1 != 0 else np.nan
    if ci is None:
        ci = (flex - 5.0, flex + 5.0) if math.isfinite(flex) else (np.nan, np.nan)
    return LogisticFit(gamma, beta0, beta1, cov, -100.0, converged, 25, flex, ci)


class TestFitLogistic:
    def test_noiseless_recovery_within_one_percent(self, rng):
        series = simulate_logistic_series(rng, 10**7, 0.01, -5.0, 0.25, 60, noiseless=True)
        fit = fit_logistic(series)
        assert fit.converged
        assert fit.plateau == pytest.approx(0.01, rel=0.01)
        assert fit.beta0 == pytest.approx(-5.0, rel=0.01)
        assert fit.beta1 == pytest.approx(0.25, rel=0.01)

    def test_log_likelihood_matches_generic_optimizer(self, rng):
        series = simulate_logistic_series(rng, 10**7, 0.01, -5.0, 0.25, 60)
        fit = fit_logistic(series)
        assert fit.converged
        truth = (math.log(0.01 / 0.99), -5.0, 0.25)
        oracle = oracle_logistic_max_ll(series.counts, series.population,
                                        [truth, (fit.gamma, fit.beta0, fit.beta1)])
        assert fit.log_likelihood == pytest.approx(oracle, abs=1e-6)

    def test_gradient_small_at_reported_optimum(self, rng):
        series = simulate_logistic_series(rng, 10**6, 0.02, -4.0, 0.2, 50)
        fit = fit_logistic(series)
        assert fit.converged
        t = np.arange(len(series.counts), dtype=float)
        y = np.asarray(series.counts, dtype=float)
        theta = np.array([fit.gamma, fit.beta0, fit.beta1])
        step = 1e-6
        grad = np.empty(3)
        for i in range(3):
            delta = np.zeros(3)
            delta[i] = step * max(1.0, abs(theta[i]))
            grad[i] = (log_likelihood(theta + delta, t, y, series.population)
                       - log_likelihood(theta - delta, t, y, series.population)) / (2 * delta[i])
        assert np.linalg.norm(grad) <= 1e-6 * (1.0 + abs(fit.log_likelihood)) + 1e-4

    def test_unidentified_plateau_handled(self, rng):
        # Pure exponential growth: the plateau is not identified yet. Either
        # non-convergence or a flex interval past the observed range is fine;
        # the selection guard absorbs both.
        t = np.arange(20, dtype=float)
        y = rng.poisson(10**6 * np.exp(-11.0 + 0.2 * t))
        series = make_series(y, population=10**6)
        fit = fit_logistic(series)
        if fit.converged:
            assert not (fit.flex_ci[1] < series.last_index - 7)

    def test_not_cumulative_rejected(self):
        series = make_series([5, 9, 14, 22, 30], response=ResponseKind.CURRENT_ICU)
        with pytest.raises(NotCumulative):
            fit_logistic(series)

    def test_short_series_rejected(self):
        with pytest.raises(SeriesTooShort):
            fit_logistic(make_series([10, 12, 15, 20]))

    def test_plateau_equals_expit_gamma(self, rng):
        series = simulate_logistic_series(rng, 10**7, 0.01, -5.0, 0.25, 60)
        fit = fit_logistic(series)
        assert fit.plateau == expit(fit.gamma)

    def test_restarts_are_reproducible(self, rng):
        series = simulate_logistic_series(rng, 10**7, 0.01, -5.0, 0.25, 60)
        config = OptimizerConfig(seed=7)
        a = fit_logistic(series, config)
        b = fit_logistic(series, config)
        assert a.gamma == b.gamma and a.beta0 == b.beta0 and a.beta1 == b.beta1


class TestInflection:
    def test_flex_time_ratio(self):
        flex, _ = inflection(_stub_fit())
        assert flex == pytest.approx(20.0, rel=1e-12)

    def test_delta_method_interval(self):
        # Var = (-1/b1)^2*0.04 + (b0/b1^2)^2*0.0001 = 16*0.04 + 6400*0.0001 = 1.28
        flex, (lo, hi) = inflection(_stub_fit())
        assert flex == 20.0
        assert hi - flex == pytest.approx(Z95 * math.sqrt(1.28), rel=1e-12)
        assert lo == pytest.approx(17.7826, abs=1e-3)
        assert hi == pytest.approx(22.2174, abs=1e-3)

    def test_requires_convergence(self):
        bad = _stub_fit(converged=False, cov=np.full((3, 3), np.nan),
                        flex=np.nan, ci=(np.nan, np.nan))
        with pytest.raises(NotConverged):
            inflection(bad)

    def test_zero_slope_rejected(self):
        flat = _stub_fit(beta1=0.0)
        with pytest.raises(DegenerateSlope):
            inflection(flat)


class TestLogisticDerivatives:
    def test_curvature_vanishes_at_flex(self):
        fit = _stub_fit()
        slope, curvature = logistic_derivatives(fit, 20.0)
        assert curvature == pytest.approx(0.0, abs=1e-15)
        assert slope == pytest.approx(fit.plateau * 0.25 / 4.0, rel=1e-12)

    def test_formula_value_at_zero(self):
        # K*b1*e^eta/(1+e^eta)^2 at eta = -5 with K = 0.01, b1 = 0.25.
        fit = _stub_fit(gamma=math.log(0.01 / 0.99))
        slope, _ = logistic_derivatives(fit, 0.0)
        expected = 0.01 * 0.25 * math.exp(-5) / (1 + math.exp(-5)) ** 2
        assert expected == pytest.approx(1.66201e-5, rel=1e-5)
        assert slope == pytest.approx(expected, rel=1e-12)

    def test_matches_finite_differences(self, rng):
        checked = 0
        while checked < 20:
            gamma = rng.uniform(-6.0, 1.0)
            beta0 = rng.uniform(-8.0, -1.0)
            beta1 = rng.uniform(0.05, 0.6)
            t = rng.uniform(0.0, 60.0)
            eta = beta0 + beta1 * t
            s = expit(eta)
            # The difference quotient itself degenerates in saturated tails
            # and where the curvature crosses zero; sample clear of both.
            if abs(eta) > 8.0 or abs(1.0 - 2.0 * s) < 0.05:
                continue
            fit = _stub_fit(gamma=gamma, beta0=beta0, beta1=beta1)
            slope, curvature = logistic_derivatives(fit, t)
            fd_slope, fd_curv = finite_difference_slope_curvature(
                lambda u: hazard(gamma, beta0, beta1, u), t, step=1e-2 / beta1)
            assert slope == pytest.approx(fd_slope, rel=1e-6)
            assert curvature == pytest.approx(fd_curv, rel=1e-6)
            checked += 1

    def test_hazard_bounded_and_monotone(self, rng):
        for _ in range(20):
            gamma = rng.uniform(-6.0, 2.0)
            beta0 = rng.uniform(-8.0, 2.0)
            beta1 = rng.choice([-1.0, 1.0]) * rng.uniform(0.01, 0.6)
            # Stay inside the float range where expit has not saturated.
            t = np.linspace(-25.0, 25.0, 201) / abs(beta1) - beta0 / beta1
            h = hazard(gamma, beta0, beta1, t)
            k = expit(gamma)
            assert np.all(h > 0.0) and np.all(h < k)
            diffs = np.diff(h)
            assert np.all(diffs > 0) if beta1 > 0 else np.all(diffs < 0)

    def test_curvature_sign_flips_at_flex(self):
        fit = _stub_fit()
        flex = 20.0
        for t in np.linspace(flex - 15.0, flex - 0.5, 10):
            assert logistic_derivatives(fit, t)[1] > 0
        for t in np.linspace(flex + 0.5, flex + 15.0, 10):
            assert logistic_derivatives(fit, t)[1] < 0

    def test_requires_convergence(self):
        bad = _stub_fit(converged=False, cov=np.full((3, 3), np.nan),
                        flex=np.nan, ci=(np.nan, np.nan))
        with pytest.raises(NotConverged):
            logistic_derivatives(bad, 0.0)
