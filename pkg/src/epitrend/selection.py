"""Automatic per-unit model selection.

The cascade: a low-prevalence gate, the three nested polynomial fits with
an eight-way convergence case analysis (Wald tests between models that
differ by one term, a likelihood-ratio test for the {1, 3} pair, backward
elimination from the cubic when all three converge), and, for cumulative
series showing a downward trend at the last day, a logistic takeover
guarded by the inflection-interval rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

from scipy.stats import chi2

from . import calculus
from .domain import CountSeries, PolyFit, SelectionOutcome, TrailRecord, Verdict
from .errors import SeriesTooShort, ZeroVariance
from .logistic_model import OptimizerConfig, fit_logistic
from .poisson_glm import IrlsConfig, fit_poly

_DEGREES = (1, 2, 3)


@dataclass(frozen=True)
class SelectionConfig:
    """Thresholds of the selection cascade, all exposed as CLI flags."""

    p_cutoff: float = 0.05
    low_prevalence_threshold: float = 0.00005
    flex_guard_days: int = 7
    start_threshold: int = 10
    irls: IrlsConfig = IrlsConfig()
    optimizer: OptimizerConfig = OptimizerConfig()

    def __post_init__(self):
        if not (0.0 < self.p_cutoff < 1.0):
            raise ValueError("p_cutoff must lie strictly between 0 and 1")
        if self.low_prevalence_threshold <= 0:
            raise ValueError("low_prevalence_threshold must be positive")
        if self.flex_guard_days <= 0:
            raise ValueError("flex_guard_days must be positive")
        if self.start_threshold <= 0:
            raise ValueError("start_threshold must be positive")


def wald_test(larger: PolyFit) -> tuple[float, float]:
    """Wald z and two-sided p for the larger model's top coefficient.

    z = beta_d / sqrt(cov_dd); p = 2 * (1 - Phi(|z|)). Raises ZeroVariance
    when the coefficient variance is not positive.
    """
    d = larger.degree
    var = float(larger.covariance[d, d])
    if not (var > 0.0) or not math.isfinite(var):
        raise ZeroVariance(f"variance of the degree-{d} coefficient is {var}")
    z = float(larger.beta[d]) / math.sqrt(var)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return z, p


def lr_test(ll_small: float, ll_large: float, df: int) -> tuple[float, float]:
    """Likelihood-ratio statistic and upper-tail chi-square p-value.

    A negative statistic (possible under non-convergence noise) is clamped
    to zero, giving p = 1.
    """
    if df < 1:
        raise ValueError("df must be >= 1")
    stat = max(0.0, 2.0 * (ll_large - ll_small))
    return stat, float(chi2.sf(stat, df))


def _wald_record(fit: PolyFit, p_cutoff: float,
                 trail: list[TrailRecord]) -> Optional[bool]:
    """Run the Wald test on ``fit``'s top term; None when it cannot be run."""
    d = fit.degree
    try:
        z, p = wald_test(fit)
    except ZeroVariance:
        trail.append(TrailRecord(f"wald_degree{d}", "test",
                                 note="zero variance, treated as not significant"))
        return None
    trail.append(TrailRecord(f"wald_degree{d}", "test", statistic=z,
                             df_or_se=math.sqrt(float(fit.covariance[d, d])), p_value=p))
    return p < p_cutoff


def resolve_cases(fits: Mapping[int, PolyFit],
                  config: SelectionConfig) -> tuple[Optional[PolyFit], list[TrailRecord]]:
    """Pick a polynomial from the convergence triple; None if none converged.

    Exposed separately from :func:`select` so the eight-way case logic can
    be exercised with synthetic fits.
    """
    trail: list[TrailRecord] = []
    converged = [d for d in _DEGREES if fits[d].converged]

    if not converged:
        return None, trail
    if len(converged) == 1:
        return fits[converged[0]], trail

    if len(converged) == 2:
        small, large = converged
        if large - small == 1:
            significant = _wald_record(fits[large], config.p_cutoff, trail)
            return fits[large] if significant else fits[small], trail
        # degrees 1 and 3: two extra parameters
        stat, p = lr_test(fits[1].log_likelihood, fits[3].log_likelihood, df=2)
        note = "negative statistic clamped" if fits[3].log_likelihood < fits[1].log_likelihood else ""
        trail.append(TrailRecord("lrt_degree1_vs_degree3", "test", statistic=stat,
                                 df_or_se=2, p_value=p, note=note))
        return fits[3] if p < config.p_cutoff else fits[1], trail

    # All three converged: backward elimination from the cubic.
    if _wald_record(fits[3], config.p_cutoff, trail):
        return fits[3], trail
    if _wald_record(fits[2], config.p_cutoff, trail):
        return fits[2], trail
    return fits[1], trail


def select(series: CountSeries, config: SelectionConfig = SelectionConfig()) -> SelectionOutcome:
    """Run the full selection cascade for one unit.

    Statistical failure modes come back as verdicts, never exceptions; the
    trail records every fit's convergence flag and every test performed.
    """
    trail: list[TrailRecord] = []

    max_rate = series.max_rate
    gated = max_rate < config.low_prevalence_threshold
    trail.append(TrailRecord("low_prevalence_gate", "gate", statistic=max_rate,
                             df_or_se=config.low_prevalence_threshold,
                             note="gated" if gated else "passed"))
    if gated:
        return SelectionOutcome(Verdict.LOW_PREVALENCE, trail)

    fits: dict[int, PolyFit] = {}
    for degree in _DEGREES:
        try:
            fit = fits[degree] = fit_poly(series, degree, config.irls)
        except SeriesTooShort:
            fit = fits[degree] = PolyFit(
                degree, [0.0] * (degree + 1),
                [[math.nan] * (degree + 1)] * (degree + 1),
                -math.inf, converged=False, iterations=0)
            trail.append(TrailRecord(f"fit_degree{degree}", "fit", note="series too short"))
            continue
        trail.append(TrailRecord(
            f"fit_degree{degree}", "fit",
            statistic=fit.log_likelihood if fit.converged else None,
            note="converged" if fit.converged else "not converged"))

    chosen, case_trail = resolve_cases(fits, config)
    trail.extend(case_trail)
    if chosen is None:
        return SelectionOutcome(Verdict.NO_CONVERGENCE, trail)

    if not series.is_cumulative:
        # Occupancy counts may legitimately fall; the logistic step is
        # skipped entirely and the polynomial stands.
        return SelectionOutcome(Verdict.POLY, trail, poly_fit=chosen)

    slope, _ = calculus.poly_derivatives(chosen, series, series.last_index, count_scale=True)
    if slope >= 0.0:
        return SelectionOutcome(Verdict.POLY, trail, poly_fit=chosen)

    # Downward trend at the current date: a logistic pattern may have been
    # reached. Retain the logistic only if its inflection interval falls
    # entirely left of the guard day.
    try:
        logistic = fit_logistic(series, config.optimizer)
    except SeriesTooShort:
        trail.append(TrailRecord("fit_logistic", "fit", note="series too short"))
        return SelectionOutcome(Verdict.NO_ADEQUATE_MODEL, trail, poly_fit=chosen)
    trail.append(TrailRecord(
        "fit_logistic", "fit",
        statistic=logistic.log_likelihood if logistic.converged else None,
        note="converged" if logistic.converged else "not converged"))
    if not logistic.converged:
        return SelectionOutcome(Verdict.NO_ADEQUATE_MODEL, trail, poly_fit=chosen)

    guard_day = series.last_index - config.flex_guard_days
    passed = logistic.flex_ci[1] < guard_day
    trail.append(TrailRecord("flex_guard", "guard", statistic=logistic.flex_ci[1],
                             df_or_se=guard_day, note="passed" if passed else "failed"))
    if passed:
        return SelectionOutcome(Verdict.LOGISTIC, trail, poly_fit=chosen, logistic_fit=logistic)
    return SelectionOutcome(Verdict.NO_ADEQUATE_MODEL, trail, poly_fit=chosen)
