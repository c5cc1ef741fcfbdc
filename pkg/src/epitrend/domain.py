"""Core immutable data types shared by every other module.

All types validate their invariants at construction and are safe to share
between concurrent workers.
"""

from __future__ import annotations

import datetime
import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidSeries


class ResponseKind(enum.Enum):
    """Which daily count a series carries."""

    CUMULATIVE_CASES = "cases"
    CUMULATIVE_DEATHS = "deaths"
    CURRENT_ICU = "icu"
    CURRENT_HOSPITALIZED = "hospitalized"

    @property
    def is_cumulative(self) -> bool:
        return self in (ResponseKind.CUMULATIVE_CASES, ResponseKind.CUMULATIVE_DEATHS)


@dataclass(frozen=True, eq=False)
class CountSeries:
    """One geographic unit's aligned daily counts.

    ``counts[t]`` is the observation at day ``t`` counted from ``t0_date``;
    time indices are consecutive by construction (missing upstream days are
    an ingestion error, never silently skipped). ``population`` is the
    constant exposed population used as the model offset.
    """

    unit_id: str
    unit_name: str
    latitude: float
    longitude: float
    population: int
    response_kind: ResponseKind
    t0_date: datetime.date
    counts: tuple[int, ...]
    sub_threshold: bool = False  # never reached the start threshold (see ingestion)

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if self.population < 1:
            raise InvalidSeries(self.unit_id, f"population must be >= 1, got {self.population}")
        if len(self.counts) == 0:
            raise InvalidSeries(self.unit_id, "empty count series")
        for t, c in enumerate(self.counts):
            if c < 0:
                raise InvalidSeries(self.unit_id, f"negative count {c} at t={t}")

    @property
    def is_cumulative(self) -> bool:
        return self.response_kind.is_cumulative

    @property
    def last_index(self) -> int:
        """T, the index of the most recent observation."""
        return len(self.counts) - 1

    @property
    def last_date(self) -> datetime.date:
        return self.t0_date + datetime.timedelta(days=self.last_index)

    @property
    def decrease_days(self) -> tuple[int, ...]:
        """Indices where a cumulative count dropped below the previous day.

        Upstream corrections can lower cumulative counts; such days are
        recorded here rather than rejected.
        """
        if not self.is_cumulative:
            return ()
        return tuple(
            t for t in range(1, len(self.counts)) if self.counts[t] < self.counts[t - 1]
        )

    @property
    def max_rate(self) -> float:
        """Largest observed count over the population."""
        return max(self.counts) / self.population


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class PolyFit:
    """Estimated degree-d log-polynomial Poisson regression.

    ``beta`` lives on the log-hazard scale, with the log-population offset
    already separated out. ``log_likelihood`` omits the data-only
    log-factorial constant; all comparisons in this package are between
    models on the same data, so the constant cancels.
    """

    degree: int
    beta: np.ndarray
    covariance: np.ndarray
    log_likelihood: float
    converged: bool
    iterations: int

    def __post_init__(self):
        beta = _freeze(np.atleast_1d(self.beta))
        cov = _freeze(np.atleast_2d(self.covariance))
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "covariance", cov)
        k = self.degree + 1
        if beta.shape != (k,):
            raise ValueError(f"beta must have {k} entries for degree {self.degree}, got {beta.shape}")
        if cov.shape != (k, k):
            raise ValueError(f"covariance must be {k}x{k}, got {cov.shape}")
        if np.all(np.isfinite(cov)):
            if not np.allclose(cov, cov.T, rtol=1e-8, atol=1e-12):
                raise ValueError("covariance must be symmetric")
            if self.converged:
                eigs = np.linalg.eigvalsh(cov)
                if eigs.min() < -1e-8 * max(1.0, eigs.max()):
                    raise ValueError("covariance of a converged fit must be positive semi-definite")


@dataclass(frozen=True, eq=False)
class LogisticFit:
    """Estimated logistic-hazard model.

    Parameterized by the unconstrained ``gamma``; the hazard plateau is
    ``K = expit(gamma)``, strictly inside (0, 1). ``flex_time`` is the
    inflection point -beta0/beta1 with its 95% delta-method interval;
    both are NaN when the fit did not converge or beta1 is zero.
    """

    gamma: float
    beta0: float
    beta1: float
    covariance: np.ndarray
    log_likelihood: float
    converged: bool
    iterations: int
    flex_time: float
    flex_ci: tuple[float, float]

    def __post_init__(self):
        cov = _freeze(np.atleast_2d(self.covariance))
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "flex_ci", (float(self.flex_ci[0]), float(self.flex_ci[1])))
        if cov.shape != (3, 3):
            raise ValueError(f"covariance must be 3x3, got {cov.shape}")
        if self.converged and self.beta1 != 0.0 and math.isfinite(self.flex_time):
            lo, hi = self.flex_ci
            if not (lo <= self.flex_time <= hi):
                raise ValueError("flex_ci must bracket flex_time")

    @property
    def plateau(self) -> float:
        """K, the upper asymptote of the hazard; in (0, 1) by construction."""
        return 1.0 / (1.0 + math.exp(-self.gamma))


class Verdict(enum.Enum):
    POLY = "poly"
    LOGISTIC = "logistic"
    LOW_PREVALENCE = "low_prevalence"
    NO_CONVERGENCE = "no_convergence"
    NO_ADEQUATE_MODEL = "no_adequate_model"

    @property
    def is_terminal(self) -> bool:
        """True when no model is attached to the outcome."""
        return self not in (Verdict.POLY, Verdict.LOGISTIC)


# Display strings used on plots and in reports.
VERDICT_MESSAGES = {
    Verdict.LOW_PREVALENCE: "Prevalence too low",
    Verdict.NO_CONVERGENCE: "No model converged",
    Verdict.NO_ADEQUATE_MODEL: "No adequate model could be found",
}


@dataclass(frozen=True)
class TrailRecord:
    """One fitting, testing or gating event in a selection run."""

    name: str
    kind: str  # "gate" | "fit" | "test" | "guard"
    statistic: Optional[float] = None
    df_or_se: Optional[float] = None
    p_value: Optional[float] = None
    note: str = ""


@dataclass(frozen=True, eq=False)
class SelectionOutcome:
    """Per-unit verdict of the automatic model selection cascade.

    ``poly_fit`` is the selected polynomial for POLY verdicts; for LOGISTIC
    verdicts it is retained as the polynomial whose downward trend triggered
    the logistic takeover. ``trail`` documents every fit and test performed,
    in order.
    """

    verdict: Verdict
    trail: tuple[TrailRecord, ...]
    poly_fit: Optional[PolyFit] = None
    logistic_fit: Optional[LogisticFit] = None

    def __post_init__(self):
        object.__setattr__(self, "trail", tuple(self.trail))
        if self.verdict is Verdict.POLY:
            if self.poly_fit is None or not self.poly_fit.converged:
                raise ValueError("POLY verdict requires a converged polynomial fit")
        if self.verdict is Verdict.LOGISTIC:
            if self.logistic_fit is None or not self.logistic_fit.converged:
                raise ValueError("LOGISTIC verdict requires a converged logistic fit")

    @property
    def message(self) -> str:
        """Terminal-verdict display message, empty for model verdicts."""
        return VERDICT_MESSAGES.get(self.verdict, "")


@dataclass(frozen=True, eq=False)
class UnitReport:
    """Everything reporting needs for one unit.

    ``last_slope`` is on the count scale, persons/day at the last observed
    day; for terminal verdicts it falls back to the observed one-day
    difference and ``slope_is_observed`` flips to True. ``prevalence``
    falls back to the mean of the last two observed counts over the
    population. ``color_class`` is -1 (neutral) for terminal verdicts,
    else a growth bin index (see reporting).
    """

    series: CountSeries
    outcome: SelectionOutcome
    fitted: tuple[tuple[float, float], ...]
    last_slope: float
    prevalence: float
    color_class: int
    slope_is_observed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "fitted", tuple((float(t), float(y)) for t, y in self.fitted))
        if not (0.0 <= self.prevalence <= 1.0):
            raise ValueError(f"prevalence must lie in [0, 1], got {self.prevalence}")
        for t, y in self.fitted:
            if y < 0:
                raise ValueError(f"fitted value must be >= 0, got {y} at t={t}")
        if self.outcome.verdict.is_terminal and self.fitted:
            raise ValueError("terminal verdicts carry no fitted curve")
