"""Analytic slopes, curvatures and stationary points of fitted polynomial hazards.

With h(t) = exp(p(t)) for the coefficient polynomial p, the hazard-scale
derivatives are

    dh/dt   = h(t) * p'(t)
    d2h/dt2 = h(t) * (p''(t) + p'(t)^2)

which reduce to h*b1 and h*b1^2 at degree 1. Count-scale versions are N
times the hazard-scale values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .domain import CountSeries, PolyFit
from .errors import DegreeTooLow, NotConverged
from .poisson_glm import linear_predictor


class StationaryKind(enum.Enum):
    MAX = "max"
    MIN = "min"


@dataclass(frozen=True)
class StationaryPoint:
    """A root of the hazard slope, classified by the sign of p'' there."""

    time: float
    kind: StationaryKind
    degenerate: bool = False  # p''(t) = 0: double root, classification unreliable
    before_start: bool = False  # t < 0 precedes the observed series


def poly_derivatives(fit: PolyFit, series: CountSeries, t,
                     count_scale: bool = False) -> tuple[float, float]:
    """Slope and curvature of the fitted hazard at time t.

    Parameters
    ----------
    fit : PolyFit
        A converged polynomial fit.
    series : CountSeries
        Supplies the population when ``count_scale`` is requested.
    t : float
        Evaluation time.
    count_scale : bool
        When True, multiply both values by the population.

    Raises NotConverged on unconverged fits.
    """
    if not fit.converged:
        raise NotConverged("poly_derivatives requires a converged fit")
    h = math.exp(float(linear_predictor(fit, t)))
    d1 = np.polynomial.polynomial.polyder(fit.beta, 1)
    d2 = np.polynomial.polynomial.polyder(fit.beta, 2)
    p1 = float(np.polynomial.polynomial.polyval(t, d1))
    p2 = float(np.polynomial.polynomial.polyval(t, d2)) if d2.size else 0.0
    scale = series.population if count_scale else 1.0
    return scale * h * p1, scale * h * (p2 + p1 * p1)


def _classify(p2_value: float) -> tuple[StationaryKind, bool]:
    if p2_value < 0:
        return StationaryKind.MAX, False
    if p2_value > 0:
        return StationaryKind.MIN, False
    return StationaryKind.MAX, True


def stationary_points(fit: PolyFit) -> list[StationaryPoint]:
    """Times where the fitted hazard slope vanishes, sorted ascending.

    Degree 2 gives the single root -b1/(2*b2); degree 3 gives two roots
    when the discriminant 4*b2^2 - 12*b1*b3 is strictly positive, and an
    empty list otherwise. Roots at negative times are returned but flagged
    ``before_start``. Degree 1 raises DegreeTooLow (its slope h*b1 never
    vanishes for b1 != 0).
    """
    if not fit.converged:
        raise NotConverged("stationary_points requires a converged fit")
    if fit.degree < 2:
        raise DegreeTooLow("degree-1 hazards have no stationary point")

    beta = fit.beta
    if fit.degree == 2 or beta[3] == 0.0:
        b1, b2 = float(beta[1]), float(beta[2])
        if b2 == 0.0:
            return []
        root = -b1 / (2.0 * b2)
        kind, degen = _classify(2.0 * b2)
        return [StationaryPoint(root, kind, degen, root < 0)]

    b1, b2, b3 = float(beta[1]), float(beta[2]), float(beta[3])
    disc = 4.0 * b2 * b2 - 12.0 * b1 * b3
    if disc <= 0.0:
        return []
    # Numerically stable quadratic roots of p'(t) = b1 + 2*b2*t + 3*b3*t^2,
    # polished with one Newton step to kill cancellation in the slope.
    sqrt_disc = math.sqrt(disc)
    q = -(2.0 * b2 + math.copysign(sqrt_disc, b2)) / 2.0
    out = []
    for root in (q / (3.0 * b3), b1 / q):
        p2_value = 2.0 * b2 + 6.0 * b3 * root
        if p2_value != 0.0:
            slope = b1 + 2.0 * b2 * root + 3.0 * b3 * root * root
            root -= slope / p2_value
            p2_value = 2.0 * b2 + 6.0 * b3 * root
        kind, degen = _classify(p2_value)
        out.append(StationaryPoint(root, kind, degen, root < 0))
    out.sort(key=lambda sp: sp.time)
    return out
