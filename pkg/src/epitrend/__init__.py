"""Poisson growth-curve fitting, automatic model selection and trend maps
for per-geographic-unit epidemic count series."""

from .calculus import StationaryKind, StationaryPoint, poly_derivatives, stationary_points
from .domain import (
    CountSeries,
    LogisticFit,
    PolyFit,
    ResponseKind,
    SelectionOutcome,
    TrailRecord,
    UnitReport,
    Verdict,
)
from .ingestion import Level, build_series, load_dataset, load_population
from .logistic_model import OptimizerConfig, fit_logistic, inflection, logistic_derivatives
from .poisson_glm import IrlsConfig, fit_poly, predict
from .reporting import build_unit_report, render_country_map, render_unit_plot, write_text_report
from .selection import SelectionConfig, lr_test, select, wald_test

__version__ = "0.1.0"

__all__ = [
    "CountSeries",
    "IrlsConfig",
    "Level",
    "LogisticFit",
    "OptimizerConfig",
    "PolyFit",
    "ResponseKind",
    "SelectionConfig",
    "SelectionOutcome",
    "StationaryKind",
    "StationaryPoint",
    "TrailRecord",
    "UnitReport",
    "Verdict",
    "build_series",
    "build_unit_report",
    "fit_logistic",
    "fit_poly",
    "inflection",
    "load_dataset",
    "load_population",
    "logistic_derivatives",
    "lr_test",
    "poly_derivatives",
    "predict",
    "render_country_map",
    "render_unit_plot",
    "select",
    "stationary_points",
    "wald_test",
    "write_text_report",
]
