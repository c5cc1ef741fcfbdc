"""Per-unit plots, the country proportional-symbol map, and text/JSON reports."""

from __future__ import annotations

import importlib.resources
import json
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import calculus, svg
from .domain import CountSeries, SelectionOutcome, UnitReport, Verdict
from .errors import MissingOutline
from .logistic_model import hazard, logistic_derivatives
from .poisson_glm import predict

# Growth bins in new cases/day per 100,000 inhabitants. Fixed edges keep
# day-over-day maps comparable.
GROWTH_BIN_EDGES = (0.0, 1.0, 5.0, 15.0)
GROWTH_BIN_LABELS = ("<= 0", "0 to 1", "1 to 5", "5 to 15", "> 15")
GROWTH_COLORS = ("#440154", "#3b528b", "#21918c", "#5ec962", "#fde725")
NEUTRAL_CLASS = -1
NEUTRAL_COLOR = "#9e9e9e"

_MAX_CIRCLE_RADIUS = 28.0


def round6(x: float) -> float:
    """Round to the 6 significant digits used in every emitted numeral."""
    if x is None or not math.isfinite(x):
        return x
    return float(format(x, ".6g"))


def _fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return format(x, ".6g") if isinstance(x, (int, float)) else str(x)


def slope_class(slope_per_100k: float) -> int:
    """Growth bin index for a modeled slope (terminal verdicts are neutral)."""
    for idx, edge in enumerate(GROWTH_BIN_EDGES):
        if slope_per_100k <= edge:
            return idx
    return len(GROWTH_BIN_EDGES)


def class_color(color_class: int) -> str:
    if color_class == NEUTRAL_CLASS:
        return NEUTRAL_COLOR
    return GROWTH_COLORS[color_class]


def class_label(color_class: int) -> str:
    if color_class == NEUTRAL_CLASS:
        return "no model"
    return GROWTH_BIN_LABELS[color_class]


def build_unit_report(series: CountSeries, outcome: SelectionOutcome) -> UnitReport:
    """Assemble fitted curve, last-day slope, prevalence and color class.

    Model verdicts evaluate the selected curve over the observed range and
    take the count-scale slope at the last day. Terminal verdicts fall back
    to observed data: prevalence is the mean of the last two counts over
    the population, the slope is the last one-day difference (flagged
    observed), and the color class is neutral.
    """
    n_pop = series.population
    counts = series.counts
    t_last = series.last_index

    if outcome.verdict is Verdict.POLY:
        fit = outcome.poly_fit
        ts = np.arange(len(counts), dtype=float)
        fitted = tuple(zip(ts.tolist(), predict(fit, series, ts).tolist()))
        slope, _ = calculus.poly_derivatives(fit, series, float(t_last), count_scale=True)
        prevalence = fitted[-1][1] / n_pop
        observed = False
    elif outcome.verdict is Verdict.LOGISTIC:
        fit = outcome.logistic_fit
        ts = np.arange(len(counts), dtype=float)
        curve = n_pop * hazard(fit.gamma, fit.beta0, fit.beta1, ts)
        fitted = tuple(zip(ts.tolist(), curve.tolist()))
        slope = n_pop * logistic_derivatives(fit, float(t_last))[0]
        prevalence = fitted[-1][1] / n_pop
        observed = False
    else:
        fitted = ()
        tail = counts[-2:]
        prevalence = (sum(tail) / len(tail)) / n_pop
        slope = float(counts[-1] - counts[-2]) if len(counts) >= 2 else 0.0
        observed = True

    prevalence = min(max(prevalence, 0.0), 1.0)
    if outcome.verdict.is_terminal:
        color = NEUTRAL_CLASS
    else:
        color = slope_class(slope * 1e5 / n_pop)
    return UnitReport(series=series, outcome=outcome, fitted=fitted,
                      last_slope=float(slope), prevalence=float(prevalence),
                      color_class=color, slope_is_observed=observed)


def _model_label(outcome: SelectionOutcome) -> str:
    if outcome.verdict is Verdict.POLY:
        return f"polynomial, degree {outcome.poly_fit.degree}"
    if outcome.verdict is Verdict.LOGISTIC:
        return "logistic"
    return outcome.message


def render_unit_plot(report: UnitReport, width: float = 640.0, height: float = 440.0) -> str:
    """Scatter of observed counts with the fitted curve and annotations."""
    series = report.series
    margin_l, margin_r, margin_t, margin_b = 64.0, 18.0, 54.0, 42.0
    plot_w = width - margin_l - margin_r
    plot_h = height - margin_t - margin_b

    t_max = max(series.last_index, 1)
    y_values = list(series.counts) + [y for _, y in report.fitted]
    y_max = max(max(y_values), 1.0) * 1.05

    def sx(t: float) -> float:
        return margin_l + plot_w * t / t_max

    def sy(y: float) -> float:
        return margin_t + plot_h * (1.0 - y / y_max)

    children = [svg.el("rect", {"x": margin_l, "y": margin_t, "width": plot_w,
                                "height": plot_h, "fill": "white", "stroke": "#cccccc"})]
    for tick in svg.nice_ticks(0.0, y_max):
        y = sy(tick)
        children.append(svg.el("line", {"x1": margin_l - 4, "y1": y, "x2": margin_l,
                                        "y2": y, "stroke": "#444444"}))
        children.append(svg.el("text", {"x": margin_l - 7, "y": y + 3.5,
                                        "font_size": 11, "text_anchor": "end",
                                        "fill": "#444444"}, text=_fmt(tick)))
    for tick in svg.nice_ticks(0.0, float(t_max)):
        x = sx(tick)
        children.append(svg.el("line", {"x1": x, "y1": margin_t + plot_h, "x2": x,
                                        "y2": margin_t + plot_h + 4, "stroke": "#444444"}))
        children.append(svg.el("text", {"x": x, "y": margin_t + plot_h + 16,
                                        "font_size": 11, "text_anchor": "middle",
                                        "fill": "#444444"}, text=_fmt(tick)))
    children.append(svg.el("text", {"x": margin_l + plot_w / 2, "y": height - 8,
                                    "font_size": 12, "text_anchor": "middle"},
                           text=f"days since start (t0 = {series.t0_date.isoformat()})"))

    if report.fitted:
        children.append(svg.polyline(
            [(sx(t), sy(y)) for t, y in report.fitted],
            fill="none", stroke="#d62728", stroke_width=1.8, **{"class": "fitted"}))
    for t, y in enumerate(series.counts):
        children.append(svg.el("circle", {"cx": sx(float(t)), "cy": sy(float(y)),
                                          "r": 2.6, "fill": "#1f3d7a",
                                          "class": "observed"}))

    title = f"{series.unit_name} - data through {series.last_date.isoformat()}"
    children.append(svg.el("text", {"x": width / 2, "y": 20, "font_size": 15,
                                    "text_anchor": "middle", "font_weight": "bold",
                                    "class": "title"}, text=title))
    annotation = _model_label(report.outcome)
    slope_txt = f"growth at last day: {_fmt(round6(report.last_slope))} /day"
    if report.slope_is_observed:
        slope_txt += " (observed)"
    children.append(svg.el("text", {"x": width / 2, "y": 38, "font_size": 12,
                                    "text_anchor": "middle", "class": "annotation"},
                           text=f"{annotation}; {slope_txt}"))
    return svg.document(width, height, children)


def _load_outline(outline_path: Optional[str]) -> dict:
    if outline_path is None:
        resource = importlib.resources.files("epitrend").joinpath("data/italy_outline.json")
        try:
            return json.loads(resource.read_text(encoding="utf-8"))
        except (FileNotFoundError, OSError) as exc:
            raise MissingOutline("bundled country outline missing") from exc
    path = Path(outline_path)
    if not path.exists():
        raise MissingOutline(f"outline file not found: {outline_path}")
    return json.loads(path.read_text(encoding="utf-8"))


def render_country_map(reports: Sequence[UnitReport],
                       outline_path: Optional[str] = None,
                       width: float = 720.0, height: float = 820.0) -> str:
    """Proportional-symbol map: one empty circle per unit.

    Circle area is proportional to prevalence (radius = c * sqrt(p) with a
    shared c), stroke color encodes the growth class, and a plate-carree
    mapping places units over the bundled outline.
    """
    outline = _load_outline(outline_path)
    lons = [pt[0] for poly in outline["polygons"] for pt in poly]
    lats = [pt[1] for poly in outline["polygons"] for pt in poly]
    lon_min, lon_max = min(lons), max(lons)
    lat_min, lat_max = min(lats), max(lats)
    pad = 30.0
    scale = min((width - 2 * pad) / (lon_max - lon_min),
                (height - 2 * pad) / (lat_max - lat_min))

    def sx(lon: float) -> float:
        return pad + (lon - lon_min) * scale

    def sy(lat: float) -> float:
        return pad + (lat_max - lat) * scale

    children = [svg.el("rect", {"x": 0, "y": 0, "width": width, "height": height,
                                "fill": "#f4f7fb"})]
    for poly in outline["polygons"]:
        children.append(svg.polygon([(sx(lon), sy(lat)) for lon, lat in poly],
                                    fill="#e8e8e0", stroke="#888888", stroke_width=1))

    p_max = max((r.prevalence for r in reports), default=0.0)
    radius_scale = _MAX_CIRCLE_RADIUS / math.sqrt(p_max) if p_max > 0 else 0.0
    for report in sorted(reports, key=lambda r: r.series.unit_id):
        series = report.series
        radius = radius_scale * math.sqrt(report.prevalence)
        children.append(svg.el("circle", {
            "cx": sx(series.longitude), "cy": sy(series.latitude), "r": radius,
            "fill": "none", "stroke": class_color(report.color_class),
            "stroke_width": 2.2, "class": "unit", "data_unit": series.unit_id,
            "data_prevalence": round6(report.prevalence),
        }))

    response = reports[0].series.response_kind.value if reports else "cases"
    children.extend(_map_legend(width, height, response, p_max, radius_scale))
    title = "Prevalence (circle area) and growth class (color)"
    children.append(svg.el("text", {"x": width / 2, "y": 22, "font_size": 16,
                                    "text_anchor": "middle", "font_weight": "bold"},
                           text=title))
    return svg.document(width, height, children)


def _map_legend(width: float, height: float, response: str,
                p_max: float, radius_scale: float) -> list[str]:
    x0, y0 = width - 170.0, height - 205.0
    items = [svg.el("text", {"x": x0, "y": y0 - 10, "font_size": 12,
                             "font_weight": "bold"},
                    text=f"new {response}/day per 100,000")]
    classes = list(range(len(GROWTH_BIN_LABELS))) + [NEUTRAL_CLASS]
    for i, cls in enumerate(classes):
        y = y0 + 20.0 * i
        items.append(svg.el("circle", {"cx": x0 + 8, "cy": y, "r": 6,
                                       "fill": "none", "stroke": class_color(cls),
                                       "stroke_width": 2.2}))
        items.append(svg.el("text", {"x": x0 + 22, "y": y + 4, "font_size": 12},
                            text=class_label(cls)))
    if p_max > 0:
        y = y0 + 20.0 * len(classes) + 18
        items.append(svg.el("circle", {"cx": x0 + 8, "cy": y, "r": radius_scale * math.sqrt(p_max),
                                       "fill": "none", "stroke": "#333333"}))
        items.append(svg.el("text", {"x": x0 + 44, "y": y + 4, "font_size": 12},
                            text=f"prevalence {_fmt(round6(p_max))}"))
    return items


def _poly_detail(report: UnitReport) -> dict:
    fit = report.outcome.poly_fit
    detail = {
        "kind": "poly",
        "degree": fit.degree,
        "coefficients": [round6(b) for b in fit.beta.tolist()],
        "standard_errors": [round6(math.sqrt(v)) if v >= 0 else None
                            for v in np.diag(fit.covariance).tolist()],
        "log_likelihood": round6(fit.log_likelihood),
        "iterations": fit.iterations,
    }
    if fit.degree >= 2:
        detail["stationary_points"] = [
            {"time": round6(sp.time), "kind": sp.kind.value,
             "before_start": sp.before_start}
            for sp in calculus.stationary_points(fit)
        ]
    else:
        detail["stationary_points"] = []
    return detail


def _logistic_detail(report: UnitReport) -> dict:
    fit = report.outcome.logistic_fit
    return {
        "kind": "logistic",
        "plateau": round6(fit.plateau),
        "gamma": round6(fit.gamma),
        "beta0": round6(fit.beta0),
        "beta1": round6(fit.beta1),
        "log_likelihood": round6(fit.log_likelihood),
        "iterations": fit.iterations,
        "flex_time": round6(fit.flex_time),
        "flex_ci": [round6(fit.flex_ci[0]), round6(fit.flex_ci[1])],
    }


def _unit_payload(report: UnitReport) -> dict:
    series = report.series
    outcome = report.outcome
    observed_rate = series.counts[-1] / series.population
    payload = {
        "unit_id": series.unit_id,
        "unit_name": series.unit_name,
        "latitude": round6(series.latitude),
        "longitude": round6(series.longitude),
        "population": series.population,
        "response": series.response_kind.value,
        "t0_date": series.t0_date.isoformat(),
        "last_date": series.last_date.isoformat(),
        "n_days": len(series.counts),
        "observed_rate": round6(observed_rate),
        "sub_threshold": series.sub_threshold,
        "decrease_days": list(series.decrease_days),
        "verdict": outcome.verdict.value,
        "message": outcome.message,
        "last_slope": round6(report.last_slope),
        "slope_per_100k": round6(report.last_slope * 1e5 / series.population),
        "slope_is_observed": report.slope_is_observed,
        "prevalence": round6(report.prevalence),
        "color_class": report.color_class,
    }
    if outcome.verdict is Verdict.POLY:
        payload["model"] = _poly_detail(report)
    elif outcome.verdict is Verdict.LOGISTIC:
        payload["model"] = _logistic_detail(report)
        payload["model"]["triggering_poly_degree"] = (
            outcome.poly_fit.degree if outcome.poly_fit else None)
    else:
        payload["model"] = None
    payload["trail"] = [
        {"name": rec.name, "kind": rec.kind,
         "statistic": round6(rec.statistic) if rec.statistic is not None else None,
         "df_or_se": round6(rec.df_or_se) if rec.df_or_se is not None else None,
         "p_value": round6(rec.p_value) if rec.p_value is not None else None,
         "note": rec.note}
        for rec in outcome.trail
    ]
    return payload


def write_text_report(reports: Sequence[UnitReport]) -> tuple[str, str]:
    """Human-readable table plus a JSON mirror with identical values.

    Returns ``(text, json_string)``. Every numeral in both documents is
    serialized with 6 significant digits; the JSON parses back to exactly
    the values printed in the table.
    """
    ordered = sorted(reports, key=lambda r: r.series.unit_id)
    payloads = [_unit_payload(r) for r in ordered]

    lines = ["UNIT SUMMARY", ""]
    header = (f"{'unit_id':<10} {'unit_name':<24} {'observed_rate':>13} "
              f"{'verdict':<18} {'last_slope':>12} {'per_100k':>10} {'class':>5}")
    lines.append(header)
    lines.append("-" * len(header))
    for p in payloads:
        lines.append(
            f"{p['unit_id']:<10} {p['unit_name']:<24} {_fmt(p['observed_rate']):>13} "
            f"{p['verdict']:<18} {_fmt(p['last_slope']):>12} "
            f"{_fmt(p['slope_per_100k']):>10} {p['color_class']:>5}")
    lines.append("")
    lines.append("DETAILS")
    for p in payloads:
        lines.append("")
        lines.append(f"{p['unit_id']}  {p['unit_name']} (population {p['population']})")
        lines.append(f"  window: {p['t0_date']} to {p['last_date']} ({p['n_days']} days)")
        if p["message"]:
            lines.append(f"  verdict: {p['verdict']} ({p['message']})")
        else:
            lines.append(f"  verdict: {p['verdict']}")
        if p["sub_threshold"]:
            lines.append("  note: never reached the start threshold")
        if p["decrease_days"]:
            lines.append(f"  note: cumulative count decreased at t = {p['decrease_days']}")
        model = p["model"]
        if model and model["kind"] == "poly":
            coefs = ", ".join(_fmt(b) for b in model["coefficients"])
            lines.append(f"  model: degree {model['degree']} polynomial; beta = [{coefs}]")
            lines.append(f"  log-likelihood: {_fmt(model['log_likelihood'])}")
            for sp in model["stationary_points"]:
                flag = " (before series start)" if sp["before_start"] else ""
                lines.append(f"  stationary point: t = {_fmt(sp['time'])} ({sp['kind']}){flag}")
        elif model and model["kind"] == "logistic":
            lines.append(
                f"  model: logistic; plateau K = {_fmt(model['plateau'])}, "
                f"beta0 = {_fmt(model['beta0'])}, beta1 = {_fmt(model['beta1'])}")
            lines.append(f"  log-likelihood: {_fmt(model['log_likelihood'])}")
            lines.append(
                f"  flex: t = {_fmt(model['flex_time'])} "
                f"(95% CI {_fmt(model['flex_ci'][0])} to {_fmt(model['flex_ci'][1])})")
        lines.append(f"  growth at last day: {_fmt(p['last_slope'])} /day"
                     + (" (observed)" if p["slope_is_observed"] else ""))
        lines.append(f"  prevalence: {_fmt(p['prevalence'])}; color class: {p['color_class']}")
        tests = [rec for rec in p["trail"] if rec["kind"] == "test"]
        for rec in tests:
            lines.append(
                f"  test {rec['name']}: statistic = {_fmt(rec['statistic'])}, "
                f"df/se = {_fmt(rec['df_or_se'])}, p = {_fmt(rec['p_value'])}")
    text = "\n".join(lines) + "\n"
    blob = json.dumps({"units": payloads}, indent=2, sort_keys=True, ensure_ascii=True)
    return text, blob + "\n"
