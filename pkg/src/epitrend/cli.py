"""Command-line pipeline: ingestion -> selection -> reporting.

Exit codes: 0 on success (terminal verdicts are results, not failures),
1 on I/O or schema errors, 2 on invalid flags. Output is staged in a
temporary directory and renamed into place only on success, so a failed
run never leaves a partial output directory.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
import tempfile
import zlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from .domain import CountSeries, ResponseKind, UnitReport, Verdict
from .errors import EpitrendError
from .ingestion import RESPONSES_BY_LEVEL, Level, build_series, load_dataset, load_population, load_schema
from .logistic_model import OptimizerConfig
from .poisson_glm import IrlsConfig
from .reporting import build_unit_report, render_country_map, render_unit_plot, write_text_report
from .selection import SelectionConfig, select

log = logging.getLogger(__name__)


def _positive_int(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _probability(raw: str) -> float:
    value = float(raw)
    if not (0.0 < value < 1.0):
        raise argparse.ArgumentTypeError(f"must lie strictly in (0, 1), got {value}")
    return value


def _positive_float(raw: str) -> float:
    value = float(raw)
    if value <= 0.0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epitrend",
        description="Fit growth models to per-unit epidemic count series and map the results.",
    )
    parser.add_argument("--input", required=True,
                        help="daily counts CSV, local path or HTTP(S) URL")
    parser.add_argument("--population", required=True,
                        help="two-column (code, population) CSV")
    parser.add_argument("--level", required=True, choices=[lv.value for lv in Level])
    parser.add_argument("--response", required=True,
                        choices=[rk.value for rk in ResponseKind])
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--start-threshold", type=_positive_int, default=10,
                        help="series starts the day the count first reaches this (default 10)")
    parser.add_argument("--low-prevalence", type=_positive_float, default=0.00005,
                        help="skip modeling below this max observed rate (default 5e-5)")
    parser.add_argument("--p-cutoff", type=_probability, default=0.05,
                        help="p-value cutoff for the selection tests (default 0.05)")
    parser.add_argument("--flex-guard-days", type=_positive_int, default=7,
                        help="inflection CI must end this many days before the last day (default 7)")
    parser.add_argument("--schema", default=None,
                        help="JSON file overriding column header names")
    parser.add_argument("--outline", default=None,
                        help="country outline JSON (default: bundled)")
    parser.add_argument("--jobs", type=_positive_int, default=1,
                        help="parallel workers for per-unit fitting (default 1)")
    parser.add_argument("--seed", type=int, default=0,
                        help="base seed for optimizer restarts (default 0)")
    parser.add_argument("--verbose", action="store_true")
    return parser


def _unit_seed(base: int, unit_id: str) -> int:
    # Stable per unit so --jobs does not change results.
    return (base * 1000003 + zlib.crc32(unit_id.encode("utf-8"))) % 2**31


def _process_unit(series: CountSeries, config: SelectionConfig, base_seed: int) -> UnitReport:
    optimizer = OptimizerConfig(
        max_iterations=config.optimizer.max_iterations,
        gradient_rtol=config.optimizer.gradient_rtol,
        restarts=config.optimizer.restarts,
        seed=_unit_seed(base_seed, series.unit_id),
    )
    unit_config = SelectionConfig(
        p_cutoff=config.p_cutoff,
        low_prevalence_threshold=config.low_prevalence_threshold,
        flex_guard_days=config.flex_guard_days,
        start_threshold=config.start_threshold,
        irls=config.irls,
        optimizer=optimizer,
    )
    outcome = select(series, unit_config)
    return build_unit_report(series, outcome)


def _summary_line(report: UnitReport) -> str:
    series = report.series
    outcome = report.outcome
    if outcome.message:
        detail = outcome.message
    else:
        model = ("logistic" if outcome.verdict is Verdict.LOGISTIC
                 else f"degree {outcome.poly_fit.degree}")
        per_100k = report.last_slope * 1e5 / series.population
        detail = f"{model}, growth {per_100k:.3g}/day per 100k"
    return f"{series.unit_id} {series.unit_name}: {detail}"


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    level = Level(args.level)
    response = ResponseKind(args.response)
    if response not in RESPONSES_BY_LEVEL[level]:
        parser.error(f"response {args.response!r} is only available at the region level")

    config = SelectionConfig(
        p_cutoff=args.p_cutoff,
        low_prevalence_threshold=args.low_prevalence,
        flex_guard_days=args.flex_guard_days,
        start_threshold=args.start_threshold,
        irls=IrlsConfig(),
        optimizer=OptimizerConfig(seed=args.seed),
    )

    try:
        schema = load_schema(level, args.schema)
        rows = load_dataset(args.input, level, schema)
        populations = load_population(args.population, level)
        series_list = build_series(rows, populations, response, config)
    except (EpitrendError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(
                lambda s: _process_unit(s, config, args.seed), series_list))
    else:
        reports = [_process_unit(s, config, args.seed) for s in series_list]
    reports.sort(key=lambda r: r.series.unit_id)

    out_dir = Path(args.out)
    staging = None
    try:
        out_dir.parent.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(prefix=".epitrend-", dir=out_dir.parent))
        plots_dir = staging / "plots"
        plots_dir.mkdir()
        for report in reports:
            (plots_dir / f"{report.series.unit_id}.svg").write_text(
                render_unit_plot(report), encoding="utf-8")
        (staging / "map.svg").write_text(
            render_country_map(reports, args.outline), encoding="utf-8")
        text, blob = write_text_report(reports)
        (staging / "report.txt").write_text(text, encoding="utf-8")
        (staging / "report.json").write_text(blob, encoding="utf-8")
    except (EpitrendError, OSError) as exc:
        if staging is not None:
            shutil.rmtree(staging, ignore_errors=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if out_dir.exists():
        shutil.rmtree(out_dir)
    os.replace(staging, out_dir)

    for report in reports:
        print(_summary_line(report))
    print(f"wrote {len(reports)} unit reports to {out_dir}")
    return 0


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
