"""
Command-line workflows: ``fit``, ``roll``, ``backtest``, ``compare``, ``simulate``.

Exit codes: 0 success, 2 input error, 3 too many failed refits, 1 anything else.
Errors are also written to stderr as a JSON object ``{"error": {...}}``.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .backtester import backtest
from .dist import Family
from .forecaster import RollConfig, RollError, Window, roll
from .gas_filter import EstimationError, GasModel, estimate, simulate_path
from .io import (
    REPORT_SCHEMA_VERSION,
    InputError,
    ReturnSeries,
    ingest_csv,
    read_report,
    read_steps_csv,
    write_json,
    write_returns_csv,
    write_steps_csv,
)

logger = logging.getLogger("gasvar")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INPUT = 2
EXIT_ESTIMATION = 3

DIST_ORDER = ("norm", "std", "sstd")


@dataclass(frozen=True)
class RunConfig:
    dist: Family = Family.NORM
    alpha_levels: tuple[float, ...] = (0.01, 0.05)
    forecast_length: int = 1000
    refit_every: int = 1
    window: Window = Window.MOVING
    lags: int = 4
    workers: int = 1
    seed: int = 0
    tail_length: int | None = 2500

    def __post_init__(self) -> None:
        object.__setattr__(self, "dist", Family(self.dist))
        object.__setattr__(self, "window", Window(self.window))
        object.__setattr__(self, "alpha_levels", tuple(sorted(float(a) for a in self.alpha_levels)))
        if self.lags < 1:
            raise ValueError("lags must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        self.roll_config()  # validates the remaining fields

    def roll_config(self) -> RollConfig:
        return RollConfig(
            forecast_length=self.forecast_length,
            refit_every=self.refit_every,
            window=self.window,
            var_levels=self.alpha_levels,
            seed=self.seed,
        )

    def echo(self) -> dict:
        # worker count is deliberately absent: reports must not depend on it
        return {
            "dist": self.dist.value,
            "alpha_levels": list(self.alpha_levels),
            "forecast_length": self.forecast_length,
            "refit_every": self.refit_every,
            "window": self.window.value,
            "lags": self.lags,
            "seed": self.seed,
            "tail_length": self.tail_length,
        }


def _report_from_steps(steps: dict, alpha: float, lags: int, *, asset: str, dist: str,
                       config: dict, steps_name: str) -> dict:
    """Build a report document from per-step data (in memory or re-read from CSV)."""
    bt = backtest(steps["realized"], steps["var"][alpha], alpha, lags)
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "software_version": __version__,
        "config": config,
        "asset": asset,
        "dist": dist,
        "n_forecasts": bt.n,
        "first_date": steps["date"][0].isoformat(),
        "last_date": steps["date"][-1].isoformat(),
        "refits": {"count": int(steps["refit"].sum()), "failures": int(steps["refit_failed"].sum())},
        "steps_csv": steps_name,
    }
    doc.update(bt.to_dict())
    return doc


def cmd_roll_backtest(cfg: RunConfig, series: ReturnSeries, out_dir=None) -> list[dict]:
    """Roll one asset under ``cfg`` and backtest every VaR level.

    Writes ``<asset>_<dist>_steps.csv`` and one ``<asset>_<dist>_a<alpha>.json``
    per level when ``out_dir`` is given.  Returns the report documents.
    """
    data = series.tail(cfg.tail_length)
    result = roll(data.values, cfg.dist, cfg.roll_config(), workers=cfg.workers)
    H = cfg.forecast_length
    refit = np.zeros(H, dtype=int)
    refit[result.refit_indices] = 1
    failed = np.zeros(H, dtype=int)
    failed[result.failed_refits] = 1
    dates = list(data.timestamps[-H:])
    stem = f"{series.label}_{cfg.dist.value}"
    steps_name = f"{stem}_steps.csv"
    steps = {
        "date": dates,
        "realized": result.realized,
        "var": {a: result.var_forecasts[:, j] for j, a in enumerate(result.var_levels)},
        "refit": refit,
        "refit_failed": failed,
    }
    reports = [
        _report_from_steps(steps, a, cfg.lags, asset=series.label, dist=cfg.dist.value,
                           config=cfg.echo(), steps_name=steps_name)
        for a in result.var_levels
    ]
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_steps_csv(out_dir / steps_name, dates, result.realized, result.var_forecasts,
                        result.var_levels, result.sigma, refit, failed)
        for doc in reports:
            write_json(out_dir / f"{stem}_a{doc['alpha']:g}.json", doc)
    return reports


def cmd_backtest(steps_path, *, asset: str, dist: str, lags: int = 4,
                 alphas: Sequence[float] | None = None, config: dict | None = None) -> list[dict]:
    """Recompute report documents from a per-step CSV."""
    steps = read_steps_csv(steps_path)
    levels = sorted(steps["var"]) if not alphas else [float(a) for a in alphas]
    for a in levels:
        if a not in steps["var"]:
            raise InputError(f"{steps_path}: no VaR column for alpha={a:g}")
    return [
        _report_from_steps(steps, a, lags, asset=asset, dist=dist, config=config or {},
                           steps_name=Path(steps_path).name)
        for a in levels
    ]


@dataclass
class Comparison:
    columns: list[str]
    dq_pvalues: dict[str, dict[str, float]] = field(default_factory=dict)
    ql_ratios: dict[str, dict[str, float]] = field(default_factory=dict)

    def rows(self, table: dict[str, dict[str, float]]) -> list[list]:
        return [[asset, *(table[asset].get(c, math.nan) for c in self.columns)] for asset in table]


def cmd_compare(reports: Sequence[dict], baseline: str = "norm") -> Comparison:
    """DQ p-value and QL-ratio tables, one row per asset, columns ``<dist>@<alpha>``.

    QL ratios divide each model's mean quantile loss by the baseline's on the
    same asset and level; values above 1 favour the baseline.
    """
    if len(reports) < 2:
        raise InputError("compare needs at least two reports")
    groups: dict[tuple[str, float], dict[str, dict]] = {}
    for doc in reports:
        key = (doc["asset"], float(doc["alpha"]))
        window = (doc.get("n_forecasts"), doc.get("first_date"), doc.get("last_date"))
        bucket = groups.setdefault(key, {})
        for other in bucket.values():
            other_window = (other.get("n_forecasts"), other.get("first_date"), other.get("last_date"))
            if other_window != window:
                raise InputError(f"incompatible forecast windows for {key[0]} at alpha={key[1]:g}: "
                                 f"{other_window} vs {window}")
        bucket[doc["dist"]] = doc
    alphas = sorted({a for _, a in groups})
    dists = sorted({d for bucket in groups.values() for d in bucket},
                   key=lambda d: (DIST_ORDER.index(d) if d in DIST_ORDER else len(DIST_ORDER), d))
    columns = [f"{d}@{a:g}" for a in alphas for d in dists]
    comp = Comparison(columns)
    for (asset, alpha), bucket in groups.items():
        if baseline not in bucket:
            raise InputError(f"no {baseline!r} baseline report for {asset} at alpha={alpha:g}")
        base = bucket[baseline]["ql"]["mean"]
        dq_row = comp.dq_pvalues.setdefault(asset, {})
        ql_row = comp.ql_ratios.setdefault(asset, {})
        for d, doc in bucket.items():
            col = f"{d}@{alpha:g}"
            dq_row[col] = doc["dq"]["pvalue"]
            ql_row[col] = doc["ql"]["mean"] / base if base > 0 else math.nan
    return comp


def write_comparison(comp: Comparison, out_dir) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = (out_dir / "dq_pvalues.csv", out_dir / "ql_ratios.csv")
    for path, table in zip(paths, (comp.dq_pvalues, comp.ql_ratios)):
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["asset", *comp.columns])
            for row in comp.rows(table):
                writer.writerow([row[0], *(repr(float(v)) for v in row[1:])])
    return paths


def cmd_simulate(model: GasModel, T: int, seed: int, out, *, label: str = "SIM",
                 start: dt.date = dt.date(2000, 1, 1)) -> ReturnSeries:
    """Simulate a series and write it as an ingestible CSV with daily dates."""
    returns, _ = simulate_path(model, T, seed)
    stamps = tuple(start + dt.timedelta(days=i) for i in range(T))
    series = ReturnSeries(label, stamps, returns)
    write_returns_csv(out, [series])
    return series


# ---------------------------------------------------------------------------
# argument parsing


def _alpha_list(text: str) -> tuple[float, ...]:
    try:
        levels = tuple(float(a) for a in text.split(",") if a.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid alpha list {text!r}") from None
    if not levels or not all(0.0 < a < 0.5 for a in levels):
        raise argparse.ArgumentTypeError("alpha levels must lie in (0, 0.5)")
    return levels


def _select(series: list[ReturnSeries], assets: Sequence[str] | None) -> list[ReturnSeries]:
    if not assets:
        return series
    by_label = {s.label: s for s in series}
    missing = [a for a in assets if a not in by_label]
    if missing:
        raise InputError(f"unknown asset(s): {', '.join(missing)}")
    return [by_label[a] for a in assets]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gasvar", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = argparse.ArgumentParser(add_help=False)
    verbosity.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, rolling: bool):
        p.add_argument("--dist", nargs="+", choices=DIST_ORDER, default=["norm"])
        p.add_argument("--asset", action="append", help="restrict to this column (repeatable)")
        p.add_argument("--tail", type=int, default=2500, help="use only the last N observations (0 = all)")
        p.add_argument("--workers", type=int, default=1)
        if rolling:
            p.add_argument("--alpha", type=_alpha_list, default=(0.01, 0.05))
            p.add_argument("--forecast-length", type=int, default=1000)
            p.add_argument("--refit-every", type=int, default=1)
            p.add_argument("--window", choices=[w.value for w in Window], default="moving")
            p.add_argument("--lags", type=int, default=4)
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("fit", parents=[verbosity], help="estimate models on each asset and print JSON")
    p.add_argument("csv")
    common(p, rolling=False)
    p.add_argument("--se", action="store_true", help="attach standard errors")

    p = sub.add_parser("roll", parents=[verbosity], help="rolling VaR forecasts plus backtest reports")
    p.add_argument("csv")
    p.add_argument("--out", required=True, help="output directory")
    common(p, rolling=True)

    p = sub.add_parser("backtest", parents=[verbosity], help="recompute reports from a per-step CSV")
    p.add_argument("steps_csv")
    p.add_argument("--asset", default="")
    p.add_argument("--dist", default="")
    p.add_argument("--alpha", type=_alpha_list, default=None)
    p.add_argument("--lags", type=int, default=4)
    p.add_argument("--out", help="write reports to this directory instead of stdout")

    p = sub.add_parser("compare", parents=[verbosity], help="DQ p-value and QL-ratio tables from reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--baseline", choices=DIST_ORDER, default="norm")
    p.add_argument("--out", help="directory for dq_pvalues.csv and ql_ratios.csv")

    p = sub.add_parser("simulate", parents=[verbosity], help="write a simulated return series")
    p.add_argument("--dist", choices=DIST_ORDER, default="norm")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--a", type=float, required=True, dest="a_coef")
    p.add_argument("--b", type=float, required=True, dest="b_coef")
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--nu", type=float, default=math.inf)
    p.add_argument("--xi", type=float, default=1.0)
    p.add_argument("-T", "--length", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label", default="SIM")
    p.add_argument("--out", required=True)
    return parser


def _run(args) -> int:
    if args.command == "fit":
        series = _select(ingest_csv(args.csv), args.asset)
        tail = args.tail or None
        out = []
        for s in series:
            for d in args.dist:
                fit = estimate(s.tail(tail).values, Family(d), compute_se=args.se, workers=args.workers)
                out.append({"asset": s.label, **fit.to_dict()})
        print(json.dumps(out, indent=2))
        return EXIT_OK

    if args.command == "roll":
        series = _select(ingest_csv(args.csv), args.asset)
        for s in series:
            for d in args.dist:
                cfg = RunConfig(dist=Family(d), alpha_levels=args.alpha, forecast_length=args.forecast_length,
                                refit_every=args.refit_every, window=Window(args.window), lags=args.lags,
                                workers=args.workers, seed=args.seed, tail_length=args.tail or None)
                for doc in cmd_roll_backtest(cfg, s, args.out):
                    logger.info("%s %s alpha=%g AE=%.3f DQ p=%.4g", s.label, d, doc["alpha"], doc["ae"],
                                doc["dq"]["pvalue"])
        return EXIT_OK

    if args.command == "backtest":
        reports = cmd_backtest(args.steps_csv, asset=args.asset, dist=args.dist, lags=args.lags, alphas=args.alpha)
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            stem = Path(args.steps_csv).stem.removesuffix("_steps")
            for doc in reports:
                write_json(Path(args.out) / f"{stem}_a{doc['alpha']:g}.json", doc)
        else:
            print(json.dumps(reports, indent=2, sort_keys=True))
        return EXIT_OK

    if args.command == "compare":
        comp = cmd_compare([read_report(p) for p in args.reports], baseline=args.baseline)
        if args.out:
            write_comparison(comp, args.out)
        for title, table in (("DQ p-values", comp.dq_pvalues), ("QL ratios", comp.ql_ratios)):
            print(title)
            print("\t".join(["asset", *comp.columns]))
            for row in comp.rows(table):
                print("\t".join([row[0], *(f"{v:.2f}" for v in row[1:])]))
        return EXIT_OK

    if args.command == "simulate":
        xi = args.xi if args.dist == "sstd" else 1.0
        model = GasModel(Family(args.dist), args.kappa, args.a_coef, args.b_coef, args.mu, xi, args.nu)
        cmd_simulate(model, args.length, args.seed, args.out, label=args.label)
        return EXIT_OK

    raise AssertionError(args.command)


def _fail(code: int, exc: BaseException) -> int:
    payload = {"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except (InputError, ValueError) as exc:
        return _fail(EXIT_INPUT, exc)
    except (RollError, EstimationError) as exc:
        return _fail(EXIT_ESTIMATION, exc)
    except Exception as exc:  # noqa: BLE001
        return _fail(EXIT_ERROR, exc)


if __name__ == "__main__":
    sys.exit(main())
