"""CSV ingestion and report/per-step file formats."""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "InputError",
    "ReturnSeries",
    "ingest_csv",
    "read_report",
    "read_steps_csv",
    "write_json",
    "write_returns_csv",
    "write_steps_csv",
]

REPORT_SCHEMA_VERSION = "1.0"


class InputError(ValueError):
    """Malformed or missing input data."""


@dataclass(frozen=True)
class ReturnSeries:
    label: str
    timestamps: tuple[dt.date, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(self.timestamps) != len(self.values):
            raise InputError(f"{self.label}: {len(self.timestamps)} dates vs {len(self.values)} values")
        if not np.all(np.isfinite(self.values)):
            raise InputError(f"{self.label}: non-finite values")
        for i in range(1, len(self.timestamps)):
            if not self.timestamps[i] > self.timestamps[i - 1]:
                raise InputError(f"{self.label}: dates not strictly increasing at position {i}")

    def __len__(self) -> int:
        return len(self.values)

    def tail(self, n: int | None) -> "ReturnSeries":
        if n is None or n >= len(self):
            return self
        return ReturnSeries(self.label, self.timestamps[-n:], self.values[-n:].copy())


def _parse_date(text: str, where: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise InputError(f"{where}: invalid ISO-8601 date {text!r}") from None


def _parse_float(text: str, where: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise InputError(f"{where}: non-numeric value {text!r}") from None
    if not math.isfinite(value):
        raise InputError(f"{where}: non-finite value {text!r}")
    return value


def ingest_csv(path) -> list[ReturnSeries]:
    """Read a ``date,<ticker>,...`` file of decimal log-returns, one series per column."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0].lower() != "date":
            raise InputError(f"{path}:1: header must be 'date,<ticker>,...', got {header}")
        if len(set(header[1:])) != len(header) - 1:
            raise InputError(f"{path}:1: duplicated column names")
        dates: list[dt.date] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            where = f"{path}:{lineno}"
            if len(row) != len(header):
                raise InputError(f"{where}: expected {len(header)} fields, got {len(row)}")
            day = _parse_date(row[0], where)
            if dates and not day > dates[-1]:
                raise InputError(f"{where}: date {day} is not after {dates[-1]} (dates must be strictly increasing)")
            dates.append(day)
            rows.append([_parse_float(cell, where) for cell in row[1:]])
    if not rows:
        raise InputError(f"{path}: no data rows")
    data = np.array(rows, dtype=float)
    stamps = tuple(dates)
    return [ReturnSeries(label, stamps, data[:, j].copy()) for j, label in enumerate(header[1:])]


def write_returns_csv(path, series: Sequence[ReturnSeries]) -> None:
    path = Path(path)
    stamps = series[0].timestamps
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", *(s.label for s in series)])
        for i, day in enumerate(stamps):
            writer.writerow([day.isoformat(), *(repr(float(s.values[i])) for s in series)])


def _level_key(alpha: float) -> str:
    return f"var_{alpha:g}"


def write_steps_csv(path, dates: Sequence[dt.date], realized, var_forecasts, levels: Iterable[float],
                    sigma, refit, refit_failed) -> None:
    """Per-step forecasts; floats are written with round-trip precision."""
    levels = list(levels)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "realized", *(_level_key(a) for a in levels), "sigma", "refit", "refit_failed"])
        for i, day in enumerate(dates):
            writer.writerow([
                day.isoformat(),
                repr(float(realized[i])),
                *(repr(float(var_forecasts[i, j])) for j in range(len(levels))),
                repr(float(sigma[i])),
                int(refit[i]),
                int(refit_failed[i]),
            ])


def read_steps_csv(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if "realized" not in fields:
            raise InputError(f"{path}:1: missing 'realized' column")
        var_cols = [c for c in fields if c.startswith("var_")]
        out = {"date": [], "realized": [], "refit": [], "refit_failed": [], "var": {c: [] for c in var_cols}}
        for lineno, row in enumerate(reader, start=2):
            where = f"{path}:{lineno}"
            out["date"].append(_parse_date(row["date"], where))
            out["realized"].append(_parse_float(row["realized"], where))
            for c in var_cols:
                out["var"][c].append(_parse_float(row[c], where))
            out["refit"].append(int(row.get("refit") or 0))
            out["refit_failed"].append(int(row.get("refit_failed") or 0))
    levels = {float(c[4:]): np.array(v) for c, v in out["var"].items()}
    return {
        "date": out["date"],
        "realized": np.array(out["realized"]),
        "var": levels,
        "refit": np.array(out["refit"], dtype=int),
        "refit_failed": np.array(out["refit_failed"], dtype=int),
    }


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_report(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    for key in ("asset", "alpha", "dist", "dq", "ql"):
        if key not in doc:
            raise InputError(f"{path}: report lacks key {key!r}")
    return doc
