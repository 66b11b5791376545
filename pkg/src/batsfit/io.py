"""Ingestion of daily station records and metadata headers for outputs."""
from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import ConfigError, DomainError, ParseError
from .estimation.series import ObservationSeries

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
TEMP_BOUNDS = (-90.0, 60.0)
REQUIRED = ("station", "date", "temp")


@dataclass
class IngestReport:
    rows: int = 0
    kept: int = 0
    dropped_bounds: int = 0
    dropped_hours: int = 0
    duplicates: int = 0
    stations: list = field(default_factory=list)

    @property
    def dropped(self):
        return self.dropped_bounds + self.dropped_hours + self.duplicates

    def to_dict(self):
        return {"rows": self.rows, "kept": self.kept, "dropped": self.dropped,
                "dropped_bounds": self.dropped_bounds, "dropped_hours": self.dropped_hours,
                "duplicates": self.duplicates, "stations": self.stations}


def _data_lines(fh):
    for lineno, line in enumerate(fh, start=1):
        if line.startswith("#") or not line.strip():
            continue
        yield lineno, line


def ingest_with_report(path, covariate=None, min_hours=20, fahrenheit=False, station=None):
    """Parse ``station,date,temp[,hours]`` rows into a sorted daily series.

    Rows outside the physical bounds, or with fewer than ``min_hours`` hours
    when that column is present, are dropped; repeated dates keep the first
    row. Temperatures are converted from Fahrenheit when asked.
    """
    report = IngestReport()
    recs = {}
    with open(path, newline="", encoding="utf-8") as fh:
        lines = _data_lines(fh)
        try:
            hline, header = next(lines)
        except StopIteration:
            raise ParseError("no valid observations: file has no header") from None
        cols = [c.strip().lower() for c in next(csv.reader([header]))]
        if cols[:3] != list(REQUIRED) or len(cols) > 4 or (len(cols) == 4 and cols[3] != "hours"):
            raise ParseError(f"header must be station,date,temp[,hours], got {header.strip()!r}",
                             hline)
        has_hours = len(cols) == 4
        for lineno, line in lines:
            row = [c.strip() for c in next(csv.reader([line]))]
            if len(row) != len(cols):
                raise ParseError(f"expected {len(cols)} fields, found {len(row)}", lineno)
            report.rows += 1
            sid = row[0]
            if station is not None and sid != station:
                continue
            try:
                date = dt.date.fromisoformat(row[1])
            except ValueError:
                raise ParseError(f"unparseable date {row[1]!r}", lineno) from None
            try:
                temp = float(row[2])
                hours = float(row[3]) if has_hours and row[3] != "" else None
            except ValueError:
                raise ParseError(f"unparseable number in {line.strip()!r}", lineno) from None
            if fahrenheit:
                temp = (temp - 32.0) * 5.0 / 9.0
            if not (TEMP_BOUNDS[0] <= temp <= TEMP_BOUNDS[1]):
                report.dropped_bounds += 1
                continue
            if hours is not None and hours < min_hours:
                report.dropped_hours += 1
                continue
            if sid not in report.stations:
                report.stations.append(sid)
            if date in recs:
                report.duplicates += 1
                log.warning("duplicate date %s on line %d ignored", date, lineno)
                continue
            recs[date] = (sid, temp)
    if not recs:
        raise ParseError("no valid observations")
    if len(report.stations) > 1:
        raise ConfigError(f"file holds several stations {report.stations}; choose one")
    dates = sorted(recs)
    report.kept = len(dates)
    log.info("ingested %d of %d rows (%d out of bounds, %d short hours, %d duplicates)",
             report.kept, report.rows, report.dropped_bounds, report.dropped_hours,
             report.duplicates)
    series = ObservationSeries(report.stations[0], np.array(dates, dtype="datetime64[D]"),
                               np.array([recs[d][1] for d in dates]), dates[0], covariate)
    return series, report


def ingest(path, covariate=None, min_hours=20, fahrenheit=False, station=None) -> ObservationSeries:
    return ingest_with_report(path, covariate, min_hours, fahrenheit, station)[0]


def config_hash(config):
    text = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def metadata_lines(config=None, seed=None, **extra):
    """Comment lines (without the leading ``#``) for every emitted file."""
    lines = [f"tool_version={__version__}", f"format_version={FORMAT_VERSION}",
             f"config_hash={config_hash(config or {})}", f"seed={seed}"]
    lines.extend(f"{k}={v}" for k, v in extra.items())
    return lines


def write_series(path, series: ObservationSeries, header_lines=()):
    """Canonical form: ``station,date,temp`` with round-trip exact values."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(REQUIRED)
        for d, v in zip(series.dates, series.values):
            w.writerow([series.station_id, str(d), repr(float(v))])


def write_table(path, columns, rows, header_lines=()):
    """Plain CSV with a metadata block; floats written with ``repr``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def read_table(path):
    """Columns of a CSV written by ``write_table`` (comment lines skipped)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(line for _, line in _data_lines(fh)))
    if not rows:
        raise DomainError(f"{path} holds no table")
    return rows[0], rows[1:]
