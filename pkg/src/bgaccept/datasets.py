"""CSV ingestion for moment and risk-neutral parameter datasets.

Both loaders match columns by header name, so any column order works;
missing or unknown columns are errors. Error messages quote the file
line number (the header is line 1).
"""

import csv
import datetime as dt
import math
from dataclasses import dataclass

from .bg_core import BGParams, GainLossMoments
from .errors import ValidationError

MOMENT_COLUMNS = ("ticker", "date", "mu_p", "sigma_p", "mu_n", "sigma_n")
RISK_NEUTRAL_COLUMNS = ("ticker", "date", "maturity", "b_p", "c_p", "b_n", "c_n", "r")
SAMPLE_COLUMN = "return"


@dataclass(frozen=True)
class MomentsRecord:
    ticker: str
    date: dt.date
    moments: GainLossMoments


@dataclass(frozen=True)
class RiskNeutralRecord:
    ticker: str
    date: dt.date
    maturity: float
    params: BGParams
    r: float


def _read_rows(path, columns):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise ValidationError(f"{path}: empty file")
        header = [h.strip() for h in header]
        missing = [c for c in columns if c not in header]
        if missing:
            raise ValidationError(f"{path}: missing column(s) {', '.join(missing)}")
        extra = [h for h in header if h not in columns]
        if extra:
            raise ValidationError(f"{path}: unexpected column(s) {', '.join(extra)}")
        if len(set(header)) != len(header):
            raise ValidationError(f"{path}: duplicate column names in header")
        rows = []
        for line_no, raw in enumerate(reader, start=2):
            if not raw or all(not v.strip() for v in raw):
                continue
            if len(raw) != len(header):
                raise ValidationError(f"{path}, line {line_no}: expected {len(header)} fields, got {len(raw)}")
            rows.append((line_no, dict(zip(header, (v.strip() for v in raw)))))
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return rows


def _float(path, line_no, row, name):
    try:
        v = float(row[name])
    except ValueError:
        raise ValidationError(f"{path}, line {line_no}: cannot parse {name}={row[name]!r}") from None
    if not math.isfinite(v):
        raise ValidationError(f"{path}, line {line_no}: {name} is not finite")
    return v


def _date(path, line_no, row):
    try:
        return dt.date.fromisoformat(row["date"])
    except ValueError:
        raise ValidationError(f"{path}, line {line_no}: bad ISO date {row['date']!r}") from None


def _ticker(path, line_no, row):
    if not row["ticker"]:
        raise ValidationError(f"{path}, line {line_no}: empty ticker")
    return row["ticker"]


def load_moments(path):
    records = []
    for line_no, row in _read_rows(path, MOMENT_COLUMNS):
        vals = {k: _float(path, line_no, row, k) for k in MOMENT_COLUMNS[2:]}
        try:
            m = GainLossMoments(**vals)
        except ValidationError as exc:
            raise ValidationError(f"{path}, line {line_no}: {exc}") from None
        records.append(MomentsRecord(_ticker(path, line_no, row), _date(path, line_no, row), m))
    return records


def load_risk_neutral(path):
    records = []
    for line_no, row in _read_rows(path, RISK_NEUTRAL_COLUMNS):
        vals = {k: _float(path, line_no, row, k) for k in RISK_NEUTRAL_COLUMNS[2:]}
        if not vals["maturity"] > 0:
            raise ValidationError(f"{path}, line {line_no}: maturity must be positive")
        try:
            p = BGParams(vals["b_p"], vals["c_p"], vals["b_n"], vals["c_n"])
        except ValidationError as exc:
            raise ValidationError(f"{path}, line {line_no}: {exc}") from None
        records.append(
            RiskNeutralRecord(
                _ticker(path, line_no, row), _date(path, line_no, row), vals["maturity"], p, vals["r"]
            )
        )
    return records


def load_sample(path):
    """Single-column CSV of returns under the header ``return``."""
    return [_float(path, n, row, SAMPLE_COLUMN) for n, row in _read_rows(path, (SAMPLE_COLUMN,))]
