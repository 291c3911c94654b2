"""Brokerage tape ingestion: parse, validate, and summarize trade records.

A tape is delimiter-separated text (comma, tab, or semicolon), one
executed trade per row, with columns Trddt (ISO date), Stkprc (price in
CNY), Parcha (order nature, B or S, sometimes missing), and Trdtims
(number of shares).  Files start with one or more header rows (column
names, units); anything before the first row whose date field parses is
treated as header material.  Rows with a missing or unrecognized side
flag are kept with side=Unknown; malformed rows are reported per line,
never silently dropped.
"""

from __future__ import annotations

import datetime as dt
import enum
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

DELIMITERS = (",", "\t", ";")
UNKNOWN_SIDE_FLAG_THRESHOLD = 0.10


class Side(enum.Enum):
    BUY = "B"
    SELL = "S"
    UNKNOWN = ""


@dataclass(frozen=True)
class TapeRecord:
    date: dt.date
    price: float
    side: Side
    volume: int


@dataclass(frozen=True)
class TapeColumns:
    """Zero-based column positions of the four tape fields."""

    date: int = 0
    price: int = 1
    side: int = 2
    volume: int = 3
    delimiter: Optional[str] = None  # None = auto-detect


@dataclass(frozen=True)
class RowError:
    line_no: int  # 1-based line number in the input
    reason: str
    raw: str


@dataclass
class ParseResult:
    records: list[TapeRecord]
    errors: list[RowError]
    n_data_rows: int
    n_header_rows: int


@dataclass(frozen=True)
class TapeSummary:
    trade_count: int
    min_price: float
    avg_price: float
    max_price: float
    std_price: float
    avg_daily_volume: float
    sample_volume_variance: float
    unknown_side_fraction: float


@dataclass
class ValidationReport:
    n_records: int
    unknown_side_count: int
    unknown_side_fraction: float
    unknown_side_flag: bool
    rejected_by_reason: dict[str, int] = field(default_factory=dict)
    n_rejected: int = 0

    def to_dict(self) -> dict:
        return {
            "n_records": self.n_records,
            "unknown_side_count": self.unknown_side_count,
            "unknown_side_fraction": self.unknown_side_fraction,
            "unknown_side_flag": self.unknown_side_flag,
            "rejected_by_reason": dict(sorted(self.rejected_by_reason.items())),
            "n_rejected": self.n_rejected,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _parse_date(text: str) -> Optional[dt.date]:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        return None


def _detect_delimiter(lines: list[str]) -> str:
    counts = {d: 0 for d in DELIMITERS}
    for line in lines[:20]:
        for d in DELIMITERS:
            counts[d] += line.count(d)
    best = max(DELIMITERS, key=lambda d: counts[d])
    return best if counts[best] > 0 else ","


def _parse_side(text: str) -> Side:
    flag = text.strip().upper()
    if flag == "B":
        return Side.BUY
    if flag == "S":
        return Side.SELL
    return Side.UNKNOWN


def parse_tape(stream: Iterable[str] | str, columns: TapeColumns = TapeColumns()) -> ParseResult:
    """Parse a tape into date-ordered records plus per-row error reports.

    `stream` may be an open file, any iterable of lines, or one string.
    Rows are sorted by date (stable within a day).  Every data row ends
    up either in `records` or in `errors`.
    """
    if isinstance(stream, str):
        lines = stream.splitlines()
    else:
        lines = [line.rstrip("\r\n") for line in stream]

    delimiter = columns.delimiter or _detect_delimiter([ln for ln in lines if ln.strip()])
    needed = max(columns.date, columns.price, columns.side, columns.volume) + 1

    records: list[tuple[int, TapeRecord]] = []
    errors: list[RowError] = []
    n_header = 0
    n_data = 0
    in_header = True

    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        fields = line.split(delimiter)
        date = _parse_date(fields[columns.date]) if len(fields) > columns.date else None
        if in_header:
            if date is None:
                n_header += 1
                continue
            in_header = False

        n_data += 1
        if len(fields) < needed:
            errors.append(RowError(line_no, "short row", line))
            continue
        if date is None:
            errors.append(RowError(line_no, "malformed date", line))
            continue
        try:
            price = float(fields[columns.price])
        except ValueError:
            errors.append(RowError(line_no, "malformed price", line))
            continue
        if not math.isfinite(price) or price <= 0:
            errors.append(RowError(line_no, "nonpositive price", line))
            continue
        try:
            volume = int(fields[columns.volume].strip())
        except ValueError:
            errors.append(RowError(line_no, "malformed volume", line))
            continue
        if volume <= 0:
            errors.append(RowError(line_no, "nonpositive volume", line))
            continue
        records.append((line_no, TapeRecord(date, price, _parse_side(fields[columns.side]), volume)))

    records.sort(key=lambda item: (item[1].date, item[0]))
    return ParseResult([rec for _, rec in records], errors, n_data, n_header)


def serialize(records: Iterable[TapeRecord]) -> str:
    """Canonical comma-separated form; parse_tape(serialize(r)) == r."""
    lines = ["Trddt,Stkprc,Parcha,Trdtims"]
    for rec in records:
        lines.append(f"{rec.date.isoformat()},{rec.price!r},{rec.side.value},{rec.volume}")
    return "\n".join(lines) + "\n"


def read_tape(path, columns: TapeColumns = TapeColumns()) -> ParseResult:
    with open(path, encoding="utf-8") as handle:
        return parse_tape(handle, columns)


def write_canonical(records: Iterable[TapeRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(serialize(records))


def summarize(records: list[TapeRecord], side: Optional[Side] = None) -> TapeSummary:
    """Descriptive statistics for a tape, optionally restricted to one side.

    avg_daily_volume is total volume over distinct trading days; the
    volume variance is the unbiased per-trade variance (0 for a single
    trade); price std likewise.
    """
    if side is not None:
        records = [rec for rec in records if rec.side is side]
    if not records:
        raise ValueError("no records")

    n = len(records)
    prices = [rec.price for rec in records]
    volumes = [rec.volume for rec in records]
    # fsum keeps the statistics exactly permutation-invariant
    avg_price = math.fsum(prices) / n
    avg_volume = math.fsum(volumes) / n
    if n > 1:
        std_price = math.sqrt(math.fsum((p - avg_price) ** 2 for p in prices) / (n - 1))
        var_volume = math.fsum((v - avg_volume) ** 2 for v in volumes) / (n - 1)
    else:
        std_price = 0.0
        var_volume = 0.0
    n_days = len({rec.date for rec in records})
    unknown = sum(1 for rec in records if rec.side is Side.UNKNOWN)
    return TapeSummary(
        trade_count=n,
        min_price=min(prices),
        avg_price=avg_price,
        max_price=max(prices),
        std_price=std_price,
        avg_daily_volume=math.fsum(volumes) / n_days,
        sample_volume_variance=var_volume,
        unknown_side_fraction=unknown / n,
    )


def validate(records: list[TapeRecord], errors: Iterable[RowError] = ()) -> ValidationReport:
    """Report-only checks: unknown-side share and rejected-row tallies.

    The unknown-side flag raises when more than 10% of records carry no
    B/S stamp, the documented quality bound for these tapes.
    """
    n = len(records)
    unknown = sum(1 for rec in records if rec.side is Side.UNKNOWN)
    fraction = unknown / n if n else 0.0
    by_reason: dict[str, int] = {}
    n_rejected = 0
    for err in errors:
        by_reason[err.reason] = by_reason.get(err.reason, 0) + 1
        n_rejected += 1
    return ValidationReport(
        n_records=n,
        unknown_side_count=unknown,
        unknown_side_fraction=fraction,
        unknown_side_flag=fraction > UNKNOWN_SIDE_FLAG_THRESHOLD,
        rejected_by_reason=by_reason,
        n_rejected=n_rejected,
    )
