"""Monthly hydrological series: data model, CSV ingestion and chronological splits."""

from __future__ import annotations

import calendar
import csv
import io
import math
from dataclasses import dataclass, fields

import numpy as np

REQUIRED_COLUMNS = ("date", "p_mm", "t_c")
OPTIONAL_COLUMNS = ("q_mm", "et_mm", "sm_mm", "gw_mm", "pet_mm")
# Depth columns that must be non-negative; temperature is exempt.
DEPTH_COLUMNS = ("p_mm",) + OPTIONAL_COLUMNS


class ForcingFormatError(ValueError):
    """Malformed forcing CSV. Carries the 1-based data row and the column name."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


@dataclass(frozen=True, order=True)
class MonthKey:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month must be in 1..12, got {self.month}")

    @classmethod
    def parse(cls, text: str) -> "MonthKey":
        text = text.strip()
        parts = text.split("-")
        if len(parts) != 2 or len(parts[0]) != 4 or len(parts[1]) != 2:
            raise ValueError(f"expected YYYY-MM, got {text!r}")
        if not (parts[0].isdigit() and parts[1].isdigit()):
            raise ValueError(f"expected YYYY-MM, got {text!r}")
        return cls(int(parts[0]), int(parts[1]))

    @classmethod
    def from_index(cls, index: int) -> "MonthKey":
        return cls(index // 12, index % 12 + 1)

    @property
    def index(self) -> int:
        """Months since year 0; consecutive months differ by exactly one."""
        return self.year * 12 + self.month - 1

    def next(self) -> "MonthKey":
        return self.shift(1)

    def shift(self, months: int) -> "MonthKey":
        return MonthKey.from_index(self.index + months)

    @property
    def days(self) -> int:
        return calendar.monthrange(self.year, self.month)[1]

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def days_in_month(key: MonthKey) -> int:
    return key.days


@dataclass(frozen=True)
class MonthlyRecord:
    key: MonthKey
    p_mm: float
    t_c: float
    q_mm: float | None = None
    et_mm: float | None = None
    sm_mm: float | None = None
    gw_mm: float | None = None
    pet_mm: float | None = None

    def __post_init__(self):
        for f in fields(self):
            if f.name == "key":
                continue
            value = getattr(self, f.name)
            if value is None:
                if f.name in REQUIRED_COLUMNS:
                    raise ValueError(f"{f.name} is required")
                continue
            if not math.isfinite(value):
                raise ValueError(f"{f.name} must be finite, got {value}")
            if f.name in DEPTH_COLUMNS and value < 0:
                raise ValueError(f"{f.name} must be >= 0, got {value}")


class MonthlySeries:
    """Gap-free, strictly monthly sequence of records."""

    def __init__(self, records):
        records = tuple(records)
        if not records:
            raise ValueError("a monthly series must contain at least one record")
        for prev, cur in zip(records, records[1:]):
            if cur.key.index != prev.key.index + 1:
                raise ValueError(f"series is not contiguous between {prev.key} and {cur.key}")
        self._records = records

    @property
    def records(self) -> tuple[MonthlyRecord, ...]:
        return self._records

    @property
    def keys(self) -> tuple[MonthKey, ...]:
        return tuple(r.key for r in self._records)

    @property
    def start(self) -> MonthKey:
        return self._records[0].key

    @property
    def end(self) -> MonthKey:
        return self._records[-1].key

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return MonthlySeries(self._records[item])
        return self._records[item]

    def __eq__(self, other) -> bool:
        if not isinstance(other, MonthlySeries):
            return NotImplemented
        return self._records == other._records

    def __repr__(self) -> str:
        return f"MonthlySeries({self.start}..{self.end}, n={len(self)})"

    def has_column(self, name: str) -> bool:
        """True when every record carries a value for ``name``."""
        return all(getattr(r, name) is not None for r in self._records)

    def column(self, name: str) -> np.ndarray:
        values = [getattr(r, name) for r in self._records]
        missing = [str(r.key) for r, v in zip(self._records, values) if v is None]
        if missing:
            raise ValueError(f"column {name} missing for {len(missing)} month(s), first {missing[0]}")
        return np.asarray(values, dtype=float)

    def optional_column(self, name: str) -> list[float | None]:
        return [getattr(r, name) for r in self._records]

    def index_of(self, key: MonthKey) -> int:
        offset = key.index - self.start.index
        if not 0 <= offset < len(self):
            raise KeyError(f"{key} outside series span {self.start}..{self.end}")
        return offset


def concat(*parts: MonthlySeries) -> MonthlySeries:
    return MonthlySeries(r for part in parts for r in part)


@dataclass(frozen=True)
class Forcing:
    """Model inputs only: dates, precipitation, temperature and PET.

    Deliberately holds no observed fields so that prediction paths cannot
    read observations.
    """

    keys: tuple[MonthKey, ...]
    p_mm: np.ndarray
    t_c: np.ndarray
    pet_mm: np.ndarray

    def __post_init__(self):
        n = len(self.keys)
        for name in ("p_mm", "t_c", "pet_mm"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)
        if n == 0:
            raise ValueError("forcing must be non-empty")
        if np.any(self.p_mm < 0) or np.any(self.pet_mm < 0):
            raise ValueError("precipitation and PET must be >= 0")

    def __len__(self) -> int:
        return len(self.keys)

    def __getitem__(self, item: slice) -> "Forcing":
        return Forcing(self.keys[item], self.p_mm[item], self.t_c[item], self.pet_mm[item])


def _parse_float(cell: str, row: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ForcingFormatError(f"not a number: {cell!r}", row, column) from None
    if not math.isfinite(value):
        raise ForcingFormatError(f"non-finite value: {cell!r}", row, column)
    return value


def parse_forcing_csv(text: str, area_km2: float | None = None) -> tuple[MonthlySeries, list[str]]:
    """Parse a forcing/observation CSV document.

    Returns the series and a list of warnings (currently: ignored extra
    columns). A ``q_cms`` column is converted to ``q_mm`` when ``area_km2`` is
    given.
    """
    if text.startswith("﻿"):
        text = text[1:]
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ForcingFormatError("empty document") from None

    for name in REQUIRED_COLUMNS:
        if name not in header:
            raise ForcingFormatError("missing required column", row=0, column=name)
    seen = set()
    for name in header:
        if name in seen:
            raise ForcingFormatError("duplicate column", row=0, column=name)
        seen.add(name)

    convert_cms = "q_cms" in header and area_km2 is not None
    if convert_cms and "q_mm" in header:
        raise ForcingFormatError("both q_mm and q_cms given", row=0, column="q_cms")
    known = set(REQUIRED_COLUMNS) | set(OPTIONAL_COLUMNS)
    if convert_cms:
        known.add("q_cms")
    warnings = [f"ignored column {name!r}" for name in header if name not in known]
    position = {name: i for i, name in enumerate(header)}

    records = []
    prev_key = None
    for row_no, cells in enumerate(reader, start=1):
        if not cells or all(not c.strip() for c in cells):
            continue
        if len(cells) != len(header):
            raise ForcingFormatError(f"expected {len(header)} cells, found {len(cells)}", row_no)
        try:
            key = MonthKey.parse(cells[position["date"]])
        except ValueError as exc:
            raise ForcingFormatError(str(exc), row_no, "date") from None
        if prev_key is not None:
            if key == prev_key:
                raise ForcingFormatError(f"duplicate month {key}", row_no, "date")
            if key.index < prev_key.index:
                raise ForcingFormatError(f"month {key} out of order after {prev_key}", row_no, "date")
            if key.index != prev_key.index + 1:
                raise ForcingFormatError(f"gap: missing month {prev_key.next()}", row_no, "date")

        values = {}
        for name in REQUIRED_COLUMNS[1:] + OPTIONAL_COLUMNS + ("q_cms",):
            if name not in position or name not in known:
                continue
            cell = cells[position[name]].strip()
            if cell == "":
                if name in REQUIRED_COLUMNS:
                    raise ForcingFormatError("empty required cell", row_no, name)
                continue
            value = _parse_float(cell, row_no, name)
            if name != "t_c" and value < 0:
                raise ForcingFormatError(f"negative depth {value}", row_no, name)
            values[name] = value
        if "q_cms" in values:
            values["q_mm"] = cms_to_mm_per_month(values.pop("q_cms"), area_km2, key)
        records.append(MonthlyRecord(key=key, **values))
        prev_key = key

    if not records:
        raise ForcingFormatError("no data rows")
    return MonthlySeries(records), warnings


def serialize_csv(series: MonthlySeries) -> str:
    """Write a series back to the CSV schema; optional columns only if any value is present."""
    columns = list(REQUIRED_COLUMNS) + [
        name for name in OPTIONAL_COLUMNS if any(v is not None for v in series.optional_column(name))
    ]
    lines = [",".join(columns)]
    for rec in series:
        cells = [str(rec.key)]
        for name in columns[1:]:
            value = getattr(rec, name)
            cells.append("" if value is None else repr(float(value)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def split_at(series: MonthlySeries, boundary: MonthKey) -> tuple[MonthlySeries, MonthlySeries]:
    """Partition into (key < boundary, key >= boundary). Both parts must be non-empty."""
    if not series.start < boundary <= series.end:
        raise ValueError(
            f"split boundary {boundary} must lie strictly inside {series.start}..{series.end}"
        )
    cut = series.index_of(boundary)
    return series[:cut], series[cut:]


def cms_to_mm_per_month(q_cms: float, area_km2: float, key: MonthKey) -> float:
    """Convert mean discharge (m3/s) over a month to a depth (mm) over the catchment."""
    if area_km2 is None or not area_km2 > 0:
        raise ValueError(f"catchment area must be positive, got {area_km2}")
    if q_cms < 0:
        raise ValueError(f"discharge must be >= 0, got {q_cms}")
    volume_m3 = q_cms * 86400.0 * key.days
    return volume_m3 / (area_km2 * 1e6) * 1000.0
