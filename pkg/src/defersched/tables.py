"""Flat tables with exact CSV round-trips.

Floats are rounded to 12 significant digits when a table is built, so the
text written to disk is exactly the value held in memory. Scalar metadata
rides along as ``# key: value`` lines above the header.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional, Sequence, TextIO

DIGITS = 12
_INT = re.compile(r"[-+]?\d+$")


def quantize(value: Any) -> Any:
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float):
        return float(f"{value:.{DIGITS}g}") if math.isfinite(value) else value
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        return quantize(value.item())
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def _format(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.{DIGITS}g}"
    return str(value)


def _parse(text: str) -> Any:
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    if _INT.match(text):
        return int(text)
    try:
        return float(text)
    except ValueError:
        return text


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple]
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.columns = tuple(self.columns)
        width = len(self.columns)
        rows = []
        for row in self.rows:
            if len(row) != width:
                raise ValueError(f"row has {len(row)} cells, expected {width}")
            rows.append(tuple(quantize(v) for v in row))
        self.rows = rows
        self.meta = {k: quantize(v) for k, v in self.meta.items()}

    @classmethod
    def from_dicts(cls, records: Sequence[Mapping[str, Any]], columns: Optional[Sequence[str]] = None,
                   meta: Optional[Mapping[str, Any]] = None) -> "Table":
        columns = tuple(columns or (records[0].keys() if records else ()))
        return cls(columns, [tuple(r.get(c) for c in columns) for r in records], dict(meta or {}))

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Table):
            return NotImplemented
        return (self.columns == other.columns and _same(self.meta, other.meta)
                and len(self.rows) == len(other.rows)
                and all(_same(a, b) for a, b in zip(self.rows, other.rows)))


def _same(a: Any, b: Any) -> bool:
    """Equality that treats two NaNs as equal."""
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_same(a[k], b[k]) for k in a)
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return a == b


def write_csv(table: Table, fh: TextIO) -> None:
    for key, value in table.meta.items():
        fh.write(f"# {key}: {_format(value)}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_format(v) for v in row])


def read_csv(fh: TextIO) -> Table:
    meta = {}
    body = []
    for line in fh:
        if line.startswith("# "):
            key, _, value = line[2:].rstrip("\n").partition(": ")
            meta[key] = _parse(value)
        else:
            body.append(line)
    reader = csv.reader(io.StringIO("".join(body)))
    header = next(reader, None)
    if header is None:
        return Table((), [], meta)
    rows = [tuple(_parse(cell) for cell in row) for row in reader]
    return Table(tuple(header), rows, meta)


def to_csv(table: Table) -> str:
    buf = io.StringIO()
    write_csv(table, buf)
    return buf.getvalue()


def from_csv(text: str) -> Table:
    return read_csv(io.StringIO(text))


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def to_json(tables: Mapping[str, Table], extra: Optional[Mapping[str, Any]] = None) -> str:
    doc: dict[str, Any] = {k: _jsonable(quantize(v)) for k, v in (extra or {}).items()}
    for name, table in tables.items():
        doc.setdefault("meta", {}).update({k: _jsonable(v) for k, v in table.meta.items()})
        doc[name] = [{k: _jsonable(v) for k, v in rec.items()} for rec in table.records()]
    return json.dumps(doc, indent=2)


def concat(tables: Iterable[Table]) -> Table:
    tables = list(tables)
    meta: dict[str, Any] = {}
    rows: list[tuple] = []
    for t in tables:
        meta.update(t.meta)
        rows.extend(t.rows)
    return Table(tables[0].columns if tables else (), rows, meta)
