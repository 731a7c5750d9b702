"""CSV schemas of the experiments, with deterministic emission and parsing."""

import csv
import io
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, TextIO, Tuple, Union

from .errors import ConfigError

SCHEMAS: Dict[str, Tuple[str, ...]] = {
    "gap-table": (
        "n", "model", "x_star", "variant", "staffing", "cost_prescribed",
        "staffing_optimal", "cost_optimal", "gap", "normalized_gap", "flags",
    ),
    "approx-check": ("n", "x", "exact_EQ", "leading", "correction", "residual", "flags"),
    "constrained": ("n", "alpha", "x_star", "staffing_sqrt", "staffing_exact", "server_gap"),
}

SUMMARY = "summary"
SIGNIFICANT_DIGITS = 12


def format_value(value: Any) -> str:
    """12 significant digits for reals, explicit inf/nan markers, text unchanged."""
    if value is None:
        return "nan"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if value.is_integer() and abs(value) < 1e15:
            return str(int(value))
        return f"{value:.{SIGNIFICANT_DIGITS}g}"
    if isinstance(value, (tuple, list)):
        return ";".join(str(v) for v in value)
    return str(value)


def parse_value(text: str) -> Union[int, float, str]:
    """Inverse of format_value for a single cell."""
    if text in ("nan", "inf", "-inf"):
        return float(text)
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def normalize_row(row: Mapping[str, Any], schema: str) -> Dict[str, Any]:
    """The row as it reads back after emission."""
    return {column: parse_value(format_value(row.get(column))) for column in SCHEMAS[schema]}


def detect_schema(header: Sequence[str]) -> str:
    """Name of the schema with exactly this header.

    Raises:
        ConfigError: If the header matches no schema.
    """
    for name, columns in SCHEMAS.items():
        if tuple(header) == columns:
            return name
    raise ConfigError("csv", f"unknown schema with header {','.join(header)!r}")


def write_rows(stream: TextIO, schema: str, rows: Iterable[Mapping[str, Any]]) -> None:
    """Write the header and rows of ``schema`` to an open text stream."""
    if schema not in SCHEMAS:
        raise ConfigError("schema", f"unknown schema {schema!r}")
    columns = SCHEMAS[schema]
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(column)) for column in columns])


def emit_csv(path: Union[str, Path], schema: str, rows: Iterable[Mapping[str, Any]]) -> Path:
    """Write a UTF-8, LF-terminated CSV file and return its path."""
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as stream:
        write_rows(stream, schema, rows)
    return path


def dumps(schema: str, rows: Iterable[Mapping[str, Any]]) -> str:
    buffer = io.StringIO()
    write_rows(buffer, schema, rows)
    return buffer.getvalue()


def loads(text: str) -> Tuple[str, List[Dict[str, Any]]]:
    """Parse CSV text into ``(schema, rows)``."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ConfigError("csv", "missing header row")
    schema = detect_schema(header)
    rows = []
    for record in reader:
        if not record:
            continue
        if len(record) != len(header):
            raise ConfigError("csv", f"expected {len(header)} columns, got {len(record)}")
        rows.append({column: parse_value(cell) for column, cell in zip(header, record)})
    return schema, rows


def parse_csv(path: Union[str, Path]) -> Tuple[str, List[Dict[str, Any]]]:
    """Read a CSV written by emit_csv."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError("csv", f"cannot read {path}: {e}") from e
    return loads(text)


def data_rows(rows: Iterable[Mapping[str, Any]]) -> List[Mapping[str, Any]]:
    """Rows other than rate-fit summaries."""
    return [row for row in rows if row.get("n") != SUMMARY]


def summary_rows(rows: Iterable[Mapping[str, Any]], key: Optional[str] = None) -> List[Mapping[str, Any]]:
    found = [row for row in rows if row.get("n") == SUMMARY]
    return found if key is None else [row for row in found if key in str(row.get("flags", ""))]
