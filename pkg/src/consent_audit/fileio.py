"""Versioned on-disk schemas for the audit's CSV and JSONL artifacts.

Every file opens with a schema line naming the format and its version, so
downstream runs can refuse inputs they do not understand. Emission is fully
deterministic: fixed separators, sorted JSON keys, repr-based floats.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .errors import DataError

CSV_MAGIC = "#consent-audit-csv"
JSONL_SCHEMA_KEY = "_schema"
VERSION = 1


def format_cell(value) -> str:
    if isinstance(value, float):  # incl. numpy floats; repr of builtin float
        return repr(float(value))
    if value is None:
        return "NA"
    return str(value)


def render_csv(name: str, header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(f"{CSV_MAGIC} v{VERSION} {name}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path: str | Path, name: str, header: list[str], rows: list[list]) -> None:
    Path(path).write_text(render_csv(name, header, rows), encoding="utf-8")


def read_csv(path: str | Path, expected_name: str | None = None) -> tuple[list[str], list[list[str]]]:
    if not Path(path).exists():
        raise DataError(f"missing input file: {path}")
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].startswith(CSV_MAGIC):
        raise DataError(f"{path}: missing schema line ({CSV_MAGIC} ...)")
    parts = lines[0].split(None, 2)
    if len(parts) != 3 or parts[1] != f"v{VERSION}":
        raise DataError(f"{path}: unsupported schema line {lines[0]!r}")
    if expected_name is not None and parts[2] != expected_name:
        raise DataError(f"{path}: expected schema {expected_name!r}, found {parts[2]!r}")
    reader = csv.reader(lines[1:])
    rows = [row for row in reader if row]
    if not rows:
        raise DataError(f"{path}: no header row")
    return rows[0], rows[1:]


def write_jsonl(path: str | Path, name: str, records: list[str]) -> None:
    """Write pre-serialized JSON lines under a schema header record."""
    header = json.dumps({JSONL_SCHEMA_KEY: name, "_version": VERSION}, sort_keys=True)
    Path(path).write_text("\n".join([header, *records]) + "\n", encoding="utf-8")


def read_jsonl(path: str | Path, expected_name: str | None = None) -> list[str]:
    if not Path(path).exists():
        raise DataError(f"missing input file: {path}")
    lines = [
        line for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()
    ]
    if not lines:
        raise DataError(f"{path}: empty JSONL file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        raise DataError(f"{path}: first line is not a JSON schema record")
    if not isinstance(header, dict) or JSONL_SCHEMA_KEY not in header:
        raise DataError(f"{path}: missing {JSONL_SCHEMA_KEY!r} header record")
    if expected_name is not None and header[JSONL_SCHEMA_KEY] != expected_name:
        raise DataError(
            f"{path}: expected schema {expected_name!r}, found {header[JSONL_SCHEMA_KEY]!r}"
        )
    if header.get("_version") != VERSION:
        raise DataError(f"{path}: unsupported version {header.get('_version')!r}")
    return lines[1:]
