"""Delimited output with an embedded run manifest.

CSV layout::

    # command=clicks
    # n_detectors=8
    # ...
    k,p_click
    0,0.64805427366388540
    ...

Manifest values are written as JSON so they read back with their types.
The JSON layout holds the same content as
``{"manifest": {...}, "columns": [...], "rows": [[...], ...]}``.
"""
from __future__ import annotations

import csv
import io
import json
from collections.abc import Mapping, Sequence
from typing import Any

FORMATS = ("csv", "json")


def format_number(x: Any) -> str:
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".17g")


def render(
    manifest: Mapping[str, Any],
    columns: Sequence[str],
    rows: Sequence[Sequence[Any]],
    fmt: str = "csv",
) -> str:
    if fmt == "json":
        doc = {
            "manifest": dict(manifest),
            "columns": list(columns),
            "rows": [[_json_number(v) for v in row] for row in rows],
        }
        return json.dumps(doc, indent=1) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    for key, value in manifest.items():
        buf.write(f"# {key}={json.dumps(value, sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return buf.getvalue()


def _json_number(v: Any) -> Any:
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return v
    return float(v)


def parse(text: str) -> tuple[dict[str, Any], list[str], list[list[float]]]:
    """Inverse of ``render`` for either format."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        doc = json.loads(text)
        return doc["manifest"], doc["columns"], doc["rows"]
    manifest: dict[str, Any] = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            manifest[key] = json.loads(value)
        elif line.strip():
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    rows = [[float(v) for v in row] for row in reader]
    return manifest, columns, rows
