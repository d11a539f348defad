"""Deterministic CSV and JSON rendering of result tables.

Floats are written with 12 significant digits, field order follows the
given schema, and the resolved run configuration travels with the data:
as a ``# config:`` comment line in CSV and as a ``config`` object in JSON.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math

__all__ = ["DIGITS", "format_value", "normalize", "render_report", "parse_csv_report"]

DIGITS = 12


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, f".{DIGITS}g")
    return str(v)


def normalize(obj):
    """Round floats to 12 digits and turn dataclasses/tuples into JSON types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        obj = {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float) or hasattr(obj, "__float__"):
        v = float(obj)
        return None if not math.isfinite(v) else float(format(v, f".{DIGITS}g"))
    return str(obj)


def render_report(rows, fmt: str = "json", fields=None, config: dict | None = None,
                  extra: dict | None = None) -> bytes:
    """Render ``rows`` (dicts or dataclasses) as CSV or JSON bytes.

    Parameters
    ----------
    rows : iterable
        Result records.
    fmt : {"csv", "json"}
    fields : list of str, optional
        Column order; defaults to the keys of the first row.
    config : dict, optional
        Resolved run configuration embedded in the output.
    extra : dict, optional
        Additional top-level JSON members (ignored for CSV).
    """
    rows = [normalize(r) for r in rows]
    if fields is None:
        fields = list(rows[0]) if rows else []
    if fmt == "csv":
        buf = io.StringIO()
        if config is not None:
            buf.write("# config: " + json.dumps(normalize(config), sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([format_value(r.get(k)) for k in fields])
        return buf.getvalue().encode()
    if fmt == "json":
        doc = {}
        if config is not None:
            doc["config"] = normalize(config)
        if extra:
            doc.update(normalize(extra))
        doc["results"] = [{k: r.get(k) for k in fields} for r in rows]
        return (json.dumps(doc, indent=2) + "\n").encode()
    raise ValueError(f"unknown report format {fmt!r}")


def parse_csv_report(data: bytes | str) -> tuple[dict | None, list[dict]]:
    """Read back a CSV produced by :func:`render_report` (values as strings)."""
    text = data.decode() if isinstance(data, bytes) else data
    lines = text.splitlines()
    config = None
    if lines and lines[0].startswith("# config: "):
        config = json.loads(lines[0][len("# config: "):])
        lines = lines[1:]
    return config, list(csv.DictReader(lines))
