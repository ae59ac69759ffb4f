"""File formats: wide CSV panels, JSON documents, atomic writes.

A panel CSV has one header row of series names and one row per time step.
Lines starting with ``#`` before the header are metadata comments; writers
use one such line to carry the resolved run configuration as JSON.  Values
are written with 17 significant digits, so a write/read round trip is exact.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ParseError
from .graph import DependencyGraph
from .model import GroundTruthGraph, TimeSeriesPanel

META_PREFIX = "# config: "


def parse_panel_csv(text: str, source: str = "<string>") -> TimeSeriesPanel:
    """Parse wide-CSV text into a panel.

    Raises
    ------
    ParseError
        On an empty file, duplicate or blank header names, ragged rows,
        empty cells or non-numeric / non-finite entries.  The message
        names the 1-based line and the column.
    """
    lines = text.splitlines()
    first = 0
    while first < len(lines) and lines[first].lstrip().startswith("#"):
        first += 1
    body = lines[first:]
    if not body or not body[0].strip():
        raise ParseError(f"{source}: line {first + 1}: missing header row")
    rows = list(csv.reader(body))
    header = [h.strip() for h in rows[0]]
    seen = {}
    for col, name in enumerate(header, start=1):
        if not name:
            raise ParseError(f"{source}: line {first + 1}, column {col}: empty series name")
        if name in seen:
            raise ParseError(f"{source}: line {first + 1}, column {col}: duplicate series name "
                             f"{name!r} (first at column {seen[name]})")
        seen[name] = col
    values = []
    for k, row in enumerate(rows[1:], start=2):
        lineno = first + k
        if not row or (len(row) == 1 and not row[0].strip()):
            # blank trailing lines are tolerated, blank lines inside are not
            if any(r and any(c.strip() for c in r) for r in rows[k:]):
                raise ParseError(f"{source}: line {lineno}: blank line inside the data")
            break
        if len(row) != len(header):
            raise ParseError(f"{source}: line {lineno}: expected {len(header)} cells, found {len(row)}")
        out = []
        for col, cell in enumerate(row, start=1):
            cell = cell.strip()
            where = f"{source}: line {lineno}, column {col} ({header[col - 1]})"
            if not cell:
                raise ParseError(f"{where}: empty cell")
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{where}: not a number: {cell!r}") from None
            if not math.isfinite(v):
                raise ParseError(f"{where}: non-finite value {cell!r}")
            out.append(v)
        values.append(out)
    if not values:
        raise ParseError(f"{source}: no data rows")
    return TimeSeriesPanel(header, np.array(values, dtype=float))


def read_panel_csv(path) -> TimeSeriesPanel:
    path = Path(path)
    try:
        text = path.read_text()
    except UnicodeDecodeError as err:
        raise ParseError(f"{path}: not a text file ({err})") from None
    return parse_panel_csv(text, str(path))


def read_csv_metadata(text: str) -> dict | None:
    """The JSON config stored in a leading ``# config:`` line, if any."""
    for line in text.splitlines():
        if line.startswith(META_PREFIX):
            return json.loads(line[len(META_PREFIX):])
        if not line.startswith("#"):
            break
    return None


def _meta_line(meta: dict | None) -> str:
    return "" if meta is None else META_PREFIX + json.dumps(meta, sort_keys=True) + "\n"


def format_value(v: float) -> str:
    return format(float(v), ".17g")


def format_panel_csv(panel: TimeSeriesPanel, meta: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(_meta_line(meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(panel.names)
    for row in panel.values:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def format_table_csv(header, rows, meta: dict | None = None) -> str:
    """CSV with a metadata line; floats at 17 significant digits."""
    buf = io.StringIO()
    buf.write(_meta_line(meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def with_meta(csv_text: str, meta: dict | None) -> str:
    """Prefix an existing CSV body with the metadata line."""
    return _meta_line(meta) + csv_text


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(doc) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def graph_document(graph: DependencyGraph, names, meta: dict | None = None) -> dict:
    """Edge list ``{src, dst, lag, weight}`` plus per-pair scores and node names."""
    return {
        "config": meta,
        "nodes": list(names),
        "includes_self_loops": graph.includes_self_loops,
        "edges": graph.to_records(),
        "scores": [{"src": e.src, "dst": e.dst, "score": e.score} for e in graph.edges],
    }


def truth_document(truth: GroundTruthGraph, names, meta: dict | None = None) -> dict:
    return {
        "config": meta,
        "nodes": list(names),
        "edges": [{"src": s, "dst": d} for s, d in truth.edges()],
    }


def truth_from_document(doc: dict) -> GroundTruthGraph:
    try:
        P = len(doc["nodes"])
        adj = np.zeros((P, P), bool)
        for e in doc["edges"]:
            adj[int(e["dst"]), int(e["src"])] = True
    except (KeyError, TypeError, ValueError, IndexError) as err:
        raise ParseError(f"malformed ground-truth document: {err}") from None
    return GroundTruthGraph(adj)


def read_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ParseError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from None
