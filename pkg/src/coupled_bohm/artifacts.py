"""CSV and JSON artifacts: round-trip-exact tables, atomic writes, checksums."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

#: Significant digits that make every float64 round-trip through text exactly.
DIGITS = 17


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.{DIGITS}g}"


def atomic_write_text(path, text: str):
    """Write ``text`` via a temporary file in the same directory and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, payload):
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n")


def table_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_table(path, columns, data):
    """Write equal-length column arrays ``data`` (dict or sequence) under ``columns``."""
    if isinstance(data, dict):
        data = [data[c] for c in columns]
    arrays = [np.asarray(col) for col in data]
    n = {a.shape[0] for a in arrays}
    if len(n) != 1:
        raise ValueError("table columns differ in length")
    return atomic_write_text(path, table_text(columns, zip(*arrays)))


def emit_grid(path, axes, values, names=("t", "x", "value")):
    """Write a rectangular surface in long format, rows sorted by the axis values.

    ``axes = (a, b)`` are 1-D coordinates and ``values`` has shape
    ``(len(a), len(b))``. Axes are sorted first so the rows come out in
    lexicographic ``(a, b)`` order whatever order they were given in.
    """
    a, b = (np.asarray(ax, dtype=float) for ax in axes)
    values = np.asarray(values, dtype=float)
    if a.ndim != 1 or b.ndim != 1 or values.shape != (a.size, b.size):
        raise ValueError(f"grid values must have shape ({a.size}, {b.size}), got {values.shape}")
    ia, ib = np.argsort(a, kind="stable"), np.argsort(b, kind="stable")
    A, B = np.meshgrid(a[ia], b[ib], indexing="ij")
    V = values[np.ix_(ia, ib)]
    return atomic_write_text(path, table_text(names, zip(A.ravel(), B.ravel(), V.ravel())))


def read_table(path):
    """Parse a CSV written by this module into ``(columns, float array)``."""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        columns = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return columns, np.array(rows, dtype=float).reshape(len(rows), len(columns))


def parse_grid(path):
    """Inverse of :func:`emit_grid`: returns ``(names, (a, b), values)``."""
    names, data = read_table(path)
    if len(names) != 3:
        raise ValueError("a grid file has exactly three columns")
    a = np.unique(data[:, 0])
    b = np.unique(data[:, 1])
    if a.size * b.size != data.shape[0]:
        raise ValueError("grid file is not rectangular")
    ia = np.searchsorted(a, data[:, 0])
    ib = np.searchsorted(b, data[:, 1])
    values = np.full((a.size, b.size), np.nan)
    values[ia, ib] = data[:, 2]
    return tuple(names), (a, b), values


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()
