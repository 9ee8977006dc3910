"""CSV/JSON helpers shared by the persistence functions.

Every CSV file starts with a ``# schema: <name>`` comment line followed by a
header row.  Floats are written in shortest round-trip form so a save/load round
trip is exact and reruns produce identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def write_csv(path, schema: str, header, rows):
    buf = io.StringIO()
    buf.write(f"# schema: {schema}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def read_csv(path):
    """Return ``(schema, header, rows)`` with rows as lists of strings."""
    lines = Path(path).read_text().splitlines()
    schema = None
    if lines and lines[0].startswith("#"):
        schema = lines[0].split(":", 1)[1].strip() if ":" in lines[0] else None
        lines = lines[1:]
    reader = csv.reader(lines)
    header = next(reader)
    return schema, header, [row for row in reader]


def write_matrix_csv(path, M, schema="ksminimax.matrix/v1", integer=False):
    M = np.atleast_2d(np.asarray(M))
    header = [f"c{j + 1}" for j in range(M.shape[1])]
    rows = (([int(v) for v in r] if integer else [float(v) for v in r]) for r in M)
    write_csv(path, schema, header, rows)


def _is_numeric(row):
    try:
        [float(v) for v in row]
    except ValueError:
        return False
    return True


def read_matrix_csv(path):
    """Read a matrix written by :func:`write_matrix_csv`; plain numeric CSV
    without schema comment or header row is accepted too."""
    _, header, rows = read_csv(path)
    if _is_numeric(header):
        rows = [header] + rows
    if not rows:
        return np.zeros((0, len(header)))
    return np.array([[float(v) for v in r] for r in rows])


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")
