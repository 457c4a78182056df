"""Plain-text CSV formats with ``# key=value`` metadata headers.

Field files hold rows ``rep,coord_1..coord_d,value_1..value_m``.  Values are
written with 17 significant digits, or 21 when the array is ``longdouble``
(transformed fields keep the extra precision so inverse transforms restore the
original doubles exactly).  Experiment files hold rows
``n,gamma,t,s,statistic,value,stderr``.
"""
from __future__ import annotations

import csv
import io
import os
import sys
import tempfile

import numpy as np

from .errors import ParameterError
from .fields import FieldSample, LatticeGrid
from .lamperti import PathOnGrid

__all__ = [
    "format_number",
    "write_text_atomic",
    "field_to_csv",
    "read_field_csv",
    "parse_field_csv",
    "experiment_to_csv",
    "parse_experiment_csv",
    "EXPERIMENT_COLUMNS",
]

EXPERIMENT_COLUMNS = ("n", "gamma", "t", "s", "statistic", "value", "stderr")
_LD = np.longdouble
_LD_EXTRA = np.finfo(_LD).nmant > np.finfo(np.float64).nmant


def format_number(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, np.longdouble) and _LD_EXTRA:
        return np.format_float_scientific(v, precision=20, unique=False)
    return "%.17g" % float(v)


def write_text_atomic(text: str, path) -> None:
    """Write ``text`` to ``path`` via a temp file and rename; ``-`` is stdout."""
    if str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=folder)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _meta_lines(meta: dict) -> list:
    lines = []
    for k, v in meta.items():
        text = str(v)
        if "\n" in text or "=" in str(k):
            raise ParameterError(f"metadata entry {k!r} cannot be written on one line")
        lines.append(f"# {k}={text}\n")
    return lines


def field_to_csv(obj, meta: dict | None = None) -> str:
    """Serialize a :class:`FieldSample` or :class:`PathOnGrid`."""
    if isinstance(obj, FieldSample):
        P, V, frame = obj.points, obj.values, "T"
        base = dict(obj.metadata)
        if obj.grid is not None and _is_integer_lattice(obj.grid):
            base["grid"] = "x".join(str(n) for n in obj.grid.shape)
    else:
        P, V, frame = np.asarray(obj.points), np.asarray(obj.values), obj.frame
        base = dict(obj.metadata)
        if V.ndim == 2:
            V = V[None]
        if frame == "S":
            base.pop("grid", None)
    base["frame"] = frame
    long = V.dtype == _LD and _LD_EXTRA
    base["value_dtype"] = "longdouble" if long else "float64"
    if meta:
        base.update(meta)
    d, m = P.shape[1], V.shape[-1]
    out = _meta_lines(base)
    out.append(",".join(["rep"] + [f"coord_{i + 1}" for i in range(d)]
                        + [f"value_{j + 1}" for j in range(m)]) + "\n")
    coords = [",".join("%.17g" % c for c in p) for p in P]
    fmt = format_number if long else (lambda v: "%.17g" % v)
    for r in range(V.shape[0]):
        for i in range(P.shape[0]):
            out.append(f"{r},{coords[i]}," + ",".join(fmt(v) for v in V[r, i]) + "\n")
    return "".join(out)


def _is_integer_lattice(grid: LatticeGrid) -> bool:
    return all(np.array_equal(a, np.arange(1, a.size + 1)) for a in grid.axes)


def _split_header(text: str):
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, sep, val = line[1:].strip().partition("=")
            if not sep:
                raise ParameterError(f"bad metadata line {line!r}")
            meta[key.strip()] = val
        elif line.strip():
            body.append(line)
    if not body:
        raise ParameterError("file has no header row")
    return meta, body


def parse_field_csv(text: str):
    """Parse field CSV text.

    Returns a :class:`FieldSample` for frame ``T`` files in double precision,
    otherwise a :class:`PathOnGrid` (``values`` shaped ``(n_reps, n_points, m)``).
    """
    meta, body = _split_header(text)
    header = body[0].split(",")
    if header[0] != "rep":
        raise ParameterError("first column must be 'rep'")
    d = sum(h.startswith("coord_") for h in header)
    m = sum(h.startswith("value_") for h in header)
    if d == 0 or m == 0 or len(header) != 1 + d + m:
        raise ParameterError("header must be rep,coord_1..coord_d,value_1..value_m")
    rows = list(csv.reader(body[1:]))
    if any(len(r) != 1 + d + m for r in rows):
        raise ParameterError("row length does not match the header")
    reps = np.array([int(r[0]) for r in rows])
    n_reps = int(reps.max()) + 1 if rows else 0
    if rows and (len(rows) % n_reps or not np.array_equal(
            reps, np.repeat(np.arange(n_reps), len(rows) // n_reps))):
        raise ParameterError("rows must be grouped by replicate 0..R-1 with equal point sets")
    n_pts = len(rows) // max(n_reps, 1)
    coords = np.array([[float(c) for c in r[1:1 + d]] for r in rows[:n_pts]])
    for k in range(1, n_reps):
        block = rows[k * n_pts:(k + 1) * n_pts]
        if any(b[1:1 + d] != a[1:1 + d] for a, b in zip(rows[:n_pts], block)):
            raise ParameterError("every replicate must list the same points in the same order")
    long = meta.get("value_dtype") == "longdouble"
    vals = [r[1 + d:] for r in rows]
    V = (np.array(vals, dtype=_LD) if long else np.array(vals, dtype=float))
    V = V.reshape(n_reps, n_pts, m)
    frame = meta.get("frame", "T")
    if frame == "T" and not long:
        grid = None
        if "grid" in meta:
            grid = LatticeGrid.integer([int(v) for v in meta["grid"].split("x")])
            if not np.array_equal(grid.points, coords):
                grid = None
        return FieldSample(coords, V, meta, grid)
    return PathOnGrid(coords, V, frame, meta)


def read_field_csv(path):
    with open(path, newline="") as fh:
        return parse_field_csv(fh.read())


def experiment_to_csv(rows, meta: dict) -> str:
    """Rows are mappings with keys from :data:`EXPERIMENT_COLUMNS`; missing keys stay empty."""
    out = _meta_lines(meta)
    out.append(",".join(EXPERIMENT_COLUMNS) + "\n")
    for row in rows:
        unknown = set(row) - set(EXPERIMENT_COLUMNS)
        if unknown:
            raise ParameterError(f"unknown experiment columns {sorted(unknown)}")
        cells = []
        for c in EXPERIMENT_COLUMNS:
            v = row.get(c)
            cells.append("" if v is None else (v if isinstance(v, str) else format_number(v)))
        out.append(",".join(cells) + "\n")
    return "".join(out)


def parse_experiment_csv(text: str):
    meta, body = _split_header(text)
    if tuple(body[0].split(",")) != EXPERIMENT_COLUMNS:
        raise ParameterError("not an experiment file")
    rows = [dict(zip(EXPERIMENT_COLUMNS, r)) for r in csv.reader(io.StringIO("\n".join(body[1:])))]
    return meta, rows
