"""Deterministic CSV/JSON writers. Every float is written as ``%.12e``."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

__all__ = ["fmt", "dumps", "write_json", "write_csv", "write_field", "read_field", "write_qtable"]


def fmt(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.12e" % x


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no infinities; keep them readable as strings
        return fmt(x) if math.isfinite(x) else json.dumps(fmt(x))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj), encoding="utf-8")


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return fmt(v)


def write_field(path, mesh, values, header=None):
    """Field CSV: a ``#``-prefixed JSON mesh header, then ``index,x[,y],value``."""
    values = mesh.check_field(values)
    meta = dict(mesh.metadata())
    if header:
        meta.update(header)
    coords = mesh.coordinates
    if mesh.dim == 1:
        cols = ["index", "x", "value"]
        rows = [(k, coords[k], values[k]) for k in range(mesh.size)]
    else:
        cols = ["index", "x", "y", "value"]
        rows = [(k, coords[k, 0], coords[k, 1], values[k]) for k in range(mesh.size)]
    head = "# " + dumps(dict(sorted(meta.items())), indent=0).replace("\n", "") + "\n"
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join([str(r[0])] + [fmt(v) for v in r[1:]]))
    Path(path).write_text(head + "\n".join(lines) + "\n", encoding="utf-8")


def read_field(path):
    """Inverse of :func:`write_field`; returns ``(meta, values)``."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    meta = json.loads(text[0][2:])
    data = np.loadtxt(text[2:], delimiter=",", ndmin=2)
    return meta, data[:, -1]


def write_qtable(directory, table):
    directory = Path(directory)
    rows = [(d["s"], d["Q"], d["residual"], d["energy"]) for d in table.diagnostics]
    if not rows:
        rows = [(s, q, math.nan, math.nan) for s, q in zip(table.s, table.q)]
    write_csv(directory / "q.csv", ["s", "Q", "residual", "energy"], rows)
    meta = dict(table.meta)
    meta.update({"lower_endpoint": table.lo, "upper_endpoint": table.hi, "monotone": table.monotone})
    write_json(directory / "q.meta.json", meta)
