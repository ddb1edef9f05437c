"""Byte-stable CSV and JSON emission.

Floats are written with repr (shortest round-trip decimal), fields with
',' and lines with '\\n'; JSON preserves insertion order with two-space
indentation. Identical inputs therefore produce identical bytes.
"""

from __future__ import annotations

import json

import numpy as np


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def csv_lines(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows):
    text = csv_lines(header, rows)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return text


def pyify(obj):
    """Convert numpy scalars/arrays to plain python containers."""
    if isinstance(obj, dict):
        return {str(k): pyify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [pyify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [pyify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def json_text(obj):
    return json.dumps(pyify(obj), indent=2, sort_keys=False) + "\n"


def write_json(path, obj):
    text = json_text(obj)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return text
