"""Check reports and their CSV/JSON serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


def fmt(value):
    """Format one CSV cell; floats use the shortest round-trip repr."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def jsonable(value):
    """Recursively convert numpy scalars/arrays; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


def write_csv(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(row.get(c)) for c in columns) + "\n")


def write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(jsonable(payload), fh, indent=2)
        fh.write("\n")


@dataclass
class BoundCheckReport:
    """Outcome of one sandwich check over a grid.

    ``constants`` holds the fitted constants, ``rows`` one dict per grid
    point, ``worst_point`` the row closest to violating its bound.
    """

    name: str
    constants: dict
    rows: list
    passed: bool
    worst_point: dict | None = None
    notes: list = field(default_factory=list)

    def to_dict(self, include_rows=True):
        out = {
            "check": self.name,
            "constants": self.constants,
            "pass": self.passed,
            "worst_point": self.worst_point,
            "notes": self.notes,
        }
        if include_rows:
            out["rows"] = self.rows
        return jsonable(out)

    def summary(self):
        consts = ", ".join(f"{k}={v:.4g}" for k, v in self.constants.items() if isinstance(v, (int, float)))
        return f"{self.name}: {'PASS' if self.passed else 'FAIL'} ({consts})"
