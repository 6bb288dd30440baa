"""Deterministic report writing.

Floats are written with 12 significant digits (``%.12g``); JSON keys are sorted and
non-finite floats become ``null``.  Identical inputs therefore give byte-identical
files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .quadrature import loglog_slope

FLOAT_FORMAT = "%.12g"


def fmt(x) -> str:
    """Format one CSV cell."""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return FLOAT_FORMAT % x
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def canonical(obj):
    """Plain-Python copy of ``obj`` with floats rounded to the report precision."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return canonical(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(FLOAT_FORMAT % x)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(canonical(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines += [",".join(fmt(c) for c in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


@dataclass
class RateReport:
    """Errors per budget (or per spacing, see ``param``) with the fitted log-log slope."""

    budgets: list
    errors: list
    slope: float
    reference_slope: float
    config: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    param: str = "N"

    def slopes_to_date(self) -> list:
        return [float("nan")] + [loglog_slope(self.budgets[:i + 1], self.errors[:i + 1])
                                 for i in range(1, len(self.budgets))]

    def to_csv(self) -> str:
        lines = [f"{self.param},error,slope_to_date"]
        for n, e, s in zip(self.budgets, self.errors, self.slopes_to_date()):
            lines.append(f"{fmt(n)},{fmt(float(e))},{fmt(float(s))}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        slope = self.slope if np.isfinite(self.slope) else None
        ref = self.reference_slope if np.isfinite(self.reference_slope) else None
        return {"slope": slope, "reference_slope": ref, "param": self.param,
                "values": list(self.budgets), "errors": list(map(float, self.errors)),
                "config": self.config, **self.extra}

    def to_json(self) -> str:
        return dumps(self.summary())
