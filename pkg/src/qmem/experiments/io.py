"""CSV and JSON emission for sweep data and fit reports."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..errors import InsufficientData

SWEEP_COLUMNS = ("sweep_value", "observable", "stderr")


def write_sweep_csv(path, x, y, stderr=None):
    """One row per sweep point; floats written with repr for exact round trips."""
    stderr = np.zeros(len(x)) if stderr is None else stderr
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for a, b, c in zip(x, y, stderr):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(c))])


def read_sweep_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise InsufficientData(f"cannot read {path}: {exc}") from exc
    if not rows or not {"sweep_value", "observable"} <= set(rows[0]):
        raise InsufficientData("CSV must have columns sweep_value, observable[, stderr]")
    try:
        x = np.array([float(r["sweep_value"]) for r in rows])
        y = np.array([float(r["observable"]) for r in rows])
        se = np.array([float(r.get("stderr") or 0.0) for r in rows])
    except (TypeError, ValueError) as exc:
        raise InsufficientData(f"malformed number in {path}: {exc}") from exc
    return x, y, se


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
