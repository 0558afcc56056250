"""Readers for the oscillab batch artifacts (ledger CSV and run JSON).

The frontend never imports the solver package; it consumes only the exported
files, validating the versioned CSV header and the columns it needs.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

CSV_HEADER = "# oscillab-csv v1"


class InputError(ValueError):
    """Schema mismatch or missing column in an artifact file."""


def read_ledger(path):
    """Parse a ledger.csv into {times, nus, e_nu[nu], weight[nu], total}."""
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise InputError(f"{path}: missing '{CSV_HEADER}' header")
        cols = fh.readline().rstrip("\n").split(",")
        required = ("t", "nu", "e_nu", "e_classical", "weight", "total")
        for col in required:
            if col not in cols:
                raise InputError(f"{path}: missing column {col!r}")
        index = {c: cols.index(c) for c in required}
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    times = sorted({float(r[index["t"]]) for r in rows})
    nus = sorted({int(r[index["nu"]]) for r in rows})
    tpos = {t: i for i, t in enumerate(times)}
    out = {
        "times": np.array(times),
        "nus": nus,
        "e_nu": {nu: np.zeros(len(times)) for nu in nus},
        "e_classical": {nu: np.zeros(len(times)) for nu in nus},
        "weight": {nu: np.zeros(len(times)) for nu in nus},
        "total": np.zeros(len(times)),
    }
    for r in rows:
        i = tpos[float(r[index["t"]])]
        nu = int(r[index["nu"]])
        out["e_nu"][nu][i] = float(r[index["e_nu"]])
        out["e_classical"][nu][i] = float(r[index["e_classical"]])
        out["weight"][nu][i] = float(r[index["weight"]])
        out["total"][i] = float(r[index["total"]])
    return out


def read_report(path, need=()):
    """Parse a run.json, checking the fields a figure requires."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from None
    for key in ("config", "config_hash"):
        if key not in data:
            raise InputError(f"{path}: missing field {key!r}")
    for key in need:
        if key not in data or data[key] in (None, [], {}):
            raise InputError(f"{path}: missing field {key!r}")
    return data
