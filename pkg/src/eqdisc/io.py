"""CSV persistence for datasets.

Floats are written with ``repr`` (shortest round-trip decimal), so a
write/read cycle reproduces every sample bit for bit.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import DataError
from .simulate import Dataset, differentiate

COLUMNS = ("t", "x1", "x2", "x2dot", "u")


def write_rows(path, header, columns):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(_format(v) for v in row) + "\n")


def _format(value):
    # integers stay integers; floats use the shortest round-tripping repr
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def save_dataset(data, path):
    write_rows(path, COLUMNS, [getattr(data, c) for c in COLUMNS])


def read_columns(path):
    """Read a numeric CSV into a dict of column name -> float array."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = [r for r in reader if r]
    if len(set(header)) != len(header):
        raise DataError(f"{path} has duplicate column names")
    try:
        values = np.array([[float(v) for v in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric entry ({exc})") from None
    if values.ndim != 2 or values.shape[1] != len(header):
        raise DataError(f"{path}: ragged rows")
    return {name: values[:, j] for j, name in enumerate(header)}


def missing_columns(path):
    cols = read_columns(path)
    return [c for c in COLUMNS if c not in cols]


def load_dataset(path, fs=None, reconstruct=False):
    """Load a dataset, optionally rebuilding velocity/acceleration.

    ``x1`` and ``u`` are mandatory.  Without ``t`` the sampling rate must be
    given.  Missing ``x2`` or ``x2dot`` raise :class:`DataError` unless
    ``reconstruct`` is set, in which case they are obtained by numerical
    differentiation (velocity from displacement; acceleration from measured
    velocity when present, otherwise from displacement).
    """
    cols = read_columns(path)
    for required in ("x1", "u"):
        if required not in cols:
            raise DataError(f"{path}: required column {required!r} is missing")
    n = cols["x1"].size
    if "t" in cols:
        t = cols["t"]
        if fs is None:
            if n < 2:
                raise DataError(f"{path}: need at least 2 samples")
            fs = (n - 1) / (t[-1] - t[0])
    elif fs is None:
        raise DataError(f"{path}: no 't' column, a sampling rate must be supplied")
    else:
        t = np.arange(n) / fs
    absent = [c for c in ("x2", "x2dot") if c not in cols]
    if absent and not reconstruct:
        raise DataError(f"{path}: missing columns {absent}; rerun with reconstruction enabled to differentiate x1")
    x2 = cols["x2"] if "x2" in cols else differentiate(cols["x1"], fs, 1)
    if "x2dot" in cols:
        x2dot = cols["x2dot"]
    elif "x2" in cols:
        x2dot = differentiate(cols["x2"], fs, 1)
    else:
        x2dot = differentiate(cols["x1"], fs, 2)
    return Dataset(t=t, x1=cols["x1"], x2=x2, x2dot=x2dot, u=cols["u"], fs=float(fs), reconstructed=tuple(absent))
