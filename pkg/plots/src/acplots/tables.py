"""Reader for the experiment CSV format: one '#' key=value metadata line,
then a column header row and data rows.  This mirrors the producer's
on-disk contract; the plotting side deliberately has no code dependency
on the simulation package.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np


class TableError(ValueError):
    """Malformed, empty, or incomplete input table."""


def read_table(path) -> tuple[dict[str, str], dict[str, list[str]]]:
    path = Path(path)
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise TableError(f"{path}: expected a '#' metadata header line")
        meta = {}
        for tok in first[1:].split():
            key, _, value = tok.partition("=")
            meta[key] = value
        reader = csv.reader(fh)
        try:
            names = next(reader)
        except StopIteration:
            raise TableError(f"{path}: no column header")
        cols: dict[str, list[str]] = {n: [] for n in names}
        for row in reader:
            if not row:
                continue
            for n, v in zip(names, row):
                cols[n].append(v)
    if not any(cols.values()):
        raise TableError(f"{path}: table has no data rows")
    return meta, cols


def floats(cols: dict[str, list[str]], name: str, path) -> np.ndarray:
    if name not in cols:
        raise TableError(f"{path}: missing column {name!r}")
    return np.array([float(v) if v != "" else math.nan for v in cols[name]])
