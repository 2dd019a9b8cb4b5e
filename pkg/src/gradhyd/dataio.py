"""CSV reading and writing.

Forcing files have the header ``time,precip,pet`` with an optional fourth
column ``discharge``. Lines starting with ``#`` and blank lines are skipped.
Numbers are written with 17 significant digits so that every float64
round-trips exactly.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import BadHeader, BadRow, EmptyData, LengthMismatch, NonFinite
from .timeseries import ForcingSeries, ObservedDischarge

__all__ = [
    "ForcingFile",
    "fmt",
    "read_forcing_file",
    "load_forcing_csv",
    "write_forcing_csv",
    "write_csv",
    "write_truth",
    "read_truth",
    "load_vector_csv",
    "load_matrix_csv",
]

FORCING_HEADER = ("time", "precip", "pet")
DISCHARGE_COLUMN = "discharge"


def fmt(x) -> str:
    """17 significant digits; integers and strings pass through unchanged."""
    if isinstance(x, (str, int, np.integer)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".17g")


def _data_lines(path) -> Iterable[Tuple[int, str]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line and not line.startswith("#"):
                yield lineno, line


class ForcingFile:
    """Raw contents of a forcing CSV, before a spin-up is chosen."""

    def __init__(self, time: List[str], precip: np.ndarray, pet: np.ndarray,
                 discharge: Optional[np.ndarray]):
        self.time = time
        self.precip = precip
        self.pet = pet
        self.discharge = discharge

    def __len__(self) -> int:
        return len(self.time)

    def forcing(self, spin_up: int = 0) -> ForcingSeries:
        return ForcingSeries(self.precip, self.pet, spin_up)

    def observed(self, spin_up: int = 0) -> Optional[ObservedDischarge]:
        if self.discharge is None:
            return None
        return ObservedDischarge(self.discharge[spin_up:])


def _number(text: str, lineno: int, column: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise BadRow(lineno, f"{column} value {text!r} is not a number") from None
    if not math.isfinite(v):
        raise NonFinite(f"line {lineno}: {column} is {text}")
    if v < 0:
        raise BadRow(lineno, f"{column} must be >= 0, got {text}")
    return v


def read_forcing_file(path) -> ForcingFile:
    lines = _data_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise EmptyData(f"{path}: no header") from None
    cols = tuple(c.strip().lower() for c in header.split(","))
    if cols not in (FORCING_HEADER, FORCING_HEADER + (DISCHARGE_COLUMN,)):
        raise BadHeader(f"{path} line {lineno}: expected 'time,precip,pet[,discharge]', got {header!r}")
    ncol = len(cols)
    time, rows = [], []
    for lineno, line in lines:
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != ncol:
            raise BadRow(lineno, f"expected {ncol} fields, got {len(fields)}")
        if not fields[0]:
            raise BadRow(lineno, "empty time label")
        time.append(fields[0])
        rows.append([_number(fields[k], lineno, cols[k]) for k in range(1, ncol)])
    if not rows:
        raise EmptyData(f"{path}: no data rows")
    data = np.array(rows, dtype=np.float64)
    q = data[:, 2].copy() if ncol == 4 else None
    return ForcingFile(time, data[:, 0].copy(), data[:, 1].copy(), q)


def load_forcing_csv(path, spin_up: int = 0) -> Tuple[ForcingSeries, Optional[ObservedDischarge]]:
    """Parse a forcing CSV. The observation window starts after ``spin_up`` rows."""
    ff = read_forcing_file(path)
    return ff.forcing(spin_up), ff.observed(spin_up)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_forcing_csv(path, forcing: ForcingSeries, discharge=None, time: Optional[Sequence] = None) -> None:
    n = forcing.n_total
    time = list(range(1, n + 1)) if time is None else list(time)
    header = list(FORCING_HEADER)
    cols = [time, forcing.precip, forcing.pet]
    if discharge is not None:
        discharge = np.asarray(discharge, dtype=np.float64)
        if discharge.size != n:
            raise LengthMismatch(f"discharge has {discharge.size} entries, forcing has {n}")
        header.append(DISCHARGE_COLUMN)
        cols.append(discharge)
    write_csv(path, header, zip(*cols))


def write_truth(path, names: Sequence[str], theta) -> None:
    write_csv(path, ("name", "theta_star"), zip(names, np.asarray(theta, dtype=np.float64)))


def read_truth(path) -> Tuple[Tuple[str, ...], np.ndarray]:
    lines = _data_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise EmptyData(f"{path}: no header") from None
    if [c.strip() for c in header.split(",")] != ["name", "theta_star"]:
        raise BadHeader(f"{path} line {lineno}: expected 'name,theta_star'")
    names, values = [], []
    for lineno, line in lines:
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 2:
            raise BadRow(lineno, "expected 'name,value'")
        try:
            values.append(float(fields[1]))
        except ValueError:
            raise BadRow(lineno, f"value {fields[1]!r} is not a number") from None
        names.append(fields[0])
    return tuple(names), np.array(values)


def load_matrix_csv(path) -> np.ndarray:
    """Dense matrix: one row per line, comma-separated, no header."""
    rows = []
    for lineno, line in _data_lines(path):
        try:
            rows.append([float(f) for f in line.split(",")])
        except ValueError:
            raise BadRow(lineno, "non-numeric entry") from None
        if len(rows[-1]) != len(rows[0]):
            raise BadRow(lineno, f"expected {len(rows[0])} values, got {len(rows[-1])}")
    if not rows:
        raise EmptyData(f"{path}: no rows")
    a = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise NonFinite(f"{path}: matrix contains NaN or Inf")
    return a


def load_vector_csv(path) -> np.ndarray:
    """Vector written one value per line or as a single comma-separated row."""
    return load_matrix_csv(path).ravel()
