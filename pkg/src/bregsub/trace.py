"""Per-iteration trace records and their CSV form."""
from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, fields
from pathlib import Path

COLUMNS = ("iter", "epoch", "eta", "theta", "f_value", "m_norm", "dual_step_norm",
           "cert_residual", "stationarity_proxy", "wall_ns")
FLUSH_EVERY = 100


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    epoch: int
    eta: float
    theta: float
    f_value: float
    m_norm: float
    dual_step_norm: float
    cert_residual: float
    stationarity_proxy: float
    wall_ns: int


assert tuple(f.name for f in fields(TraceRecord)) == COLUMNS


def format_value(v) -> str:
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".17g")


class TraceWriter:
    """Append-only CSV writer; flushes every ``FLUSH_EVERY`` records and on close."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="", encoding="ascii")
        self._fh.write(",".join(COLUMNS) + "\n")
        self._pending = 0

    def __call__(self, rec: TraceRecord):
        self._fh.write(",".join(format_value(v) for v in astuple(rec)) + "\n")
        self._pending += 1
        if self._pending >= FLUSH_EVERY:
            self.flush()

    def flush(self):
        self._fh.flush()
        self._pending = 0

    def close(self):
        if not self._fh.closed:
            self._fh.flush()
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_trace(records, path):
    with TraceWriter(path) as w:
        for rec in records:
            w(rec)


def read_trace(path) -> list[TraceRecord]:
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != COLUMNS:
            raise ValueError(f"unexpected trace header {header}")
        out = []
        for row in reader:
            vals = [int(row[0]), int(row[1])] + [float(v) for v in row[2:9]] + [int(row[9])]
            out.append(TraceRecord(*vals))
    return out


def traces_equal(path_a, path_b, ignore=("wall_ns",)) -> bool:
    """Compare two trace files textually, skipping the ``ignore`` columns."""
    keep = [i for i, c in enumerate(COLUMNS) if c not in ignore]

    def rows(p):
        with open(p, newline="", encoding="ascii") as fh:
            return [[r[i] for i in keep] for r in csv.reader(fh)]

    return rows(path_a) == rows(path_b)
