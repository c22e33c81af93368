"""Output plumbing: JSON-lines recorders, binary snapshots, CSV tables.

Snapshot format: 16-byte header (8-byte magic ``RSHEFLD1`` + little-endian
uint64 field length N) followed by N little-endian float64 values in array
(FFT) order.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import InvalidInputError
from .grid import GridField, GridSpec

SNAPSHOT_MAGIC = b"RSHEFLD1"


def write_snapshot(path, field: GridField):
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<Q", field.grid.n_points))
        fh.write(field.values.astype("<f8").tobytes())


def read_snapshot(path) -> GridField:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != SNAPSHOT_MAGIC:
            raise InvalidInputError(f"bad snapshot magic {magic!r} in {path}")
        (n,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n:
        raise InvalidInputError(
            f"snapshot {path} truncated: header says {n}, found {data.size}"
        )
    return GridField(GridSpec(int(n)), data.astype(np.float64))


class JsonlRecorder:
    """Writes one JSON object per record; keys sorted for reproducibility."""

    def __init__(self, path):
        self._fh = open(path, "w")

    def record(self, replica: int, t: float, observables: dict):
        row = {"replica": int(replica), "t": float(t)}
        row.update(observables)
        self._fh.write(json.dumps(row, sort_keys=True) + "\n")

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class MemoryRecorder:
    """Collects records in memory (tests, small runs)."""

    def __init__(self):
        self.rows = []

    def record(self, replica: int, t: float, observables: dict):
        row = {"replica": int(replica), "t": float(t)}
        row.update(observables)
        self.rows.append(row)


def write_csv(path, header: list[str], rows):
    """Plain CSV with repr-formatted floats (deterministic round trip)."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(x) for x in row) + "\n")


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)
