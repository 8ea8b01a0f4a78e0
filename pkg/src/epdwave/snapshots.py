#!/usr/bin/env python3
# epdwave/snapshots.py
"""
Binary snapshot records for trajectories:
- write_snapshot / append_snapshots: one EPDW1 record per state
- load_snapshots: read every complete record of a file back into SpectralStates
- snapshot_index: one row per record (time, n, L, mu) as a DataFrame

Record layout (little-endian, physical space, row-major):
  magic "EPDW1" | n u32 | L f64 | time f64 | mu f64 | v: n*n f64 | dt v: n*n f64
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, List, Tuple

import numpy as np
import pandas as pd

from epdwave.fields import GridSpec, SpectralState

logger = logging.getLogger(__name__)

MAGIC = b"EPDW1"
HEADER = np.dtype([("magic", "S5"), ("n", "<u4"), ("L", "<f8"), ("time", "<f8"), ("mu", "<f8")])


def _record_bytes(state: SpectralState, mu: float) -> bytes:
    n = state.grid.n
    header = np.array([(MAGIC, n, state.grid.L, state.time, mu)], dtype=HEADER)
    v, vt = state.physical()
    return header.tobytes() + v.astype("<f8").tobytes(order="C") + vt.astype("<f8").tobytes(order="C")


def write_snapshot(path: Path, state: SpectralState, mu: float) -> None:
    Path(path).write_bytes(_record_bytes(state, mu))


def append_snapshots(path: Path, states: Iterable[SpectralState], mu: float) -> int:
    """Append one record per state; returns the number written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("ab") as f:
        for state in states:
            f.write(_record_bytes(state, mu))
            count += 1
    return count


def _iter_records(path: Path):
    raw = Path(path).read_bytes()
    offset = 0
    while offset < len(raw):
        if len(raw) - offset < HEADER.itemsize:
            logger.warning(f"{path}: truncated header at byte {offset}; stopping")
            return
        header = np.frombuffer(raw, dtype=HEADER, count=1, offset=offset)[0]
        if bytes(header["magic"]) != MAGIC:
            raise ValueError(f"{path}: bad magic {bytes(header['magic'])!r} at byte {offset}")
        n = int(header["n"])
        body = 2 * n * n * 8
        start = offset + HEADER.itemsize
        if len(raw) - start < body:
            logger.warning(f"{path}: truncated record at byte {offset} (t={float(header['time'])}); stopping")
            return
        fields = np.frombuffer(raw, dtype="<f8", count=2 * n * n, offset=start).reshape(2, n, n)
        yield header, fields[0], fields[1]
        offset = start + body


def load_snapshots(path: Path) -> List[Tuple[SpectralState, float]]:
    """Every complete record as (state, mu); a truncated tail is dropped with a warning."""
    out: List[Tuple[SpectralState, float]] = []
    path = Path(path)
    if not path.exists():
        return out
    for header, v, vt in _iter_records(path):
        grid = GridSpec(n=int(header["n"]), domain_half_width=float(header["L"]))
        out.append((SpectralState.from_physical(float(header["time"]), v, vt, grid), float(header["mu"])))
    return out


def snapshot_index(path: Path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        return pd.DataFrame(columns=["time", "n", "L", "mu"])
    rows = [
        {"time": float(h["time"]), "n": int(h["n"]), "L": float(h["L"]), "mu": float(h["mu"])}
        for h, _, _ in _iter_records(path)
    ]
    return pd.DataFrame(rows, columns=["time", "n", "L", "mu"])


if __name__ == "__main__":
    import argparse
    ap = argparse.ArgumentParser()
    ap.add_argument("path", type=Path)
    args = ap.parse_args()
    idx = snapshot_index(args.path)
    print(f"Records: {len(idx)}")
    if not idx.empty:
        print(idx.to_string(index=False))
