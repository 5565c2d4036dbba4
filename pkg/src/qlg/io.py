"""QLG1 snapshot files and atomic writes.

Layout (little endian): b"QLG1", u64 nx ny nz timestep, f64 g a phase_scale,
then per site, x slowest and z fastest, Re alpha, Im alpha, Re beta, Im beta.
"""

from __future__ import annotations

import contextlib
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from qlg.evolution import SimParams
from qlg.lattice import GridSpec, SpinorField

MAGIC = b"QLG1"
HEADER = struct.Struct("<4s4Q3d")
MAX_SITES = 1 << 34


class SnapshotError(IOError):
    pass


@contextlib.contextmanager
def atomic_open(path, mode="wb", **kwargs):
    """Write to a temp file in the target directory, rename over ``path`` on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


@dataclass
class Snapshot:
    field: SpinorField
    timestep: int
    params: SimParams


def save_snapshot(field: SpinorField, path, timestep: int = 0, params: SimParams | None = None) -> None:
    params = params or SimParams()
    nx, ny, nz = field.grid.shape
    header = HEADER.pack(MAGIC, nx, ny, nz, int(timestep), params.g, params.a, params.phase_scale)
    body = field.interleaved().astype("<c16", copy=False)
    with atomic_open(path, "wb") as fh:
        fh.write(header)
        fh.write(body.tobytes())


def load_snapshot(path) -> Snapshot:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) >= 4 and head[:4] != MAGIC:
            raise SnapshotError(f"{path}: bad magic {head[:4]!r}, expected {MAGIC!r}")
        if len(head) < HEADER.size:
            raise SnapshotError(f"{path}: truncated header ({len(head)} of {HEADER.size} bytes)")
        _, nx, ny, nz, step, g, a, ps = HEADER.unpack(head)
        if min(nx, ny, nz) < 4 or nx * ny * nz > MAX_SITES:
            raise SnapshotError(f"{path}: implausible grid dims {nx}x{ny}x{nz}")
        need = nx * ny * nz * 2 * 16
        body = fh.read(need + 1)
    if len(body) < need:
        raise SnapshotError(f"{path}: truncated data ({len(body)} of {need} bytes)")
    if len(body) > need:
        raise SnapshotError(f"{path}: {len(body) - need}+ trailing bytes after site data")
    grid = GridSpec(nx, ny, nz)
    flat = np.frombuffer(body, dtype="<c16").astype(np.complex128)
    try:
        params = SimParams(g=g, a=a, phase_scale=ps)
    except ValueError as exc:
        raise SnapshotError(f"{path}: bad parameters in header: {exc}") from None
    return Snapshot(SpinorField.from_interleaved(grid, flat), int(step), params)
