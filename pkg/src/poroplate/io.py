"""Output writers: binary field snapshots with a text manifest, CSV series and slices.

Snapshot layout: a 16-byte header (8-byte magic, little-endian uint32
format version, uint32 reserved) followed by little-endian float64 values
in C order. Pressure snapshots are ``(M, N, N3)`` modal coefficients,
mode-major and x3-minor; plate snapshots are ``(M, N)``.
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAGIC = b"PPLATE\x00\x01"
VERSION = 1
HEADER = struct.Struct("<8sII")
MANIFEST = "manifest.txt"


def write_snapshot(path, array: np.ndarray) -> Path:
    path = Path(path)
    data = np.ascontiguousarray(array, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, 0))
        fh.write(data.tobytes(order="C"))
    return path


def read_snapshot(path, shape) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, _ = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    data = np.frombuffer(raw, dtype="<f8", offset=HEADER.size)
    if data.size != int(np.prod(shape)):
        raise ValueError(f"{path}: expected {int(np.prod(shape))} values, found {data.size}")
    return data.reshape(shape).copy()


class Manifest:
    """Sidecar listing: one ``file kind t shape`` line per snapshot."""

    def __init__(self, outdir):
        self.outdir = Path(outdir)
        self.entries = []

    def add(self, name: str, kind: str, t: float, shape: Sequence[int]):
        self.entries.append((name, kind, t, tuple(shape)))

    def snapshot(self, name: str, kind: str, t: float, array: np.ndarray):
        write_snapshot(self.outdir / name, array)
        self.add(name, kind, t, array.shape)

    def write(self) -> Path:
        lines = ["# file kind t shape (little-endian float64, C order, 16-byte header)"]
        for name, kind, t, shape in self.entries:
            lines.append(f"{name} {kind} {float(t)!r} {'x'.join(map(str, shape))}")
        path = self.outdir / MANIFEST
        path.write_text("\n".join(lines) + "\n")
        return path


def read_manifest(outdir) -> list:
    out = []
    for line in (Path(outdir) / MANIFEST).read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        name, kind, t, shape = line.split()
        out.append((name, kind, float(t), tuple(int(s) for s in shape.split("x"))))
    return out


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(x) for x in row])
    return path


def midplane_slice(basis, grid, p: np.ndarray) -> np.ndarray:
    """Pressure at ``x3 = 0`` on the collocation points, shape ``(M, N)``.

    For even ``N3`` there is no node at the midplane and the two nearest
    nodes are averaged.
    """
    vals = basis.to_collocation(p)
    j = grid.N3 // 2
    if grid.N3 % 2:
        return vals[..., j]
    return 0.5 * (vals[..., j - 1] + vals[..., j])


def centerline(basis, w: np.ndarray, n_points: int = 65):
    """Plate displacement along ``x2 = 1/2``; returns ``(x1, w)``."""
    x1 = np.linspace(0.0, 1.0, n_points)
    return x1, basis.evaluate(w, x1, np.full_like(x1, 0.5))


def write_slices(outdir, basis, grid, t: float, p: np.ndarray, w: np.ndarray, tag: str = "final"):
    outdir = Path(outdir)
    x1s, x2s = basis.points
    mid = midplane_slice(basis, grid, p)
    rows = [(x1, x2, mid[i, j]) for i, x1 in enumerate(x1s) for j, x2 in enumerate(x2s)]
    a = write_csv(outdir / f"slice_midplane_{tag}.csv", ["x1", "x2", "p"], rows)
    x1, wl = centerline(basis, w)
    b = write_csv(outdir / f"slice_centerline_{tag}.csv", ["x1", "w"], zip(x1, wl))
    return a, b
