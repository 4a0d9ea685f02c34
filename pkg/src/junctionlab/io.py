"""Binary field/trace containers and CSV exporters.

SGF1 layout (little-endian)::

    4s   magic b"SGF1"
    I    d
    I    N
    d    h
    I    ball flag (1 = unit-ball domain)
    d*Q  node count per axis
    ...  N * prod(counts) float64 values, component-major, nodes row-major

SGT1 (homogeneous traces) replaces ``h``/ball/counts with the ``d - 1``
angular grid sizes of the trace grid.
"""
from __future__ import annotations

import csv
import struct

import numpy as np

from .core import GridSpec, HomogeneousTrace, SegregatedField

_SGF = b"SGF1"
_SGT = b"SGT1"


def write_sgf(path, u: SegregatedField):
    g = u.grid
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIIdI", _SGF, g.d, u.N, g.h, int(g.ball)))
        fh.write(struct.pack(f"<{g.d}Q", *g.shape))
        fh.write(np.ascontiguousarray(u.comps, dtype="<f8").tobytes())


def read_sgf(path, segregation_tol: float = 1e-3) -> SegregatedField:
    with open(path, "rb") as fh:
        head = fh.read(struct.calcsize("<4sIIdI"))
        magic, d, N, h, ball = struct.unpack("<4sIIdI", head)
        if magic != _SGF:
            raise ValueError(f"{path}: not an SGF1 file")
        shape = struct.unpack(f"<{d}Q", fh.read(8 * d))
        data = np.frombuffer(fh.read(), dtype="<f8")
    g = GridSpec(d, h, bool(ball))
    if tuple(shape) != g.shape or data.size != N * int(np.prod(shape)):
        raise ValueError(f"{path}: header and payload disagree")
    return SegregatedField(g, data.reshape((N,) + tuple(shape)).copy(), segregation_tol)


def write_sgt(path, c: HomogeneousTrace):
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sII", _SGT, c.d, c.N))
        fh.write(struct.pack(f"<{c.d - 1}Q", *c.shape))
        fh.write(np.ascontiguousarray(c.comps, dtype="<f8").tobytes())


def read_sgt(path) -> HomogeneousTrace:
    with open(path, "rb") as fh:
        magic, d, N = struct.unpack("<4sII", fh.read(12))
        if magic != _SGT:
            raise ValueError(f"{path}: not an SGT1 file")
        shape = struct.unpack(f"<{d - 1}Q", fh.read(8 * (d - 1)))
        data = np.frombuffer(fh.read(), dtype="<f8")
    return HomogeneousTrace(d, data.reshape((N,) + tuple(shape)).copy())


def write_field_csv(path, u: SegregatedField):
    """One row per ball node: coordinates then component values."""
    g = u.grid
    pts = g.points[g.mask]
    vals = u.comps[:, g.mask]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k + 1}" for k in range(g.d)] + [f"u{i + 1}" for i in range(u.N)])
        for p, v in zip(pts, vals.T):
            w.writerow([repr(float(x)) for x in p] + [repr(float(x)) for x in v])


def write_trace_csv(path, c: HomogeneousTrace):
    pts = c.points.reshape(-1, c.d)
    vals = c.comps.reshape(c.N, -1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k + 1}" for k in range(c.d)] + [f"c{i + 1}" for i in range(c.N)])
        for p, v in zip(pts, vals.T):
            w.writerow([repr(float(x)) for x in p] + [repr(float(x)) for x in v])


def write_solve_report_csv(path, report):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "energy", "stationarity", "segregation"])
        for k, e, s, g in report.rows():
            w.writerow([k, repr(float(e)), s if s == "" else repr(float(s)), g if g == "" else repr(float(g))])
