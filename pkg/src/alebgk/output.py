"""Snapshot and diagnostics files.

CSV snapshot: one header line, then one row per particle with columns
``x, y[, z], kind, rho, u, v[, w], T``. Floats are written with ``%.17g``
so they read back bit-exactly, and the bytes depend only on the state.

VTK snapshot: legacy ASCII ``POLYDATA`` with one vertex per particle, the
vector field ``U`` and the scalar fields ``rho``, ``T`` and ``kind``.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

AXES = "xyz"
VELS = "uvw"


class SnapshotIOError(OSError):
    def __init__(self, path, cause):
        self.path = str(path)
        super().__init__(f"{path}: {cause}")


def _num(v) -> str:
    return "%.17g" % v


def csv_header(dims: int) -> list[str]:
    return list(AXES[:dims]) + ["kind", "rho"] + list(VELS[:dims]) + ["T"]


def snapshot_csv(snap) -> str:
    dims = snap.x.shape[1]
    lines = [",".join(csv_header(dims))]
    for i in range(len(snap.x)):
        row = [_num(v) for v in snap.x[i]] + [str(int(snap.kind[i])), _num(snap.rho[i])]
        row += [_num(v) for v in snap.U[i]] + [_num(snap.T[i])]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def snapshot_vtk(snap, title="alebgk snapshot") -> str:
    n, dims = snap.x.shape
    pad = np.zeros((n, 3 - dims))
    pts = np.hstack([snap.x, pad])
    vel = np.hstack([snap.U, pad])
    out = ["# vtk DataFile Version 3.0", f"{title} step {snap.step} time {_num(snap.time)}", "ASCII",
           "DATASET POLYDATA", f"POINTS {n} double"]
    out += [" ".join(_num(v) for v in p) for p in pts]
    out.append(f"VERTICES {n} {2 * n}")
    out += [f"1 {i}" for i in range(n)]
    out += [f"POINT_DATA {n}", "VECTORS U double"]
    out += [" ".join(_num(v) for v in u) for u in vel]
    for name, data, fmt in (("rho", snap.rho, "double"), ("T", snap.T, "double"),
                            ("kind", snap.kind, "int")):
        out += [f"SCALARS {name} {fmt} 1", "LOOKUP_TABLE default"]
        out += [str(int(v)) if fmt == "int" else _num(v) for v in data]
    return "\n".join(out) + "\n"


def write_snapshot(snap, path, fmt: str = "csv") -> Path:
    if fmt == "csv":
        text = snapshot_csv(snap)
    elif fmt == "vtk":
        text = snapshot_vtk(snap)
    else:
        raise ValueError(f"unknown snapshot format {fmt!r}")
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as e:
        raise SnapshotIOError(path, e.strerror or e) from e
    return path


def snapshot_name(step: int, fmt: str) -> str:
    return f"snapshot_{step:06d}.{fmt}"


def read_snapshot_csv(path) -> dict[str, np.ndarray]:
    """Columns of a csv snapshot as arrays (``x``, ``kind``, ``rho``, ``U``, ``T``)."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise SnapshotIOError(path, e.strerror or e) from e
    head, body = rows[0], np.array(rows[1:], dtype=object)
    col = {name: k for k, name in enumerate(head)}
    dims = sum(a in col for a in AXES)

    def floats(names):
        return np.array([[float(v) for v in r] for r in body[:, [col[c] for c in names]]]).reshape(
            len(body), len(names))

    return {
        "x": floats(AXES[:dims]),
        "kind": body[:, col["kind"]].astype(int) if len(body) else np.empty(0, int),
        "rho": floats(["rho"])[:, 0],
        "U": floats(VELS[:dims]),
        "T": floats(["T"])[:, 0],
    }


DIAG_COLUMNS = ["step", "time", "n_particles", "mass", "stable_dt", "wall_flux", "min_f",
                "merged", "inserted", "deficient", "clamped", "clipped"]


def write_diagnostics(history, path) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(DIAG_COLUMNS)
            for d in history:
                w.writerow([d.step, _num(d.time), d.n_particles, _num(d.mass), _num(d.stable_dt),
                            _num(d.wall_flux), _num(d.min_f), d.merged, d.inserted,
                            len(d.deficient), d.clamped, d.clipped])
    except OSError as e:
        raise SnapshotIOError(path, e.strerror or e) from e
    return path
