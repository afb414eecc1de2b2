"""Voxel-hash neighbour search, rebuilt every step.

The box is cut into ``max(1, floor(L / h))`` voxels per axis, so a voxel
edge is at least ``h`` and all neighbours of a particle lie in its own or
the adjacent voxels. Neighbourhoods are closed balls (``|x_j - x_i| <= h``)
and exclude the particle itself.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .parallel import Executor


class OutOfDomainError(ValueError):
    def __init__(self, particle, position):
        self.particle = particle
        super().__init__(f"particle {particle} at {position} lies outside the domain")


@dataclass
class VoxelIndex:
    cell_size: float
    h: float
    grid_dims: np.ndarray   # voxels per axis
    particle_voxel: np.ndarray  # linear voxel index per particle
    cells: np.ndarray       # (N, dims) voxel coordinates per particle
    cell_start: np.ndarray  # CSR offsets into cell_items, (n_voxels + 1,)
    cell_items: np.ndarray  # particle indices grouped by voxel, ascending within

    def members(self, voxel: int) -> np.ndarray:
        return self.cell_items[self.cell_start[voxel]:self.cell_start[voxel + 1]]


@dataclass
class NeighborLists:
    """CSR neighbour lists: neighbours of i are ``nbr[ptr[i]:ptr[i+1]]``."""

    ptr: np.ndarray
    nbr: np.ndarray

    def __getitem__(self, i) -> np.ndarray:
        return self.nbr[self.ptr[i]:self.ptr[i + 1]]

    def counts(self) -> np.ndarray:
        return np.diff(self.ptr)

    def __len__(self):
        return len(self.ptr) - 1


def _voxelize(x, L, nvox, cell_size):
    cells = np.floor(x / cell_size).astype(np.int64)
    return np.minimum(cells, nvox - 1)


def build_voxel_index(x: np.ndarray, L: float, h: float) -> VoxelIndex:
    x = np.asarray(x, dtype=float)
    dims = x.shape[1]
    bad = np.flatnonzero(np.any((x < 0.0) | (x > L) | ~np.isfinite(x), axis=1))
    if len(bad):
        raise OutOfDomainError(int(bad[0]), x[bad[0]])
    n_axis = max(1, int(np.floor(L / h)))
    nvox = np.full(dims, n_axis, dtype=np.int64)
    cell_size = L / n_axis
    cells = _voxelize(x, L, nvox, cell_size)
    lin = np.ravel_multi_index(tuple(cells.T), tuple(nvox)).astype(np.int64)
    order = np.argsort(lin, kind="stable")
    counts = np.bincount(lin, minlength=int(np.prod(nvox)))
    cell_start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return VoxelIndex(
        cell_size=cell_size,
        h=float(h),
        grid_dims=nvox,
        particle_voxel=lin,
        cells=np.ascontiguousarray(cells),
        cell_start=cell_start,
        cell_items=order.astype(np.int64),
    )


def neighbor_lists(idx: VoxelIndex, x: np.ndarray, executor: Executor | None = None,
                   impl=None) -> NeighborLists:
    """All neighbour lists, built count-then-fill."""
    impl = impl or kernels
    x = np.ascontiguousarray(x, dtype=float)
    n = len(x)
    ex = executor or Executor(1)
    h2 = idx.h * idx.h
    counts = np.zeros(n, dtype=np.int64)
    args = (x, idx.cells, idx.grid_dims, idx.cell_start, idx.cell_items, h2)
    ex.par_map_particles(n, lambda lo, hi: impl.neighbor_count(*args, lo, hi, counts))
    ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    nbr = np.empty(int(ptr[-1]), dtype=np.int64)
    ex.par_map_particles(n, lambda lo, hi: impl.neighbor_fill(*args, lo, hi, ptr, nbr))
    return NeighborLists(ptr, nbr)


def query_neighbors(idx: VoxelIndex, x: np.ndarray, i: int) -> np.ndarray:
    """Indices j != i with ``|x_j - x_i| <= h``, ascending."""
    return query_point(idx, x, x[i], exclude=i)


def query_point(idx: VoxelIndex, x: np.ndarray, pos, exclude: int = -1,
                radius: float | None = None) -> np.ndarray:
    """Particles within ``radius`` (default h) of an arbitrary position.

    ``radius`` may not exceed the voxel edge.
    """
    pos = np.asarray(pos, dtype=float)
    r = idx.h if radius is None else radius
    if r > idx.cell_size * (1 + 1e-12) and idx.grid_dims[0] > 1:
        raise ValueError("query radius exceeds the voxel size")
    dims = len(pos)
    base = np.minimum(np.floor(np.clip(pos, 0.0, None) / idx.cell_size).astype(np.int64),
                      idx.grid_dims - 1)
    found = []
    for off in np.ndindex(*([3] * dims)):
        cc = base + np.array(off) - 1
        if np.any(cc < 0) or np.any(cc >= idx.grid_dims):
            continue
        lin = int(np.ravel_multi_index(tuple(cc), tuple(idx.grid_dims)))
        found.append(idx.members(lin))
    if not found:
        return np.empty(0, dtype=np.int64)
    cand = np.concatenate(found)
    cand = cand[cand != exclude]
    d = x[cand] - pos
    return np.sort(cand[(d * d).sum(axis=1) <= r * r])


def brute_force_neighbors(x: np.ndarray, h: float) -> list[np.ndarray]:
    """O(N^2) reference used by the tests."""
    x = np.asarray(x, dtype=float)
    out = []
    for i in range(len(x)):
        d = x - x[i]
        mask = (d * d).sum(axis=1) <= h * h
        mask[i] = False
        out.append(np.flatnonzero(mask))
    return out
