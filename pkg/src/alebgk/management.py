"""Particle management: merge clustered pairs, fill holes.

New particles receive their distribution from a weighted least-squares fit
over nearby particles (negative fitted values are clipped to zero); their
macroscopic state is then recomputed from that distribution.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gfdm import DeficientStencilError, interpolate_value
from .neighbors import NeighborLists, VoxelIndex, query_point
from .phase_space import INTERIOR, ParticleCloud


@dataclass
class MergeReport:
    merged: list[tuple[int, int]] = field(default_factory=list)
    failed: list[tuple[int, int]] = field(default_factory=list)
    # |rho_new - mean(rho_i, rho_j)| / mean(rho_i, rho_j) per merge
    density_defects: list[float] = field(default_factory=list)

    @property
    def changed(self) -> bool:
        return bool(self.merged)


@dataclass
class FillReport:
    inserted: list[np.ndarray] = field(default_factory=list)
    skipped: list[np.ndarray] = field(default_factory=list)
    starving: list[int] = field(default_factory=list)

    @property
    def changed(self) -> bool:
        return bool(self.inserted)


def _new_particle(cloud: ParticleCloud, cand, pos, macro_of):
    vals = interpolate_value(cloud.x[cand], pos, cloud.f[cand], cloud.h)
    vals = np.maximum(vals, 0.0)
    rho, U, T = macro_of(vals)
    return vals, rho, U, T


def merge_close_pairs(cloud: ParticleCloud, lists: NeighborLists, r_merge: float,
                      macro_of) -> MergeReport:
    """Replace interior pairs closer than ``r_merge`` by one midpoint particle.

    Greedy in ascending index: particle ``i`` merges with its first
    unprocessed interior neighbour ``j > i`` within ``r_merge``.
    ``macro_of(f_row) -> (rho, U, T)`` recovers the macro state. Mutates
    ``cloud``; survivors keep their relative order and new particles are
    appended.
    """
    report = MergeReport()
    taken = np.zeros(cloud.n, dtype=bool)
    new = []
    r2 = r_merge * r_merge
    owner = np.repeat(np.arange(cloud.n), lists.counts())
    d = cloud.x[lists.nbr] - cloud.x[owner]
    close = ((d * d).sum(axis=1) < r2) & (lists.nbr > owner)
    close &= (cloud.kind[owner] == INTERIOR) & (cloud.kind[lists.nbr] == INTERIOR)
    pairs = np.flatnonzero(close)
    for i in np.unique(owner[pairs]):
        if taken[i]:
            continue
        for j in lists.nbr[pairs[owner[pairs] == i]]:
            if taken[j]:
                continue
            mid = 0.5 * (cloud.x[i] + cloud.x[j])
            cand = np.union1d(lists[i], lists[j])
            try:
                vals, rho, U, T = _new_particle(cloud, cand, mid, macro_of)
            except (DeficientStencilError, ArithmeticError):
                report.failed.append((int(i), int(j)))
                break
            taken[i] = taken[j] = True
            ref = 0.5 * (cloud.rho[i] + cloud.rho[j])
            report.merged.append((int(i), int(j)))
            report.density_defects.append(abs(rho - ref) / ref)
            new.append((mid, rho, U, T, vals))
            break
    if new:
        sub = cloud.take(~taken)
        sub.append(*[np.array([p[k] for p in new]) for k in range(5)])
        cloud.__dict__.update(sub.__dict__)
    return report


def fill_holes(cloud: ParticleCloud, lists: NeighborLists, index: VoxelIndex, m_min: int,
               macro_of) -> FillReport:
    """Insert particles around interior particles with fewer than ``m_min`` neighbours.

    Candidates sit at ``x_i +- 0.5 h`` along each axis; a candidate is kept
    when it lies strictly inside the box and farther than ``0.45 dx`` from
    every existing or already inserted particle.
    """
    report = FillReport()
    counts = lists.counts()
    gap = 0.45 * cloud.dx
    added_x, added = [], []
    dims = cloud.dims
    inner = cloud.interior
    for i in inner[counts[inner] < m_min]:
        report.starving.append(int(i))
        for axis in range(dims):
            for sign in (-1.0, 1.0):
                pos = cloud.x[i].copy()
                pos[axis] += sign * 0.5 * cloud.h
                if not np.all((pos > 0.0) & (pos < cloud.L)):
                    continue
                if len(query_point(index, cloud.x, pos, radius=gap * (1 + 1e-12))):
                    continue
                if any(np.sum((p - pos) ** 2) <= gap * gap for p in added_x):
                    continue
                cand = query_point(index, cloud.x, pos)
                try:
                    vals, rho, U, T = _new_particle(cloud, cand, pos, macro_of)
                except (DeficientStencilError, ArithmeticError):
                    report.skipped.append(pos)
                    continue
                added_x.append(pos)
                added.append((pos, rho, U, T, vals))
    if added:
        cloud.append(*[np.array([p[k] for p in added]) for k in range(5)])
        report.inserted = added_x
    return report
