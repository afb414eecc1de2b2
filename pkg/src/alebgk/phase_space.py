"""Velocity grid, particle storage and gas constants.

Particles are stored structure-of-arrays: positions, macroscopic fields and
distributions live in separate contiguous arrays on :class:`ParticleCloud`.
:class:`Particle` is a read-only per-particle view for inspection and tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

INTERIOR = 0
BOUNDARY = 1

# Wall faces of the box [0, L]^d, one per axis side.
WALL_NAMES = ("x_lo", "x_hi", "y_lo", "y_hi", "z_lo", "z_hi")

# Default interaction radius in units of the nominal spacing.
H_FACTOR = 3.1
# v_max = |U_wall|_max + THERMAL_SPEEDS * sqrt(R T0)
THERMAL_SPEEDS = 5.0


@dataclass(frozen=True)
class GasProperties:
    """Molecular diameter ``d`` [m], Boltzmann constant ``k_b`` [J/K] and
    specific gas constant ``R`` [J/(kg K)]. Defaults are argon."""

    d: float = 0.368e-9
    k_b: float = 1.3806e-23
    R: float = 208.0

    def __post_init__(self):
        for name in ("d", "k_b", "R"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name}: must be positive")


@dataclass(frozen=True)
class VelocityGrid:
    dims: int
    v_max: float
    N_v: int
    nodes: np.ndarray = field(repr=False)  # per-axis coordinates, (N_v + 1,)
    dv: float

    @property
    def n_axis(self) -> int:
        return self.N_v + 1

    @property
    def n_nodes(self) -> int:
        return self.n_axis**self.dims

    @property
    def cell_volume(self) -> float:
        return self.dv**self.dims

    @property
    def points(self) -> np.ndarray:
        """All nodes as an ``(n_nodes, dims)`` array, C order over axes."""
        mesh = np.meshgrid(*([self.nodes] * self.dims), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def build_velocity_grid(dims: int, v_max: float, N_v: int) -> VelocityGrid:
    """Uniform tensor grid ``v_j = -v_max + (j - 1) dv``, ``j = 1..N_v+1``."""
    if dims not in (2, 3):
        raise ValueError(f"velocity grid dims must be 2 or 3, got {dims}")
    if not v_max > 0:
        raise ValueError(f"v_max must be positive, got {v_max}")
    if N_v < 2 or N_v % 2:
        raise ValueError(f"N_v must be an even integer >= 2, got {N_v}")
    dv = 2.0 * v_max / N_v
    nodes = -v_max + np.arange(N_v + 1) * dv
    # mirror the lower half so the node set is exactly symmetric about 0
    half = N_v // 2
    nodes[half] = 0.0
    nodes[half + 1:] = -nodes[:half][::-1]
    return VelocityGrid(dims=dims, v_max=float(v_max), N_v=int(N_v), nodes=nodes, dv=dv)


def default_v_max(R: float, T0: float, wall_speed: float = 0.0) -> float:
    return abs(wall_speed) + THERMAL_SPEEDS * np.sqrt(R * T0)


@dataclass
class MacroState:
    rho: float
    U: np.ndarray
    T: float
    E: float

    @classmethod
    def from_primitive(cls, rho, U, T, R) -> "MacroState":
        U = np.asarray(U, dtype=float)
        E = rho * 1.5 * R * T + 0.5 * rho * float(U @ U)
        return cls(float(rho), U, float(T), float(E))

    def internal_energy(self) -> float:
        return self.E / self.rho - 0.5 * float(self.U @ self.U)


@dataclass(frozen=True)
class Particle:
    x: np.ndarray
    kind: int
    wall_id: int | None
    macro: MacroState
    f: np.ndarray
    f_tilde: np.ndarray | None
    neighbors: np.ndarray | None
    voxel: int | None


@dataclass
class ParticleCloud:
    """Interior plus boundary particles of the box ``[0, L]^dims``.

    ``f`` has shape ``(N, ncomp, n_nodes)`` once distributions are allocated:
    ``ncomp == 2`` holds the reduced pair (g1, g2), ``ncomp == 1`` the full f.
    """

    x: np.ndarray
    kind: np.ndarray
    wall_id: np.ndarray
    L: float
    dx: float
    h: float
    rho: np.ndarray = None
    U: np.ndarray = None
    T: np.ndarray = None
    f: np.ndarray = None
    f_tilde: np.ndarray = None

    def __post_init__(self):
        n = len(self.x)
        if self.rho is None:
            self.rho = np.zeros(n)
        if self.U is None:
            self.U = np.zeros((n, self.dims))
        if self.T is None:
            self.T = np.zeros(n)

    @property
    def dims(self) -> int:
        return self.x.shape[1]

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(self.kind == INTERIOR)

    @property
    def boundary(self) -> np.ndarray:
        return np.flatnonzero(self.kind == BOUNDARY)

    def allocate(self, grid: VelocityGrid, ncomp: int) -> None:
        shape = (self.n, ncomp, grid.n_nodes)
        self.f = np.zeros(shape)
        self.f_tilde = np.zeros(shape)

    def particle(self, i: int, R: float, neighbors=None, voxel=None) -> Particle:
        wid = int(self.wall_id[i])
        return Particle(
            x=self.x[i].copy(),
            kind=int(self.kind[i]),
            wall_id=None if wid < 0 else wid,
            macro=MacroState.from_primitive(self.rho[i], self.U[i].copy(), self.T[i], R),
            f=None if self.f is None else self.f[i].copy(),
            f_tilde=None if self.f_tilde is None else self.f_tilde[i].copy(),
            neighbors=neighbors,
            voxel=voxel,
        )

    def take(self, keep: np.ndarray) -> "ParticleCloud":
        """New cloud holding the particles ``keep`` (index or mask), in order."""
        sub = ParticleCloud(
            x=self.x[keep].copy(),
            kind=self.kind[keep].copy(),
            wall_id=self.wall_id[keep].copy(),
            L=self.L,
            dx=self.dx,
            h=self.h,
            rho=self.rho[keep].copy(),
            U=self.U[keep].copy(),
            T=self.T[keep].copy(),
        )
        if self.f is not None:
            sub.f = self.f[keep].copy()
            sub.f_tilde = np.zeros_like(sub.f)
        return sub

    def append(self, x, rho, U, T, f) -> None:
        """Append interior particles (used by particle management)."""
        x = np.atleast_2d(x)
        k = len(x)
        self.x = np.concatenate([self.x, x])
        self.kind = np.concatenate([self.kind, np.full(k, INTERIOR, self.kind.dtype)])
        self.wall_id = np.concatenate([self.wall_id, np.full(k, -1, self.wall_id.dtype)])
        self.rho = np.concatenate([self.rho, np.atleast_1d(rho)])
        self.U = np.concatenate([self.U, np.atleast_2d(U)])
        self.T = np.concatenate([self.T, np.atleast_1d(T)])
        if self.f is not None:
            f = np.asarray(f).reshape((k,) + self.f.shape[1:])
            self.f = np.concatenate([self.f, f])
            self.f_tilde = np.zeros_like(self.f)


def _wall_of(point: np.ndarray, L: float, moving: set[int]) -> int:
    """Wall tag for a lattice point on the box surface, -1 for interior.

    Corner and edge points sit on several faces; a stationary face wins over
    a moving one, then the first face in ``WALL_NAMES`` order.
    """
    faces = []
    for axis, c in enumerate(point):
        if c == 0.0:
            faces.append(2 * axis)
        elif c == L:
            faces.append(2 * axis + 1)
    if not faces:
        return -1
    still = [w for w in faces if w not in moving]
    return min(still) if still else min(faces)


def seed_cavity_cloud(L: float, n_per_axis: int, dims: int, moving_walls=()) -> ParticleCloud:
    """Regular ``n_per_axis**dims`` lattice on ``[0, L]^dims``.

    Lattice points on the faces are boundary particles tagged with a wall
    index into :data:`WALL_NAMES`. ``moving_walls`` (names or indices) only
    influences how corner/edge points are tagged.
    """
    if n_per_axis < 3:
        raise ValueError(f"n_per_axis must be >= 3, got {n_per_axis}")
    if dims not in (2, 3):
        raise ValueError(f"dims must be 2 or 3, got {dims}")
    moving = {WALL_NAMES.index(w) if isinstance(w, str) else int(w) for w in moving_walls}
    dx = L / (n_per_axis - 1)
    axis = np.arange(n_per_axis) * dx
    axis[-1] = L
    mesh = np.meshgrid(*([axis] * dims), indexing="ij")
    x = np.stack([m.ravel() for m in mesh], axis=1)
    wall_id = np.array([_wall_of(p, L, moving) for p in x], dtype=np.int8)
    kind = np.where(wall_id >= 0, BOUNDARY, INTERIOR).astype(np.int8)
    return ParticleCloud(x=x, kind=kind, wall_id=wall_id, L=float(L), dx=dx, h=H_FACTOR * dx)
