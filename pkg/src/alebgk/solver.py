"""ALE time stepping for the BGK equation on a moving point cloud.

One step, in order:

1. voxel index and neighbour lists, particle management
2. LS operators and explicit upwind advection ``f~ = f - dt Q(f)`` with the
   convective velocity ``v - U^n`` (interior particles)
3. moments of ``f~`` give ``rho, U, T`` at the new level
4. implicit relaxation ``f = (tau f~ + dt M) / (tau + dt)`` and motion
   ``x += dt U``
5. boundary particles: LS interpolation from interior neighbours, then
   diffuse reflection with a zero-net-mass-flux wall Maxwellian
6. diagnostics

``mode="reduced"`` evolves the pair (g1, g2) on a 2D velocity grid for a 2D
box; ``mode="full"`` evolves f on a 3D velocity grid for a 3D box.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels, parallel
from .gfdm import build_interpolation, build_operators
from .kinetic import DegenerateStateError, moments_3d, moments_reduced, relaxation_time
from .management import fill_holes, merge_close_pairs
from .neighbors import build_voxel_index, neighbor_lists
from .parallel import Executor, PhaseTimer
from .phase_space import (
    INTERIOR,
    WALL_NAMES,
    GasProperties,
    ParticleCloud,
    VelocityGrid,
    build_velocity_grid,
    default_v_max,
    seed_cavity_cloud,
)

log = logging.getLogger(__name__)

CLAMP_FRACTION = 1e-3


class StabilityError(ArithmeticError):
    """Configured time step exceeds the positivity bound of the upwind step."""

    def __init__(self, dt, stable_dt, step):
        self.dt, self.stable_dt, self.step = dt, stable_dt, step
        super().__init__(
            f"dt={dt:.4g} exceeds the positivity limit stable_dt={stable_dt:.4g} at step {step}; "
            "reduce dt or refine the velocity grid bound"
        )


class WallFluxError(ArithmeticError):
    pass


@dataclass(frozen=True)
class WallSpec:
    wall_id: int
    T_wall: float
    U_wall: np.ndarray
    normal: np.ndarray  # inward unit normal

    def __post_init__(self):
        if abs(float(np.dot(self.U_wall, self.normal))) > 1e-12 * (1 + np.linalg.norm(self.U_wall)):
            raise ValueError(f"wall {WALL_NAMES[self.wall_id]} velocity has a normal component")
        if not self.T_wall > 0:
            raise ValueError("wall temperature must be positive")

    @property
    def name(self) -> str:
        return WALL_NAMES[self.wall_id]


def cavity_walls(dims: int, T_wall: float, lid_velocity, lid: str | None = None) -> list[WallSpec]:
    """Box walls at ``T_wall``; the lid (default: the upper face of the last
    axis) moves with ``lid_velocity``, all other walls are at rest."""
    lid = lid or WALL_NAMES[2 * dims - 1]
    lid_velocity = np.asarray(lid_velocity, dtype=float)
    walls = []
    for w in range(2 * dims):
        axis, hi = divmod(w, 2)
        normal = np.zeros(dims)
        normal[axis] = -1.0 if hi else 1.0
        U = lid_velocity.copy() if WALL_NAMES[w] == lid else np.zeros(dims)
        walls.append(WallSpec(w, float(T_wall), U, normal))
    return walls


@dataclass
class RunConfig:
    L: float
    n_per_axis: int
    N_v: int
    dt: float
    n_steps: int
    dims: int = 2
    mode: str = "reduced"
    v_max: float | None = None
    gas: GasProperties = field(default_factory=GasProperties)
    rho0: float = 1.0
    T0: float = 270.0
    U0: tuple = ()
    T_wall: float | None = None
    lid_velocity: tuple = ()
    lid: str | None = None
    manage: bool = True
    r_merge: float = 0.2       # in units of the initial spacing
    m_min: int | None = None   # default dims + 3
    check_stable_dt: bool = True
    snapshot_every: int = 50
    snapshot_format: str = "csv"
    workers: int | None = None

    def __post_init__(self):
        if not self.U0:
            self.U0 = (0.0,) * self.dims
        if not self.lid_velocity:
            self.lid_velocity = (0.0,) * self.dims
        self.U0 = tuple(float(u) for u in self.U0)
        self.lid_velocity = tuple(float(u) for u in self.lid_velocity)
        self.validate()

    def validate(self):
        def bad(name, why):
            raise ValueError(f"{name}: {why}")

        if self.dims not in (2, 3):
            bad("dims", "must be 2 or 3")
        if self.mode not in ("reduced", "full"):
            bad("mode", "must be 'reduced' or 'full'")
        if (self.mode == "reduced") != (self.dims == 2):
            bad("mode", f"mode {self.mode!r} is inconsistent with dims={self.dims}")
        if not self.dt > 0:
            bad("dt", "must be positive")
        if self.n_steps < 0:
            bad("n_steps", "must be >= 0")
        if not self.L > 0:
            bad("L", "must be positive")
        if self.n_per_axis < 3:
            bad("n_per_axis", "must be >= 3")
        if self.N_v < 2 or self.N_v % 2:
            bad("N_v", "must be an even integer >= 2")
        if self.v_max is not None and not self.v_max > 0:
            bad("v_max", "must be positive")
        if not (self.rho0 > 0 and self.T0 > 0):
            bad("rho0/T0", "must be positive")
        if len(self.U0) != self.dims:
            bad("U0", f"needs {self.dims} components")
        if len(self.lid_velocity) != self.dims:
            bad("lid_velocity", f"needs {self.dims} components")
        if self.lid is not None and self.lid not in WALL_NAMES[: 2 * self.dims]:
            bad("lid", f"unknown wall {self.lid!r}")
        if self.snapshot_every < 1:
            bad("snapshot_every", "must be >= 1")
        if self.snapshot_format not in ("csv", "vtk"):
            bad("snapshot_format", "must be csv or vtk")
        if self.r_merge < 0:
            bad("r_merge", "must be >= 0")
        if self.workers is not None and self.workers < 1:
            bad("workers", "must be >= 1")

    @property
    def wall_temperature(self) -> float:
        return self.T0 if self.T_wall is None else self.T_wall

    @property
    def walls(self) -> list[WallSpec]:
        return cavity_walls(self.dims, self.wall_temperature, self.lid_velocity, self.lid)

    @property
    def velocity_bound(self) -> float:
        if self.v_max is not None:
            return self.v_max
        wall = max(np.linalg.norm(w.U_wall) for w in self.walls)
        return default_v_max(self.gas.R, max(self.T0, self.wall_temperature),
                             max(wall, float(np.linalg.norm(self.U0))))

    @property
    def min_neighbors(self) -> int:
        return self.dims + 3 if self.m_min is None else self.m_min

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)


@dataclass
class StepDiagnostics:
    step: int
    time: float
    n_particles: int
    mass: float
    momentum: np.ndarray
    stable_dt: float
    wall_flux: float          # max relative net mass flux over boundary particles
    min_f: float
    merged: int = 0
    inserted: int = 0
    deficient: list = field(default_factory=list)
    boundary_fallback: list = field(default_factory=list)
    clamped: int = 0
    clipped: int = 0          # negative interpolated boundary values set to 0
    phase_times: dict = field(default_factory=dict)


@dataclass
class Snapshot:
    step: int
    time: float
    x: np.ndarray
    kind: np.ndarray
    rho: np.ndarray
    U: np.ndarray
    T: np.ndarray

    @classmethod
    def of(cls, solver: "Solver") -> "Snapshot":
        c = solver.cloud
        return cls(solver.step_index, solver.time, c.x.copy(), c.kind.copy(), c.rho.copy(),
                   c.U.copy(), c.T.copy())


def _as_rows(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


class Solver:
    def __init__(self, config: RunConfig, executor: Executor | None = None, impl=None,
                 cloud: ParticleCloud | None = None):
        self.config = config
        self.gas = config.gas
        self.impl = impl or kernels
        self.executor = executor or Executor(config.workers)
        self._owns_executor = executor is None
        self.grid: VelocityGrid = build_velocity_grid(config.dims, config.velocity_bound, config.N_v)
        self.nodes = np.ascontiguousarray(self.grid.points)
        self.ncomp = 2 if config.mode == "reduced" else 1
        self.walls = {w.wall_id: w for w in config.walls}
        moving = [w.wall_id for w in self.walls.values() if np.any(w.U_wall != 0)]
        self.cloud = cloud or seed_cavity_cloud(config.L, config.n_per_axis, config.dims, moving)
        self.step_index = 0
        self.time = 0.0
        self.timer = PhaseTimer()
        self.history: list[StepDiagnostics] = []
        self.initialize()

    def close(self):
        if self._owns_executor:
            self.executor.close()

    # -- setup ---------------------------------------------------------------

    def equilibrium(self, rho, U, T) -> np.ndarray:
        """Discrete Maxwellian with ``ncomp`` components, shape ``(ncomp, K)``."""
        R = self.gas.R
        c2 = ((self.nodes - np.asarray(U, dtype=float)) ** 2).sum(axis=1)
        M = rho / (2.0 * np.pi * R * T) ** (self.config.dims / 2.0) * np.exp(-c2 / (2.0 * R * T))
        if self.ncomp == 2:
            return np.stack([M, R * T * M])
        return M[None, :]

    def initialize(self):
        cfg, c = self.config, self.cloud
        if c.f is None:
            c.allocate(self.grid, self.ncomp)
            c.f[:] = self.equilibrium(cfg.rho0, cfg.U0, cfg.T0)
        self._rebuild_neighbors()
        self._recover(np.arange(c.n), c.f)
        self._apply_boundaries()
        self.timer = PhaseTimer()  # setup is not part of any step

    def macro_of(self, f_row):
        if self.ncomp == 2:
            m = moments_reduced(f_row[0], f_row[1], self.grid, self.gas.R)
        else:
            m = moments_3d(f_row[0], self.grid, self.gas.R)
        return m.rho, m.U, m.T

    # -- phases --------------------------------------------------------------

    def _rebuild_neighbors(self):
        c = self.cloud
        self.index = build_voxel_index(c.x, c.L, c.h)
        self.lists = neighbor_lists(self.index, c.x, self.executor, self.impl)

    def _manage(self, diag: StepDiagnostics):
        cfg, c = self.config, self.cloud
        merge = merge_close_pairs(c, self.lists, cfg.r_merge * c.dx, self.macro_of)
        if merge.changed:
            self._rebuild_neighbors()
        fill = fill_holes(c, self.lists, self.index, cfg.min_neighbors, self.macro_of)
        if fill.changed:
            self._rebuild_neighbors()
        diag.merged = len(merge.merged)
        diag.inserted = len(fill.inserted)
        if merge.failed or fill.skipped:
            log.info("step %d: %d merges and %d insertions skipped", self.step_index,
                     len(merge.failed), len(fill.skipped))

    def _advect(self, dt, diag: StepDiagnostics):
        c = self.cloud
        self.ops = build_operators(c.x, self.lists, c.h)
        interior = c.kind == INTERIOR
        rows = _as_rows(np.flatnonzero(interior & ~self.ops.deficient))
        stuck = np.flatnonzero(interior & self.ops.deficient)
        if len(stuck):
            diag.deficient = stuck.tolist()
            log.warning("step %d: deficient stencils at %s; values carried over",
                        self.step_index, stuck[:10].tolist())
        c.f_tilde[stuck] = c.f[stuck]
        rate = np.zeros(c.n)
        ops, lists = self.ops, self.lists
        self.executor.par_map_particles(
            len(rows),
            lambda lo, hi: self.impl.advect(rows, lo, hi, lists.ptr, lists.nbr, ops.frame, ops.rot,
                                            self.nodes, c.U, c.f, c.f_tilde, dt, rate),
        )
        worst = rate[rows].max() if len(rows) else 0.0
        diag.stable_dt = np.inf if worst <= 0 else 1.0 / worst
        if self.config.check_stable_dt and dt > diag.stable_dt:
            raise StabilityError(dt, diag.stable_dt, self.step_index)
        return _as_rows(np.flatnonzero(interior))

    def _recover(self, rows, src):
        """Macro state of ``rows`` from the distributions in ``src``."""
        c = self.cloud
        rows = _as_rows(rows)
        rho = c.rho.copy()
        U = c.U.copy()
        e3 = np.zeros(c.n)
        self.executor.par_map_particles(
            len(rows),
            lambda lo, hi: self.impl.moments(rows, lo, hi, self.nodes, src, self.grid.cell_volume,
                                             rho, U, e3),
        )
        r = rows
        bad = r[~(rho[r] > 0)]
        if len(bad):
            raise DegenerateStateError(f"non-positive density {rho[bad[0]]}", int(bad[0]),
                                       self.step_index)
        T = e3[r] / (3.0 * rho[r] * self.gas.R)
        bad = r[~(T > 1e-12)]
        if len(bad):
            raise DegenerateStateError("degenerate temperature", int(bad[0]), self.step_index)
        c.rho[r] = rho[r]
        c.U[r] = U[r]
        c.T[r] = T

    def _relax_and_move(self, rows, dt, diag: StepDiagnostics):
        c = self.cloud
        tau = np.zeros(c.n)
        tau[rows] = relaxation_time(None, self.gas, rho=c.rho[rows], T=c.T[rows])[0]
        K = self.grid.n_nodes
        self.executor.par_map_phase(
            len(rows), K,
            lambda lo, hi: self.impl.relax(rows, lo, hi, self.nodes, c.rho, c.U, c.T, tau,
                                           self.gas.R, dt, c.f_tilde, c.f),
        )
        x = c.x[rows] + dt * c.U[rows]
        eps = CLAMP_FRACTION * c.dx
        out = (x <= 0.0) | (x >= c.L)
        if out.any():
            diag.clamped = int(out.any(axis=1).sum())
            log.warning("step %d: clamped %d particles at the walls", self.step_index, diag.clamped)
            x = np.where(x <= 0.0, eps, np.where(x >= c.L, c.L - eps, x))
        c.x[rows] = x

    def _boundary_stencils(self):
        c = self.cloud
        brows = c.boundary
        cands = []
        for b in brows:
            nb = self.lists[b]
            cands.append(nb[c.kind[nb] == INTERIOR])
        return build_interpolation(c.x, brows, cands, c.h)

    def _interpolate_boundary(self, diag: StepDiagnostics | None):
        c = self.cloud
        st = self._boundary_stencils()
        rows = _as_rows(st.rows)
        prev = c.f[rows[st.deficient]].copy()
        self.executor.par_map_particles(
            len(rows),
            lambda lo, hi: self.impl.interp(rows, lo, hi, st.ptr, st.nbr, st.coef, c.f, c.f),
        )
        c.f[rows[st.deficient]] = prev
        neg = c.f[rows] < 0.0
        if diag is not None:
            diag.clipped = int(neg.sum())
        c.f[rows] = np.where(neg, 0.0, c.f[rows])
        if st.deficient.any():
            fallback = rows[st.deficient].tolist()
            if diag is not None:
                diag.boundary_fallback = fallback
            log.warning("step %d: boundary interpolation deficient at %s", self.step_index,
                        fallback[:10])

    def _reflect(self) -> float:
        """Diffuse reflection on all boundary particles; returns the largest
        relative net normal mass flux left after the update."""
        c = self.cloud
        rows = c.boundary
        if not len(rows):
            return 0.0
        R = self.gas.R
        wid = c.wall_id[rows]
        normal = np.array([self.walls[w].normal for w in wid])
        Uw = np.array([self.walls[w].U_wall for w in wid])
        Tw = np.array([self.walls[w].T_wall for w in wid])
        cn = np.einsum("bkd,bd->bk", self.nodes[None, :, :] - Uw[:, None, :], normal)
        outgoing = cn > 0
        incoming = cn < 0
        c2 = ((self.nodes[None, :, :] - Uw[:, None, :]) ** 2).sum(axis=2)
        Mw = np.exp(-c2 / (2.0 * R * Tw[:, None])) / (2.0 * np.pi * R * Tw[:, None]) ** (self.config.dims / 2.0)
        f = c.f[rows]
        flux_in = np.where(incoming, cn * f[:, 0], 0.0).sum(axis=1)
        flux_out = np.where(outgoing, cn * Mw, 0.0).sum(axis=1)
        if np.any(flux_out <= 0):
            raise WallFluxError("wall Maxwellian carries no outgoing flux; velocity grid too coarse")
        rho_w = -flux_in / flux_out
        emitted = rho_w[:, None] * Mw
        f[:, 0] = np.where(outgoing, emitted, f[:, 0])
        if self.ncomp == 2:
            f[:, 1] = np.where(outgoing, R * Tw[:, None] * emitted, f[:, 1])
        c.f[rows] = f
        net = (cn * f[:, 0]).sum(axis=1)
        scale = np.abs(cn * f[:, 0]).sum(axis=1)
        return float(np.max(np.abs(net) / np.where(scale > 0, scale, 1.0)))

    def _apply_boundaries(self, diag: StepDiagnostics | None = None) -> float:
        with self.timer.phase(parallel.BOUNDARY_INTERPOLATION):
            self._interpolate_boundary(diag)
        with self.timer.phase(parallel.DIFFUSE_REFLECTION):
            flux = self._reflect()
            self._recover(self.cloud.boundary, self.cloud.f)
        return flux

    # -- driver --------------------------------------------------------------

    def step(self, dt: float | None = None) -> StepDiagnostics:
        dt = self.config.dt if dt is None else dt
        c = self.cloud
        diag = StepDiagnostics(self.step_index + 1, self.time + dt, c.n, 0.0, None, np.inf, 0.0, 0.0)
        self.timer.begin_step()
        with self.timer.phase(parallel.PARTICLE_ORGANIZATION):
            self._rebuild_neighbors()
            if self.config.manage:
                self._manage(diag)
        c = self.cloud
        with self.timer.phase(parallel.SPATIAL_DERIVATIVES):
            rows = self._advect(dt, diag)
        with self.timer.phase(parallel.UPDATE_MOMENT):
            self._recover(rows, c.f_tilde)
        with self.timer.phase(parallel.UPDATE_FUNCTION):
            self._relax_and_move(rows, dt, diag)
        diag.wall_flux = self._apply_boundaries(diag)
        self.step_index += 1
        self.time += dt
        diag.phase_times = self.timer.end_step()
        self._fill_diagnostics(diag)
        self.history.append(diag)
        return diag

    def _fill_diagnostics(self, diag: StepDiagnostics):
        c = self.cloud
        inner = c.interior
        vol = c.dx**c.dims
        diag.n_particles = c.n
        diag.mass = float(c.rho[inner].sum() * vol)
        diag.momentum = (c.rho[inner, None] * c.U[inner]).sum(axis=0) * vol
        diag.min_f = float(c.f.min())
        if diag.min_f < 0:
            raise DegenerateStateError(f"negative distribution value {diag.min_f}",
                                       int(np.argmin(c.f.min(axis=(1, 2)))), self.step_index)

    def total_mass(self) -> float:
        c = self.cloud
        return float(c.rho[c.interior].sum() * c.dx**c.dims)


@dataclass
class RunResult:
    snapshots: list[Snapshot]
    diagnostics: list[StepDiagnostics]
    timer: PhaseTimer
    solver: Solver

    @property
    def final(self) -> Snapshot:
        return self.snapshots[-1]


def velocity_change(a: Snapshot, b: Snapshot) -> float:
    """Relative L2 change of the velocity field between two snapshots."""
    if a.U.shape != b.U.shape:
        return np.inf
    ref = np.linalg.norm(b.U)
    return float(np.linalg.norm(b.U - a.U) / ref) if ref > 0 else float(np.linalg.norm(b.U - a.U))


def run(config: RunConfig, *, executor: Executor | None = None, impl=None, on_snapshot=None,
        on_step=None, stop_when=None) -> RunResult:
    """Run ``config.n_steps`` steps, snapshotting every ``config.snapshot_every``.

    ``on_snapshot(snapshot)`` and ``on_step(diag)`` are optional callbacks.
    ``stop_when(previous, current)`` may end the run early at a snapshot.
    """
    solver = Solver(config, executor=executor, impl=impl)
    try:
        snaps = [Snapshot.of(solver)]
        if on_snapshot:
            on_snapshot(snaps[-1])
        for n in range(1, config.n_steps + 1):
            diag = solver.step()
            if on_step:
                on_step(diag)
            if n % config.snapshot_every == 0 or n == config.n_steps:
                snaps.append(Snapshot.of(solver))
                if on_snapshot:
                    on_snapshot(snaps[-1])
                if stop_when is not None and stop_when(snaps[-2], snaps[-1]):
                    break
        return RunResult(snaps, solver.history, solver.timer, solver)
    finally:
        solver.close()
