"""Speedup tables and per-phase step profiles."""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .parallel import PHASES, Executor
from .phase_space import build_velocity_grid, seed_cavity_cloud
from .solver import RunConfig, Solver

GB = 1e9


def state_bytes(config: RunConfig) -> tuple[int, int]:
    """``(buffer_set, state)`` bytes of a freshly allocated run.

    ``buffer_set`` is one distribution buffer over all particles (both
    reduced components); ``state`` adds the second buffer and the
    per-particle macroscopic arrays.
    """
    cloud = seed_cavity_cloud(config.L, config.n_per_axis, config.dims)
    grid = build_velocity_grid(config.dims, config.velocity_bound, config.N_v)
    ncomp = 2 if config.mode == "reduced" else 1
    item = np.dtype(float).itemsize
    buf = cloud.n * ncomp * grid.n_nodes * item
    macro = cloud.x.nbytes + cloud.rho.nbytes + cloud.U.nbytes + cloud.T.nbytes
    macro += cloud.kind.nbytes + cloud.wall_id.nbytes
    return buf, 2 * buf + macro


@dataclass
class BenchRow:
    n_per_axis: int
    n_particles: int
    seconds: dict[int, float]
    buffer_set_gb: float
    state_gb: float

    def speedup(self, w: int) -> float:
        return self.seconds[min(self.seconds)] / self.seconds[w]


@dataclass
class BenchTable:
    workers: list[int]
    rows: list[BenchRow] = field(default_factory=list)
    phase: str | None = None

    def _cells(self):
        head = ["n_per_axis", "particles"]
        head += [f"t[{w}] s" for w in self.workers]
        head += [f"speedup[{w}]" for w in self.workers]
        head += ["buffer_set_GB", "state_GB"]
        body = []
        for r in self.rows:
            line = [str(r.n_per_axis), str(r.n_particles)]
            line += [f"{r.seconds[w]:.4f}" for w in self.workers]
            line += [f"{r.speedup(w):.2f}" for w in self.workers]
            line += [f"{r.buffer_set_gb:.4f}", f"{r.state_gb:.4f}"]
            body.append(line)
        return head, body

    def text(self) -> str:
        head, body = self._cells()
        width = [max(len(c) for c in col) for col in zip(head, *body)]
        fmt = "  ".join(f"{{:>{w}}}" for w in width)
        out = [fmt.format(*head), fmt.format(*["-" * w for w in width])]
        out += [fmt.format(*line) for line in body]
        return "\n".join(out) + "\n"

    def csv(self) -> str:
        head, body = self._cells()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(head)
        w.writerows(body)
        return buf.getvalue()


def _timed_run(config: RunConfig, workers: int, phase: str | None) -> float:
    with Executor(workers) as ex:
        solver = Solver(config.with_(workers=workers), executor=ex)
        t0 = time.perf_counter()
        for _ in range(config.n_steps):
            solver.step()
        wall = time.perf_counter() - t0
    return solver.timer.totals.get(phase, 0.0) if phase else wall


def bench(config: RunConfig, worker_counts, resolutions=None, phase: str | None = None) -> BenchTable:
    """Time ``config.n_steps`` steps for every (resolution, worker count).

    ``phase`` restricts the timing to one profile label (for example the
    advection phase); by default whole steps are timed.
    """
    workers = sorted({int(w) for w in worker_counts})
    if not workers or workers[0] < 1:
        raise ValueError("workers: need positive worker counts")
    table = BenchTable(workers, phase=phase)
    for n in resolutions or [config.n_per_axis]:
        cfg = config.with_(n_per_axis=int(n))
        secs = {w: _timed_run(cfg, w, phase) for w in workers}
        buf, state = state_bytes(cfg)
        table.rows.append(BenchRow(int(n), int(n) ** cfg.dims, secs, buf / GB, state / GB))
    return table


@dataclass
class Profile:
    steps: int
    totals: dict[str, float]
    step_seconds: float

    @property
    def breakdown(self) -> dict[str, float]:
        total = sum(self.totals.values())
        if total <= 0:
            return {}
        return {k: 100.0 * self.totals.get(k, 0.0) / total for k in PHASES}

    @property
    def dominant(self) -> str | None:
        b = self.breakdown
        return max(b, key=b.get) if b else None

    def text(self) -> str:
        b = self.breakdown
        if not b:
            return "no steps profiled\n"
        width = max(len(k) for k in b)
        out = [f"{'phase':<{width}}  share %", f"{'-' * width}  -------"]
        for k, v in b.items():
            mark = "  <- dominant" if k == self.dominant else ""
            out.append(f"{k:<{width}}  {v:7.2f}{mark}")
        out.append(f"{self.steps} steps, {self.step_seconds:.4f} s per step")
        return "\n".join(out) + "\n"

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["phase", "seconds", "percent", "dominant"])
        for k, v in self.breakdown.items():
            w.writerow([k, f"{self.totals.get(k, 0.0):.6f}", f"{v:.4f}", int(k == self.dominant)])
        return buf.getvalue()


def profile(config: RunConfig, executor: Executor | None = None) -> Profile:
    solver = Solver(config, executor=executor)
    try:
        for _ in range(config.n_steps):
            solver.step()
    finally:
        solver.close()
    recs = solver.timer.step_records
    per_step = float(np.mean([r["total"] for r in recs])) if recs else 0.0
    return Profile(config.n_steps, dict(solver.timer.totals), per_step)
