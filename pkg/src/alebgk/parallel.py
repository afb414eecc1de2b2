"""Deterministic data-parallel maps and per-phase wall-clock accounting.

Work ranges are split into contiguous static chunks, one per worker, and
each chunk is handed to a kernel that owns the output slots of its chunk.
Kernels reduce in a fixed order inside a slot, so outputs are bitwise
identical for any worker count. The compiled kernels release the GIL; a
thread pool is enough to run them concurrently.
"""
from __future__ import annotations

import os
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

# Row labels of the per-task profile.
SPATIAL_DERIVATIVES = "Spatial Derivative Approximation"
UPDATE_MOMENT = "Update Moment"
UPDATE_FUNCTION = "Update Function"
BOUNDARY_INTERPOLATION = "Interpolate Distribution Function on Boundary"
DIFFUSE_REFLECTION = "Diffusive reflection Boundary Condition"
PARTICLE_ORGANIZATION = "Particle Organization"
PHASES = (
    SPATIAL_DERIVATIVES,
    UPDATE_MOMENT,
    UPDATE_FUNCTION,
    BOUNDARY_INTERPOLATION,
    DIFFUSE_REFLECTION,
    PARTICLE_ORGANIZATION,
)


class KernelError(RuntimeError):
    def __init__(self, lo, hi, cause):
        self.lo, self.hi = lo, hi
        super().__init__(f"kernel failed on work items [{lo}, {hi}): {cause!r}")


def default_workers() -> int:
    return os.cpu_count() or 1


def chunks(n: int, parts: int):
    """Static split of ``range(n)`` into at most ``parts`` contiguous pieces."""
    parts = max(1, min(parts, n))
    base, extra = divmod(n, parts)
    lo = 0
    for p in range(parts):
        hi = lo + base + (p < extra)
        yield lo, hi
        lo = hi


class Executor:
    def __init__(self, workers: int | None = None):
        self.workers = max(1, int(workers or default_workers()))
        self._pool = ThreadPoolExecutor(self.workers) if self.workers > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _run(self, n, kernel):
        if n <= 0:
            return
        pieces = list(chunks(n, self.workers))
        if self._pool is None or len(pieces) == 1:
            for lo, hi in pieces:
                self._call(kernel, lo, hi)
            return
        futures = [self._pool.submit(self._call, kernel, lo, hi) for lo, hi in pieces]
        for fut in futures:
            fut.result()

    @staticmethod
    def _call(kernel, lo, hi):
        try:
            kernel(lo, hi)
        except KernelError:
            raise
        except Exception as exc:
            raise KernelError(lo, hi, exc) from exc

    def par_map_particles(self, n: int, kernel) -> None:
        """Run ``kernel(lo, hi)`` over contiguous slices of ``range(n)``."""
        self._run(n, kernel)

    def par_map_phase(self, n_particles: int, n_nodes: int, kernel) -> None:
        """Like :meth:`par_map_particles` over the flat (particle, node) range."""
        self._run(n_particles * n_nodes, kernel)


class PhaseTimer:
    """Wall-clock totals per label, plus per-step records."""

    def __init__(self):
        self.totals = defaultdict(float)
        self.step_records: list[dict] = []
        self._current: dict | None = None

    def begin_step(self):
        self._current = defaultdict(float)
        self._t0 = time.perf_counter()

    def end_step(self):
        rec = dict(self._current or {})
        rec["total"] = time.perf_counter() - self._t0
        self.step_records.append(rec)
        self._current = None
        return rec

    @contextmanager
    def phase(self, label: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            dt = time.perf_counter() - t0
            self.totals[label] += dt
            if self._current is not None:
                self._current[label] += dt

    def breakdown(self) -> dict[str, float]:
        """Percentage of accumulated phase time per label (empty if none)."""
        total = sum(self.totals.values())
        if total <= 0:
            return {}
        return {k: 100.0 * v / total for k, v in self.totals.items()}


def phase_timer(timer: PhaseTimer, label: str, thunk):
    """Run ``thunk()`` under ``label``; returns ``(result, seconds)``."""
    t0 = time.perf_counter()
    with timer.phase(label):
        result = thunk()
    return result, time.perf_counter() - t0
