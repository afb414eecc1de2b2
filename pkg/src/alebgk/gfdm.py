"""Weighted least-squares derivatives and positive upwind fluxes on point clouds.

For a centre ``i`` with neighbours ``j`` at offsets ``d_j = x_j - x_i`` the
first-order Taylor fit gives ``grad f ~ sum_j a_j (f_j - f_i)`` with
``a_j = w_j S d_j`` and ``S = (sum_j w_j d_j d_j^T)^-1``.

The upwind flux rewrites ``c . grad f`` in the per-neighbour frame
``(n_j, t_j[, b_j])`` (``n_j`` along ``d_j``) and adds dissipation so that
every neighbour coefficient is non-positive::

    Q_i = sum_j [ abar_j (c.n - |c.n|) + bbar_j (c.t) - |bbar_j| |c.t|
                  (+ gbar_j (c.b) - |gbar_j| |c.b|) ] (f_j - f_i)

with ``(abar, bbar, gbar) = A a_j`` and ``A`` the frame matrix. ``abar_j``
is ``w_j d_j^T S d_j / |d_j| >= 0``, which makes ``f_i - dt Q_i`` a convex
combination for ``dt <= 1 / sum_j |coef_j|``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .neighbors import NeighborLists

ALPHA = 6.0
SINGULAR_RTOL = 1e-12


class DeficientStencilError(ArithmeticError):
    def __init__(self, particle, reason="deficient stencil"):
        self.particle = particle
        super().__init__(f"{reason} at particle {particle}")


def weight(dist, h, alpha: float = ALPHA):
    """Truncated Gaussian ``exp(-alpha dist^2 / h^2)`` on ``dist <= h``."""
    dist = np.asarray(dist, dtype=float)
    q = dist / h
    return np.where(q <= 1.0, np.exp(-alpha * q * q), 0.0)


def frames(offsets: np.ndarray) -> np.ndarray:
    """Per-neighbour orthonormal frames, shape ``(m, d, d)``, rows ``n, t[, b]``."""
    offsets = np.asarray(offsets, dtype=float)
    dims = offsets.shape[1]
    phi = np.arctan2(offsets[:, 1], offsets[:, 0])
    cp, sp = np.cos(phi), np.sin(phi)
    if dims == 2:
        return np.stack([np.stack([cp, sp], 1), np.stack([-sp, cp], 1)], 1)
    r = np.linalg.norm(offsets, axis=1)
    theta = np.arccos(np.clip(offsets[:, 2] / r, -1.0, 1.0))
    st, ct = np.sin(theta), np.cos(theta)
    zero = np.zeros_like(phi)
    n = np.stack([st * cp, st * sp, ct], 1)
    t = np.stack([ct * cp, ct * sp, -st], 1)
    b = np.stack([-sp, cp, zero], 1)
    return np.stack([n, t, b], 1)


def _singular(A: np.ndarray) -> np.ndarray:
    ev = np.linalg.eigvalsh(A)
    return ev[..., 0] < SINGULAR_RTOL * ev[..., -1]


@dataclass
class LsOperator:
    center: int
    neighbors: np.ndarray
    weights: np.ndarray
    offsets: np.ndarray
    S: np.ndarray
    deriv_coeffs: np.ndarray  # (m, d): alpha, beta[, gamma] per neighbour
    frames: np.ndarray        # (m, d, d)
    rotated: np.ndarray       # (m, d): abar, bbar[, gbar]

    @property
    def m(self) -> int:
        return len(self.neighbors)

    @property
    def dims(self) -> int:
        return self.offsets.shape[1]


def build_ls_operator(x: np.ndarray, i: int, neighbors, h: float) -> LsOperator:
    neighbors = np.asarray(neighbors, dtype=np.int64)
    d = np.asarray(x, dtype=float)[neighbors] - x[i]
    dims = d.shape[1]
    w = weight(np.linalg.norm(d, axis=1), h)
    keep = w > 0
    neighbors, d, w = neighbors[keep], d[keep], w[keep]
    if len(neighbors) < dims + 2:
        raise DeficientStencilError(i, f"only {len(neighbors)} neighbours")
    A = (d.T * w) @ d
    if _singular(A):
        raise DeficientStencilError(i, "singular moment matrix")
    S = np.linalg.inv(A)
    S = 0.5 * (S + S.T)
    a = w[:, None] * (d @ S)
    fr = frames(d)
    rot = np.einsum("mab,mb->ma", fr, a)
    return LsOperator(i, neighbors, w, d, S, a, fr, rot)


def gradient(op: LsOperator, f_center, f_neighbors) -> np.ndarray:
    df = np.asarray(f_neighbors, dtype=float) - f_center
    return op.deriv_coeffs.T @ df


def effective_coefficients(op_frames, rotated, c) -> np.ndarray:
    """Upwind coefficient multiplying ``(f_j - f_i)`` for each neighbour."""
    proj = np.einsum("mab,b->ma", op_frames, np.asarray(c, dtype=float))
    coef = rotated[:, 0] * (proj[:, 0] - np.abs(proj[:, 0]))
    for a in range(1, proj.shape[1]):
        coef = coef + rotated[:, a] * proj[:, a] - np.abs(rotated[:, a]) * np.abs(proj[:, a])
    return coef


def upwind_flux(op: LsOperator, c, f_center, f_neighbors) -> float:
    coef = effective_coefficients(op.frames, op.rotated, c)
    return float(coef @ (np.asarray(f_neighbors, dtype=float) - f_center))


def upwind_flux_2d(op: LsOperator, c, f_center, f_neighbors) -> float:
    if op.dims != 2:
        raise ValueError("upwind_flux_2d needs a 2D operator")
    return upwind_flux(op, c, f_center, f_neighbors)


def upwind_flux_3d(op: LsOperator, c, f_center, f_neighbors) -> float:
    if op.dims != 3:
        raise ValueError("upwind_flux_3d needs a 3D operator")
    return upwind_flux(op, c, f_center, f_neighbors)


def central_flux(op: LsOperator, c, f_center, f_neighbors) -> float:
    return float(np.asarray(c, dtype=float) @ gradient(op, f_center, f_neighbors))


def stable_dt_for(op: LsOperator, velocities) -> float:
    """Largest step keeping ``f_i - dt Q_i`` a convex combination."""
    worst = 0.0
    for c in np.atleast_2d(velocities):
        worst = max(worst, np.abs(effective_coefficients(op.frames, op.rotated, c)).sum())
    return np.inf if worst == 0 else 1.0 / worst


def interpolation_weights(offsets: np.ndarray, h: float) -> np.ndarray:
    """Coefficients ``c_j`` with ``a0 = sum_j c_j f_j`` for the fit ``a0 + a.dx``.

    ``offsets`` are neighbour positions relative to the target point.
    Raises ``DeficientStencilError(-1)`` if the fit is under-determined.
    """
    offsets = np.asarray(offsets, dtype=float)
    m, dims = offsets.shape
    w = weight(np.linalg.norm(offsets, axis=1), h)
    keep = w > 0
    if keep.sum() < dims + 2:
        raise DeficientStencilError(-1, f"only {int(keep.sum())} interpolation neighbours")
    B = np.concatenate([np.ones((m, 1)), offsets / h], axis=1)
    A = (B.T * w) @ B
    if _singular(A):
        raise DeficientStencilError(-1, "singular interpolation matrix")
    row = np.linalg.solve(A, np.eye(dims + 1)[0])
    return w * (B @ row)


def interpolate_value(positions, target, f_neighbors, h: float):
    """Weighted LS value at ``target`` from neighbours at ``positions``.

    ``f_neighbors`` may carry trailing axes (e.g. all velocity nodes);
    the fit is done independently along them.
    """
    offsets = np.asarray(positions, dtype=float) - np.asarray(target, dtype=float)
    c = interpolation_weights(offsets, h)
    return np.tensordot(c, np.asarray(f_neighbors, dtype=float), axes=(0, 0))


@dataclass
class OperatorSet:
    """LS operators of every particle, stored per CSR pair.

    ``frame``/``rot``/``coeffs`` are indexed like ``lists.nbr``. Particles
    with a deficient stencil have ``deficient[i] = True`` and zero
    coefficients.
    """

    lists: NeighborLists
    coeffs: np.ndarray   # (P, d)
    frame: np.ndarray    # (P, d, d)
    rot: np.ndarray      # (P, d)
    deficient: np.ndarray

    def gradient(self, values: np.ndarray) -> np.ndarray:
        """Gradient of a scalar field at every particle, ``(N, d)``."""
        n = len(self.lists)
        owner = np.repeat(np.arange(n), self.lists.counts())
        df = values[self.lists.nbr] - values[owner]
        out = np.stack([np.bincount(owner, weights=self.coeffs[:, a] * df, minlength=n)
                        for a in range(self.coeffs.shape[1])], axis=1)
        out[self.deficient] = 0.0
        return out

    def rates(self, velocities: np.ndarray) -> np.ndarray:
        """``max_c sum_j |coef_j(c)|`` per particle over the given convective velocities."""
        n = len(self.lists)
        owner = np.repeat(np.arange(n), self.lists.counts())
        best = np.zeros(n)
        for c in np.atleast_2d(velocities):
            coef = effective_coefficients(self.frame, self.rot, c)
            best = np.maximum(best, np.bincount(owner, weights=np.abs(coef), minlength=n))
        return best


def build_operators(x: np.ndarray, lists: NeighborLists, h: float) -> OperatorSet:
    x = np.asarray(x, dtype=float)
    n, dims = x.shape
    counts = lists.counts()
    owner = np.repeat(np.arange(n), counts)
    d = x[lists.nbr] - x[owner]
    r = np.sqrt((d * d).sum(axis=1))
    w = weight(r, h)
    A = np.empty((n, dims, dims))
    for a in range(dims):
        for b in range(a, dims):
            A[:, a, b] = np.bincount(owner, weights=w * d[:, a] * d[:, b], minlength=n)
            A[:, b, a] = A[:, a, b]
    active = np.bincount(owner, weights=(w > 0).astype(float), minlength=n)
    deficient = active < dims + 2
    ok = ~deficient
    if ok.any():
        deficient[ok] = _singular(A[ok])
        ok = ~deficient
    S = np.zeros_like(A)
    if ok.any():
        S[ok] = np.linalg.inv(A[ok])
        S = 0.5 * (S + np.swapaxes(S, 1, 2))
    coeffs = w[:, None] * np.einsum("pab,pb->pa", S[owner], d)
    fr = frames(d) if len(d) else np.zeros((0, dims, dims))
    rot = np.einsum("pab,pb->pa", fr, coeffs)
    return OperatorSet(lists, coeffs, np.ascontiguousarray(fr), np.ascontiguousarray(rot), deficient)


@dataclass
class InterpolationStencils:
    """CSR interpolation stencils: value at ``rows[r]`` is
    ``sum_p coef[p] * f[nbr[p]]`` over ``p in [ptr[r], ptr[r+1])``."""

    rows: np.ndarray
    ptr: np.ndarray
    nbr: np.ndarray
    coef: np.ndarray
    deficient: np.ndarray  # per row


def build_interpolation(x, targets, candidates: list[np.ndarray], h: float,
                        positions=None) -> InterpolationStencils:
    """Stencils interpolating onto particles ``targets`` from ``candidates``.

    ``positions`` overrides the target positions (defaults to ``x[targets]``).
    Deficient rows keep their neighbour entries with zero coefficients.
    """
    x = np.asarray(x, dtype=float)
    targets = np.asarray(targets, dtype=np.int64)
    pos = x[targets] if positions is None else np.asarray(positions, dtype=float)
    nt, dims = len(targets), x.shape[1]
    counts = np.array([len(c) for c in candidates], dtype=np.int64)
    ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    nbr = (np.concatenate(candidates) if nt else np.empty(0)).astype(np.int64)
    owner = np.repeat(np.arange(nt), counts)
    off = (x[nbr] - pos[owner]) / h
    w = weight(np.sqrt((off * off).sum(axis=1)), 1.0)
    basis = np.concatenate([np.ones((len(nbr), 1)), off], axis=1)
    A = np.empty((nt, dims + 1, dims + 1))
    for a in range(dims + 1):
        for b in range(a, dims + 1):
            A[:, a, b] = np.bincount(owner, weights=w * basis[:, a] * basis[:, b], minlength=nt)
            A[:, b, a] = A[:, a, b]
    active = np.bincount(owner, weights=(w > 0).astype(float), minlength=nt)
    deficient = active < dims + 2
    ok = ~deficient
    if ok.any():
        deficient[ok] = _singular(A[ok])
        ok = ~deficient
    rows0 = np.zeros((nt, dims + 1))
    if ok.any():
        e0 = np.zeros((int(ok.sum()), dims + 1, 1))
        e0[:, 0] = 1.0
        rows0[ok] = np.linalg.solve(A[ok], e0)[..., 0]
    coef = w * (basis * rows0[owner]).sum(axis=1)
    return InterpolationStencils(targets, ptr, nbr, coef, deficient)
