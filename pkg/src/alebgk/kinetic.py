"""Maxwellians, discrete moments, relaxation time and the implicit BGK update.

All integrals over velocity are plain node sums times ``dv**dims`` on the
uniform grid. Distributions are flat arrays over the grid nodes in the order
of :attr:`VelocityGrid.points`.
"""
from __future__ import annotations

import numpy as np

from .phase_space import GasProperties, MacroState, VelocityGrid

T_FLOOR = 1e-12


class InvalidStateError(ValueError):
    """A macroscopic state with non-positive density or temperature."""


class DegenerateStateError(ArithmeticError):
    """Moments of a distribution do not define a valid gas state.

    Raised for vacuum (rho <= 0) or vanishing temperature, which in a run
    means the scheme blew up somewhere upstream.
    """

    def __init__(self, msg, particle=None, step=None):
        self.particle = particle
        self.step = step
        ctx = []
        if particle is not None:
            ctx.append(f"particle {particle}")
        if step is not None:
            ctx.append(f"step {step}")
        super().__init__(msg + (f" ({', '.join(ctx)})" if ctx else ""))


def _check_state(m: MacroState) -> None:
    if not (m.rho > 0 and m.T > 0):
        raise InvalidStateError(f"invalid macro state rho={m.rho}, T={m.T}")


def _gauss(m: MacroState, grid: VelocityGrid, R: float) -> np.ndarray:
    c = grid.points - np.asarray(m.U, dtype=float)[: grid.dims]
    return np.exp(-np.einsum("kd,kd->k", c, c) / (2.0 * R * m.T))


def maxwellian_3d(m: MacroState, grid: VelocityGrid, R: float) -> np.ndarray:
    """``rho / (2 pi R T)^(3/2) exp(-|v - U|^2 / (2 R T))`` at every node."""
    if grid.dims != 3:
        raise ValueError("maxwellian_3d needs a 3D velocity grid")
    _check_state(m)
    return m.rho / (2.0 * np.pi * R * m.T) ** 1.5 * _gauss(m, grid, R)


def reduced_maxwellians(m: MacroState, grid2: VelocityGrid, R: float):
    """The v3-marginals ``(G1, G2)`` of the 3D Maxwellian; ``G2 = R T G1``."""
    if grid2.dims != 2:
        raise ValueError("reduced_maxwellians needs a 2D velocity grid")
    _check_state(m)
    G1 = m.rho / (2.0 * np.pi * R * m.T) * _gauss(m, grid2, R)
    return G1, R * m.T * G1


def _finish(rho, rhoU, three_rho_RT, R) -> MacroState:
    if not rho > 0:
        raise DegenerateStateError(f"non-positive density {rho}")
    U = rhoU / rho
    T = three_rho_RT / (3.0 * rho * R)
    if not T > T_FLOOR:
        raise DegenerateStateError(f"degenerate temperature {T}")
    return MacroState.from_primitive(rho, U, T, R)


def moments_3d(f: np.ndarray, grid: VelocityGrid, R: float) -> MacroState:
    if grid.dims != 3:
        raise ValueError("moments_3d needs a 3D velocity grid")
    v = grid.points
    w = grid.cell_volume
    rho = f.sum() * w
    if not rho > 0:
        raise DegenerateStateError(f"non-positive density {rho}")
    rhoU = v.T @ f * w
    c = v - rhoU / rho
    return _finish(rho, rhoU, np.einsum("kd,kd,k->", c, c, f) * w, R)


def moments_reduced(g1: np.ndarray, g2: np.ndarray, grid2: VelocityGrid, R: float) -> MacroState:
    if grid2.dims != 2:
        raise ValueError("moments_reduced needs a 2D velocity grid")
    v = grid2.points
    w = grid2.cell_volume
    rho = g1.sum() * w
    if not rho > 0:
        raise DegenerateStateError(f"non-positive density {rho}")
    rhoU = v.T @ g1 * w
    c = v - rhoU / rho
    e = np.einsum("kd,kd,k->", c, c, g1) * w + g2.sum() * w
    return _finish(rho, rhoU, e, R)


def mean_free_path(rho, gas: GasProperties):
    return gas.k_b / (np.sqrt(2.0) * np.pi * rho * gas.R * gas.d**2)


def relaxation_time(m: MacroState | None, gas: GasProperties, *, rho=None, T=None):
    """Relaxation time and mean free path ``(tau, lam)``.

    ``lam = k_b / (sqrt(2) pi rho R d^2)``, ``tau = 4 lam / (pi C)`` with the
    mean thermal speed ``C = sqrt(8 R T / pi)``. Pass ``rho``/``T`` arrays
    instead of ``m`` for the vectorised form.
    """
    if m is not None:
        _check_state(m)
        rho, T = m.rho, m.T
    lam = mean_free_path(rho, gas)
    c_bar = np.sqrt(8.0 * gas.R * np.asarray(T) / np.pi)
    tau = 4.0 * lam / (np.pi * c_bar)
    return tau, lam


def relax_implicit(f_tilde: np.ndarray, M: np.ndarray, tau: float, dt: float) -> np.ndarray:
    """``(tau f_tilde + dt M) / (tau + dt)``, nodewise."""
    f_tilde = np.asarray(f_tilde)
    M = np.asarray(M)
    if f_tilde.shape != M.shape:
        raise ValueError(f"shape mismatch {f_tilde.shape} vs {M.shape}")
    if not tau > 0 or dt < 0:
        raise ValueError(f"need tau > 0 and dt >= 0, got tau={tau}, dt={dt}")
    w_keep = tau / (tau + dt)  # exactly 1 when dt == 0
    return w_keep * f_tilde + (dt / (tau + dt)) * M
