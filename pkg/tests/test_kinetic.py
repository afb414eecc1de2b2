import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from alebgk.kinetic import (
    DegenerateStateError, InvalidStateError, maxwellian_3d, moments_3d, moments_reduced,
    reduced_maxwellians, relax_implicit, relaxation_time,
)
from alebgk.phase_space import GasProperties, MacroState, build_velocity_grid

import oracles

R = 208.0
GAS = GasProperties()


def state(rho, U, T):
    return MacroState.from_primitive(rho, np.asarray(U, float), T, R)


def test_maxwellian_peak_value():
    T = 1.0 / (2.0 * R)
    g = build_velocity_grid(3, 5.0, 10)
    f = maxwellian_3d(state(1.0, [0, 0, 0], T), g, R)
    centre = np.flatnonzero((g.points == 0).all(axis=1))[0]
    assert f[centre] == pytest.approx(math.pi**-1.5, rel=1e-14)


def test_maxwellian_even_about_mean():
    g = build_velocity_grid(3, 3000.0, 20)
    U = np.array([2 * g.dv, -g.dv, 0.0])
    f = maxwellian_3d(state(1.3, U, 300.0), g, R)
    lookup = {tuple(np.round(p / g.dv).astype(int)): k for k, p in enumerate(g.points)}
    checked = 0
    for k, v in enumerate(g.points):
        mirror = tuple(np.round((2 * U - v) / g.dv).astype(int))
        if mirror in lookup:
            assert f[k] == pytest.approx(f[lookup[mirror]], rel=1e-13)
            checked += 1
    assert checked > 1000


def test_maxwellian_matches_pointwise_oracle():
    g = build_velocity_grid(3, 1500.0, 6)
    U = [30.0, -20.0, 10.0]
    f = maxwellian_3d(state(0.7, U, 250.0), g, R)
    ref = [oracles.maxwellian_point(v, 0.7, U, 250.0, R) for v in g.points]
    np.testing.assert_allclose(f, ref, rtol=1e-12)


def test_zeroth_moment_at_four_thermal_speeds():
    T = 270.0
    v_max = 4 * math.sqrt(R * T)
    g = build_velocity_grid(3, v_max, 20)
    f = maxwellian_3d(state(1.0, [0, 0, 0], T), g, R)
    rho = f.sum() * g.cell_volume
    assert rho == pytest.approx(1.0, rel=1e-3)
    # fine quadrature on a wide box confirms the continuum value
    fine = build_velocity_grid(2, 8 * math.sqrt(R * T), 400)
    G1, _ = reduced_maxwellians(state(1.0, [0, 0], T), fine, R)
    assert G1.sum() * fine.cell_volume == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("rho,T", [(0.0, 300.0), (1.0, 0.0), (-1.0, 300.0), (1.0, -5.0)])
def test_maxwellian_rejects_invalid_state(rho, T):
    g3 = build_velocity_grid(3, 1000.0, 4)
    g2 = build_velocity_grid(2, 1000.0, 4)
    m = MacroState(rho, np.zeros(3), T, 0.0)
    with pytest.raises(InvalidStateError):
        maxwellian_3d(m, g3, R)
    with pytest.raises(InvalidStateError):
        reduced_maxwellians(MacroState(rho, np.zeros(2), T, 0.0), g2, R)


def test_wrong_grid_dims():
    with pytest.raises(ValueError):
        maxwellian_3d(state(1, [0, 0, 0], 300), build_velocity_grid(2, 1000.0, 4), R)
    with pytest.raises(ValueError):
        reduced_maxwellians(state(1, [0, 0], 300), build_velocity_grid(3, 1000.0, 4), R)


def test_reduced_pair_ratio_and_peak():
    g = build_velocity_grid(2, 2000.0, 16)
    m = state(0.4, [50.0, -80.0], 310.0)
    G1, G2 = reduced_maxwellians(m, g, R)
    np.testing.assert_allclose(G2 / G1, R * 310.0, rtol=1e-14)
    T = 1.0 / (2.0 * R)
    G1, _ = reduced_maxwellians(state(1.0, [0, 0], T), build_velocity_grid(2, 5.0, 10), R)
    assert G1.max() == pytest.approx(1.0 / math.pi, rel=1e-14)


@given(st.floats(0.1, 5.0), st.floats(150.0, 600.0), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5),
       st.floats(-0.5, 0.5))
def test_reduced_is_v3_marginal(rho, T, a, b, c):
    s = math.sqrt(R * T)
    U = np.array([a, b, c]) * s
    g = build_velocity_grid(2, 6 * s, 12)
    G1, G2 = reduced_maxwellians(state(rho, U[:2], T), g, R)
    g1, g2 = oracles.marginalize_v3(rho, U, T, R, g.points, abs(U[2]) + 10 * s, 400)
    scale = G1.max()
    np.testing.assert_allclose(G1, g1, rtol=0, atol=1e-7 * scale)
    np.testing.assert_allclose(G2, g2, rtol=0, atol=1e-7 * scale * R * T)


# Round trip on the narrowed domain: 5 <= v_max / sqrt(RT) <= 10, |U| <= v_max / 4.
@given(st.sampled_from([2, 3]), st.floats(0.05, 20.0), st.floats(50.0, 2000.0),
       st.floats(5.0, 10.0), st.floats(0.0, 0.25), st.floats(0.0, 2 * math.pi),
       st.floats(0.0, math.pi))
def test_moment_round_trip(dims, rho, T, spread, frac, phi, theta):
    s = math.sqrt(R * T)
    v_max = spread * s
    direction = np.array([math.cos(phi) * math.sin(theta), math.sin(phi) * math.sin(theta),
                          math.cos(theta)])[:dims]
    n = np.linalg.norm(direction)
    U = frac * v_max * direction / (n if n > 0 else 1.0)
    g = build_velocity_grid(dims, v_max, 20)
    m = state(rho, U, T)
    if dims == 3:
        out = moments_3d(maxwellian_3d(m, g, R), g, R)
    else:
        out = moments_reduced(*reduced_maxwellians(m, g, R), g, R)
    assert out.rho == pytest.approx(rho, rel=1e-3)
    assert np.abs(out.U - U).max() <= 1e-3 * s
    assert out.T == pytest.approx(T, rel=1e-3)
    assert out.E == pytest.approx(m.E, rel=1e-3)


def test_zero_distribution_is_degenerate():
    g = build_velocity_grid(3, 1000.0, 4)
    with pytest.raises(DegenerateStateError):
        moments_3d(np.zeros(g.n_nodes), g, R)
    g2 = build_velocity_grid(2, 1000.0, 4)
    with pytest.raises(DegenerateStateError):
        moments_reduced(np.zeros(g2.n_nodes), np.zeros(g2.n_nodes), g2, R)


def test_single_node_concentration_is_degenerate():
    g = build_velocity_grid(3, 1000.0, 4)
    f = np.zeros(g.n_nodes)
    f[7] = 2.5 / g.cell_volume
    with pytest.raises(DegenerateStateError):
        moments_3d(f, g, R)


def test_scaling_g2_heats_without_moving():
    g = build_velocity_grid(2, 2000.0, 16)
    G1, G2 = reduced_maxwellians(state(1.0, [40.0, 0.0], 300.0), g, R)
    a = moments_reduced(G1, G2, g, R)
    b = moments_reduced(G1, 2 * G2, g, R)
    assert b.rho == a.rho
    np.testing.assert_array_equal(b.U, a.U)
    assert b.T > a.T


def test_relaxation_time_values():
    tau, lam = relaxation_time(state(1.0, [0, 0], 270.0), GAS)
    ref_tau, ref_lam = oracles.tau_by_hand(1.0, 270.0)
    assert tau == pytest.approx(ref_tau, rel=1e-14)
    assert tau == pytest.approx(3.7142e-10, rel=1e-3)
    assert lam / 1e-6 == pytest.approx(0.11, abs=0.005)
    tau01, _ = relaxation_time(state(0.1, [0, 0], 270.0), GAS)
    assert tau01 == pytest.approx(3.7142e-9, rel=1e-3)
    vec, _ = relaxation_time(None, GAS, rho=np.array([1.0, 0.1]), T=np.array([270.0, 270.0]))
    np.testing.assert_allclose(vec, [tau, tau01], rtol=1e-15)


def test_relax_implicit_cases():
    rng = np.random.default_rng(1)
    ft, M = rng.random(50), rng.random(50)
    np.testing.assert_array_equal(relax_implicit(ft, M, 1e-10, 0.0), ft)
    np.testing.assert_allclose(relax_implicit(M, M, 1e-10, 1e-11), M, rtol=1e-15)
    np.testing.assert_allclose(relax_implicit(ft, M, 1e-11, 1e-11), 0.5 * (ft + M), rtol=1e-15)
    with pytest.raises(ValueError):
        relax_implicit(ft, M[:-1], 1e-10, 1e-11)
    with pytest.raises(ValueError):
        relax_implicit(ft, M, 0.0, 1e-11)


@given(st.floats(1e-13, 1e-8), st.floats(0.0, 1e-8), st.integers(0, 2**31))
def test_relax_implicit_stays_nonnegative(tau, dt, seed):
    rng = np.random.default_rng(seed)
    ft, M = rng.random(40) * 3, rng.random(40)
    ft[::5] = 0.0
    out = relax_implicit(ft, M, tau, dt)
    assert np.all(out >= 0)
    lo, hi = np.minimum(ft, M), np.maximum(ft, M)
    assert np.all(out >= lo * (1 - 1e-15)) and np.all(out <= hi * (1 + 1e-15))


@given(st.floats(1e-12, 1e-9), st.floats(1e-13, 1e-10), st.integers(0, 2**31))
def test_relaxation_moment_defect_bound(tau, dt, seed):
    # M built from the moments of f~: the moment change is bounded by the
    # quadrature defect of M scaled by dt / (tau + dt)
    rng = np.random.default_rng(seed)
    T0 = 300.0
    s = math.sqrt(R * T0)
    g = build_velocity_grid(2, 6 * s, 20)
    base = state(1.0, rng.uniform(-0.3, 0.3, 2) * s, T0)
    G1, G2 = reduced_maxwellians(base, g, R)
    ft1 = G1 * (1 + 0.2 * rng.uniform(-1, 1, G1.shape))
    ft2 = G2 * (1 + 0.2 * rng.uniform(-1, 1, G2.shape))
    m = moments_reduced(ft1, ft2, g, R)
    M1, M2 = reduced_maxwellians(m, g, R)
    mM = moments_reduced(M1, M2, g, R)
    eps_rho = abs(mM.rho - m.rho)
    eps_U = np.abs(mM.rho * mM.U - m.rho * m.U).max()
    out = moments_reduced(relax_implicit(ft1, M1, tau, dt), relax_implicit(ft2, M2, tau, dt), g, R)
    wgt = dt / (tau + dt)
    assert abs(out.rho - m.rho) <= eps_rho * wgt + 1e-14
    assert np.abs(out.rho * out.U - m.rho * m.U).max() <= eps_U * wgt + 1e-12 * s
