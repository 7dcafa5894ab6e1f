import warnings
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from nematic_interface import dynamics as dy
from nematic_interface import field as fl
from nematic_interface import qtensor as qt
from nematic_interface.field import ElasticParams, PeriodicGrid, QField, VelocityField
from nematic_interface.qtensor import BulkParams

from nematic_interface.field import smooth_random

P = BulkParams(1.0 / 3.0, 3.0, 1.0)
G64 = PeriodicGrid(64, 64)
N0 = np.array([0.6, 0.8, 0.0])


def random_state(grid, seed, q_amp=0.8, v_amp=0.5):
    rng = np.random.default_rng(seed)
    Q = QField(grid, smooth_random(grid, rng, kmax=4, amp=q_amp))
    v = dy.project_divergence_free(VelocityField(grid, smooth_random(grid, rng, kmax=4, amp=v_amp, comps=2)))
    return dy.FlowState(0.0, Q, v)


def rotate90(state):
    """Rotate fields by +90 degrees about e3: F'(x) = R F(R^T x)."""
    R = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])

    def remap(a):
        # F'[i, j] = F[j, -i mod n]
        n = a.shape[-1]
        return a.swapaxes(-1, -2)[..., (-np.arange(n)) % n, :]

    qm = remap(state.Q.matrices().transpose(2, 3, 0, 1)).transpose(2, 3, 0, 1)
    qm = R @ qm @ R.T
    v = remap(state.v.data)
    v = np.stack([-v[1], v[0]])
    g = state.grid
    return dy.FlowState(state.t, QField(g, qt.from_matrix(qm)), VelocityField(g, v))


def test_rotation_helper_moves_points():
    g = PeriodicGrid(8, 8)
    f = np.zeros((2,) + g.dims)
    f[0, 1, 2] = 1.0  # a unit x-vector at node (1, 2)
    st = dy.FlowState(0.0, QField.zeros(g), VelocityField(g, f))
    r = rotate90(st)
    # (x, y) = (1, 2) maps to (-2, 1) and the vector turns into +y
    assert r.v.data[1, -2 % 8, 1] == 1.0
    assert np.sum(np.abs(r.v.data)) == 1.0


def test_config_defaults():
    cfg = dy.SolverConfig(eps=0.1)
    assert cfg.dt == pytest.approx(0.05 * 0.01)
    assert cfg.stabilization == pytest.approx(2 * (1 / 3 + 3 + 1) / 0.01)
    with pytest.raises(ValueError):
        dy.SolverConfig(eps=0.1, nu=0)
    with pytest.raises(ValueError):
        dy.SolverConfig(eps=0.1, scheme="rk4")


def test_gradient_flow_fixed_points():
    cfg = dy.SolverConfig(eps=0.1)
    Q = fl.uniaxial_field(G64, 1.0, N0)
    assert np.max(np.abs(dy.step_gradient_flow(Q, cfg).data - Q.data)) <= 1e-14
    Q2 = fl.uniaxial_field(G64, 0.5, N0)
    assert np.max(np.abs(dy.step_gradient_flow(Q2, cfg).data - Q2.data)) <= 1e-14
    rng = np.random.default_rng(0)
    pert = QField(G64, Q2.data + 1e-6 * smooth_random(G64, rng, amp=1.0))
    res = dy.run(20 * cfg.dt, pert, cfg, cadence=1)
    e = res.series("energy_free")
    assert np.all(np.diff(e) < 0)


@pytest.mark.parametrize("ep", [ElasticParams(), ElasticParams(1.0, -0.5, 0.2)])
def test_gradient_flow_energy_monotone(ep):
    cfg = dy.SolverConfig(eps=0.08, elastic=ep)
    Q = random_state(G64, 1, q_amp=1.2).Q
    res = dy.run(300 * cfg.dt, Q, cfg, cadence=1)
    e = res.series("energy_free")
    assert np.all(np.diff(e) <= 1e-12 * np.abs(e[:-1]))
    assert e[-1] < e[0]


def test_gradient_flow_anisotropic_matches_explicit_limit():
    # one tiny implicit step agrees with an explicit evaluation of H
    eps = 0.1
    ep = ElasticParams(1.0, -0.5, 0.3)
    cfg = dy.SolverConfig(eps=eps, elastic=ep, dt=1e-7)
    Q = random_state(G64, 2).Q
    new = dy.step_gradient_flow(Q, cfg)
    H = fl.molecular_field(Q, eps, P, ep)
    rate = (new.data - Q.data) / cfg.dt
    assert np.max(np.abs(rate - H.data)) <= 1e-3 * np.max(np.abs(H.data))


def test_elastic_symbol_matches_operator():
    g = PeriodicGrid(16, 16)
    ep = ElasticParams(1.0, -0.4, 0.7)
    M = dy.elastic_symbol_matrices(g, ep)
    assert_allclose(M, np.swapaxes(M, -1, -2), atol=1e-12)
    Q = QField(g, np.random.default_rng(3).normal(size=(5, 16, 16)))
    via_symbol = g.ifft(np.einsum("xyab,bxy->axy", M, g.fft(Q.data)))
    assert_allclose(via_symbol, fl.elastic_operator(Q, ep).data, atol=1e-10)


def test_beris_edwards_fixed_point():
    cfg = dy.SolverConfig(eps=0.1, xi=0.7)
    st = dy.FlowState(0.0, fl.uniaxial_field(G64, 1.0, N0), VelocityField.zeros(G64))
    new = dy.step_beris_edwards(st, cfg)
    assert np.max(np.abs(new.Q.data - st.Q.data)) <= 1e-13
    assert np.max(np.abs(new.v.data)) <= 1e-13


def test_isotropic_phase_reduces_to_navier_stokes():
    cfg = dy.SolverConfig(eps=0.1)
    st = random_state(G64, 4)
    st = dy.FlowState(0.0, QField.zeros(G64), st.v)
    a, b = st, st
    for _ in range(50):
        a = dy.step_beris_edwards(a, cfg)
        b = dy.step_navier_stokes(b, cfg)
        assert np.max(np.abs(a.Q.data)) == 0.0
        assert np.max(np.abs(a.v.data - b.v.data)) <= 1e-12
    assert dy.kinetic_energy(b.v) < dy.kinetic_energy(st.v)


def test_beris_edwards_energy_and_incompressibility():
    cfg = dy.SolverConfig(eps=0.1)
    st = random_state(G64, 5, q_amp=1.2)
    res = dy.run(200 * cfg.dt, st, cfg, observers=(dy.energy_observer, dy.divergence_observer), cadence=1)
    e = res.series("energy_free") + res.series("energy_kinetic")
    assert np.all(np.diff(e) <= 1e-12 * np.abs(e[:-1]))
    assert np.max(res.series("div_max")[1:]) <= 1e-10


@pytest.mark.parametrize("xi", [0.0, 0.8])
def test_frame_consistency(xi):
    cfg = dy.SolverConfig(eps=0.1, xi=xi)
    st = random_state(G64, 6, q_amp=1.0)
    a = rotate90(st)
    b = st
    for _ in range(10):
        a = dy.step_beris_edwards(a, cfg)
        b = dy.step_beris_edwards(b, cfg)
    rb = rotate90(b)
    assert np.max(np.abs(a.Q.data - rb.Q.data)) <= 1e-10
    assert np.max(np.abs(a.v.data - rb.v.data)) <= 1e-10


def test_frame_consistency_gradient_flow_anisotropic():
    cfg = dy.SolverConfig(eps=0.1, elastic=ElasticParams(1.0, -0.5, 0.3))
    st = random_state(G64, 7, q_amp=1.0, v_amp=0.0)
    a = rotate90(st).Q
    b = st.Q
    for _ in range(10):
        a = dy.step_gradient_flow(a, cfg)
        b = dy.step_gradient_flow(b, cfg)
    rb = rotate90(dy.FlowState(0.0, b, st.v)).Q
    assert np.max(np.abs(a.data - rb.data)) <= 1e-10


def test_determinism():
    cfg = dy.SolverConfig(eps=0.1, xi=0.5)
    st = random_state(G64, 8)
    r1 = dy.run(30 * cfg.dt, st, cfg, cadence=5)
    r2 = dy.run(30 * cfg.dt, st, cfg, cadence=5)
    assert r1.state.Q.data.tobytes() == r2.state.Q.data.tobytes()
    assert r1.records == r2.records


def test_run_bookkeeping():
    cfg = dy.SolverConfig(eps=0.1)
    Q = random_state(G64, 9).Q
    same = dy.run(0.0, Q, cfg)
    assert same.state is Q and same.steps == 0 and len(same.records) == 1
    res = dy.run(10 * cfg.dt, Q, cfg, cadence=0)
    assert [r["step"] for r in res.records] == [0, 10]
    assert res.t == pytest.approx(10 * cfg.dt)
    res = dy.run(10 * cfg.dt, Q, cfg, cadence=4)
    assert [r["step"] for r in res.records] == [0, 4, 8, 10]


def test_divergence_error_names_step():
    g = PeriodicGrid(32, 32)
    cfg = dy.SolverConfig(eps=0.2, scheme="explicit-fd", dt=0.2)
    Q = random_state(g, 10).Q
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(dy.DivergenceError) as info:
            with np.errstate(all="ignore"):
                dy.run(200.0, Q, cfg, check_energy=False)
    assert info.value.step is not None and "step" in str(info.value)


def test_energy_increase_aborts():
    g = PeriodicGrid(32, 32)
    cfg = dy.SolverConfig(eps=0.2, scheme="explicit-fd", dt=0.4 * g.h**2)
    Q = random_state(g, 11).Q
    Q = QField(g, Q.data + 1e-3 * np.random.default_rng(0).normal(size=Q.data.shape))
    with pytest.warns(dy.StabilityWarning):
        with pytest.raises(dy.EnergyIncreaseError):
            dy.run(400 * cfg.dt, Q, cfg)


def test_explicit_fd_agrees_with_spectral():
    g = PeriodicGrid(64, 64)
    eps = 0.15
    Q = random_state(g, 12, q_amp=1.0).Q
    spectral = dy.run(0.01, Q, dy.SolverConfig(eps=eps, dt=2e-5), check_energy=False).state
    fd = dy.run(0.01, Q, dy.SolverConfig(eps=eps, dt=2e-5, scheme="explicit-fd"), check_energy=False).state
    assert np.max(np.abs(spectral.data - fd.data)) < 2e-2


def test_pressure_recovery():
    cfg = dy.SolverConfig(eps=0.1)
    quiet = dy.FlowState(0.0, QField.zeros(G64), VelocityField.zeros(G64))
    assert np.max(np.abs(dy.recover_pressure(quiet, cfg).data)) == 0.0
    st = dy.FlowState(0.0, QField.zeros(G64), random_state(G64, 13).v)
    p = dy.recover_pressure(st, cfg).data
    # Navier-Stokes pressure: -lap p = div(v.grad v)
    g = G64
    v = st.v.data
    conv = np.stack([v[0] * g.grad(v[i])[0] + v[1] * g.grad(v[i])[1] for i in range(2)])
    rhs = g.divergence(conv)
    lap_p = g.ifft(g.laplacian_symbol * g.fft(p))
    assert np.max(np.abs(-lap_p - rhs)) <= 1e-10 * np.max(np.abs(rhs))
    assert abs(np.mean(p)) < 1e-14
    # the projected momentum update is the same as subtracting grad p
    nxt = dy.step_beris_edwards(st, cfg)
    assert nxt.v.divergence_max() <= 1e-10


def test_resolution_enforced():
    with pytest.raises(fl.ResolutionError):
        dy.step_gradient_flow(QField.zeros(PeriodicGrid(16, 16)), dy.SolverConfig(eps=0.05))


def test_cfl_warning():
    cfg = dy.SolverConfig(eps=0.1, dt=0.01)
    st = dy.FlowState(0.0, QField.zeros(G64), VelocityField(G64, np.full((2, 64, 64), 5.0)))
    with pytest.warns(dy.CFLWarning):
        dy.step_beris_edwards(st, cfg)


def test_gamma_is_inverse_mobility():
    g = PeriodicGrid(32, 32)
    Q = QField(g, smooth_random(g, np.random.default_rng(8), kmax=3, amp=0.6))
    for gamma in (1.0, 2.5):
        cfg = dy.SolverConfig(eps=0.2, Gamma=gamma, dt=1e-8, stabilization=0.0)
        H = fl.elastic_operator(Q, cfg.elastic).data - fl.bulk_force_field(Q, cfg.bulk) / cfg.eps**2
        rate = (dy.step_gradient_flow(Q, cfg).data - Q.data) / cfg.dt
        assert np.linalg.norm(rate - H / gamma) <= 1e-5 * np.linalg.norm(H / gamma)


def test_beris_edwards_energy_rate_with_gamma():
    gamma, nu = 2.0, 0.7
    cfg = dy.SolverConfig(eps=0.2, Gamma=gamma, nu=nu, dt=1e-6, stabilization=0.0)
    g = PeriodicGrid(32, 32)
    st = random_state(g, 9, q_amp=0.8, v_amp=0.5)
    e0 = dy.free_energy(st.Q, cfg) + dy.kinetic_energy(st.v)
    new = dy.step_beris_edwards(st, cfg)
    rate = (dy.free_energy(new.Q, cfg) + dy.kinetic_energy(new.v) - e0) / cfg.dt
    H = fl.elastic_operator(st.Q, cfg.elastic).data - fl.bulk_force_field(st.Q, cfg.bulk) / cfg.eps**2
    D = 0.5 * (dy.velocity_gradient(st.v) + np.swapaxes(dy.velocity_gradient(st.v), 0, 1))
    diss = g.integrate(-2 * nu * np.sum(D**2, axis=(0, 1)) - np.sum(H**2, axis=0) / gamma)
    assert rate == pytest.approx(diss, rel=2e-3)


def test_xi_coupling_stable_at_default_dt():
    g = PeriodicGrid(128, 128)
    x, y = g.coords
    from nematic_interface.profile import solve_profile

    prof = solve_profile(P)
    Q = fl.uniaxial_field(g, prof((0.3 - np.hypot(x - 0.5, y - 0.5)) / 0.06), np.array([1.0, 0.0, 0.0]))
    st = dy.FlowState(0.0, Q, VelocityField.zeros(g))
    free = dy.SolverConfig(eps=0.06, bulk=P, xi=1.0)
    res = dy.run(300 * free.dt, st, free, observers=(dy.energy_observer,), cadence=1)
    e = res.series("energy_free") + res.series("energy_kinetic")
    assert np.all(np.diff(e) <= 1e-12 * np.abs(e[:-1]))
    forced = replace(free, shear_forcing=10.0)
    out = dy.run(300 * free.dt, st, forced, check_energy=False).state
    # bounded by the steady Stokes amplitude A / (nu k^2)
    assert np.max(np.abs(out.v.data)) < 10.0 / (2 * np.pi) ** 2 * 1.05
