import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from nematic_interface import field as fl
from nematic_interface import profile as pr
from nematic_interface import qtensor as qt
from nematic_interface import snapshot as snap
from nematic_interface.field import ElasticParams, PeriodicGrid, QField, smooth_random
from nematic_interface.qtensor import BulkParams

P = BulkParams(1.0 / 3.0, 3.0, 1.0)
ISO = ElasticParams(1.0, 0.0, 0.0)
ANISO = ElasticParams(1.0, -0.4, 0.3)


def test_grid_validation():
    with pytest.raises(ValueError):
        PeriodicGrid(48, 64)
    with pytest.raises(ValueError):
        PeriodicGrid(64, 64, 1.0, 2.0)
    g = PeriodicGrid(64, 32, 2.0)
    assert g.Ly == 1.0 and g.h == 2.0 / 64


def test_constant_field_operators():
    g = PeriodicGrid(32, 32)
    Q = fl.uniaxial_field(g, 1.0, np.array([0.6, 0.8, 0.0]))
    for method in ("spectral", "fd"):
        assert np.max(np.abs(fl.elastic_operator(Q, ANISO, method).data)) < 1e-13
        assert abs(fl.total_energy(Q, 0.05, P, ANISO, method)) < 1e-12
        assert np.max(np.abs(fl.molecular_field(Q, 0.05, P, ANISO, method).data)) < 1e-10
    assert np.max(np.abs(fl.distortion_stress(Q, 0.05, ANISO))) < 1e-25
    assert fl.total_energy(QField.zeros(g), 0.05, P, ISO) == 0.0


def test_sine_mode_laplacian():
    g = PeriodicGrid(64, 32, 2.0)
    x, _ = g.coords
    qhat = np.array([0.3, -0.2, 0.5, 0.1, 0.7])
    Q = QField(g, qhat[:, None, None] * np.sin(2 * np.pi * x / g.Lx))
    k2 = (2 * np.pi / g.Lx) ** 2
    spectral = fl.elastic_operator(Q, ISO, "spectral").data
    assert_allclose(spectral, -k2 * Q.data, atol=1e-12)
    fd = fl.elastic_operator(Q, ISO, "fd").data
    err = np.max(np.abs(fd + k2 * Q.data))
    assert err <= k2 * (2 * np.pi / g.Lx * g.h) ** 2 / 12 * 1.01
    g2 = PeriodicGrid(128, 64, 2.0)
    x2, _ = g2.coords
    Q2 = QField(g2, qhat[:, None, None] * np.sin(2 * np.pi * x2 / g2.Lx))
    err2 = np.max(np.abs(fl.elastic_operator(Q2, ISO, "fd").data + k2 * Q2.data))
    assert 3.8 < err / err2 < 4.2


def test_anisotropic_operator_on_plane_wave():
    # for Q = Re(Qh e^{ik.x}): LQ = -(L1 |k|^2 Q + (L2+L3)/2 (Qk k + k Qk - 2/3 (k.Q.k) I))
    g = PeriodicGrid(32, 32)
    x, y = g.coords
    rng = np.random.default_rng(3)
    qh = rng.normal(size=5)
    k = 2 * np.pi * np.array([2.0, -3.0, 0.0])
    wave = np.cos(k[0] * x + k[1] * y)
    Q = QField(g, qh[:, None, None] * wave)
    m = qt.to_matrix(qh)
    qk = m @ k
    sym = ANISO.L1 * (k @ k) * m + 0.5 * (ANISO.L2 + ANISO.L3) * (np.outer(qk, k) + np.outer(k, qk) - 2 / 3 * (k @ qk) * np.eye(3))
    expect = -qt.from_matrix(sym)[:, None, None] * wave
    assert_allclose(fl.elastic_operator(Q, ANISO).data, expect, atol=1e-9)


@pytest.mark.parametrize("method", ["spectral", "fd"])
@pytest.mark.parametrize("ep", [ISO, ANISO])
def test_self_adjoint_and_semidefinite(method, ep):
    g = PeriodicGrid(32, 32)
    rng = np.random.default_rng(0)
    A = QField(g, rng.normal(size=(5, 32, 32)))
    B = QField(g, rng.normal(size=(5, 32, 32)))
    lab = fl.inner(fl.elastic_operator(A, ep, method), B)
    lba = fl.inner(A, fl.elastic_operator(B, ep, method))
    assert abs(lab - lba) <= 1e-10 * abs(lab)
    assert fl.inner(fl.elastic_operator(A, ep, method), A) <= 0
    # elastic energy is the quadratic form of -L
    e = fl.total_energy(A, 1.0, BulkParams(0.0, 0.0, 1e-300), ep, method)
    assert math.isclose(e, -0.5 * fl.inner(fl.elastic_operator(A, ep, method), A), rel_tol=1e-10)


@pytest.mark.parametrize("method", ["spectral", "fd"])
@pytest.mark.parametrize("ep", [ISO, ANISO])
def test_molecular_field_is_negative_energy_gradient(method, ep):
    g = PeriodicGrid(32, 32)
    rng = np.random.default_rng(1)
    Q = QField(g, smooth_random(g, rng, amp=0.6))
    dQ = QField(g, rng.normal(size=(5, 32, 32)))
    eps, h = 0.2, 1e-6
    H = fl.molecular_field(Q, eps, P, ep, method)
    Ep = fl.total_energy(QField(g, Q.data + h * dQ.data), eps, P, ep, method)
    Em = fl.total_energy(QField(g, Q.data - h * dQ.data), eps, P, ep, method)
    fd = -(Ep - Em) / (2 * h)
    assert abs(fl.inner(H, dQ) - fd) <= 1e-5 * abs(fd)


def test_bulk_field_matches_pointwise():
    g = PeriodicGrid(8, 8)
    rng = np.random.default_rng(2)
    Q = QField(g, rng.normal(size=(5, 8, 8)))
    pointwise = qt.from_matrix(qt.bulk_force(Q.matrices(), P))
    assert_allclose(fl.bulk_force_field(Q, P), pointwise, atol=1e-13)
    assert_allclose(fl.bulk_energy_field(Q, P), qt.bulk_energy(Q.matrices(), P), atol=1e-13)


def test_stripe_profile_is_nearly_stationary():
    g = PeriodicGrid(1024, 1)
    eps = 0.01
    prof = pr.solve_profile(P)
    x, _ = g.coords
    phi = 0.25 - np.abs(x - 0.5)  # nematic between x = 0.25 and 0.75
    Q = fl.uniaxial_field(g, prof(phi / eps), np.array([0.0, 1.0, 0.0]))
    H = fl.molecular_field(Q, eps, P, ISO)
    assert eps**2 * np.max(np.abs(H.data)) < 1e-5


def test_stripe_distortion_stress_formula():
    g = PeriodicGrid(512, 4)
    eps = 0.02
    prof = pr.solve_profile(P)
    x, _ = g.coords
    phi = 0.25 - np.abs(x - 0.5)
    Q = fl.uniaxial_field(g, prof(phi / eps), np.array([0.0, 0.0, 1.0]))
    sigma = fl.distortion_stress(Q, eps, ISO)
    grad_phi = -np.sign(x - 0.5)
    expect = -(2 / 3) * prof.derivative(phi / eps) ** 2 / eps**2 * grad_phi**2
    band = np.abs(np.abs(x - 0.5) - 0.25) < 0.15  # away from the distance-function kinks
    assert np.max(np.abs(sigma[0, 0] - expect)[band]) <= 1e-4 * np.max(np.abs(expect))
    assert np.max(np.abs(sigma[1, 1])) < 1e-20 and np.max(np.abs(sigma[0, 1])) < 1e-20


@pytest.mark.parametrize("ep", [ISO, ANISO])
def test_ericksen_identity(ep):
    g = PeriodicGrid(64, 64)
    rng = np.random.default_rng(5)
    Q = QField(g, smooth_random(g, rng, kmax=3, amp=0.7))
    eps = 0.3
    sigma = fl.distortion_stress(Q, eps, ep)
    H = fl.molecular_field(Q, eps, P, ep)
    dens = fl.bulk_energy_field(Q, P) / eps**2 + fl.elastic_energy_density(Q, ep)
    dQ = g.grad(Q.data)
    gd = g.grad(dens)
    for i in range(2):
        div = g.divergence(sigma[i, :2])
        res = div + gd[i] + np.sum(H.data * dQ[i], axis=0)
        scale = np.max(np.abs(gd[i])) + np.max(np.abs(div))
        assert np.max(np.abs(res)) <= 1e-9 * scale


def test_snapshot_round_trip(tmp_path):
    g = PeriodicGrid(16, 8, 2.0)
    rng = np.random.default_rng(7)
    Q = QField(g, rng.normal(size=(5, 16, 8)))
    v = fl.VelocityField(g, rng.normal(size=(2, 16, 8)))
    path = tmp_path / "s.qsnap"
    snap.save_snapshot({"Q": Q, "v": v}, path, grid=g, t=0.25, eps=0.1, params={"a": 1 / 3})
    s = snap.load_snapshot(path)
    assert s.fields["Q"].tobytes() == Q.data.tobytes()
    assert s.fields["v"].tobytes() == v.data.tobytes()
    assert s.meta["t"] == 0.25 and s.grid == g
    head = snap.read_snapshot_header(path)
    assert [f["name"] for f in head["fields"]] == ["Q", "v"]
    assert path.read_bytes().startswith(b"QTNSNAP1\n")


def test_snapshot_errors(tmp_path):
    g = PeriodicGrid(8, 8)
    path = tmp_path / "s.qsnap"
    snap.save_snapshot({"Q": QField.zeros(g)}, path, grid=g)
    raw = path.read_bytes()
    bad = tmp_path / "bad"
    bad.write_bytes(b"XXXXXXXX\n" + raw[9:])
    with pytest.raises(snap.SnapshotFormatError):
        snap.load_snapshot(bad)
    bad.write_bytes(raw[:-8])
    with pytest.raises(snap.SnapshotTruncatedError):
        snap.load_snapshot(bad)
    bad.write_bytes(raw.replace(b'"nx": 8', b'"nx": 4'))
    with pytest.raises(snap.SnapshotDimensionError):
        snap.load_snapshot(bad)
    with pytest.raises(snap.SnapshotDimensionError):
        snap.save_snapshot({"Q": np.zeros((5, 4, 4))}, bad, grid=g)


def test_resolution_rule():
    g = PeriodicGrid(64, 64)
    with pytest.raises(fl.ResolutionError):
        fl.check_resolution(g, 0.04)
    with pytest.warns(fl.ResolutionWarning):
        fl.check_resolution(g, 0.06)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fl.check_resolution(g, 0.07)


def test_coercivity_warning():
    with pytest.warns(fl.CoercivityWarning):
        ElasticParams(1.0, -2.0, 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ElasticParams(1.0, -0.5, 0.0)
    with pytest.raises(ValueError):
        ElasticParams(0.0)


def test_outputs_traceless_symmetric():
    g = PeriodicGrid(16, 16)
    rng = np.random.default_rng(9)
    Q = QField(g, rng.normal(size=(5, 16, 16)))
    m = fl.molecular_field(Q, 0.1, P, ANISO).matrices()
    assert np.max(np.abs(np.trace(m, axis1=-2, axis2=-1))) < 1e-14 * np.max(np.abs(m))
    assert np.array_equal(m, np.swapaxes(m, -1, -2))


def test_director_field():
    g = PeriodicGrid(8, 8)
    n = np.array([0.0, -0.6, 0.8])
    Q = fl.uniaxial_field(g, 0.9, n)
    d = fl.director_field(Q, reference=(0.0, 0.0, 1.0))
    assert_allclose(d, np.broadcast_to(-n[:, None, None] * -1, d.shape), atol=1e-12)
    assert np.all(np.isnan(fl.director_field(QField.zeros(g))))
