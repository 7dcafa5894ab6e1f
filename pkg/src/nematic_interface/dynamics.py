"""Time stepping for the Q-tensor gradient flow and the Beris-Edwards system.

Both flows use first-order IMEX Euler on the periodic spectral grid.  The
elastic operator (and viscosity) are implicit; the bulk force is explicit
with a stabilizing shift ``S (Q^{n+1} - Q^n)``.

Velocity-gradient conventions: ``G_ij = d_j v_i``, ``D = (G + G^T)/2``,
``Omega = (G - G^T)/2`` and ``(div sigma)_i = d_j sigma_ij``.  With these the
continuous system

    v_t + v.grad v = -grad p + div(2 nu D - S_Q(H) + QH - HQ + sigma_d) + f
    Q_t + v.grad Q + Q Omega - Omega Q = H / Gamma + S_Q(D)

dissipates ``E = 1/2 |v|^2 + F`` at rate ``-2 nu |D|^2 - |H|^2 / Gamma``.
The gradient flow uses the same mobility, ``Q_t = H / Gamma``.

For ``xi != 0`` the explicit ``S_Q(D)`` / ``S_Q(H)`` pair feeds back on v with
a gain of order ``dt xi^2 s^2 k^2``, so the velocity solve adds the first-order
term ``nu_s lap(v^{n+1} - v^n)`` with ``nu_s = xi^2 s_+^2`` by default.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import qtensor as qt
from .field import (
    ElasticParams,
    PeriodicGrid,
    PressureField,
    QField,
    VelocityField,
    bulk_force_field,
    check_resolution,
    distortion_stress,
    elastic_operator,
    molecular_field,
    total_energy,
)
from .qtensor import BulkParams

SCHEMES = ("semi-implicit-spectral", "explicit-fd")
# default nu_s per unit xi^2 s_+^2
VSTAB = 1.0


class DivergenceError(FloatingPointError):
    """The solution became non-finite."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class EnergyIncreaseError(RuntimeError):
    """A step increased the energy beyond the allowed relative tolerance."""

    def __init__(self, message: str, step: int, before: float, after: float):
        super().__init__(message)
        self.step = step
        self.before = before
        self.after = after


class CFLWarning(UserWarning):
    pass


class StabilityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SolverConfig:
    eps: float
    bulk: BulkParams = BulkParams()
    elastic: ElasticParams = ElasticParams()
    xi: float = 0.0
    Gamma: float = 1.0
    nu: float = 1.0
    dt: float | None = None
    scheme: str = "semi-implicit-spectral"
    stabilization: float | None = None
    # Kolmogorov body force f = shear_forcing * sin(2 pi forcing_mode y / Ly) e_x
    shear_forcing: float = 0.0
    forcing_mode: int = 1
    # implicit viscosity nu_s lap(v^{n+1} - v^n) damping the explicit xi coupling
    velocity_stabilization: float | None = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not (self.Gamma > 0 and self.nu > 0):
            raise ValueError("Gamma and nu must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.dt is None:
            object.__setattr__(self, "dt", 0.05 * self.eps**2)
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.stabilization is None:
            p = self.bulk
            sp = p.s_plus
            object.__setattr__(self, "stabilization", 2.0 * (p.a + p.b * sp + p.c * sp * sp) / self.eps**2)

    def dt_max(self, grid: PeriodicGrid) -> float:
        """Recommended largest step; the explicit scheme also obeys the diffusive limit."""
        if self.scheme == "explicit-fd":
            return min(0.1 * self.eps**2, 0.2 * grid.h**2 / self.elastic.L1) * self.Gamma
        return 0.1 * self.eps**2 * self.Gamma


@dataclass
class FlowState:
    t: float
    Q: QField
    v: VelocityField
    p: PressureField | None = None

    @property
    def grid(self) -> PeriodicGrid:
        return self.Q.grid

    def copy(self) -> FlowState:
        p = None if self.p is None else PressureField(self.p.grid, self.p.data.copy())
        return FlowState(self.t, self.Q.copy(), self.v.copy(), p)


# -- symbols ---------------------------------------------------------------


def elastic_symbol_matrices(grid: PeriodicGrid, ep: ElasticParams) -> np.ndarray:
    """Real symmetric ``(nx, ny//2+1, 5, 5)`` matrices of the elastic operator per wavevector."""
    dx, dy = grid.derivative_symbols
    kx = np.broadcast_to((dx / 1j).real, (grid.nx, grid.ny // 2 + 1))
    ky = np.broadcast_to((dy / 1j).real, (grid.nx, grid.ny // 2 + 1))
    k = np.stack([kx, ky, np.zeros_like(kx)], axis=-1)
    k2 = kx * kx + ky * ky
    out = np.empty(kx.shape + (5, 5))
    for b in range(5):
        E = qt.BASIS[b]
        Ek = k @ E  # E symmetric
        kEk = np.einsum("...i,...i->...", Ek, k)
        sym = np.einsum("...i,...j->...ij", Ek, k)
        LE = -ep.L1 * k2[..., None, None] * E - 0.5 * (ep.L2 + ep.L3) * (
            sym + np.swapaxes(sym, -1, -2) - (2.0 / 3.0) * kEk[..., None, None] * qt.IDENTITY
        )
        out[..., :, b] = np.moveaxis(qt.from_matrix(LE), 0, -1)
    return out


def _leray(grid: PeriodicGrid, fh: np.ndarray) -> np.ndarray:
    dx, dy = grid.derivative_symbols
    lap = grid.laplacian_symbol
    div = dx * fh[0] + dy * fh[1]
    safe = np.where(lap == 0.0, 1.0, lap)
    phi = np.where(lap == 0.0, 0.0, div / safe)
    return np.stack([fh[0] - dx * phi, fh[1] - dy * phi])


def project_divergence_free(v: VelocityField) -> VelocityField:
    g = v.grid
    return VelocityField(g, g.ifft(_leray(g, g.fft(v.data))))


def velocity_gradient(v: VelocityField) -> np.ndarray:
    """``G[i, j] = d_j v_i`` as a ``(3, 3, nx, ny)`` array (in-plane block nonzero)."""
    g = v.grid
    G = np.zeros((3, 3) + g.dims)
    d = g.grad(v.data)  # d[j, i] = d_j v_i
    G[:2, :2] = np.swapaxes(d, 0, 1)
    return G


# -- gradient flow ----------------------------------------------------------


class GradientFlowStepper:
    """Reusable stepper with the implicit operator precomputed for one grid and config."""

    def __init__(self, grid: PeriodicGrid, cfg: SolverConfig):
        check_resolution(grid, cfg.eps)
        if cfg.dt > cfg.dt_max(grid) * (1 + 1e-12):
            warnings.warn(f"dt = {cfg.dt:.3g} exceeds the recommended {cfg.dt_max(grid):.3g}", StabilityWarning, stacklevel=3)
        self.grid = grid
        self.cfg = cfg
        S, gdt = cfg.stabilization, cfg.dt / cfg.Gamma
        self.shift = 1.0 + gdt * S
        if cfg.scheme == "semi-implicit-spectral":
            if cfg.elastic.isotropic:
                self.inv = 1.0 / (self.shift - gdt * cfg.elastic.L1 * grid.laplacian_symbol)
                self.minv = None
            else:
                M = self.shift * np.eye(5) - gdt * elastic_symbol_matrices(grid, cfg.elastic)
                self.minv = np.linalg.inv(M)
                self.inv = None

    def __call__(self, Q: QField, step: int | None = None) -> QField:
        cfg, g = self.cfg, self.grid
        gdt = cfg.dt / cfg.Gamma
        f = bulk_force_field(Q, cfg.bulk) / cfg.eps**2
        if cfg.scheme == "explicit-fd":
            H = elastic_operator(Q, cfg.elastic, "fd").data - f
            new = Q.data + gdt * H
        else:
            rhs = g.fft(self.shift * Q.data - gdt * f)
            if self.minv is None:
                new = g.ifft(self.inv * rhs)
            else:
                new = g.ifft(np.einsum("xyab,bxy->axy", self.minv, rhs))
        if not np.all(np.isfinite(new)):
            raise DivergenceError(f"gradient flow produced non-finite values at step {step}", step)
        return QField(g, new)


@lru_cache(maxsize=8)
def _gradient_stepper(grid: PeriodicGrid, cfg: SolverConfig) -> GradientFlowStepper:
    return GradientFlowStepper(grid, cfg)


def step_gradient_flow(Q: QField, cfg: SolverConfig) -> QField:
    """One step of ``Q_t = -eps^-2 f(Q) + LQ``."""
    return _gradient_stepper(Q.grid, cfg)(Q)


# -- Beris-Edwards -----------------------------------------------------------


class BerisEdwardsStepper:
    def __init__(self, grid: PeriodicGrid, cfg: SolverConfig):
        if cfg.scheme != "semi-implicit-spectral":
            raise NotImplementedError("Beris-Edwards is implemented for the spectral scheme only")
        if not cfg.elastic.isotropic:
            raise ValueError("Beris-Edwards hydrodynamics requires L2 = L3 = 0")
        check_resolution(grid, cfg.eps)
        self.grid = grid
        self.cfg = cfg
        dt = cfg.dt
        # Q_t + v.grad Q - (Omega Q - Q Omega) - S_Q(D) = H / Gamma, stabilized
        gdt = dt / cfg.Gamma
        self.shift = 1.0 + gdt * cfg.stabilization
        self.q_inv = 1.0 / (self.shift - gdt * cfg.elastic.L1 * grid.laplacian_symbol)
        self.nu_s = cfg.velocity_stabilization
        if self.nu_s is None:
            self.nu_s = VSTAB * cfg.xi**2 * cfg.bulk.s_plus**2
        self.v_inv = 1.0 / (1.0 - dt * (cfg.nu + self.nu_s) * grid.laplacian_symbol)
        if cfg.shear_forcing:
            _, y = grid.coords
            fx = cfg.shear_forcing * np.sin(2.0 * np.pi * cfg.forcing_mode * y / grid.Ly)
            self.body = np.stack([fx, np.zeros_like(fx)])
        else:
            self.body = None

    def _derivatives(self, Q: QField, v: VelocityField):
        g = self.grid
        dx, dy = g.derivative_symbols
        qh = g.fft(Q.data)
        vh = g.fft(v.data)
        dQ = g.ifft(np.stack([dx * qh, dy * qh]))  # dQ[a, comp]
        dv = g.ifft(np.stack([dx * vh, dy * vh]))  # dv[j, i] = d_j v_i
        lapQ = g.ifft(g.laplacian_symbol * qh)
        return dQ, dv, lapQ

    def _stress(self, Q: QField, H: np.ndarray, dQ: np.ndarray) -> np.ndarray:
        """In-plane block of ``-S_Q(H) + QH - HQ + sigma_d``, shape ``(2, 2, nx, ny)``."""
        cfg = self.cfg
        Qm, Hm = qt.to_matrix(Q.data), qt.to_matrix(H)
        T = Qm @ Hm - Hm @ Qm
        if cfg.xi:
            T = T - qt.s_transport(Qm, Hm, cfg.xi)
        T = np.moveaxis(T[..., :2, :2], (-2, -1), (0, 1)).copy()
        # L1 distortion stress in components: -L1 Q_kl,i Q_kl,j = -L1 q_a,i q_a,j
        T -= cfg.elastic.L1 * np.einsum("iaxy,jaxy->ijxy", dQ, dQ)
        return T

    def _momentum_hat(self, v: np.ndarray, dv: np.ndarray, T: np.ndarray | None) -> np.ndarray:
        """Fourier transform of ``-v.grad v + div T + f``."""
        g = self.grid
        adv = v[0] * dv[0] + v[1] * dv[1]
        F = -adv if self.body is None else self.body - adv
        Fh = g.fft(F)
        if T is not None:
            dx, dy = g.derivative_symbols
            Th = g.fft(T)
            Fh = Fh + np.stack([dx * Th[0, 0] + dy * Th[0, 1], dx * Th[1, 0] + dy * Th[1, 1]])
        return Fh

    def forcing_hat(self, state: FlowState) -> np.ndarray:
        cfg = self.cfg
        dQ, dv, lapQ = self._derivatives(state.Q, state.v)
        T = None
        if np.any(state.Q.data):
            H = cfg.elastic.L1 * lapQ - bulk_force_field(state.Q, cfg.bulk) / cfg.eps**2
            T = self._stress(state.Q, H, dQ)
        return self._momentum_hat(state.v.data, dv, T)

    def elastic_stress(self, Q: QField) -> np.ndarray:
        """Full ``-S_Q(H) + QH - HQ + sigma_d`` as ``(3, 3, nx, ny)`` (reference path)."""
        cfg = self.cfg
        H = molecular_field(Q, cfg.eps, cfg.bulk, cfg.elastic)
        Qm, Hm = Q.matrices(), H.matrices()
        T = Qm @ Hm - Hm @ Qm
        if cfg.xi:
            T = T - qt.s_transport(Qm, Hm, cfg.xi)
        return np.moveaxis(T, (-2, -1), (0, 1)) + distortion_stress(Q, cfg.eps, cfg.elastic)

    def __call__(self, state: FlowState, step: int | None = None, isotropic: bool = False) -> FlowState:
        g, cfg = self.grid, self.cfg
        dt = cfg.dt
        v = state.v.data
        Q = state.Q
        vmax = float(np.max(np.abs(v)))
        if vmax * dt / g.h > 0.5:
            warnings.warn(f"CFL number {vmax * dt / g.h:.3f} > 0.5 at step {step}", CFLWarning, stacklevel=2)

        dQ, dv, lapQ = self._derivatives(Q, state.v)
        if isotropic:
            newQ = Q.data.copy()
            Fh = self._momentum_hat(v, dv, None)
        else:
            f = bulk_force_field(Q, cfg.bulk) / cfg.eps**2
            H = cfg.elastic.L1 * lapQ - f
            G = np.zeros(g.dims + (3, 3))
            G[..., :2, :2] = np.moveaxis(dv, (0, 1), (-1, -2))  # G[..., i, j] = d_j v_i
            Om = 0.5 * (G - np.swapaxes(G, -1, -2))
            Qm = qt.to_matrix(Q.data)
            src = Om @ Qm - Qm @ Om
            if cfg.xi:
                src = src + qt.s_transport(Qm, 0.5 * (G + np.swapaxes(G, -1, -2)), cfg.xi)
            adv = v[0] * dQ[0] + v[1] * dQ[1]
            explicit = qt.from_matrix(src) - adv - f / cfg.Gamma
            newQ = g.ifft(self.q_inv * g.fft(self.shift * Q.data + dt * explicit))
            Fh = self._momentum_hat(v, dv, self._stress(Q, H, dQ))

        vh = g.fft(v)
        vh = vh + dt * Fh - (dt * self.nu_s) * g.laplacian_symbol * vh if self.nu_s else vh + dt * Fh
        newv = g.ifft(_leray(g, self.v_inv * vh))
        if not (np.all(np.isfinite(newQ)) and np.all(np.isfinite(newv))):
            raise DivergenceError(f"Beris-Edwards produced non-finite values at step {step}", step)
        return FlowState(state.t + dt, QField(g, newQ), VelocityField(g, newv), None)


@lru_cache(maxsize=8)
def _be_stepper(grid: PeriodicGrid, cfg: SolverConfig) -> BerisEdwardsStepper:
    return BerisEdwardsStepper(grid, cfg)


def step_beris_edwards(state: FlowState, cfg: SolverConfig) -> FlowState:
    """One IMEX step of the coupled velocity / Q system."""
    return _be_stepper(state.grid, cfg)(state)


def step_navier_stokes(state: FlowState, cfg: SolverConfig) -> FlowState:
    """The same velocity update with every Q coupling removed."""
    return _be_stepper(state.grid, cfg)(state, isotropic=True)


def recover_pressure(state: FlowState, cfg: SolverConfig) -> PressureField:
    """Solve ``-lap p = div(v.grad v - div sigma - f)`` spectrally, zero mean."""
    g = state.grid
    Fh = _be_stepper(g, cfg).forcing_hat(state)  # div(2 nu D) is divergence free
    dx, dy = g.derivative_symbols
    lap = g.laplacian_symbol
    div = dx * Fh[0] + dy * Fh[1]
    safe = np.where(lap == 0.0, 1.0, lap)
    ph = np.where(lap == 0.0, 0.0, div / safe)
    return PressureField(g, g.ifft(ph))


# -- energies and observers ------------------------------------------------


def kinetic_energy(v: VelocityField) -> float:
    return v.grid.integrate(0.5 * np.sum(v.data**2, axis=0))


def free_energy(Q: QField, cfg: SolverConfig) -> float:
    method = "fd" if cfg.scheme == "explicit-fd" else "spectral"
    return total_energy(Q, cfg.eps, cfg.bulk, cfg.elastic, method)


Observer = Callable[[object, SolverConfig], dict]


def energy_observer(state, cfg: SolverConfig) -> dict:
    if isinstance(state, QField):
        return {"energy_free": free_energy(state, cfg)}
    return {"energy_free": free_energy(state.Q, cfg), "energy_kinetic": kinetic_energy(state.v)}


def divergence_observer(state, cfg: SolverConfig) -> dict:
    if isinstance(state, QField):
        return {}
    return {"div_max": state.v.divergence_max()}


@dataclass
class RunResult:
    state: object
    t: float
    records: list = field(default_factory=list)
    steps: int = 0

    def series(self, key: str) -> np.ndarray:
        return np.array([r.get(key, np.nan) for r in self.records])


def run(
    until: float,
    state,
    cfg: SolverConfig,
    observers: Sequence[Observer] = (energy_observer,),
    cadence: int = 0,
    t0: float | None = None,
    check_energy: bool = True,
    energy_rtol: float = 1e-12,
    flow: str | None = None,
) -> RunResult:
    """Advance ``state`` to time ``until``.

    ``state`` is a QField (gradient flow) or a FlowState (Beris-Edwards; pass
    ``flow="navier-stokes"`` to drop the Q coupling).  Observers run at step 0,
    every ``cadence`` steps, and at the final step; ``cadence = 0`` records
    only the initial and final states.  With ``check_energy`` each step's total
    energy must not exceed the previous value by more than ``energy_rtol``
    relative; otherwise :class:`EnergyIncreaseError` is raised.
    """
    if flow is None:
        flow = "gradient" if isinstance(state, QField) else "beris-edwards"
    if flow == "gradient":
        t = 0.0 if t0 is None else t0
    else:
        t = state.t if t0 is None else t0
    span = until - t
    if span < -1e-15:
        raise ValueError("until precedes the current time")
    n = 0 if span <= 1e-15 * max(1.0, abs(until)) else max(1, math.ceil(span / cfg.dt - 1e-9))
    if n:
        cfg = replace(cfg, dt=span / n)
    grid = state.grid

    if flow == "gradient":
        stepper = _gradient_stepper(grid, cfg)
        advance = lambda s, k: stepper(s, k)  # noqa: E731
        energy = lambda s: free_energy(s, cfg)  # noqa: E731
    elif flow in ("beris-edwards", "navier-stokes"):
        stepper = _be_stepper(grid, cfg)
        iso = flow == "navier-stokes"
        advance = lambda s, k: stepper(s, k, isotropic=iso)  # noqa: E731
        energy = lambda s: kinetic_energy(s.v) + (0.0 if iso else free_energy(s.Q, cfg))  # noqa: E731
    else:
        raise ValueError(f"unknown flow {flow!r}")

    result = RunResult(state, t)

    def observe(s, step, time):
        rec = {"t": time, "step": step}
        for obs in observers:
            rec.update(obs(s, cfg))
        result.records.append(rec)

    observe(state, 0, t)
    e_prev = energy(state) if (check_energy and n) else None
    for k in range(1, n + 1):
        state = advance(state, k)
        t = t + cfg.dt if k < n else until
        if flow != "gradient":
            state.t = t
        if check_energy:
            e = energy(state)
            if e > e_prev + energy_rtol * abs(e_prev):
                raise EnergyIncreaseError(
                    f"energy increased at step {k} (t = {t:.6g}): {e_prev:.15g} -> {e:.15g}", k, e_prev, e
                )
            e_prev = e
        if (cadence and k % cadence == 0) or k == n:
            observe(state, k, t)
    result.state, result.t, result.steps = state, t, n
    return result
