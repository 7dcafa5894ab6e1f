"""Heteroclinic transition profile between the isotropic and nematic wells.

Along the inner coordinate ``z`` the uniaxial ansatz ``Q = s(z)(nn - I/3)``
reduces the free energy to ``(kappa/18) s'^2 + W(s)`` with
``W(s) = s^2/27 (9a - 2bs + 3cs^2)`` and ``kappa = 6 L1 + L2``, so that

    (kappa/9) s'' = W'(s),      s(-inf) = 0,   s(+inf) = s_plus.

With equal wells (``b^2 = 27ac``) ``W = (c/9) s^2 (s_plus - s)^2`` and the
first integral ``(kappa/18) s'^2 = W(s)`` turns the boundary-value problem
into the monotone quadrature ``s' = sqrt(18 W(s) / kappa)``.  For
``kappa = 6`` and ``(a, b, c) = (1/3, 3, 1)`` the ODE is
``-s'' + as - (b/3)s^2 + (2/3)cs^3 = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp, trapezoid
from scipy.interpolate import CubicHermiteSpline
from scipy.linalg import solve_banded

from .qtensor import IDENTITY, BulkParams


class UnequalWellsError(ValueError):
    """The bulk potential has wells of different depth, so no heteroclinic exists."""


class ProfileIterationError(RuntimeError):
    """The relaxation cross-check did not converge."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class ProfileConsistencyError(ValueError):
    """Elastic constants do not match the kappa the profile was solved with."""


def well_potential(s, p: BulkParams):
    """Uniaxial bulk energy ``W(s) = F_b(s(nn - I/3))``."""
    s = np.asarray(s, dtype=float)
    return s**2 / 27.0 * (9.0 * p.a - 2.0 * p.b * s + 3.0 * p.c * s**2)


def well_potential_prime(s, p: BulkParams):
    s = np.asarray(s, dtype=float)
    return (2.0 / 3.0) * p.a * s - (2.0 / 9.0) * p.b * s**2 + (4.0 / 9.0) * p.c * s**3


def well_potential_second(s, p: BulkParams):
    s = np.asarray(s, dtype=float)
    return (2.0 / 3.0) * p.a - (4.0 / 9.0) * p.b * s + (4.0 / 3.0) * p.c * s**2


def decay_rates(p: BulkParams, kappa: float) -> tuple[float, float]:
    """Exponential approach rates of the profile toward 0 and toward ``s_plus``."""
    r0 = math.sqrt(9.0 * well_potential_second(0.0, p) / kappa)
    r1 = math.sqrt(9.0 * well_potential_second(p.s_plus, p) / kappa)
    return r0, r1


@dataclass(frozen=True)
class ProfileSolution:
    z_grid: np.ndarray
    s: np.ndarray
    s_prime: np.ndarray
    params: BulkParams
    elastic: tuple[float, float] = (1.0, 0.0)
    s_plus: float = 1.0
    relaxation_error: float = math.nan
    _spline: object = field(default=None, repr=False, compare=False)

    @property
    def kappa(self) -> float:
        L1, L2 = self.elastic
        return 6.0 * L1 + L2

    @property
    def h(self) -> float:
        return float(self.z_grid[1] - self.z_grid[0])

    def __call__(self, z):
        """Evaluate ``s`` anywhere; clamps to the well values outside the grid."""
        spline = self._spline
        if spline is None:
            spline = CubicHermiteSpline(self.z_grid, self.s, self.s_prime)
            object.__setattr__(self, "_spline", spline)
        z = np.asarray(z, dtype=float)
        zc = np.clip(z, self.z_grid[0], self.z_grid[-1])
        out = spline(zc)
        out = np.where(z < self.z_grid[0], 0.0, out)
        return np.where(z > self.z_grid[-1], self.s_plus, out)

    def derivative(self, z):
        """Evaluate ``s'``; zero outside the grid."""
        if self._spline is None:
            self(0.0)
        z = np.asarray(z, dtype=float)
        zc = np.clip(z, self.z_grid[0], self.z_grid[-1])
        out = self._spline(zc, 1)
        return np.where((z < self.z_grid[0]) | (z > self.z_grid[-1]), 0.0, out)


@dataclass(frozen=True)
class InterfaceConstants:
    sigma: float
    alpha: float
    beta: float
    c_mobility: float
    A_mobility: np.ndarray


# -- finite-difference helpers ---------------------------------------------


def fd_weights(x0: float, xs: np.ndarray, m: int) -> np.ndarray:
    """Fornberg weights for the ``m``-th derivative at ``x0`` from nodes ``xs``."""
    n = len(xs)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def second_derivative(y: np.ndarray, h: float, order: int = 6) -> np.ndarray:
    """Sixth-order (default) second derivative on a uniform grid, one-sided at the ends."""
    y = np.asarray(y, dtype=float) - y[0]  # exact zero for constants
    n = len(y)
    half = order // 2
    width = order + 2  # one-sided stencils need two extra points for m = 2
    offsets = np.arange(-half, half + 1, dtype=float)
    out = np.empty(n)
    wc = fd_weights(0.0, offsets, 2)
    inner = slice(half, n - half)
    acc = np.zeros(n - 2 * half)
    for k, w in enumerate(wc):
        acc += w * y[k : n - 2 * half + k]
    out[inner] = acc
    nodes = np.arange(width, dtype=float)
    for i in range(half):
        w = fd_weights(float(i), nodes, 2)
        out[i] = w @ y[:width]
        out[n - 1 - i] = w @ y[::-1][:width]
    return out / h**2


# -- solving ---------------------------------------------------------------


def default_half_width(p: BulkParams, kappa: float) -> float:
    return 25.0 * math.sqrt(kappa / (6.0 * p.a))


def _require_equal_wells(p: BulkParams):
    if p.a <= 0 or not p.has_equal_wells(1e-10):
        raise UnequalWellsError(
            f"heteroclinic profile needs b^2 = 27ac (a > 0); "
            f"got b^2/(27ac) = {p.well_ratio:.6g} for (a, b, c) = ({p.a}, {p.b}, {p.c})"
        )


def solve_profile(
    p: BulkParams,
    kappa: float = 6.0,
    Z: float | None = None,
    n_points: int = 4097,
    L2: float | None = None,
    cross_check: bool = True,
) -> ProfileSolution:
    """Solve for the heteroclinic ``s(z)`` on ``[-Z, Z]``, centered at ``s(0) = s_plus/2``.

    ``kappa`` is ``6 L1 + L2``; pass ``L2`` to record the split (``L1`` is
    then inferred), otherwise ``L1 = kappa/6, L2 = 0`` is recorded.
    """
    _require_equal_wells(p)
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if n_points < 65 or n_points % 2 == 0:
        raise ValueError(f"n_points must be odd and >= 65, got {n_points}")
    Z = default_half_width(p, kappa) if Z is None else float(Z)
    s_plus = p.b / (3.0 * p.c)
    rate = math.sqrt(2.0 * p.c / kappa)

    def rhs(_z, y):
        # sqrt(18 W / kappa) with W factored through its double root at s_plus
        return rate * y * np.abs(s_plus - y)

    z = np.linspace(-Z, Z, n_points)
    mid = n_points // 2
    z[mid] = 0.0
    s = np.empty(n_points)
    opts = dict(method="DOP853", rtol=1e-13, atol=1e-16)
    fwd = solve_ivp(rhs, (0.0, Z), [0.5 * s_plus], t_eval=z[mid:], **opts)
    bwd = solve_ivp(rhs, (0.0, -Z), [0.5 * s_plus], t_eval=z[: mid + 1][::-1], **opts)
    if not (fwd.success and bwd.success):
        raise ProfileIterationError("quadrature integration failed", math.nan)
    s[mid:] = fwd.y[0]
    s[: mid + 1] = bwd.y[0][::-1]
    s_prime = rhs(0.0, s)

    L2v = 0.0 if L2 is None else float(L2)
    elastic = ((kappa - L2v) / 6.0, L2v)
    relax_err = math.nan
    if cross_check:
        relax_err = float(np.max(np.abs(relaxation_solve(p, kappa, z[mid:]) - s[mid:])))
        if relax_err > 1e-6:
            raise ProfileIterationError(
                f"quadrature and relaxation disagree by {relax_err:.3e}", relax_err
            )
    return ProfileSolution(z, s, s_prime, p, elastic, s_plus, relax_err)


def relaxation_solve(
    p: BulkParams,
    kappa: float,
    z_half: np.ndarray,
    max_iter: int = 60,
    tol: float = 1e-11,
) -> np.ndarray:
    """Damped Newton solve of the discretized BVP on ``[0, Z]``.

    Equal wells make ``s - s_plus/2`` odd in ``z``, so the half-line problem
    with ``s(0) = s_plus/2`` and ``s(Z) = s_plus`` removes the translation
    degeneracy.  Fourth-order differences are used in the interior.
    """
    s_plus = p.b / (3.0 * p.c)
    n = len(z_half)
    h = z_half[1] - z_half[0]
    r0, _ = decay_rates(p, kappa)
    # deliberately wrong width so the iteration has something to do
    s = 0.5 * s_plus * (1.0 + np.tanh(0.75 * r0 * z_half))
    s[0], s[-1] = 0.5 * s_plus, s_plus

    k = kappa / 9.0
    m = n - 2
    c5 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * h * h)
    c3 = np.array([1.0, -2.0, 1.0]) / (h * h)

    def residual(u):
        d2 = np.empty(m)
        d2[0] = c3 @ u[0:3]
        d2[-1] = c3 @ u[-3:]
        d2[1:-1] = c5[0] * u[:-4] + c5[1] * u[1:-3] + c5[2] * u[2:-2] + c5[3] * u[3:-1] + c5[4] * u[4:]
        return k * d2 - well_potential_prime(u[1:-1], p)

    def jacobian_bands(u):
        ab = np.zeros((5, m))
        rows = np.arange(m)
        for off, w5 in zip(range(-2, 3), c5):
            col = rows + off
            ok = (col >= 0) & (col < m) & (rows >= 1) & (rows <= m - 2)
            ab[2 - off, col[ok]] = k * w5
        for r in (0, m - 1):
            for off, w3 in zip(range(-1, 2), c3):
                col = r + off
                if 0 <= col < m:
                    ab[2 - off, col] = k * w3
        ab[2] -= well_potential_second(u[1:-1], p)
        return ab

    # rounding floor of the discrete operator
    tol = max(tol, 1e3 * np.finfo(float).eps * k * s_plus / h**2)
    res = residual(s)
    norm = np.max(np.abs(res))
    for _ in range(max_iter):
        if norm < tol:
            return s
        step = solve_banded((2, 2), jacobian_bands(s), -res)
        if np.max(np.abs(step)) < 1e-14 * s_plus:
            return s  # residual is at its rounding floor
        lam = 1.0
        while lam > 1e-4:
            trial = s.copy()
            trial[1:-1] += lam * step
            r_trial = residual(trial)
            n_trial = np.max(np.abs(r_trial))
            if n_trial < norm:
                break
            lam *= 0.5
        s, res, norm = trial, r_trial, n_trial
    if norm < tol:
        return s
    raise ProfileIterationError(f"relaxation did not converge: residual {norm:.3e}", float(norm))


# -- diagnostics -----------------------------------------------------------


def ode_residual(prof: ProfileSolution) -> float:
    """Max-norm residual of ``-(kappa/6) s'' + a s - (b/3) s^2 + (2/3) c s^3``."""
    p = prof.params
    s2 = second_derivative(prof.s, prof.h)
    r = -(prof.kappa / 6.0) * s2 + 1.5 * well_potential_prime(prof.s, p)
    return float(np.max(np.abs(r)))


def first_integral_error(prof: ProfileSolution) -> float:
    """Max-norm of ``(kappa/18) s'^2 - W(s)``; for kappa = 6 this is ``s'^2/3 - F_b``."""
    e = prof.kappa / 18.0 * prof.s_prime**2 - well_potential(prof.s, prof.params)
    return float(np.max(np.abs(e)))


def euler_lagrange_residual(prof: ProfileSolution, L1: float, L2: float) -> float:
    """Max-norm residual of ``-(6L1 + L2) s'' + 2c(s+^2 s - 3 s+ s^2 + 2 s^3)``."""
    c = prof.params.c
    sp = prof.s_plus
    s = prof.s
    s2 = second_derivative(s, prof.h)
    r = -(6.0 * L1 + L2) * s2 + 2.0 * c * (sp**2 * s - 3.0 * sp * s**2 + 2.0 * s**3)
    return float(np.max(np.abs(r)))


# -- interface constants ---------------------------------------------------


def _tail_corrected(prof: ProfileSolution, integrand_left: float, integrand_right: float, values) -> float:
    """Trapezoid integral plus analytic exponential tails ``f(end) / rate``."""
    total = float(trapezoid(values, prof.z_grid))
    if prof.params.a > 0 and prof.kappa > 0:
        r0, r1 = decay_rates(prof.params, prof.kappa)
        total += integrand_left / r0 + integrand_right / r1
    return total


def integral_sprime_sq(prof: ProfileSolution) -> float:
    """``int s'^2 dz`` over the whole line (tails decay like ``exp(-2 r |z|)``)."""
    sp2 = prof.s_prime**2
    return _tail_corrected(prof, sp2[0] / 2.0, sp2[-1] / 2.0, sp2)


def surface_tension(prof: ProfileSolution) -> float:
    """``sigma = (2/3) int s'^2 dz = int |dQ/dz|^2 dz`` for the uniaxial ansatz."""
    return (2.0 / 3.0) * integral_sprime_sq(prof)


def _check_kappa(prof: ProfileSolution, L1: float, L2: float):
    kappa = 6.0 * L1 + L2
    if not math.isclose(kappa, prof.kappa, rel_tol=1e-12, abs_tol=1e-14):
        raise ProfileConsistencyError(
            f"profile solved with kappa = {prof.kappa}, but 6*L1 + L2 = {kappa}"
        )


def alpha_beta(prof: ProfileSolution, L1: float = 1.0, L2: float = 0.0) -> tuple[float, float]:
    """Surface energy constants for ``eps F -> alpha |G| + beta int (n.nu)^2``."""
    _check_kappa(prof, L1, L2)
    c = prof.params.c
    s, sp = np.clip(prof.s, 0.0, prof.s_plus), prof.s_prime
    bulk = c * s**2 * (prof.s_plus - s) ** 2
    grad = 0.5 * (6.0 * L1 + L2) * sp**2
    # both parts of the integrand decay like s'^2 in the tails
    dens = (bulk + grad) / 9.0
    alpha = _tail_corrected(prof, dens[0] / 2.0, dens[-1] / 2.0, dens)
    beta = (3.0 * L2 / 18.0) * integral_sprime_sq(prof)
    return alpha, beta


def mobility_tensors(prof: ProfileSolution, n, L1: float = 1.0, L2: float = 0.0, L3: float = 0.0) -> InterfaceConstants:
    """Mobility ``c = int |Q_z|^2`` and ``A = L1 c I + (L2 + L3) int Q_z Q_z`` for director ``n``."""
    n = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValueError("director must be a unit vector")
    P = np.outer(n, n) - IDENTITY / 3.0
    I2 = integral_sprime_sq(prof)
    c_mob = float(np.sum(P * P)) * I2
    A = L1 * c_mob * IDENTITY + (L2 + L3) * I2 * (P @ P)
    A = 0.5 * (A + A.T)
    alpha, beta = alpha_beta(prof, L1, L2)
    return InterfaceConstants(surface_tension(prof), alpha, beta, c_mob, A)
