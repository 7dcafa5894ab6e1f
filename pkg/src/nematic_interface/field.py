"""Periodic 2D grids carrying Q, v and p, with the elastic operator and free energy.

Arrays are indexed ``[ix, iy]`` with node ``(ix, iy)`` at ``(ix*h, iy*h)``.
A QField stores ``(5, nx, ny)`` basis components (see :mod:`.qtensor`), a
VelocityField ``(2, nx, ny)`` and a PressureField ``(nx, ny)``.

Fields depend on ``x, y`` only; derivatives along ``e3`` vanish.

Two discretizations are provided.  ``"spectral"`` uses Fourier derivatives
whose Nyquist modes are zeroed, so second derivatives are products of the
first-derivative symbols.  ``"fd"`` uses forward differences for the L1 energy
(giving the 5-point Laplacian) and centered differences for the L2/L3 part.
Both make the molecular field the exact negative gradient of the discrete
energy.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import qtensor as qt
from .qtensor import BulkParams


class ResolutionError(ValueError):
    """The grid spacing is too coarse for the interface width."""


class ResolutionWarning(UserWarning):
    pass


class CoercivityWarning(UserWarning):
    pass


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PeriodicGrid:
    nx: int
    ny: int
    Lx: float = 1.0
    Ly: float | None = None

    def __post_init__(self):
        if not (_is_pow2(self.nx) and _is_pow2(self.ny)):
            raise ValueError(f"grid dims must be powers of two, got ({self.nx}, {self.ny})")
        Ly = self.Lx * self.ny / self.nx if self.Ly is None else float(self.Ly)
        object.__setattr__(self, "Ly", Ly)
        if not math.isclose(self.Lx / self.nx, Ly / self.ny, rel_tol=1e-12):
            raise ValueError("grid spacing must be isotropic: Lx/nx == Ly/ny")

    @property
    def dims(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def h(self) -> float:
        return self.Lx / self.nx

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.nx) * self.h
        y = np.arange(self.ny) * self.h
        return np.meshgrid(x, y, indexing="ij")

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        """Angular wavenumbers broadcastable to the ``rfft2`` layout ``(nx, ny//2+1)``."""
        kx = 2.0 * np.pi * np.fft.fftfreq(self.nx, d=self.h)
        ky = 2.0 * np.pi * np.fft.rfftfreq(self.ny, d=self.h)
        return kx[:, None], ky[None, :]

    @cached_property
    def derivative_symbols(self) -> tuple[np.ndarray, np.ndarray]:
        """``i*k`` with the Nyquist wavenumbers set to zero."""
        kx, ky = self.wavenumbers
        kx = kx.copy()
        ky = ky.copy()
        kx[self.nx // 2, 0] = 0.0
        ky[0, self.ny // 2] = 0.0
        return 1j * kx, 1j * ky

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        dx, dy = self.derivative_symbols
        return (dx * dx + dy * dy).real

    def fft(self, f: np.ndarray) -> np.ndarray:
        return np.fft.rfft2(f, axes=(-2, -1))

    def ifft(self, f_hat: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(f_hat, s=(self.nx, self.ny), axes=(-2, -1))

    def grad(self, f: np.ndarray) -> np.ndarray:
        """Spectral gradient ``(2, ...)`` of a real field ``(..., nx, ny)``."""
        fh = self.fft(f)
        dx, dy = self.derivative_symbols
        return np.stack([self.ifft(dx * fh), self.ifft(dy * fh)])

    def divergence(self, v: np.ndarray) -> np.ndarray:
        dx, dy = self.derivative_symbols
        return self.ifft(dx * self.fft(v[0]) + dy * self.fft(v[1]))

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(f) * self.cell_area)


@dataclass(frozen=True)
class ElasticParams:
    L1: float = 1.0
    L2: float = 0.0
    L3: float = 0.0

    def __post_init__(self):
        if not self.L1 > 0:
            raise ValueError(f"L1 must be positive, got {self.L1}")
        if not self.coercive:
            warnings.warn(
                f"elastic energy is not coercive for (L1, L2, L3) = ({self.L1}, {self.L2}, {self.L3}): "
                "L1 + 2/3 (L2 + L3) <= 0",
                CoercivityWarning,
                stacklevel=3,
            )

    @property
    def coercive(self) -> bool:
        # on periodic domains the quadratic form per wavevector k is
        # L1 |k|^2 |Q|^2 + (L2 + L3) |Q k|^2 and |Qk|^2 <= (2/3)|k|^2 |Q|^2
        return self.L1 + (2.0 / 3.0) * min(0.0, self.L2 + self.L3) > 0

    @property
    def isotropic(self) -> bool:
        return self.L2 == 0.0 and self.L3 == 0.0


def _check_shape(data: np.ndarray, grid: PeriodicGrid, lead: tuple[int, ...], kind: str):
    if data.shape != lead + grid.dims:
        raise ValueError(f"{kind} data shape {data.shape} != {lead + grid.dims}")
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{kind} contains non-finite values")


@dataclass
class QField:
    grid: PeriodicGrid
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        _check_shape(self.data, self.grid, (5,), "QField")

    @classmethod
    def zeros(cls, grid: PeriodicGrid) -> QField:
        return cls(grid, np.zeros((5,) + grid.dims))

    def copy(self) -> QField:
        return QField(self.grid, self.data.copy())

    def matrices(self) -> np.ndarray:
        """Full matrices, shape ``(nx, ny, 3, 3)``."""
        return qt.to_matrix(self.data)

    def order_parameter(self) -> np.ndarray:
        return np.sqrt(1.5 * np.sum(self.data**2, axis=0))


@dataclass
class VelocityField:
    grid: PeriodicGrid
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        _check_shape(self.data, self.grid, (2,), "VelocityField")

    @classmethod
    def zeros(cls, grid: PeriodicGrid) -> VelocityField:
        return cls(grid, np.zeros((2,) + grid.dims))

    def copy(self) -> VelocityField:
        return VelocityField(self.grid, self.data.copy())

    def divergence_max(self) -> float:
        return float(np.max(np.abs(self.grid.divergence(self.data))))


@dataclass
class PressureField:
    grid: PeriodicGrid
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        _check_shape(self.data, self.grid, (), "PressureField")

    @classmethod
    def zeros(cls, grid: PeriodicGrid) -> PressureField:
        return cls(grid, np.zeros(grid.dims))


# -- construction helpers --------------------------------------------------


def uniaxial_field(grid: PeriodicGrid, s: np.ndarray, n: np.ndarray) -> QField:
    """``s (nn - I/3)`` nodewise; ``n`` is a unit 3-vector or a ``(3, nx, ny)`` field."""
    s = np.broadcast_to(np.asarray(s, dtype=float), grid.dims)
    n = np.asarray(n, dtype=float)
    if n.shape == (3,):
        n = np.broadcast_to(n[:, None, None], (3,) + grid.dims)
    nn = np.einsum("ixy,jxy->xyij", n, n)
    m = s[..., None, None] * (nn - qt.IDENTITY / 3.0)
    return QField(grid, qt.from_matrix(m))


def smooth_random(grid: PeriodicGrid, rng: np.random.Generator, kmax: int = 4, amp: float = 0.5, comps: int = 5) -> np.ndarray:
    """Band-limited random field with modes ``|k| <= kmax``, scaled so ``max |.| = amp``."""
    x, y = grid.coords
    out = np.zeros((comps,) + grid.dims)
    for c in range(comps):
        for kx in range(-kmax, kmax + 1):
            for ky in range(0, kmax + 1):
                a, b = rng.normal(size=2) / (1 + kx * kx + ky * ky)
                arg = 2 * np.pi * (kx * x / grid.Lx + ky * y / grid.Ly)
                out[c] += a * np.cos(arg) + b * np.sin(arg)
    return amp * out / np.max(np.abs(out))


def director_field(Q: QField, reference=(1.0, 0.0, 0.0)) -> np.ndarray:
    """Leading eigenvector per node, ``(3, nx, ny)``; degenerate nodes give NaN."""
    m = Q.matrices()
    w, v = np.linalg.eigh(m)
    n = v[..., :, 2]
    ref = np.asarray(reference, dtype=float)
    n = n * np.where(n @ ref < 0, -1.0, 1.0)[..., None]
    n[w[..., 2] - w[..., 1] < 1e-10] = np.nan
    return np.moveaxis(n, -1, 0)


def check_resolution(grid: PeriodicGrid, eps: float):
    """Require ``h <= eps/3``; warn when ``h > eps/4``."""
    h = grid.h
    if h > eps / 3.0:
        raise ResolutionError(f"h = {h:.4g} exceeds eps/3 = {eps / 3:.4g}; the transition layer is unresolved")
    if h > eps / 4.0:
        warnings.warn(f"h = {h:.4g} > eps/4 = {eps / 4:.4g}; interface is marginally resolved", ResolutionWarning, stacklevel=2)


# -- matrix entries from components ----------------------------------------

_R2 = math.sqrt(2.0)
_R6 = math.sqrt(6.0)


def _entries(q):
    """Upper-triangle matrix entries ``(Q11, Q22, Q33, Q12, Q13, Q23)`` of components."""
    return (
        q[0] / _R2 - q[1] / _R6,
        -q[0] / _R2 - q[1] / _R6,
        2.0 * q[1] / _R6,
        q[2] / _R2,
        q[3] / _R2,
        q[4] / _R2,
    )


def _components(m11, m22, m33, m12, m13, m23, like):
    out = np.empty((5,) + np.shape(like), dtype=np.result_type(like))
    out[0] = (m11 - m22) / _R2
    out[1] = (2.0 * m33 - m11 - m22) / _R6
    out[2] = _R2 * m12
    out[3] = _R2 * m13
    out[4] = _R2 * m23
    return out


def _matrix_rows(e):
    m11, m22, m33, m12, m13, m23 = e
    return ((m11, m12, m13), (m12, m22, m23), (m13, m23, m33))


# -- discrete derivative operators -----------------------------------------


def _fd_forward(f, axis, h):
    return (np.roll(f, -1, axis=axis) - f) / h


def _fd_center(f, axis, h):
    return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2.0 * h)


def _fd_laplacian(f, h):
    ax = (f.ndim - 2, f.ndim - 1)
    return (
        np.roll(f, 1, ax[0]) + np.roll(f, -1, ax[0]) + np.roll(f, 1, ax[1]) + np.roll(f, -1, ax[1]) - 4.0 * f
    ) / (h * h)


def gradient_components(Q: QField, method: str = "spectral") -> np.ndarray:
    """Derivatives ``(2, 5, nx, ny)`` of the components along x and y (centered for fd)."""
    g = Q.grid
    if method == "spectral":
        return g.grad(Q.data)
    if method == "fd":
        return np.stack([_fd_center(Q.data, -2, g.h), _fd_center(Q.data, -1, g.h)])
    raise ValueError(f"unknown method {method!r}")


def _divergence_rows(dQ) -> tuple:
    """``W_k = Q_km,m`` for k = 1..3 from entry derivatives ``dQ[a][entry]``."""
    ex, ey = dQ
    rx, ry = _matrix_rows(ex), _matrix_rows(ey)
    return tuple(rx[k][0] + ry[k][1] for k in range(3))


def elastic_operator(Q: QField, ep: ElasticParams, method: str = "spectral") -> QField:
    """``(LQ)_kl = L1 dQ_kl + (L2+L3)/2 (Q_km,ml + Q_lm,mk - 2/3 d_kl Q_ij,ij)``."""
    g = Q.grid
    if method == "spectral":
        qh = g.fft(Q.data)
        out_h = ep.L1 * g.laplacian_symbol * qh
        if not ep.isotropic:
            dx, dy = g.derivative_symbols
            e = _entries(qh)
            W = _divergence_rows(((tuple(dx * c for c in e)), tuple(dy * c for c in e)))
            # M_kl = d_l W_k with d_3 = 0
            S11 = 2.0 * dx * W[0]
            S22 = 2.0 * dy * W[1]
            S12 = dy * W[0] + dx * W[1]
            S13 = dx * W[2]
            S23 = dy * W[2]
            aniso = _components(S11, S22, 0.0 * S11, S12, S13, S23, qh[0])
            out_h = out_h + 0.5 * (ep.L2 + ep.L3) * aniso
        return QField(g, g.ifft(out_h))
    if method == "fd":
        h = g.h
        out = ep.L1 * _fd_laplacian(Q.data, h)
        if not ep.isotropic:
            e = _entries(Q.data)
            dxe = tuple(_fd_center(c, 0, h) for c in e)
            dye = tuple(_fd_center(c, 1, h) for c in e)
            W = _divergence_rows((dxe, dye))
            Dx = lambda f: _fd_center(f, 0, h)  # noqa: E731
            Dy = lambda f: _fd_center(f, 1, h)  # noqa: E731
            S11 = 2.0 * Dx(W[0])
            S22 = 2.0 * Dy(W[1])
            S12 = Dy(W[0]) + Dx(W[1])
            aniso = _components(S11, S22, np.zeros_like(S11), S12, Dx(W[2]), Dy(W[2]), S11)
            out = out + 0.5 * (ep.L2 + ep.L3) * aniso
        return QField(g, out)
    raise ValueError(f"unknown method {method!r}")


def bulk_force_field(Q: QField, p: BulkParams) -> np.ndarray:
    """Nodewise ``f(Q)`` in components, ``(5, nx, ny)``."""
    q = Q.data if isinstance(Q, QField) else Q
    e = _entries(q)
    m11, m22, m33, m12, m13, m23 = e
    # Q^2 entries
    s11 = m11 * m11 + m12 * m12 + m13 * m13
    s22 = m12 * m12 + m22 * m22 + m23 * m23
    s33 = m13 * m13 + m23 * m23 + m33 * m33
    s12 = m11 * m12 + m12 * m22 + m13 * m23
    s13 = m11 * m13 + m12 * m23 + m13 * m33
    s23 = m12 * m13 + m22 * m23 + m23 * m33
    tr2 = np.sum(q * q, axis=0)
    lin = p.a + p.c * tr2
    # the (b/3)|Q|^2 I term has no traceless part and drops out of the components
    out = lin * q - p.b * _components(s11, s22, s33, s12, s13, s23, q[0])
    return out


def bulk_energy_field(Q: QField, p: BulkParams) -> np.ndarray:
    q = Q.data if isinstance(Q, QField) else Q
    m11, m22, m33, m12, m13, m23 = _entries(q)
    tr2 = np.sum(q * q, axis=0)
    tr3 = (
        m11**3 + m22**3 + m33**3
        + 3.0 * m12**2 * (m11 + m22)
        + 3.0 * m13**2 * (m11 + m33)
        + 3.0 * m23**2 * (m22 + m33)
        + 6.0 * m12 * m13 * m23
    )
    return 0.5 * p.a * tr2 - (p.b / 3.0) * tr3 + 0.25 * p.c * tr2**2


def elastic_energy_density(Q: QField, ep: ElasticParams, method: str = "spectral") -> np.ndarray:
    """``1/2 (L1 |grad Q|^2 + L2 Q_ij,j Q_ik,k + L3 Q_ij,k Q_ik,j)`` per node."""
    g = Q.grid
    if method == "spectral":
        d = g.grad(Q.data)
        dl1 = d
    elif method == "fd":
        d = np.stack([_fd_center(Q.data, -2, g.h), _fd_center(Q.data, -1, g.h)])
        dl1 = np.stack([_fd_forward(Q.data, -2, g.h), _fd_forward(Q.data, -1, g.h)])
    else:
        raise ValueError(f"unknown method {method!r}")
    dens = 0.5 * ep.L1 * np.sum(dl1 * dl1, axis=(0, 1))
    if not ep.isotropic:
        ex, ey = _entries(d[0]), _entries(d[1])
        if ep.L2:
            W = _divergence_rows((ex, ey))
            dens = dens + 0.5 * ep.L2 * (W[0] ** 2 + W[1] ** 2 + W[2] ** 2)
        if ep.L3:
            # Q_ij,k Q_ik,j with k, j in {x, y}
            rx, ry = _matrix_rows(ex), _matrix_rows(ey)
            t = sum(rx[i][0] * rx[i][0] + ry[i][1] * ry[i][1] + 2.0 * rx[i][1] * ry[i][0] for i in range(3))
            dens = dens + 0.5 * ep.L3 * t
    return dens


def total_energy(Q: QField, eps: float, p: BulkParams, ep: ElasticParams, method: str = "spectral") -> float:
    """``sum(eps^-2 F_b + F_e) h^2``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    g = Q.grid
    dens = bulk_energy_field(Q, p) / eps**2 + elastic_energy_density(Q, ep, method)
    return g.integrate(dens)


def molecular_field(Q: QField, eps: float, p: BulkParams, ep: ElasticParams, method: str = "spectral") -> QField:
    """``H = -eps^-2 f(Q) + LQ``, the negative discrete gradient of :func:`total_energy`."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    L = elastic_operator(Q, ep, method)
    return QField(Q.grid, L.data - bulk_force_field(Q, p) / eps**2)


def inner(A: QField, B: QField) -> float:
    """Discrete ``L2`` inner product ``sum(A:B) h^2``."""
    return A.grid.integrate(np.sum(A.data * B.data, axis=0))


def distortion_stress(Q: QField, eps: float, ep: ElasticParams, method: str = "spectral") -> np.ndarray:
    """``sigma_ij = -(L1 Q_kl,j + L2 d_lj Q_km,m + L3 Q_kj,l) Q_kl,i``, shape ``(3, 3, nx, ny)``.

    ``eps`` is accepted for signature symmetry; the distortion stress carries no bulk weight.
    """
    d = gradient_components(Q, method)
    # full matrix derivatives G[a][k][l] with a the derivative direction (z derivative zero)
    G = [qt.to_matrix(d[a]) for a in range(2)]
    zero = np.zeros(Q.grid.dims + (3, 3))
    G.append(zero)
    G = np.stack(G)  # (3, nx, ny, 3, 3): G[a, ..., k, l] = Q_kl,a
    sigma = np.zeros((3, 3) + Q.grid.dims)
    W = np.einsum("mxykm->xyk", G)  # Q_km,m
    for i in range(3):
        for j in range(3):
            t = ep.L1 * np.einsum("xykl,xykl->xy", G[j], G[i])
            if ep.L2:
                t = t + ep.L2 * np.einsum("xyk,xyk->xy", W, G[i][..., :, j])
            if ep.L3:
                # L3 Q_kj,l Q_kl,i
                t = t + ep.L3 * np.einsum("lxyk,xykl->xy", G[:, ..., :, j], G[i])
            sigma[i, j] = -t
    return sigma
