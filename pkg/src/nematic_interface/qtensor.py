"""Algebra of symmetric traceless 3x3 tensors and the Landau-de Gennes bulk potential.

Storage basis
-------------
A Q-tensor is stored as five components ``q`` in the Frobenius-orthonormal basis

    E0 = (e1e1 - e2e2) / sqrt(2)
    E1 = (2 e3e3 - e1e1 - e2e2) / sqrt(6)
    E2 = (e1e2 + e2e1) / sqrt(2)
    E3 = (e1e3 + e3e1) / sqrt(2)
    E4 = (e2e3 + e3e2) / sqrt(2)

so that ``Q1 : Q2 == q1 @ q2`` and every reconstructed matrix is exactly
symmetric and trace free.  Component arrays carry the basis index first,
``(5, ...)``; full matrices carry it last, ``(..., 3, 3)``.

All operations accept either a :class:`QTensor` or an ndarray of full
matrices with shape ``(..., 3, 3)`` and return the same kind of object.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

SQRT2 = math.sqrt(2.0)
SQRT6 = math.sqrt(6.0)

BASIS = np.zeros((5, 3, 3))
BASIS[0] = np.diag([1.0, -1.0, 0.0]) / SQRT2
BASIS[1] = np.diag([-1.0, -1.0, 2.0]) / SQRT6
BASIS[2, 0, 1] = BASIS[2, 1, 0] = 1.0 / SQRT2
BASIS[3, 0, 2] = BASIS[3, 2, 0] = 1.0 / SQRT2
BASIS[4, 1, 2] = BASIS[4, 2, 1] = 1.0 / SQRT2

IDENTITY = np.eye(3)


class DomainError(ValueError):
    """Input outside the domain of an operation (non-unit director, s = 0, ...)."""


class DegenerateDirectorError(ValueError):
    """The leading eigenvalue of Q is (nearly) degenerate, so no director exists."""


def to_matrix(q: np.ndarray) -> np.ndarray:
    """Components ``(5, ...)`` to symmetric traceless matrices ``(..., 3, 3)``."""
    q = np.asarray(q, dtype=float)
    out = np.empty(q.shape[1:] + (3, 3))
    out[..., 0, 0] = q[0] / SQRT2 - q[1] / SQRT6
    out[..., 1, 1] = -q[0] / SQRT2 - q[1] / SQRT6
    out[..., 2, 2] = 2.0 * q[1] / SQRT6
    out[..., 0, 1] = out[..., 1, 0] = q[2] / SQRT2
    out[..., 0, 2] = out[..., 2, 0] = q[3] / SQRT2
    out[..., 1, 2] = out[..., 2, 1] = q[4] / SQRT2
    return out


def from_matrix(m: np.ndarray) -> np.ndarray:
    """Project matrices ``(..., 3, 3)`` onto the traceless symmetric basis.

    The symmetric traceless part is kept; anything else is discarded.
    """
    m = np.asarray(m, dtype=float)
    out = np.empty((5,) + m.shape[:-2])
    out[0] = (m[..., 0, 0] - m[..., 1, 1]) / SQRT2
    out[1] = (2.0 * m[..., 2, 2] - m[..., 0, 0] - m[..., 1, 1]) / SQRT6
    out[2] = (m[..., 0, 1] + m[..., 1, 0]) / SQRT2
    out[3] = (m[..., 0, 2] + m[..., 2, 0]) / SQRT2
    out[4] = (m[..., 1, 2] + m[..., 2, 1]) / SQRT2
    return out


@dataclass(frozen=True)
class QTensor:
    """A single order-parameter tensor, stored as five basis components."""

    q: tuple[float, float, float, float, float]

    def __post_init__(self):
        q = tuple(float(x) for x in self.q)
        if len(q) != 5:
            raise ValueError(f"QTensor needs 5 components, got {len(q)}")
        object.__setattr__(self, "q", q)

    @classmethod
    def zero(cls) -> QTensor:
        return cls((0.0,) * 5)

    @classmethod
    def from_matrix(cls, m) -> QTensor:
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
        return cls(tuple(from_matrix(m)))

    @property
    def components(self) -> np.ndarray:
        return np.array(self.q)

    def matrix(self) -> np.ndarray:
        return to_matrix(self.components)

    def __add__(self, other: QTensor) -> QTensor:
        return QTensor(tuple(self.components + other.components))

    def __sub__(self, other: QTensor) -> QTensor:
        return QTensor(tuple(self.components - other.components))

    def __mul__(self, k: float) -> QTensor:
        return QTensor(tuple(k * self.components))

    __rmul__ = __mul__

    def __neg__(self) -> QTensor:
        return self * -1.0

    def dot(self, other: QTensor) -> float:
        """Frobenius contraction ``Q1 : Q2``."""
        return float(self.components @ other.components)

    def norm(self) -> float:
        return float(np.linalg.norm(self.components))


@dataclass(frozen=True)
class BulkParams:
    """Constants of the quartic bulk potential."""

    a: float = 1.0 / 3.0
    b: float = 3.0
    c: float = 1.0

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError(f"a and b must be nonnegative, got a={self.a}, b={self.b}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")

    @property
    def discriminant(self) -> float:
        return self.b**2 - 24.0 * self.a * self.c

    @property
    def s_plus(self) -> float:
        """The stable nematic order ``s1``; ``0.0`` when no nematic critical point exists."""
        if self.discriminant < 0:
            return 0.0
        return (self.b + math.sqrt(self.discriminant)) / (4.0 * self.c)

    @property
    def well_ratio(self) -> float:
        """``b**2 / (27 a c)``; equals 1 exactly when the two wells have equal depth."""
        return self.b**2 / (27.0 * self.a * self.c) if self.a * self.c > 0 else math.inf

    def has_equal_wells(self, rtol: float = 1e-10) -> bool:
        return abs(self.b**2 - 27.0 * self.a * self.c) <= rtol * max(self.b**2, 27.0 * self.a * self.c)


class CriticalPoint(NamedTuple):
    s: float
    stability: str  # "stable" | "unstable" | "inflection"


@dataclass(frozen=True)
class CriticalSet:
    points: tuple[CriticalPoint, ...]

    @property
    def s_values(self) -> list[float]:
        return [p.s for p in self.points]

    @property
    def s1(self) -> float | None:
        nz = [p.s for p in self.points if p.s != 0.0]
        return max(nz) if nz else None

    @property
    def s2(self) -> float | None:
        nz = [p.s for p in self.points if p.s != 0.0]
        return min(nz) if len(nz) == 2 else None

    def stability(self, s: float) -> str:
        for p in self.points:
            if p.s == s:
                return p.stability
        raise KeyError(s)


# -- helpers ---------------------------------------------------------------


def _as_matrix(Q):
    if isinstance(Q, QTensor):
        return Q.matrix(), True
    return np.asarray(Q, dtype=float), False


def _wrap(m: np.ndarray, scalar_input: bool):
    return QTensor.from_matrix(m) if scalar_input else m


def _contract(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...ij->...", A, B)


def _check_unit(n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    if n.shape != (3,):
        raise DomainError(f"director must be a 3-vector, got shape {n.shape}")
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise DomainError(f"director must be a unit vector, |n| = {np.linalg.norm(n)!r}")
    return n


# -- operations ------------------------------------------------------------


def uniaxial(s: float, n) -> QTensor:
    """``s (n n - I/3)`` for a unit director ``n``."""
    n = _check_unit(n)
    return QTensor.from_matrix(s * (np.outer(n, n) - IDENTITY / 3.0))


def bulk_energy(Q, p: BulkParams):
    """Bulk free-energy density ``a/2 tr Q^2 - b/3 tr Q^3 + c/4 (tr Q^2)^2``."""
    if isinstance(Q, QTensor):
        m = Q.matrix()
    else:
        m = np.asarray(Q, dtype=float)
    tr2 = _contract(m, m)
    tr3 = np.einsum("...ij,...jk,...ki->...", m, m, m)
    e = 0.5 * p.a * tr2 - p.b / 3.0 * tr3 + 0.25 * p.c * tr2**2
    return float(e) if np.ndim(e) == 0 else e


def bulk_force(Q, p: BulkParams):
    """``f(Q) = aQ - bQ^2 + c|Q|^2 Q + (b/3)|Q|^2 I``.

    This is the gradient of the bulk energy on the traceless symmetric
    subspace; the identity term removes the trace of ``Q^2``.
    """
    m, single = _as_matrix(Q)
    tr2 = _contract(m, m)[..., None, None]
    out = p.a * m - p.b * (m @ m) + p.c * tr2 * m + (p.b / 3.0) * tr2 * IDENTITY
    return _wrap(out, single)


def critical_points(p: BulkParams) -> CriticalSet:
    """Uniaxial critical orders ``s`` with ``f(s(nn - I/3)) = 0``.

    Nonzero roots solve ``2c s^2 - b s + 3a = 0``.  A double root (discriminant
    zero up to rounding) is returned once and flagged as an inflection.
    """
    zero_flag = "stable" if p.a > 0 else "inflection"
    points = [CriticalPoint(0.0, zero_flag)]
    disc = p.discriminant
    if abs(disc) <= 1e-14 * p.b**2:
        disc = 0.0
    if disc > 0:
        r = math.sqrt(disc)
        s1 = (p.b + r) / (4.0 * p.c)
        s2 = (p.b - r) / (4.0 * p.c)
        points.append(CriticalPoint(s1, "stable"))
        if s2 != 0.0:
            points.append(CriticalPoint(s2, "unstable"))
    elif disc == 0 and p.b > 0:
        points.append(CriticalPoint(p.b / (4.0 * p.c), "inflection"))
    return CriticalSet(tuple(points))


def linearized_bulk(Q0, Q, p: BulkParams):
    """Action of the linearization ``f'(Q0)`` on ``Q``."""
    m0, _ = _as_matrix(Q0)
    m, single = _as_matrix(Q)
    n0 = _contract(m0, m0)[..., None, None]
    q0q = _contract(m0, m)[..., None, None]
    out = (
        p.a * m
        - p.b * (m0 @ m + m @ m0)
        + p.c * n0 * m
        + 2.0 * q0q * (p.c * m0 + (p.b / 3.0) * IDENTITY)
    )
    return _wrap(out, single)


def bilinear_bulk(Q0, Q1, Q2, p: BulkParams):
    """Second derivative ``<f''(Q0) Q1, Q2>`` of the bulk force.

    Symmetric in ``Q1`` and ``Q2``.  Note that the quadratic form that appears
    in the outer expansion is one half of this value.
    """
    m0, _ = _as_matrix(Q0)
    m1, single = _as_matrix(Q1)
    m2, _ = _as_matrix(Q2)
    c01 = _contract(m0, m1)[..., None, None]
    c02 = _contract(m0, m2)[..., None, None]
    c12 = _contract(m1, m2)[..., None, None]
    out = (
        -p.b * (m1 @ m2 + m2 @ m1)
        + 2.0 * p.c * c02 * m1
        + 2.0 * p.c * c01 * m2
        + 2.0 * c12 * (p.c * m0 + (p.b / 3.0) * IDENTITY)
    )
    return _wrap(out, single)


def orthonormal_complement(n) -> tuple[np.ndarray, np.ndarray]:
    """Two unit vectors spanning the plane perpendicular to ``n``.

    For ``n = e3`` this returns ``(e1, e2)``.
    """
    n = _check_unit(n)
    helper = IDENTITY[np.argmin(np.abs(n))]
    if abs(n[2]) == 1.0:
        helper = IDENTITY[0]
    m1 = helper - (helper @ n) * n
    m1 /= np.linalg.norm(m1)
    m2 = np.cross(n, m1)
    return m1, m2


def kernel_basis(s: float, n) -> tuple[QTensor, QTensor]:
    """The two tensors ``n m + m n`` spanning ``ker f'(s(nn - I/3))``."""
    if s == 0:
        raise DomainError("kernel characterization requires s != 0")
    n = _check_unit(n)
    m1, m2 = orthonormal_complement(n)
    return tuple(QTensor.from_matrix(np.outer(n, m) + np.outer(m, n)) for m in (m1, m2))


def linearization_matrix(Q0, p: BulkParams) -> np.ndarray:
    """The 5x5 matrix of ``f'(Q0)`` in the component basis."""
    m0, _ = _as_matrix(Q0)
    cols = [from_matrix(linearized_bulk(m0, BASIS[j], p)) for j in range(5)]
    return np.stack(cols, axis=1)


def s_transport(Q, M, xi: float):
    """``S_Q(M) = xi (M Qb + Qb M - 2 Qb (M:Q))`` with ``Qb = Q + I/3``.

    ``M`` must be symmetric and traceless; the result is then trace free.
    """
    m, single = _as_matrix(Q)
    mm, single_m = _as_matrix(M)
    qb = m + IDENTITY / 3.0
    mq = _contract(mm, m)[..., None, None]
    out = xi * (mm @ qb + qb @ mm - 2.0 * qb * mq)
    return _wrap(out, single or single_m)


def order_parameter(Q):
    """Scalar order ``sqrt(3/2 |Q|^2)``; equals ``|s|`` for uniaxial tensors."""
    if isinstance(Q, QTensor):
        return math.sqrt(1.5 * Q.dot(Q))
    m = np.asarray(Q, dtype=float)
    return np.sqrt(1.5 * _contract(m, m))


def director(Q, reference=(1.0, 0.0, 0.0), gap_tol: float = 1e-10) -> np.ndarray:
    """Unit eigenvector of the largest eigenvalue, signed so ``n . reference >= 0``."""
    m, _ = _as_matrix(Q)
    ref = np.asarray(reference, dtype=float)
    w, v = np.linalg.eigh(m)
    if np.any(w[..., 2] - w[..., 1] < gap_tol):
        raise DegenerateDirectorError(
            f"top eigenvalues are degenerate (gap {np.min(w[..., 2] - w[..., 1]):.3e} < {gap_tol:g})"
        )
    n = v[..., :, 2]
    sign = np.where(n @ ref < 0, -1.0, 1.0)
    return n * sign[..., None]
