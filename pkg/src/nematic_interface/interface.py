"""Interface geometry and sharp-interface diagnostics.

Orientation convention: the unit normal ``nu`` points into the nematic
region (where the order parameter exceeds the threshold) and a level-set
``phi`` is positive there.  Curvature ``kappa`` is signed so that a nematic
disk of radius R has ``kappa = +1/R`` (the nematic region is convex); in
terms of the level set this is ``kappa = -div(nu) = -lap(phi)``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.ndimage import map_coordinates
from scipy.spatial import cKDTree
from skimage.measure import find_contours

from . import qtensor as qt
from .field import PeriodicGrid, PressureField, QField, VelocityField
from .profile import ProfileSolution


class EmptyInterfaceError(ValueError):
    """The order parameter never crosses the threshold."""


class ProbeWarning(UserWarning):
    pass


class CFLError(ValueError):
    pass


@dataclass
class Segment:
    start: int
    stop: int
    closed: bool
    shift: np.ndarray  # point[stop] continues as point[start] + shift (periodic wrap)


@dataclass
class InterfaceCurve:
    points: np.ndarray  # (N, 2), unwrapped within each segment
    normals: np.ndarray  # (N, 2), toward the nematic side
    kappa: np.ndarray  # (N,)
    ds: np.ndarray  # (N,) arc-length weights
    segments: list = field(default_factory=list)
    grid: PeriodicGrid | None = None

    @property
    def length(self) -> float:
        return float(np.sum(self.ds))

    @property
    def total_curvature(self) -> float:
        return float(np.sum(self.kappa * self.ds))

    def segment_points(self, k: int) -> np.ndarray:
        seg = self.segments[k]
        return self.points[seg.start : seg.stop]

    def area(self) -> float:
        """Area enclosed by the closed, non-wrapping segments (shoelace)."""
        total = 0.0
        for k, seg in enumerate(self.segments):
            if seg.closed and not np.any(seg.shift):
                p = self.segment_points(k)
                q = np.roll(p, -1, axis=0)
                total += 0.5 * abs(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))
        return total

    def equivalent_radius(self) -> float:
        return math.sqrt(self.area() / math.pi)

    def arclength(self) -> np.ndarray:
        out = np.empty(len(self.ds))
        for seg in self.segments:
            p = self.points[seg.start : seg.stop]
            steps = np.r_[0.0, np.linalg.norm(np.diff(p, axis=0), axis=1)]
            out[seg.start : seg.stop] = np.cumsum(steps)
        return out


# -- extraction ------------------------------------------------------------


def _stitch(pieces: list[np.ndarray], period: np.ndarray, tol: float):
    """Join open contour pieces whose end points coincide modulo the period."""
    chains = []
    open_pieces = [p for p in pieces if not np.allclose(p[0], p[-1], atol=tol)]
    closed = [p[:-1] for p in pieces if np.allclose(p[0], p[-1], atol=tol) and len(p) > 3]
    for p in closed:
        chains.append((p, True, np.zeros(2)))

    def wrap_delta(a, b):
        d = b - a
        return d - period * np.round(d / period)

    used = [False] * len(open_pieces)
    for i in range(len(open_pieces)):
        if used[i]:
            continue
        used[i] = True
        chain = [open_pieces[i]]
        offset = np.zeros(2)
        while True:
            end = chain[-1][-1]
            start0 = chain[0][0]
            # does the chain close on itself modulo the period?
            if np.all(np.abs(wrap_delta(end, start0)) < tol) and len(chain) >= 1:
                shift = np.round((end - start0) / period) * period
                pts = np.concatenate([c[:-1] for c in chain])
                chains.append((pts, True, shift))
                break
            nxt = None
            for j in range(len(open_pieces)):
                if not used[j] and np.all(np.abs(wrap_delta(end, open_pieces[j][0])) < tol):
                    nxt = j
                    break
            if nxt is None:
                chains.append((np.concatenate([c[:-1] for c in chain[:-1]] + [chain[-1]]), False, np.zeros(2)))
                break
            used[nxt] = True
            piece = open_pieces[nxt]
            offset = end - piece[0]
            chain.append(piece + offset)
    return chains


def _interp_periodic(grid: PeriodicGrid, f: np.ndarray, pts: np.ndarray, order: int = 3) -> np.ndarray:
    """Periodic spline interpolation of ``f[..., nx, ny]`` at physical points ``(N, 2)``."""
    coords = (pts / grid.h).T
    if f.ndim == 2:
        return map_coordinates(f, coords, order=order, mode="grid-wrap")
    flat = f.reshape((-1,) + grid.dims)
    out = np.stack([map_coordinates(c, coords, order=order, mode="grid-wrap") for c in flat])
    return out.reshape(f.shape[:-2] + (len(pts),))


def _fit_curvature(pts: np.ndarray, closed: bool, shift: np.ndarray, orient: float):
    """Local circle fits on 5-point windows; returns curvature, unit normals, ds."""
    n = len(pts)
    if closed:
        ext = np.concatenate([pts[-2:] - shift, pts, pts[:2] + shift])
        idx = [np.arange(i, i + 5) for i in range(n)]
        centers = np.arange(n) + 2
    else:
        if n < 5:
            raise EmptyInterfaceError("open interface segment with fewer than 5 points")
        ext = pts
        idx = [np.arange(min(max(i - 2, 0), n - 5), min(max(i - 2, 0), n - 5) + 5) for i in range(n)]
        centers = np.arange(n)
    kappa = np.empty(n)
    normals = np.empty((n, 2))
    for i in range(n):
        c = centers[i]
        lo, hi = (c - 1, c + 1) if closed or 0 < i < n - 1 else ((c, c + 1) if i == 0 else (c - 1, c))
        t = ext[hi] - ext[lo]
        t = t / np.linalg.norm(t)
        nu = orient * np.array([-t[1], t[0]])
        d = ext[idx[i]] - ext[c]
        u, w = d @ t, d @ nu
        A = np.stack([0.5 * (u * u + w * w), u, np.ones_like(u)], axis=1)
        sol, *_ = np.linalg.lstsq(A, w, rcond=None)
        k, B = sol[0], sol[1]
        # w = k/2 (u^2 + w^2) + B u + C: the normal of this conic at the point
        nrm = nu - B * t
        nrm /= np.linalg.norm(nrm)
        kappa[i] = k
        normals[i] = nrm
    if closed:
        fwd = np.linalg.norm(np.diff(np.concatenate([pts, pts[:1] + shift]), axis=0), axis=1)
        ds = 0.5 * (fwd + np.roll(fwd, 1))
    else:
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        ds = 0.5 * (np.r_[0.0, seg] + np.r_[seg, 0.0])
    return kappa, normals, ds


def extract_interface(Q: QField, threshold: float | None = None, s_plus: float = 1.0) -> InterfaceCurve:
    """Level set ``order_parameter = threshold`` (default ``s_plus/2``) by marching squares."""
    grid = Q.grid
    S = Q.order_parameter()
    return extract_level_set(grid, S, 0.5 * s_plus if threshold is None else threshold)


def _refine(grid, S, gradS, level, pts, iters=3):
    """Newton steps along the gradient on the cubic-spline interpolant of S.

    Marching squares interpolates linearly between nodes; across a resolved
    but nonlinear transition layer that leaves O(h^2) position errors which
    the curvature fit would amplify.
    """
    period = np.array([grid.Lx, grid.Ly])
    for _ in range(iters):
        wrapped = np.mod(pts, period)
        f = _interp_periodic(grid, S, wrapped) - level
        gv = _interp_periodic(grid, gradS, wrapped).T
        g2 = np.maximum(np.sum(gv * gv, axis=1), 1e-300)
        step = (f / g2)[:, None] * gv
        step = np.clip(step, -0.5 * grid.h, 0.5 * grid.h)
        pts = pts - step
    return pts


def extract_level_set(grid: PeriodicGrid, S: np.ndarray, level: float) -> InterfaceCurve:
    """Interface ``{S = level}`` of a periodic scalar field; ``nu`` points toward ``S > level``."""
    if not (np.min(S) < level < np.max(S)):
        raise EmptyInterfaceError(f"field range [{np.min(S):.4g}, {np.max(S):.4g}] does not cross {level:.4g}")
    ext = np.pad(S, ((0, 1), (0, 1)), mode="wrap")
    pieces = [c * grid.h for c in find_contours(ext, level)]
    period = np.array([grid.Lx, grid.Ly])
    chains = _stitch(pieces, period, 1e-9 * grid.h)
    if not chains:
        raise EmptyInterfaceError("no interface found")
    gradS = grid.grad(S)
    chains = [(_refine(grid, S, gradS, level, pts), closed, shift) for pts, closed, shift in chains]
    pts_all, nrm_all, kap_all, ds_all, segs = [], [], [], [], []
    start = 0
    for pts, closed, shift in chains:
        if len(pts) < 5:
            continue
        # orientation: normals must point up the gradient of S
        t = np.gradient(pts, axis=0)
        left = np.stack([-t[:, 1], t[:, 0]], axis=1)
        g = _interp_periodic(grid, gradS, np.mod(pts, period), order=1).T
        orient = 1.0 if np.sum(np.sum(left * g, axis=1)) >= 0 else -1.0
        kappa, normals, ds = _fit_curvature(pts, closed, shift, orient)
        pts_all.append(pts)
        nrm_all.append(normals)
        kap_all.append(kappa)
        ds_all.append(ds)
        segs.append(Segment(start, start + len(pts), closed, shift))
        start += len(pts)
    if not segs:
        raise EmptyInterfaceError("interface too short to analyse")
    return InterfaceCurve(
        np.concatenate(pts_all), np.concatenate(nrm_all), np.concatenate(kap_all), np.concatenate(ds_all), segs, grid
    )


def write_interface_csv(curve: InterfaceCurve, path):
    s = curve.arclength()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["arclength", "x", "y", "nu_x", "nu_y", "kappa"])
        for i in range(len(s)):
            p, n = curve.points[i], curve.normals[i]
            w.writerow([f"{s[i]:.12g}", f"{p[0]:.12g}", f"{p[1]:.12g}", f"{n[0]:.12g}", f"{n[1]:.12g}", f"{curve.kappa[i]:.12g}"])


def radius_observer(state, cfg) -> dict:
    """Equivalent radius of the nematic droplet (NaN if there is no closed interface)."""
    Q = state if isinstance(state, QField) else state.Q
    try:
        curve = extract_interface(Q, s_plus=cfg.bulk.s_plus)
    except EmptyInterfaceError:
        return {"radius": math.nan}
    a = curve.area()
    return {"radius": math.sqrt(a / math.pi) if a > 0 else math.nan}


# -- level sets and the reference mean-curvature flow -----------------------


@dataclass
class LevelSetField:
    grid: PeriodicGrid
    phi: np.ndarray
    steps_since_redistance: int = 0

    @classmethod
    def circle(cls, grid: PeriodicGrid, radius: float, center=None) -> LevelSetField:
        """Signed distance to a circle, positive inside (periodic minimum image)."""
        x, y = grid.coords
        cx, cy = (grid.Lx / 2, grid.Ly / 2) if center is None else center
        dx = (x - cx) - grid.Lx * np.round((x - cx) / grid.Lx)
        dy = (y - cy) - grid.Ly * np.round((y - cy) / grid.Ly)
        return cls(grid, radius - np.hypot(dx, dy))

    def curve(self) -> InterfaceCurve:
        return extract_level_set(self.grid, self.phi, 0.0)

    def gradient_norm(self) -> np.ndarray:
        h = self.grid.h
        gx = (np.roll(self.phi, -1, 0) - np.roll(self.phi, 1, 0)) / (2 * h)
        gy = (np.roll(self.phi, -1, 1) - np.roll(self.phi, 1, 1)) / (2 * h)
        return np.hypot(gx, gy)

    def level_set_curvature(self) -> np.ndarray:
        """``-div(grad phi / |grad phi|)`` by central differences."""
        h = self.grid.h
        phi = self.phi
        gx = (np.roll(phi, -1, 0) - np.roll(phi, 1, 0)) / (2 * h)
        gy = (np.roll(phi, -1, 1) - np.roll(phi, 1, 1)) / (2 * h)
        m = np.maximum(np.hypot(gx, gy), 1e-12)
        nx, ny = gx / m, gy / m
        div = (np.roll(nx, -1, 0) - np.roll(nx, 1, 0) + np.roll(ny, -1, 1) - np.roll(ny, 1, 1)) / (2 * h)
        return -div


def signed_distance(curve: InterfaceCurve, grid: PeriodicGrid) -> LevelSetField:
    """Periodic signed distance to the curve polyline (positive on the nematic side)."""
    period = np.array([grid.Lx, grid.Ly])
    a_list, b_list, n_list = [], [], []
    for k, seg in enumerate(curve.segments):
        p = curve.points[seg.start : seg.stop]
        nrm = curve.normals[seg.start : seg.stop]
        q = np.concatenate([p[1:], p[:1] + seg.shift]) if seg.closed else p[1:]
        a_list.append(p[: len(q)])
        b_list.append(q)
        n_list.append(nrm[: len(q)])
    A, B, N = np.concatenate(a_list), np.concatenate(b_list), np.concatenate(n_list)
    mids = np.mod(0.5 * (A + B), period)
    tree = cKDTree(mids, boxsize=period)
    x, y = grid.coords
    X = np.stack([x.ravel(), y.ravel()], axis=1)
    _, cand = tree.query(X, k=min(6, len(mids)))
    best = np.full(len(X), np.inf)
    sign = np.ones(len(X))
    for c in cand.T:
        a, b, nrm = A[c], B[c], N[c]
        d = X - a
        d -= period * np.round(d / period)
        ab = b - a
        t = np.clip(np.sum(d * ab, axis=1) / np.maximum(np.sum(ab * ab, axis=1), 1e-300), 0.0, 1.0)
        r = d - t[:, None] * ab
        dist = np.linalg.norm(r, axis=1)
        better = dist < best
        best = np.where(better, dist, best)
        sign = np.where(better, np.where(np.sum(r * nrm, axis=1) >= 0, 1.0, -1.0), sign)
    return LevelSetField(grid, (sign * best).reshape(grid.dims))


def _minmod(a, b):
    return np.where(a * b > 0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def _one_sided(phi, h, ax):
    """Second-order ENO backward/forward differences along ``ax``."""
    d2 = (np.roll(phi, -1, ax) - 2 * phi + np.roll(phi, 1, ax)) / (h * h)
    back = (phi - np.roll(phi, 1, ax)) / h + 0.5 * h * _minmod(d2, np.roll(d2, 1, ax))
    fwd = (np.roll(phi, -1, ax) - phi) / h - 0.5 * h * _minmod(d2, np.roll(d2, -1, ax))
    return back, fwd


def _godunov_norm(phi, h, S):
    a, b = _one_sided(phi, h, 0)
    c, d = _one_sided(phi, h, 1)
    gpos = np.sqrt(
        np.maximum(np.maximum(a, 0) ** 2, np.minimum(b, 0) ** 2) + np.maximum(np.maximum(c, 0) ** 2, np.minimum(d, 0) ** 2)
    )
    gneg = np.sqrt(
        np.maximum(np.minimum(a, 0) ** 2, np.maximum(b, 0) ** 2) + np.maximum(np.minimum(c, 0) ** 2, np.maximum(d, 0) ** 2)
    )
    return np.where(S > 0, gpos, gneg)


def redistance(ls: LevelSetField, band: float | None = None, max_iter: int = 40, tol: float = 1e-4) -> LevelSetField:
    """PDE reinitialization ``phi_tau + sign(phi0)(|grad phi| - 1) = 0``.

    ENO2 Godunov upwinding with Heun pseudo-time stepping.  Nodes adjacent to
    the zero level use the subcell fix (they relax toward ``phi0 / |grad phi0|``),
    which keeps the interface in place.  Iterates until the update in the band
    ``|phi| < band`` (default ``10 h``) falls below ``tol * h``.
    """
    g = ls.grid
    h = g.h
    band = 10.0 * h if band is None else band
    phi0 = ls.phi
    S = np.sign(phi0)
    near = np.zeros(g.dims, dtype=bool)
    for ax in (0, 1):
        for sh in (1, -1):
            near |= phi0 * np.roll(phi0, sh, ax) <= 0
    gx = (np.roll(phi0, -1, 0) - np.roll(phi0, 1, 0)) / 2.0
    gy = (np.roll(phi0, -1, 1) - np.roll(phi0, 1, 1)) / 2.0
    fx = np.maximum(np.abs(np.roll(phi0, -1, 0) - phi0), np.abs(phi0 - np.roll(phi0, 1, 0)))
    fy = np.maximum(np.abs(np.roll(phi0, -1, 1) - phi0), np.abs(phi0 - np.roll(phi0, 1, 1)))
    dphi0 = np.maximum(np.maximum(np.hypot(gx, gy), np.hypot(fx, fy) * 0.5), 1e-12 * h)
    Dsub = h * phi0 / dphi0
    dtau = 0.3 * h
    inband = np.abs(phi0) < band

    def rate(phi):
        far = -S * (_godunov_norm(phi, h, S) - 1.0)
        sub = -(S * np.abs(phi) - Dsub) / h
        return np.where(near, sub, far)

    phi = phi0.copy()
    for _ in range(max_iter):
        mid = phi + dtau * rate(phi)
        new = 0.5 * (phi + mid + dtau * rate(mid))
        upd = new - phi
        phi = new
        if np.max(np.abs(upd[inband])) < tol * h:
            break
    return LevelSetField(g, phi, 0)


def _curvature_speed(phi: np.ndarray, h: float) -> np.ndarray:
    """``|grad phi| div(grad phi / |grad phi|)`` with compact central differences."""
    px = (np.roll(phi, -1, 0) - np.roll(phi, 1, 0)) / (2 * h)
    py = (np.roll(phi, -1, 1) - np.roll(phi, 1, 1)) / (2 * h)
    pxx = (np.roll(phi, -1, 0) - 2 * phi + np.roll(phi, 1, 0)) / (h * h)
    pyy = (np.roll(phi, -1, 1) - 2 * phi + np.roll(phi, 1, 1)) / (h * h)
    up = np.roll(phi, -1, 0)
    dn = np.roll(phi, 1, 0)
    pxy = (np.roll(up, -1, 1) + np.roll(dn, 1, 1) - np.roll(up, 1, 1) - np.roll(dn, -1, 1)) / (4 * h * h)
    g2 = px * px + py * py
    return (pxx * py * py - 2 * px * py * pxy + pyy * px * px) / np.maximum(g2, 1e-12)


def mcf_reference_step(
    ls: LevelSetField,
    v: VelocityField | np.ndarray | None,
    dt: float,
    redistance_every: int = 10,
    redistance_iters: int = 5,
) -> LevelSetField:
    """One explicit step of ``phi_t = lap(phi) - v.grad(phi)``, redistancing every few steps.

    The diffusion term is evaluated in level-set curvature form
    ``|grad phi| div(grad phi / |grad phi|)``, which equals ``lap(phi)`` for a
    signed distance but keeps moving each level set by its own curvature when
    ``phi`` drifts from a distance function between redistancing passes.
    """
    g = ls.grid
    h = g.h
    if ls.steps_since_redistance > redistance_every:
        raise ValueError("level set has not been redistanced recently")
    if dt > h * h / 4.0 * (1 + 1e-12):
        raise CFLError(f"dt = {dt:.3g} exceeds the diffusive limit h^2/4 = {h * h / 4:.3g}")
    phi = ls.phi
    rhs = _curvature_speed(phi, h)
    if v is not None:
        vd = v.data if isinstance(v, VelocityField) else np.asarray(v, dtype=float)
        vd = np.broadcast_to(vd.reshape((2,) + (vd.shape[1:] if vd.ndim > 1 else (1, 1))), (2,) + g.dims)
        if np.max(np.abs(vd)) * dt / h > 0.5:
            raise CFLError(f"advective CFL {np.max(np.abs(vd)) * dt / h:.3f} > 0.5")
        gx = (np.roll(phi, -1, 0) - np.roll(phi, 1, 0)) / (2 * h)
        gy = (np.roll(phi, -1, 1) - np.roll(phi, 1, 1)) / (2 * h)
        rhs = rhs - (vd[0] * gx + vd[1] * gy)
    out = LevelSetField(g, phi + dt * rhs, ls.steps_since_redistance + 1)
    if out.steps_since_redistance >= redistance_every:
        # phi stays close to a distance function, so a few pseudo-time steps suffice
        out = redistance(out, max_iter=redistance_iters)
    return out


# -- sharp-interface corrections and probes ---------------------------------


def mcf_xi_correction(profile: ProfileSolution, xi: float, D_samples, n=None, z=None) -> float:
    """``(xi/2) (int s'^2)^-1 int s' (1 + s - 2 s^2) D:(nn) dz``.

    ``D_samples`` holds ``D:(nn)`` values, or ``(N, 3, 3)`` strain tensors
    together with the director ``n``, at inner coordinates ``z`` (default: the
    profile grid).
    """
    if not math.isclose(profile.s_plus, 1.0, rel_tol=1e-10):
        raise ValueError("the correction weight 1 + s - 2s^2 assumes s_plus = 1")
    if xi == 0:
        return 0.0
    z = profile.z_grid if z is None else np.asarray(z, dtype=float)
    D = np.asarray(D_samples, dtype=float)
    if D.ndim == 3:
        if n is None:
            raise ValueError("tensor samples need the director n")
        n = np.asarray(n, dtype=float)
        D = np.einsum("kij,i,j->k", D, n, n)
    s = profile(z)
    sp = profile.derivative(z)
    from .profile import integral_sprime_sq

    num = trapezoid(sp * (1.0 + s - 2.0 * s * s) * D, z)
    return 0.5 * xi * num / integral_sprime_sq(profile)


def _probe_points(curve: InterfaceCurve, delta: float):
    if delta <= 0:
        raise ValueError("delta must be positive")
    kmax = np.max(np.abs(curve.kappa)) if len(curve.kappa) else 0.0
    if kmax > 0 and delta * kmax >= 1.0:
        warnings.warn(
            f"probe offset {delta:.3g} exceeds the radius of curvature {1 / kmax:.3g}; probes on the concave side may cross",
            ProbeWarning,
            stacklevel=3,
        )
    plus = curve.points + delta * curve.normals
    minus = curve.points - delta * curve.normals
    return plus, minus


def pressure_jump_samples(p: PressureField | np.ndarray, curve: InterfaceCurve, delta: float) -> np.ndarray:
    grid = curve.grid
    data = p.data if isinstance(p, PressureField) else np.asarray(p)
    plus, minus = _probe_points(curve, delta)
    data = data - np.mean(data)
    return _interp_periodic(grid, data, plus) - _interp_periodic(grid, data, minus)


def pressure_jump_probe(p: PressureField | np.ndarray, curve: InterfaceCurve, delta: float, eps: float | None = None) -> float:
    """Arc-length mean of ``p(x + delta nu) - p(x - delta nu)`` (nematic minus isotropic)."""
    if eps is not None and delta < 3.0 * eps * (1 - 1e-12):
        raise ValueError(f"delta = {delta:.3g} is inside the transition layer (need >= 3 eps)")
    j = pressure_jump_samples(p, curve, delta)
    return float(np.sum(j * curve.ds) / np.sum(curve.ds))


def velocity_jump_samples(v: VelocityField | np.ndarray, curve: InterfaceCurve, delta: float) -> np.ndarray:
    """Per-point ``v(x + delta nu) - v(x - delta nu)``, shape ``(N, 2)``."""
    data = v.data if isinstance(v, VelocityField) else np.asarray(v)
    plus, minus = _probe_points(curve, delta)
    return (_interp_periodic(curve.grid, data, plus) - _interp_periodic(curve.grid, data, minus)).T


def velocity_jump_probe(v: VelocityField | np.ndarray, curve: InterfaceCurve, delta: float) -> np.ndarray:
    """Arc-length mean jump vector."""
    j = velocity_jump_samples(v, curve, delta)
    return np.sum(j * curve.ds[:, None], axis=0) / np.sum(curve.ds)


def velocity_jump_rms(v: VelocityField | np.ndarray, curve: InterfaceCurve, delta: float) -> float:
    """Arc-length RMS magnitude of the jump; unlike the mean it does not cancel by symmetry."""
    j = velocity_jump_samples(v, curve, delta)
    return float(np.sqrt(np.sum(np.sum(j * j, axis=1) * curve.ds) / np.sum(curve.ds)))


@dataclass
class NeumannDefect:
    value: float
    n_samples: int
    n_excluded: int

    def __float__(self) -> float:
        return self.value


def neumann_defect(
    Q: QField,
    curve: InterfaceCurve,
    eps: float,
    s_plus: float = 1.0,
    distances=(3.0, 4.0, 5.0, 6.0),
    min_order: float = 0.8,
) -> NeumannDefect:
    """Average of ``|d_nu n|^2`` on the nematic side at ``distances * eps`` from the curve.

    ``d_nu n = (I - nn)(d_nu Q) n / s`` for uniaxial Q; samples with order
    below ``min_order * s_plus`` or a degenerate director are excluded.
    """
    grid = Q.grid
    dQ = grid.grad(Q.data)  # (2, 5, nx, ny)
    total, weight, used, excluded = 0.0, 0.0, 0, 0
    period = np.array([grid.Lx, grid.Ly])
    for d in distances:
        pts = np.mod(curve.points + d * eps * curve.normals, period)
        q = _interp_periodic(grid, Q.data, pts).T  # (N, 5)
        gx = _interp_periodic(grid, dQ[0], pts).T
        gy = _interp_periodic(grid, dQ[1], pts).T
        dnu = curve.normals[:, :1] * gx + curve.normals[:, 1:] * gy
        m = qt.to_matrix(q.T)
        w, vecs = np.linalg.eigh(m)
        n = vecs[..., :, 2]
        s = 1.5 * w[..., 2]
        ok = (np.sqrt(1.5 * np.sum(q * q, axis=1)) >= min_order * s_plus) & (w[..., 2] - w[..., 1] > 1e-10)
        dm = qt.to_matrix(dnu.T)
        dn = np.einsum("kij,kj->ki", dm, n)
        dn = dn - np.sum(dn * n, axis=1, keepdims=True) * n
        val = np.sum(dn * dn, axis=1) / np.where(ok, s, 1.0) ** 2
        total += float(np.sum((val * curve.ds)[ok]))
        weight += float(np.sum(curve.ds[ok]))
        used += int(np.sum(ok))
        excluded += int(np.sum(~ok))
    value = total / weight if weight > 0 else math.nan
    return NeumannDefect(value, used, excluded)
