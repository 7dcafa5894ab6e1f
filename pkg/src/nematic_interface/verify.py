"""The acceptance suite: one check per criterion, each returning a CriterionResult."""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from . import dynamics as dy
from . import interface as it
from . import limits as lm
from . import qtensor as qt
from .field import (
    ElasticParams,
    PeriodicGrid,
    PressureField,
    QField,
    VelocityField,
    bulk_energy_field,
    elastic_energy_density,
    smooth_random,
    total_energy,
    uniaxial_field,
)
from .profile import (
    alpha_beta,
    first_integral_error,
    integral_sprime_sq,
    solve_profile,
    surface_tension,
)
from .qtensor import BulkParams

P = BulkParams(1.0 / 3.0, 3.0, 1.0)
SIGMA = 1.0 / (9.0 * math.sqrt(3.0))
DEFAULT_EPS_SWEEP = (0.08, 0.04, 0.02)
E1 = np.array([1.0, 0.0, 0.0])


@dataclass
class CriterionResult:
    number: int
    key: str
    title: str
    passed: bool
    measured: dict
    tolerance: str
    runtime: float = 0.0
    notes: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{flag}] {self.number:2d} {self.key}: {vals} (need {self.tolerance}; {self.runtime:.1f} s)"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def convergence_order(eps: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(eps)``."""
    return float(np.polyfit(np.log(eps), np.log(errors), 1)[0])


def random_unit(rng: np.random.Generator) -> np.ndarray:
    n = rng.normal(size=3)
    return n / np.linalg.norm(n)


def droplet(grid: PeriodicGrid, eps: float, radius: float = 0.3, n=E1, prof=None) -> QField:
    prof = solve_profile(P) if prof is None else prof
    x, y = grid.coords
    r = np.hypot(x - 0.5 * grid.Lx, y - 0.5 * grid.Ly)
    return uniaxial_field(grid, prof((radius - r) / eps), np.asarray(n, dtype=float))


# -- 1-4, 12: pointwise and one-dimensional checks --------------------------


def check_bulk() -> CriterionResult:
    cs = qt.critical_points(P)
    rng = np.random.default_rng(11)
    fmax = max(qt.bulk_force(qt.uniaxial(cs.s1, random_unit(rng)), P).norm() for _ in range(20))
    m = {"s_plus_err": abs(cs.s1 - 1.0), "s2_err": abs(cs.s2 - 0.5), "max_f_at_well": float(fmax)}
    ok = all(v <= 1e-12 for v in m.values())
    return CriterionResult(1, "bulk", "bulk critical points", ok, m, "all <= 1e-12")


def check_kernel() -> CriterionResult:
    rng = np.random.default_rng(12)
    s1 = qt.critical_points(P).s1
    worst, zero_counts, positive_counts = 0.0, [], []
    for _ in range(10):
        n = random_unit(rng)
        Q0 = qt.uniaxial(s1, n)
        for K in qt.kernel_basis(s1, n):
            worst = max(worst, float(np.linalg.norm(qt.linearized_bulk(Q0.matrix(), K.matrix(), P))))
        lam = np.linalg.eigvalsh(0.5 * (qt.linearization_matrix(Q0, P) + qt.linearization_matrix(Q0, P).T))
        zero_counts.append(int(np.sum(np.abs(lam) < 1e-10)))
        positive_counts.append(int(np.sum(lam >= 1e-10)))
    m = {"max_kernel_residual": worst, "zero_eigs": sorted(set(zero_counts)), "positive_eigs": sorted(set(positive_counts))}
    ok = worst <= 1e-12 and set(zero_counts) == {2} and set(positive_counts) == {3}
    return CriterionResult(2, "kernel", "kernel structure", ok, m, "residual <= 1e-12, 2 zero and 3 positive eigenvalues")


def check_derivatives() -> CriterionResult:
    rng = np.random.default_rng(13)
    grad_err = hess_err = 0.0
    h = 1e-5
    for _ in range(100):
        q = rng.normal(size=5) * 0.5
        f = qt.from_matrix(qt.bulk_force(qt.to_matrix(q), P))
        fd = np.empty(5)
        for i in range(5):
            dq = np.zeros(5)
            dq[i] = h
            fd[i] = (qt.bulk_energy(qt.to_matrix(q + dq), P) - qt.bulk_energy(qt.to_matrix(q - dq), P)) / (2 * h)
        grad_err = max(grad_err, float(np.linalg.norm(fd - f) / np.linalg.norm(f)))
    # F_b is quartic along a line, so the 5-point third difference has no truncation error
    hl = 0.1
    for _ in range(100):
        q0, d = rng.normal(size=(2, 5)) * 0.6
        m0, md = qt.to_matrix(q0), qt.to_matrix(d)
        e = [qt.bulk_energy(qt.to_matrix(q0 + k * hl * d), P) for k in (-2, -1, 1, 2)]
        third = (e[3] - 2 * e[2] + 2 * e[1] - e[0]) / (2 * hl**3)
        val = float(np.sum(qt.bilinear_bulk(m0, md, md, P) * md))
        hess_err = max(hess_err, abs(third - val) / max(abs(val), 1e-3))
    m = {"force_rel_err": grad_err, "bilinear_rel_err": hess_err}
    ok = grad_err <= 1e-6 and hess_err <= 1e-5
    return CriterionResult(3, "derivatives", "gradient and Hessian consistency", ok, m, "<= 1e-6 / 1e-5")


def check_profile() -> CriterionResult:
    prof = solve_profile(P)
    z = prof.z_grid
    logistic = 1.0 / (1.0 + np.exp(-z / math.sqrt(3.0)))
    alpha, _ = alpha_beta(prof, 1.0, 0.0)
    m = {
        "logistic_err": float(np.max(np.abs(prof.s - logistic))),
        "first_integral_err": float(first_integral_error(prof)),
        "int_sprime2_err": abs(integral_sprime_sq(prof) - 1.0 / (6.0 * math.sqrt(3.0))),
        "sigma_err": abs(surface_tension(prof) - SIGMA),
        "alpha_err": abs(alpha - SIGMA),
    }
    ok = m["logistic_err"] <= 1e-6 and m["first_integral_err"] <= 1e-8 and max(
        m["int_sprime2_err"], m["sigma_err"], m["alpha_err"]
    ) <= 1e-6
    return CriterionResult(4, "profile", "heteroclinic profile", ok, m, "1e-6 / 1e-8 / 1e-6 / 1e-6")


def check_coefficients() -> CriterionResult:
    of = lm.oseen_frank(1.0, 0.0, 0.0, 1.0)
    of_ok = of == lm.OseenFrankConstants(2.0, 2.0, 2.0, 0.0)
    les_ok = all(
        lm.leslie(0.0, s).as_tuple() == (0.0, -s * s, s * s, 1.0, 0.0, 0.0) for s in (1.0, 0.5, 0.7, 2.0)
    )
    rng = np.random.default_rng(14)
    parodi = max(abs(lm.leslie(x, s).parodi_residual()) for x, s in zip(rng.uniform(-2, 2, 100), rng.uniform(0.1, 2, 100)))
    m = {"oseen_frank": of.as_dict(), "leslie_xi0_exact": les_ok, "parodi_max": float(parodi)}
    ok = of_ok and les_ok and parodi <= 1e-14
    return CriterionResult(12, "coefficients", "coefficient maps", ok, m, "exact maps, Parodi <= 1e-14")


# -- 5: energy asymptotics ---------------------------------------------------


def check_energy_asymptotics(eps_sweep: Sequence[float] = DEFAULT_EPS_SWEEP, n: int = 256) -> CriterionResult:
    g = PeriodicGrid(n, n)
    x, y = g.coords
    th = 0.4
    n_stripe = np.array([math.cos(th), math.sin(th), 0.0])
    orders, errors = {}, {}
    for L2 in (0.0, -0.5):
        ep = ElasticParams(1.0, L2, 0.0)
        prof = solve_profile(P, kappa=6.0 + L2, L2=L2)
        alpha, beta = alpha_beta(prof, 1.0, L2)
        for name in ("stripe", "disk"):
            if name == "stripe":
                # two flat interfaces of unit length, director at angle th to the normal
                phi, nvec = 0.25 - np.abs(x - 0.5), n_stripe
                target = 2 * alpha + 2 * beta * math.cos(th) ** 2
            else:
                # disk of radius 0.3 with uniform director e1: int (n.nu)^2 = pi R
                phi, nvec = 0.3 - np.hypot(x - 0.5, y - 0.5), E1
                target = 2 * math.pi * 0.3 * alpha + math.pi * 0.3 * beta
            errs = []
            for eps in eps_sweep:
                Q = uniaxial_field(g, prof(phi / eps), nvec)
                errs.append(abs(eps * total_energy(Q, eps, P, ep) - target) / abs(target))
            label = f"{name}_L2={L2:g}"
            errors[label] = errs
            orders[label] = convergence_order(eps_sweep, errs)
    m = {f"order_{k}": v for k, v in orders.items()}
    ok = all(v >= 0.8 for v in orders.values())
    return CriterionResult(5, "energy", "energy asymptotics", ok, m, "order >= 0.8", notes=json.dumps(errors))


# -- 6: mean curvature flow ---------------------------------------------------


def mcf_droplet(eps: float = 0.03, n: int = 256, radius: float = 0.3, t_end: float = 0.015, dt_factor: float = 0.002, samples: int = 16):
    """Gradient-flow droplet radius history: returns ``(t, R)`` arrays."""
    g = PeriodicGrid(n, n)
    cfg = dy.SolverConfig(eps=eps, bulk=P, dt=dt_factor * eps**2)
    steps = math.ceil(t_end / cfg.dt)
    res = dy.run(t_end, droplet(g, eps, radius), cfg, observers=(it.radius_observer,), cadence=max(1, steps // samples), check_energy=False)
    return res.series("t"), res.series("radius")


def mcf_level_set(n: int = 256, radius: float = 0.3, r_end: float = 0.1, samples: int = 8):
    g = PeriodicGrid(n, n)
    ls = it.LevelSetField.circle(g, radius)
    T = 0.5 * (radius**2 - r_end**2)
    steps = math.ceil(T / (g.h**2 / 4))
    dt = T / steps
    ts, rs = [0.0], [ls.curve().equivalent_radius()]
    every = max(1, steps // samples)
    for k in range(1, steps + 1):
        ls = it.mcf_reference_step(ls, None, dt)
        if k % every == 0 or k == steps:
            ts.append(k * dt)
            rs.append(ls.curve().equivalent_radius())
    return np.array(ts), np.array(rs)


def check_mcf(eps: float = 0.03, n: int = 256) -> CriterionResult:
    R0 = 0.3
    t, R = mcf_droplet(eps, n, R0)
    law = R0**2 - 2 * t
    pf_err = float(np.max(np.abs(R**2 - law) / law))
    tl, Rl = mcf_level_set(n, R0)
    lawl = R0**2 - 2 * tl
    ls_err = float(np.max(np.abs(Rl**2 - lawl) / lawl))
    m = {"phase_field_R2_err": pf_err, "level_set_R2_err": ls_err, "final_R_phase_field": float(R[-1]), "final_R_level_set": float(Rl[-1])}
    return CriterionResult(6, "mcf", "mean curvature flow", pf_err <= 0.05 and ls_err <= 0.01, m, "<= 5% / <= 1%")


# -- 7, 8: dissipation and isotropic reduction -------------------------------


def random_flow_state(grid: PeriodicGrid, seed: int, q_amp: float = 0.8, v_amp: float = 0.5) -> dy.FlowState:
    rng = np.random.default_rng(seed)
    Q = QField(grid, smooth_random(grid, rng, amp=q_amp))
    v = dy.project_divergence_free(VelocityField(grid, smooth_random(grid, rng, amp=v_amp, comps=2)))
    return dy.FlowState(0.0, Q, v)


def check_dissipation(seeds: Sequence[int] = (0, 1, 2), steps: int = 2000, n: int = 64) -> CriterionResult:
    g = PeriodicGrid(n, n)
    cfg = dy.SolverConfig(eps=0.1, bulk=P)
    worst = {"gradient": -math.inf, "beris_edwards": -math.inf}
    for seed in seeds:
        st = random_flow_state(g, seed)
        T = steps * cfg.dt
        gf = dy.run(T, st.Q, cfg, observers=(dy.energy_observer,), cadence=1, check_energy=False)
        e = gf.series("energy_free")
        worst["gradient"] = max(worst["gradient"], float(np.max(np.diff(e) / np.abs(e[:-1]))))
        be = dy.run(T, st, cfg, observers=(dy.energy_observer,), cadence=1, check_energy=False)
        e = be.series("energy_free") + be.series("energy_kinetic")
        worst["beris_edwards"] = max(worst["beris_edwards"], float(np.max(np.diff(e) / np.abs(e[:-1]))))
    m = {f"max_rel_increase_{k}": v for k, v in worst.items()}
    ok = all(v <= 1e-12 for v in worst.values())
    return CriterionResult(7, "dissipation", "energy dissipation", ok, m, "<= +1e-12 relative per step")


def check_isotropic(steps: int = 200, n: int = 128) -> CriterionResult:
    g = PeriodicGrid(n, n)
    cfg = dy.SolverConfig(eps=0.05, bulk=P)
    st = random_flow_state(g, 3)
    a = b = dy.FlowState(0.0, QField.zeros(g), st.v)
    diff = qmax = 0.0
    for _ in range(steps):
        a = dy.step_beris_edwards(a, cfg)
        b = dy.step_navier_stokes(b, cfg)
        diff = max(diff, float(np.max(np.abs(a.v.data - b.v.data))))
        qmax = max(qmax, float(np.max(np.abs(a.Q.data))))
    m = {"max_v_diff": diff, "max_Q": qmax, "kinetic_ratio": dy.kinetic_energy(b.v) / dy.kinetic_energy(st.v)}
    return CriterionResult(8, "isotropic", "isotropic reduction", diff <= 1e-12 and qmax == 0.0, m, "<= 1e-12")


# -- 9: Young-Laplace -----------------------------------------------------------


def pressure_content_minus2(Q: QField, eps: float, L1: float = 1.0) -> PressureField:
    """The eps^-2 part of a static pressure, ``eps^-2 F_b + L1/2 |grad Q|^2``, in units of eps^-2."""
    dens = bulk_energy_field(Q, P) + eps**2 * elastic_energy_density(Q, ElasticParams(L1))
    return PressureField(Q.grid, dens)


def check_young_laplace(eps: float = 0.03, n: int = 256, steps: int = 40) -> CriterionResult:
    g = PeriodicGrid(n, n)
    cfg = dy.SolverConfig(eps=eps, bulk=P)
    st = dy.FlowState(0.0, droplet(g, eps), VelocityField.zeros(g))
    st = dy.run(steps * cfg.dt, st, cfg, observers=(), check_energy=False).state
    p = dy.recover_pressure(st, cfg)
    curve = it.extract_interface(st.Q)
    R = curve.equivalent_radius()
    delta = 5 * eps
    jump = it.pressure_jump_probe(p, curve, delta, eps=eps)
    ratio = eps * jump / (SIGMA / R)
    jm2 = it.pressure_jump_probe(pressure_content_minus2(st.Q, eps), curve, delta, eps=eps)
    m2_rel = abs(jm2) / abs(eps * jump)
    m = {"eps_jump_over_sigma_R": float(ratio), "radius": float(R), "p_minus2_over_p_minus1": float(m2_rel)}
    ok = abs(ratio - 1.0) <= 0.15 and m2_rel < 0.1
    return CriterionResult(9, "young_laplace", "Young-Laplace pressure jump", ok, m, "within 15%; [p^-2] < 10%")


# -- 10: director Neumann condition -------------------------------------------


def neumann_droplet(grid: PeriodicGrid, eps: float, radius: float = 0.3, twist: float = 2.0) -> QField:
    """Droplet whose director is e1 on the interface with normal derivative ``twist``."""
    prof = solve_profile(P)
    x, y = grid.coords
    r2 = (x - 0.5) ** 2 + (y - 0.5) ** 2
    th = twist * (r2 - radius**2) / (2 * radius)
    n = np.stack([np.cos(th), np.sin(th), np.zeros_like(th)])
    return uniaxial_field(grid, prof((radius - np.sqrt(r2)) / eps), n)


def check_neumann(eps: float = 0.03, n: int = 256, steps: int = 400) -> CriterionResult:
    g = PeriodicGrid(n, n)
    cfg = dy.SolverConfig(eps=eps, bulk=P)
    Q = neumann_droplet(g, eps)
    d0 = it.neumann_defect(Q, it.extract_interface(Q), eps)
    Q = dy.run(steps * cfg.dt, Q, cfg, observers=(), check_energy=False).state
    d1 = it.neumann_defect(Q, it.extract_interface(Q), eps)
    ratio = d0.value / d1.value
    m = {"initial": d0.value, "final": d1.value, "reduction": float(ratio), "excluded": d1.n_excluded}
    return CriterionResult(10, "neumann", "director Neumann condition", ratio >= 10, m, "reduction >= 10x")


# -- 11: velocity continuity ----------------------------------------------------


def forced_velocity_jump(eps: float, xi: float, n: int = 256, t_end: float = 0.002, forcing: float = 10.0) -> float:
    """RMS velocity jump across a sheared droplet, probed at +-3 eps."""
    g = PeriodicGrid(n, n)
    cfg = dy.SolverConfig(eps=eps, bulk=P, xi=xi, shear_forcing=forcing)
    st = dy.FlowState(0.0, droplet(g, eps), VelocityField.zeros(g))
    st = dy.run(t_end, st, cfg, observers=(), check_energy=False).state
    return it.velocity_jump_rms(st.v, it.extract_interface(st.Q), 3 * eps)


def check_velocity(eps_sweep: Sequence[float] = DEFAULT_EPS_SWEEP, eps_cmp: float = 0.03, n: int = 256) -> CriterionResult:
    jumps0 = {eps: forced_velocity_jump(eps, 0.0, n) for eps in eps_sweep}
    order = convergence_order(list(jumps0), list(jumps0.values()))
    j0 = jumps0.get(eps_cmp)
    if j0 is None:
        j0 = forced_velocity_jump(eps_cmp, 0.0, n)
    j1 = forced_velocity_jump(eps_cmp, 1.0, n)
    m = {"xi0_jumps": list(jumps0.values()), "xi0_order": order, "xi1_over_xi0": j1 / j0, "xi1_jump": j1}
    return CriterionResult(11, "velocity", "velocity continuity", order >= 0.8 and j1 >= 10 * j0, m, "order >= 0.8, ratio >= 10")


# -- registry -------------------------------------------------------------------


@dataclass(frozen=True)
class Criterion:
    number: int
    key: str
    fn: Callable[..., CriterionResult]
    uses_eps_sweep: bool = False


CRITERIA = (
    Criterion(1, "bulk", check_bulk),
    Criterion(2, "kernel", check_kernel),
    Criterion(3, "derivatives", check_derivatives),
    Criterion(4, "profile", check_profile),
    Criterion(5, "energy", check_energy_asymptotics, True),
    Criterion(6, "mcf", check_mcf),
    Criterion(7, "dissipation", check_dissipation),
    Criterion(8, "isotropic", check_isotropic),
    Criterion(9, "young_laplace", check_young_laplace),
    Criterion(10, "neumann", check_neumann),
    Criterion(11, "velocity", check_velocity, True),
    Criterion(12, "coefficients", check_coefficients),
)


def select(only: Sequence[str] | None = None) -> list[Criterion]:
    if not only:
        return list(CRITERIA)
    picked = []
    for tok in only:
        match = [c for c in CRITERIA if tok == c.key or tok == str(c.number)]
        if not match:
            raise KeyError(f"unknown criterion {tok!r}; choose from {[c.key for c in CRITERIA]}")
        picked.extend(m for m in match if m not in picked)
    return sorted(picked, key=lambda c: c.number)


def run_criterion(c: Criterion, eps_sweep: Sequence[float] | None = None) -> CriterionResult:
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        kwargs = {"eps_sweep": tuple(eps_sweep)} if (eps_sweep and c.uses_eps_sweep) else {}
        try:
            res = c.fn(**kwargs)
        except Exception as exc:  # a crash is a failed criterion, not a crashed suite
            res = CriterionResult(c.number, c.key, c.key, False, {"error": f"{type(exc).__name__}: {exc}"}, "completes")
    res.runtime = time.perf_counter() - t0
    return res


def run_suite(only=None, eps_sweep=None, report: Callable[[CriterionResult], None] | None = None) -> list[CriterionResult]:
    out = []
    for c in select(only):
        res = run_criterion(c, eps_sweep)
        if report is not None:
            report(res)
        out.append(res)
    return out


def to_json(results: Sequence[CriterionResult]) -> str:
    def clean(o):
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        if isinstance(o, (np.floating, np.integer, np.bool_)):
            return o.item()
        return o

    body = {"passed": all(r.passed for r in results), "criteria": [clean(asdict(r)) for r in results]}
    return json.dumps(body, indent=2, sort_keys=False)
