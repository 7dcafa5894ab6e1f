"""Command-line experiment runner (``nematic-lab``).

Exit codes: 0 ok, 2 configuration error, 3 numerical divergence or energy
increase, 4 acceptance failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
from pathlib import Path

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_ACCEPTANCE = 0, 2, 3, 4
SERIES_COLUMNS = ("t", "energy_free", "energy_kinetic", "div_max", "radius", "pressure_jump")
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")

# plain flags accepted by the small subcommands, mapped onto [model] keys
MODEL_FLAGS = {
    "profile": ("a", "b", "c", "L1", "L2"),
    "bulk": ("a", "b", "c"),
    "coeffs": ("L1", "L2", "L3", "xi"),
}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _fmt(x: float) -> str:
    return repr(float(x))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config file")
    common.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for numerical libraries")
    common.add_argument("--seed", type=int, help="overrides [init] seed")

    parser = argparse.ArgumentParser(
        prog="nematic-lab",
        description="Q-tensor interface experiments. Any config key can be overridden as --section.key VALUE.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("profile", parents=[common], help="solve the 1D interface profile")
    sb = sub.add_parser("bulk", parents=[common], help="critical points of the bulk potential")
    sc = sub.add_parser("coeffs", parents=[common], help="Oseen-Frank and Leslie coefficients")
    for p, name in ((sp, "profile"), (sb, "bulk"), (sc, "coeffs")):
        for key in MODEL_FLAGS[name]:
            p.add_argument(f"--{key}", type=float, dest=f"model_{key}")
    sc.add_argument("--s-plus", type=float, dest="s_plus", help="nematic order (default from a, b, c)")
    sub.add_parser("flow", parents=[common], help="gradient flow run")
    sub.add_parser("hydro", parents=[common], help="Beris-Edwards run")
    sv = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    sv.add_argument("--only", help="comma-separated criterion keys or numbers")
    sv.add_argument("--eps-sweep", help="comma-separated eps values for the convergence studies")
    return parser


def split_overrides(extra: list[str]) -> list[tuple[str, str]]:
    pairs, i = [], 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or "." not in tok:
            raise CliError(f"unrecognized argument {tok!r}", EXIT_CONFIG)
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise CliError(f"override {tok} needs a value", EXIT_CONFIG)
            val = extra[i + 1]
            i += 2
        pairs.append((key, val))
    return pairs


def load_config(args, overrides):
    from .config import ExperimentConfig

    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    for key in ("a", "b", "c", "L1", "L2", "L3", "xi"):
        val = getattr(args, f"model_{key}", None)
        if val is not None:
            cfg.set("model", key, val)
    cfg.apply_overrides(overrides)
    if args.seed is not None:
        cfg.set("init", "seed", args.seed)
    return cfg


def out_dir(args, cfg) -> Path:
    d = args.out if args.out is not None else Path(cfg["output"]["dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def write_manifest(d: Path, args, cfg, outputs: list[str], extra: dict | None = None) -> None:
    import numpy as np

    from . import __version__

    body = {
        "command": args.command,
        "config_sha256": cfg.digest(),
        "config": cfg.text(),
        "code_version": __version__,
        "seed": cfg["init"]["seed"],
        "threads": args.threads,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "outputs": sorted(outputs),
    }
    if extra:
        body.update(extra)
    (d / "manifest.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


# -- subcommands ----------------------------------------------------------------


def cmd_bulk(args, cfg) -> int:
    from .qtensor import critical_points

    p = cfg.bulk
    cs = critical_points(p)
    print(f"a={_fmt(p.a)}\nb={_fmt(p.b)}\nc={_fmt(p.c)}")
    print(f"discriminant={_fmt(p.discriminant)}")
    print(f"well_ratio={_fmt(p.well_ratio)}")
    print(f"equal_wells={p.has_equal_wells()}")
    for k, pt in enumerate(cs.points):
        print(f"s{k}={_fmt(pt.s)} ({pt.stability})")
    return EXIT_OK


def cmd_coeffs(args, cfg) -> int:
    from .limits import leslie, oseen_frank

    m = cfg["model"]
    s = args.s_plus if args.s_plus is not None else cfg.bulk.s_plus
    of = oseen_frank(m["L1"], m["L2"], m["L3"], s)
    les = leslie(m["xi"], s)
    print(f"s_plus={_fmt(s)}\nxi={_fmt(m['xi'])}")
    for k, v in of.as_dict().items():
        print(f"{k}={_fmt(v)}")
    for k, v in les.as_dict().items():
        print(f"{k}={_fmt(v)}")
    print(f"parodi_residual={_fmt(les.parodi_residual())}")
    return EXIT_OK


def cmd_profile(args, cfg) -> int:
    import numpy as np

    from .profile import integral_sprime_sq, mobility_tensors, solve_profile

    m = cfg["model"]
    try:
        prof = solve_profile(cfg.bulk, kappa=6 * m["L1"] + m["L2"], L2=m["L2"])
    except ValueError as exc:  # UnequalWellsError carries the b^2/27ac ratio
        raise CliError(str(exc), EXIT_CONFIG) from None
    th = cfg["init"]["theta"]
    n = np.array([math.cos(th), math.sin(th), 0.0])
    const = mobility_tensors(prof, n, m["L1"], m["L2"], m["L3"])
    d = out_dir(args, cfg)
    with open(d / "profile.csv", "w") as fh:
        fh.write("z,s,s_prime\n")
        for z, s, sp in zip(prof.z_grid, prof.s, prof.s_prime):
            fh.write(f"{float(z)!r},{float(s)!r},{float(sp)!r}\n")
    lines = {
        "sigma": const.sigma,
        "alpha": const.alpha,
        "beta": const.beta,
        "c": const.c_mobility,
        "int_sprime2": integral_sprime_sq(prof),
        "s_plus": prof.s_plus,
        "kappa": prof.kappa,
    }
    text = "".join(f"{k}={_fmt(v)}\n" for k, v in lines.items())
    text += "".join(f"A_{i + 1}{j + 1}={_fmt(const.A_mobility[i, j])}\n" for i in range(3) for j in range(3))
    text += f"beta_sign={'negative' if const.beta < 0 else 'positive' if const.beta > 0 else 'zero'}\n"
    (d / "constants.txt").write_text(text)
    sys.stdout.write(text)
    write_manifest(d, args, cfg, ["profile.csv", "constants.txt"])
    return EXIT_OK


def _observers(cfg, hydro: bool):
    from . import dynamics as dy
    from . import interface as it

    obs = [dy.energy_observer]
    if hydro:
        obs.append(dy.divergence_observer)
    if cfg["init"]["preset"] == "disk":
        obs.append(it.radius_observer)
        if hydro:
            obs.append(pressure_jump_observer)
    return obs


def pressure_jump_observer(state, cfg) -> dict:
    """Nematic-minus-isotropic pressure jump probed at +-5 eps."""
    from . import dynamics as dy
    from . import interface as it

    try:
        curve = it.extract_interface(state.Q, s_plus=cfg.bulk.s_plus)
    except it.EmptyInterfaceError:
        return {"pressure_jump": math.nan}
    p = dy.recover_pressure(state, cfg)
    return {"pressure_jump": it.pressure_jump_probe(p, curve, 5 * cfg.eps, eps=cfg.eps)}


def run_experiment(args, cfg, hydro: bool) -> int:
    import numpy as np

    from . import dynamics as dy
    from .config import initial_state
    from .snapshot import save_snapshot

    cfg.validate()
    solver = cfg.solver()
    state = initial_state(cfg)
    grid = state.grid
    if hydro and not solver.elastic.isotropic:
        raise CliError("hydro runs need L2 = L3 = 0", EXIT_CONFIG)
    if not hydro and np.any(state.v.data):
        raise CliError("the gradient flow has no velocity; use hydro for the isotropic preset", EXIT_CONFIG)
    t_start = state.t
    t_end = cfg["time"]["t_end"]
    if t_end <= t_start:
        raise CliError(f"[time] t_end = {t_end} is not after the initial time {t_start}", EXIT_CONFIG)
    steps = max(1, math.ceil((t_end - t_start) / solver.dt - 1e-9))
    dt = (t_end - t_start) / steps
    every = cfg["time"]["observer_every"]
    snap_every = cfg["output"]["snapshot_every"] or steps
    observers = _observers(cfg, hydro)
    check = not (hydro and solver.shear_forcing)
    d = out_dir(args, cfg)
    outputs = ["series.csv", "final.snap"]

    records = []
    current = state if hydro else state.Q
    done = 0
    try:
        while done < steps:
            chunk = min(snap_every, steps - done)
            until = t_start + (done + chunk) * dt if done + chunk < steps else t_end
            res = dy.run(until, current, solver, observers=observers, cadence=every, t0=t_start + done * dt, check_energy=check)
            records.extend(res.records if not records else res.records[1:])
            current = res.state
            done += chunk
            if done < steps:
                name = f"snap_{done:07d}.snap"
                _save(save_snapshot, d / name, current, grid, until, solver, hydro)
                outputs.append(name)
    except (dy.DivergenceError, dy.EnergyIncreaseError) as exc:
        _write_series(d / "series.csv", records)
        write_manifest(d, args, cfg, outputs[:1], {"status": "failed", "error": str(exc)})
        raise CliError(str(exc), EXIT_DIVERGED) from None
    _write_series(d / "series.csv", records)
    _save(save_snapshot, d / "final.snap", current, grid, t_end, solver, hydro)
    write_manifest(d, args, cfg, outputs, {"status": "ok", "steps": steps, "dt": dt})
    last = records[-1]
    print(" ".join(f"{k}={last[k]:.6g}" for k in SERIES_COLUMNS if k in last))
    return EXIT_OK


def _save(save_snapshot, path, current, grid, t, solver, hydro):
    fields = {"Q": current.Q, "v": current.v} if hydro else {"Q": current}
    save_snapshot(fields, path, grid, t=t, eps=solver.eps, params={"xi": solver.xi, "Gamma": solver.Gamma, "nu": solver.nu})


def _write_series(path: Path, records: list[dict]) -> None:
    cols = [c for c in SERIES_COLUMNS if any(c in r for r in records)]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in records:
            fh.write(",".join(repr(float(r.get(c, math.nan))) for c in cols) + "\n")


def cmd_verify(args, cfg) -> int:
    from . import verify

    only = [t.strip() for t in args.only.split(",") if t.strip()] if args.only else None
    sweep = None
    if args.eps_sweep:
        try:
            sweep = tuple(float(t) for t in args.eps_sweep.split(","))
        except ValueError:
            raise CliError(f"--eps-sweep expects numbers, got {args.eps_sweep!r}", EXIT_CONFIG) from None
        if len(sweep) < 2 or any(e <= 0 for e in sweep):
            raise CliError("--eps-sweep needs at least two positive values", EXIT_CONFIG)
    try:
        verify.select(only)
    except KeyError as exc:
        raise CliError(str(exc.args[0]), EXIT_CONFIG) from None
    results = verify.run_suite(only, sweep, report=lambda r: print(r.line(), flush=True))
    d = out_dir(args, cfg)
    (d / "report.json").write_text(verify.to_json(results) + "\n")
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    return EXIT_OK if ok else EXIT_ACCEPTANCE


COMMANDS = {
    "profile": cmd_profile,
    "bulk": cmd_bulk,
    "coeffs": cmd_coeffs,
    "flow": lambda a, c: run_experiment(a, c, hydro=False),
    "hydro": lambda a, c: run_experiment(a, c, hydro=True),
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    for var in THREAD_VARS:
        os.environ[var] = str(args.threads)
    from .config import ConfigError

    try:
        cfg = load_config(args, split_overrides(extra))
        return COMMANDS[args.command](args, cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
