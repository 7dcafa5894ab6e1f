"""Experiment configuration: ``[section]`` / ``key = value`` files plus initial-state presets."""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics as dy
from .field import (
    ElasticParams,
    PeriodicGrid,
    QField,
    VelocityField,
    check_resolution,
    smooth_random,
    uniaxial_field,
)
from .profile import UnequalWellsError, solve_profile
from .qtensor import BulkParams


class ConfigError(ValueError):
    pass


PRESETS = ("stripe", "disk", "random", "isotropic", "file")

# section -> key -> (type, default); None means "unset"
SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "model": {
        "a": (float, 1.0 / 3.0),
        "b": (float, 3.0),
        "c": (float, 1.0),
        "L1": (float, 1.0),
        "L2": (float, 0.0),
        "L3": (float, 0.0),
        "eps": (float, 0.03),
        "xi": (float, 0.0),
        "Gamma": (float, 1.0),
        "nu": (float, 1.0),
        "forcing": (float, 0.0),
        "forcing_mode": (int, 1),
    },
    "grid": {"n": (int, 256), "L": (float, 1.0)},
    "time": {"dt": (float, None), "t_end": (float, 0.001), "observer_every": (int, 10)},
    "init": {
        "preset": (str, "disk"),
        "radius": (float, 0.3),
        "half_width": (float, 0.25),
        "theta": (float, 0.0),
        "amplitude": (float, 0.1),
        "seed": (int, 0),
        "file": (str, ""),
    },
    "output": {"dir": (str, "out"), "snapshot_every": (int, 0)},
}


def _convert(section: str, key: str, raw):
    typ, _ = SCHEMA[section][key]
    if raw is None:
        return None
    if isinstance(raw, str):
        raw = raw.strip()
        if typ is not str and raw.lower() in ("", "none", "auto"):
            return None
    try:
        if typ is int:
            val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        return typ(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"[{section}] {key}: cannot read {raw!r} as {typ.__name__}") from None


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=lambda: {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()})

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def set(self, section: str, key: str, raw) -> None:
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]; allowed: {', '.join(SCHEMA[section])}")
        self.values[section][key] = _convert(section, key, raw)

    @classmethod
    def from_file(cls, path) -> ExperimentConfig:
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        cp.optionxform = str  # keep L1, Gamma as written
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        cfg = cls()
        for section in cp.sections():
            for key, raw in cp.items(section):
                cfg.set(section, key, raw)
        return cfg

    def apply_overrides(self, pairs) -> None:
        """``pairs`` of ``("section.key", value)``."""
        for dotted, raw in pairs:
            if "." not in dotted:
                raise ConfigError(f"override {dotted!r} must look like section.key")
            section, key = dotted.split(".", 1)
            self.set(section, key, raw)

    def text(self) -> str:
        """Canonical rendering; identical configs give identical text."""
        lines = []
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            for key in keys:
                v = self.values[section][key]
                lines.append(f"{key} = {'' if v is None else repr(v) if isinstance(v, float) else v}")
            lines.append("")
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.text().encode()).hexdigest()

    # -- derived objects -----------------------------------------------------

    @property
    def bulk(self) -> BulkParams:
        m = self["model"]
        try:
            return BulkParams(m["a"], m["b"], m["c"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def elastic(self) -> ElasticParams:
        m = self["model"]
        try:
            return ElasticParams(m["L1"], m["L2"], m["L3"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def grid(self) -> PeriodicGrid:
        g = self["grid"]
        try:
            return PeriodicGrid(g["n"], g["n"], g["L"], g["L"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def solver(self) -> dy.SolverConfig:
        m = self["model"]
        try:
            return dy.SolverConfig(
                eps=m["eps"],
                bulk=self.bulk,
                elastic=self.elastic,
                xi=m["xi"],
                Gamma=m["Gamma"],
                nu=m["nu"],
                dt=self["time"]["dt"],
                shear_forcing=m["forcing"],
                forcing_mode=m["forcing_mode"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def validate(self) -> None:
        t, o = self["time"], self["output"]
        if not (t["t_end"] is not None and t["t_end"] > 0):
            raise ConfigError("[time] t_end must be positive")
        if t["observer_every"] < 1:
            raise ConfigError("[time] observer_every must be >= 1")
        if o["snapshot_every"] < 0:
            raise ConfigError("[output] snapshot_every must be >= 0")
        if o["snapshot_every"] and o["snapshot_every"] % t["observer_every"]:
            raise ConfigError("[output] snapshot_every must be a multiple of [time] observer_every")
        if self["init"]["preset"] not in PRESETS:
            raise ConfigError(f"[init] preset must be one of {PRESETS}")
        if self["init"]["preset"] == "file" and not self["init"]["file"]:
            raise ConfigError("[init] preset = file needs file = PATH")
        solver = self.solver()
        try:
            check_resolution(self.grid(), solver.eps)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def initial_state(cfg: ExperimentConfig) -> dy.FlowState:
    """Build the preset state; ``v = 0`` except for the ``isotropic`` preset."""
    init = cfg["init"]
    preset = init["preset"]
    g = cfg.grid()
    v = VelocityField.zeros(g)
    t = 0.0
    if preset in ("stripe", "disk"):
        e = cfg["model"]
        try:
            prof = solve_profile(cfg.bulk, kappa=6 * e["L1"] + e["L2"], L2=e["L2"])
        except UnequalWellsError as exc:
            raise ConfigError(str(exc)) from None
        x, y = g.coords
        if preset == "stripe":
            phi = init["half_width"] - np.abs(x - 0.5 * g.Lx)
        else:
            phi = init["radius"] - np.hypot(x - 0.5 * g.Lx, y - 0.5 * g.Ly)
        th = init["theta"]
        Q = uniaxial_field(g, prof(phi / e["eps"]), np.array([math.cos(th), math.sin(th), 0.0]))
    elif preset == "random":
        rng = np.random.default_rng(init["seed"])
        Q = QField(g, smooth_random(g, rng, amp=init["amplitude"]))
    elif preset == "isotropic":
        rng = np.random.default_rng(init["seed"])
        Q = QField.zeros(g)
        v = dy.project_divergence_free(VelocityField(g, smooth_random(g, rng, amp=init["amplitude"], comps=2)))
    else:
        from .snapshot import SnapshotError, load_snapshot

        try:
            snap = load_snapshot(Path(init["file"]))
        except (OSError, SnapshotError) as exc:
            raise ConfigError(f"cannot load snapshot {init['file']}: {exc}") from None
        if snap.grid.dims != g.dims:
            raise ConfigError(f"snapshot grid {snap.grid.dims} does not match [grid] n = {g.nx}")
        Q = QField(g, np.asarray(snap.fields["Q"], dtype=float))
        if "v" in snap.fields:
            v = VelocityField(g, np.asarray(snap.fields["v"], dtype=float))
        t = float(snap.meta.get("t", 0.0))
    return dy.FlowState(t, Q, v)
