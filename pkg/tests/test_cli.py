import json
import math

import numpy as np
import pytest

from nematic_interface import cli
from nematic_interface.config import ConfigError, ExperimentConfig, initial_state
from nematic_interface.snapshot import load_snapshot


def read_constants(path):
    return dict(line.split("=", 1) for line in path.read_text().splitlines())


def small(*extra):
    return ["--grid.n", "64", "--model.eps", "0.1", "--time.t_end", "0.005", "--time.observer_every", "5", *extra]


def test_profile_outputs(tmp_path):
    assert cli.main(["profile", "--out", str(tmp_path)]) == 0
    const = read_constants(tmp_path / "constants.txt")
    assert float(const["sigma"]) == pytest.approx(1 / (9 * math.sqrt(3)), abs=1e-7)
    assert float(const["alpha"]) == pytest.approx(0.0641500, abs=1e-7)
    head = (tmp_path / "profile.csv").read_text().splitlines()
    assert head[0] == "z,s,s_prime"
    z, s, _ = map(float, head[len(head) // 2].split(","))
    assert s == pytest.approx(1 / (1 + math.exp(-z / math.sqrt(3))), abs=1e-6)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert {"config_sha256", "code_version", "seed"} <= set(man)


def test_profile_negative_l2(tmp_path):
    assert cli.main(["profile", "--L2", "-0.5", "--out", str(tmp_path)]) == 0
    const = read_constants(tmp_path / "constants.txt")
    assert float(const["beta"]) < 0 and const["beta_sign"] == "negative"


def test_profile_unequal_wells(tmp_path, capsys):
    assert cli.main(["profile", "--b", "2", "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "b^2/(27ac) = 0.444444" in capsys.readouterr().err


def test_bulk_and_coeffs(capsys):
    assert cli.main(["bulk"]) == 0
    out = capsys.readouterr().out
    assert "s1=1.0 (stable)" in out and "s2=0.5 (unstable)" in out
    assert cli.main(["coeffs", "--xi", "0"]) == 0
    vals = read_lines(capsys.readouterr().out)
    assert [float(vals[f"k{i}"]) for i in range(1, 5)] == [2.0, 2.0, 2.0, 0.0]
    assert [float(vals[f"alpha{i}"]) for i in range(1, 7)] == [0.0, -1.0, 1.0, 1.0, 0.0, 0.0]


def read_lines(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


def test_flow_series_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["flow", "--out", str(a), "--seed", "3", *small()]) == 0
    assert cli.main(["flow", "--out", str(b), "--seed", "3", *small()]) == 0
    sa = (a / "series.csv").read_bytes()
    assert sa == (b / "series.csv").read_bytes()
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()
    rows = sa.decode().splitlines()
    assert rows[0] == "t,energy_free,radius"
    e = np.array([float(r.split(",")[1]) for r in rows[1:]])
    assert np.all(np.diff(e) <= 0)
    R = np.array([float(r.split(",")[2]) for r in rows[1:]])
    t = np.array([float(r.split(",")[0]) for r in rows[1:]])
    # radius shrinks roughly like the circle law at this coarse eps
    assert R[-1] < R[0] and R[-1] ** 2 == pytest.approx(R[0] ** 2 - 2 * t[-1], rel=0.05)


def test_hydro_isotropic_preset_decays(tmp_path):
    assert cli.main(["hydro", "--out", str(tmp_path), "--init.preset", "isotropic", *small()]) == 0
    rows = (tmp_path / "series.csv").read_text().splitlines()
    assert rows[0] == "t,energy_free,energy_kinetic,div_max"
    ke = np.array([float(r.split(",")[2]) for r in rows[1:]])
    assert np.all(np.diff(ke) < 0)


def test_hydro_disk_records_pressure_jump(tmp_path):
    assert cli.main(["hydro", "--out", str(tmp_path), *small("--time.t_end", "0.001")]) == 0
    rows = (tmp_path / "series.csv").read_text().splitlines()
    assert rows[0] == "t,energy_free,energy_kinetic,div_max,radius,pressure_jump"
    last = dict(zip(rows[0].split(","), map(float, rows[-1].split(","))))
    # positive on the nematic side, near sigma / (eps R)
    assert last["pressure_jump"] > 0


def test_snapshots_and_file_preset(tmp_path):
    run = tmp_path / "run"
    assert cli.main(["flow", "--out", str(run), "--output.snapshot_every", "10", *small("--time.t_end", "0.02")]) == 0
    snaps = sorted(run.glob("snap_*.snap"))
    assert [p.name for p in snaps] == ["snap_0000010.snap", "snap_0000020.snap", "snap_0000030.snap"]
    assert load_snapshot(snaps[0]).meta["t"] == pytest.approx(0.005)
    final = load_snapshot(run / "final.snap")
    assert final.meta["t"] == pytest.approx(0.02)
    rows = (run / "series.csv").read_text().splitlines()[1:]
    t = [float(r.split(",")[0]) for r in rows]
    assert t == pytest.approx(np.linspace(0, 0.02, 9))
    resumed = tmp_path / "resumed"
    args = ["flow", "--out", str(resumed), "--init.preset", "file", "--init.file", str(run / "final.snap"), *small("--time.t_end", "0.021")]
    assert cli.main(args) == 0
    rows = (resumed / "series.csv").read_text().splitlines()
    assert float(rows[1].split(",")[0]) == pytest.approx(0.02)


def test_config_errors(tmp_path, capsys):
    assert cli.main(["flow", "--model.bogus", "1"]) == cli.EXIT_CONFIG
    assert cli.main(["flow", "--grid.n", "32"]) == cli.EXIT_CONFIG  # eps unresolved
    assert cli.main(["flow", "--model.eps", "-1"]) == cli.EXIT_CONFIG
    assert cli.main(["flow", "--init.preset", "nope", *small()]) == cli.EXIT_CONFIG
    assert cli.main(["verify", "--only", "nope"]) == cli.EXIT_CONFIG
    bad = tmp_path / "bad.ini"
    bad.write_text("[model]\neps = 0.1\nfoo = 2\n")
    assert cli.main(["flow", "--config", str(bad)]) == cli.EXIT_CONFIG
    assert "foo" in capsys.readouterr().err


def test_config_file_and_overrides(tmp_path):
    f = tmp_path / "run.ini"
    f.write_text("[model]\neps = 0.05  ; layer width\nGamma = 2\n[grid]\nn = 128\n[init]\npreset = stripe\ntheta = 0.4\n")
    cfg = ExperimentConfig.from_file(f)
    cfg.apply_overrides([("model.xi", "0.5")])
    assert cfg["model"]["eps"] == 0.05 and cfg["model"]["Gamma"] == 2.0 and cfg["model"]["xi"] == 0.5
    cfg.validate()
    st = initial_state(cfg)
    assert st.Q.data.shape == (5, 128, 128)
    assert cfg.solver().dt == pytest.approx(0.05 * 0.05**2)
    other = ExperimentConfig.from_file(f)
    assert other.digest() != cfg.digest()
    other.set("model", "xi", 0.5)
    assert other.digest() == cfg.digest()
    with pytest.raises(ConfigError):
        cfg.set("grid", "n", "12.5")


def test_random_preset_amplitude_and_seed():
    cfg = ExperimentConfig()
    cfg.apply_overrides([("init.preset", "random"), ("grid.n", "64"), ("model.eps", "0.1"), ("init.seed", "4")])
    a = initial_state(cfg).Q.data
    assert np.max(np.abs(a)) == pytest.approx(0.1)
    assert np.array_equal(a, initial_state(cfg).Q.data)
    cfg.set("init", "seed", 5)
    assert not np.array_equal(a, initial_state(cfg).Q.data)


def test_divergence_exits_3(tmp_path, monkeypatch):
    from nematic_interface import dynamics as dy

    def boom(*a, **k):
        raise dy.DivergenceError("non-finite values at step 7", 7)

    monkeypatch.setattr(dy, "run", boom)
    assert cli.main(["flow", "--out", str(tmp_path), *small()]) == cli.EXIT_DIVERGED
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "failed" and "step 7" in man["error"]
