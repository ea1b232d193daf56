import json
import os
from pathlib import Path

import pytest
import yaml

from arcsim.cli import (
    execute_run,
    expand_sweep,
    load_config,
    main,
    preset_files,
    resolve_out_dir,
)
from arcsim.dynamics import ConfigError
from arcsim.functionals import CSV_COLUMNS


def tiny_config(**overrides):
    cfg = {
        "name": "tiny",
        "seed": 7,
        "grid": {"R": 1.0, "N": 16},
        "params": {"form": "transformed", "a": 1.0, "b": 0.5, "c": 1.0,
                   "d": 0.5},
        "initial": {
            "kind": "profiles",
            "w": {"kind": "constant", "value": 2.0},
            "z": {"kind": "gaussian", "amplitude": 0.2, "sigma": 0.4},
            "v": {"kind": "constant", "value": 0.1},
        },
        "sim": {"t_end": 0.005, "output_stride": 10},
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


# ---------------------------------------------------------------------------
# config loading
# ---------------------------------------------------------------------------

def test_load_config_from_file(tmp_path):
    path = write_config(tmp_path, tiny_config())
    cfg = load_config(str(path))
    assert cfg["name"] == "tiny"
    assert cfg["grid"]["N"] == 16


def test_load_config_resolves_presets():
    names = set(preset_files())
    assert {"blowup-attraction", "repulsion", "beta-eq-delta"} <= names
    cfg = load_config("blowup-attraction")
    assert cfg["name"] == "blowup-attraction"
    # the .yaml suffix is accepted too
    cfg2 = load_config("blowup-attraction.yaml")
    assert cfg2["name"] == cfg["name"]


def test_load_config_unknown_source():
    with pytest.raises(ConfigError, match="known presets"):
        load_config("no-such-thing")


def test_load_config_rejects_unknown_top_key(tmp_path):
    path = write_config(tmp_path, tiny_config(extra_knob=1))
    with pytest.raises(ConfigError, match="unknown keys"):
        load_config(str(path))


def test_load_config_defaults_name_to_stem(tmp_path):
    cfg = tiny_config()
    del cfg["name"]
    path = write_config(tmp_path, cfg, name="myscenario.yaml")
    assert load_config(str(path))["name"] == "myscenario"


# ---------------------------------------------------------------------------
# out-dir resolution
# ---------------------------------------------------------------------------

def test_resolve_out_dir_precedence(monkeypatch):
    cfg = {"out_dir": "/from/config"}
    monkeypatch.setenv("ARCSIM_OUT_DIR", "/from/env")
    assert resolve_out_dir("/from/flag", cfg, "nm") == Path("/from/flag")
    assert resolve_out_dir(None, cfg, "nm") == Path("/from/env")
    monkeypatch.delenv("ARCSIM_OUT_DIR")
    assert resolve_out_dir(None, cfg, "nm") == Path("/from/config")
    assert resolve_out_dir(None, {}, "nm") == Path("arcsim-out") / "nm"


def test_env_out_dir_is_honoured_end_to_end(tmp_path, monkeypatch):
    path = write_config(tmp_path, tiny_config())
    target = tmp_path / "via-env"
    monkeypatch.setenv("ARCSIM_OUT_DIR", str(target))
    assert main(["run", str(path)]) == 0
    assert (target / "summary.json").exists()
    assert (target / "diagnostics.csv").exists()


# ---------------------------------------------------------------------------
# run command
# ---------------------------------------------------------------------------

def test_run_writes_artifacts(tmp_path, capsys):
    path = write_config(tmp_path, tiny_config())
    out = tmp_path / "out"
    assert main(["run", str(path), "--out-dir", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "tiny" in printed and "reached_horizon" in printed

    csv_lines = (out / "diagnostics.csv").read_text().splitlines()
    assert csv_lines[0] == ",".join(CSV_COLUMNS)
    assert len(csv_lines) >= 3

    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema"]["summary"] == 1
    assert summary["schema"]["columns"] == list(CSV_COLUMNS)
    assert summary["status"] == "reached_horizon"
    assert summary["detection"] is None
    assert summary["backend"] in ("numba", "numpy")
    assert summary["seed"] == 7
    assert summary["mass_drift_rel"] <= 1e-12
    assert summary["monotone_F"] in (True, False)
    assert summary["config"]["seed"] == 7
    assert summary["grid"] == {"R": 1.0, "n": 3, "N": 16, "h": 1.0 / 16}


def test_run_is_deterministic(tmp_path):
    path = write_config(tmp_path, tiny_config())
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(path), "--out-dir", str(out1)]) == 0
    assert main(["run", str(path), "--out-dir", str(out2)]) == 0
    assert (out1 / "diagnostics.csv").read_bytes() == \
        (out2 / "diagnostics.csv").read_bytes()
    s1 = json.loads((out1 / "summary.json").read_text())
    s2 = json.loads((out2 / "summary.json").read_text())
    s1.pop("wall_time_s"), s2.pop("wall_time_s")
    assert s1 == s2


def test_run_summary_config_echo_replays(tmp_path):
    path = write_config(tmp_path, tiny_config())
    out1 = tmp_path / "first"
    assert main(["run", str(path), "--out-dir", str(out1)]) == 0
    echo = json.loads((out1 / "summary.json").read_text())["config"]
    replay = write_config(tmp_path, echo, name="replay.yaml")
    out2 = tmp_path / "second"
    assert main(["run", str(replay), "--out-dir", str(out2)]) == 0
    assert (out1 / "diagnostics.csv").read_bytes() == \
        (out2 / "diagnostics.csv").read_bytes()


def test_run_seed_override(tmp_path):
    cfg = tiny_config()
    cfg["initial"] = {
        "kind": "sample",
        "sample": {"mass": 10.0, "z_l1_bound": 5.0,
                   "envelope_amplitude": 2.0, "envelope_exponent": 1.5},
    }
    cfg["grid"] = {"R": 1.0, "N": 64}
    cfg["sim"] = {"t_end": 0.001, "output_stride": 50}
    path = write_config(tmp_path, cfg)
    out1, out2 = tmp_path / "s7", tmp_path / "s123"
    assert main(["run", str(path), "--out-dir", str(out1)]) == 0
    assert main(["run", str(path), "--out-dir", str(out2),
                 "--seed", "123"]) == 0
    s1 = json.loads((out1 / "summary.json").read_text())
    s2 = json.loads((out2 / "summary.json").read_text())
    assert s1["seed"] == 7 and s2["seed"] == 123
    assert (out1 / "diagnostics.csv").read_bytes() != \
        (out2 / "diagnostics.csv").read_bytes()


def test_run_with_admissibility_monitor(tmp_path):
    cfg = tiny_config()
    cfg["initial"] = {
        "kind": "sample",
        "sample": {"mass": 10.0, "z_l1_bound": 5.0,
                   "envelope_amplitude": 2.0, "envelope_exponent": 1.5},
    }
    cfg["grid"] = {"R": 1.0, "N": 64}
    cfg["sim"] = {"t_end": 0.001, "output_stride": 50}
    cfg["monitors"] = {"p": 1.25, "kappa": 1.5,
                       "admissible": {"mass": 10.0, "z_l1_bound": 5.0,
                                      "envelope_amplitude": 2.0,
                                      "envelope_exponent": 1.5}}
    out = tmp_path / "out"
    summary = execute_run(load_config(str(write_config(tmp_path, cfg))),
                          out, None)
    assert summary["admissibility"]["passed"] is True
    ratio = summary["concentration_ratio_initial"]
    assert ratio is not None and ratio >= 0.0


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------

def test_exit_code_config_error(tmp_path, capsys):
    path = write_config(tmp_path, tiny_config(extra_knob=1))
    assert main(["run", str(path)]) == 1
    assert "config error" in capsys.readouterr().err
    assert main(["run", "no-such-preset"]) == 1
    assert main(["run", str(path), "--workers", "0"]) == 1


def test_exit_code_io_error(tmp_path, capsys):
    blocker = tmp_path / "blocker"
    blocker.write_text("a file, not a directory")
    path = write_config(tmp_path, tiny_config())
    code = main(["run", str(path), "--out-dir", str(blocker / "nested")])
    assert code == 2
    assert "i/o error" in capsys.readouterr().err


def test_exit_code_solver_stall(tmp_path, capsys):
    cfg = tiny_config()
    cfg["grid"] = {"R": 1.0, "N": 64}
    # a near-discontinuous signal pins the CFL step below dt_min immediately
    cfg["initial"]["z"] = {"kind": "gaussian", "amplitude": 1.0e4,
                           "sigma": 0.1}
    cfg["sim"] = {"t_end": 1.0, "dt_init": 1.0e-3, "dt_min": 1.0e-3,
                  "dt_max": 1.0e-2}
    path = write_config(tmp_path, cfg)
    assert main(["run", str(path), "--out-dir", str(tmp_path / "o")]) == 3
    assert "solver error" in capsys.readouterr().err


def test_argparse_errors_become_config_errors(capsys):
    assert main(["run"]) == 1  # missing config argument
    assert main(["frobnicate"]) == 1
    capsys.readouterr()


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def test_presets_list(capsys):
    assert main(["presets", "list"]) == 0
    out = capsys.readouterr().out
    for name in ("blowup-attraction", "repulsion", "beta-eq-delta"):
        assert name in out


def test_presets_parse_and_validate():
    for name in preset_files():
        cfg = load_config(name)
        assert cfg["name"] == name
        assert "sim" in cfg and "params" in cfg and "initial" in cfg


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def test_expand_sweep_cartesian():
    cfg = tiny_config(sweep={"sim.t_end": [0.001, 0.002],
                             "params.b": [0.0, 0.5, 1.0]})
    points = expand_sweep(cfg)
    assert len(points) == 6
    seen = {(p["_overrides"]["params.b"], p["_overrides"]["sim.t_end"])
            for p in points}
    assert len(seen) == 6
    for p in points:
        assert p["sim"]["t_end"] == p["_overrides"]["sim.t_end"]
        assert p["params"]["b"] == p["_overrides"]["params.b"]
        assert "sweep" not in p


def test_expand_sweep_validation():
    with pytest.raises(ConfigError):
        expand_sweep(tiny_config(sweep={}))
    with pytest.raises(ConfigError):
        expand_sweep(tiny_config(sweep={"sim.t_end": 0.5}))
    with pytest.raises(ConfigError):
        expand_sweep(tiny_config(sweep={"sim.t_end": []}))


def test_sweep_command_writes_index(tmp_path):
    cfg = tiny_config(sweep={"params.b": [0.0, 0.5]})
    path = write_config(tmp_path, cfg)
    out = tmp_path / "sweepout"
    assert main(["sweep", str(path), "--out-dir", str(out),
                 "--workers", "1"]) == 0
    index = json.loads((out / "index.json").read_text())
    assert index["n_points"] == 2
    assert [p["dir"] for p in index["points"]] == ["point_0000", "point_0001"]
    for i, entry in enumerate(index["points"]):
        assert entry["status"] == "reached_horizon"
        point_dir = out / entry["dir"]
        assert (point_dir / "summary.json").exists()
        assert (point_dir / "diagnostics.csv").exists()
        sub = json.loads((point_dir / "summary.json").read_text())
        assert sub["config"]["params"]["b"] == [0.0, 0.5][i]


def test_sweep_parallel_matches_serial(tmp_path):
    cfg = tiny_config(sweep={"params.b": [0.0, 0.25, 0.5]})
    path = write_config(tmp_path, cfg)
    out1, out2 = tmp_path / "serial", tmp_path / "parallel"
    assert main(["sweep", str(path), "--out-dir", str(out1),
                 "--workers", "1"]) == 0
    assert main(["sweep", str(path), "--out-dir", str(out2),
                 "--workers", "2"]) == 0
    for i in range(3):
        a = (out1 / f"point_{i:04d}" / "diagnostics.csv").read_bytes()
        b = (out2 / f"point_{i:04d}" / "diagnostics.csv").read_bytes()
        assert a == b
    i1 = json.loads((out1 / "index.json").read_text())
    i2 = json.loads((out2 / "index.json").read_text())
    assert i1 == i2


def test_seed_sweep_of_sampled_pairs(tmp_path):
    cfg = tiny_config(sweep={"seed": [0, 1, 2]})
    cfg["initial"] = {
        "kind": "sample",
        "sample": {"mass": 10.0, "z_l1_bound": 5.0,
                   "envelope_amplitude": 2.0, "envelope_exponent": 1.5},
    }
    cfg["grid"] = {"R": 1.0, "N": 64}
    cfg["sim"] = {"t_end": 0.0005, "output_stride": 50}
    path = write_config(tmp_path, cfg)
    out = tmp_path / "seedsweep"
    assert main(["sweep", str(path), "--out-dir", str(out),
                 "--workers", "1"]) == 0
    index = json.loads((out / "index.json").read_text())
    assert index["n_points"] == 3
    ratios = []
    for entry in index["points"]:
        sub = json.loads((out / entry["dir"] / "summary.json").read_text())
        ratio = sub["concentration_ratio_initial"]
        assert ratio is not None and ratio >= 0.0
        ratios.append(ratio)
    assert len(set(ratios)) == 3  # different seeds, different pairs
