"""Scenario runner: configs, presets, parallel sweeps, CSV/JSON artifacts.

Config dialect (YAML, one mapping per file; see the README for a fully
annotated example):

    name: my-run            # optional, defaults to the file stem
    description: ...        # optional, shown by `arcsim presets list`
    seed: 0                 # optional, used by sampled initial data
    out_dir: path           # optional, see resolution order below
    grid:    {R: 1.0, n: 3, N: 256}
    params:  {form: original, chi: 2, xi: 1, alpha: 3, beta: 1, gamma: 1, delta: 4}
             # or {form: transformed, a: 4, b: 6, c: 1, d: 0.6}
    initial: {kind: profiles | family | sample, ...}
    sim:     {t_end: 1.0, ...}          # mirrors SimConfig fields
    monitors: {p: 1.25, kappa: 1.5, admissible: {...}}   # optional
    sweep:   {dotted.key: [values, ...], ...}            # sweep command only

Output directory resolution: --out-dir flag, then the ARCSIM_OUT_DIR
environment variable, then the config's out_dir, then ./arcsim-out/<name>.

Exit codes: 0 for a completed run (reaching the horizon and detecting
blow-up both count), 1 for configuration errors, 2 for I/O errors, 3 when
the solver stalls or fails.
"""

from __future__ import annotations

import argparse
import copy
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as _dist_version
from pathlib import Path

import yaml

from . import initdata, kernels
from .dynamics import (
    ConfigError,
    RunOutcome,
    SimConfig,
    SolverFailure,
    SolverStalled,
    run,
)
from .functionals import (
    CSV_COLUMNS,
    AdmissibleSet,
    ConcentrationTerms,
    DiagnosticsRecord,
    admissibility_report,
    concentration_ratio,
    monotone_energy,
    superlinear_exponent,
)
from .geometry import RadialGrid
from .model import (
    OriginalParams,
    OriginalState,
    Regime,
    TransformedParams,
    TransformedState,
    classify,
    transform_state,
)

try:
    VERSION = _dist_version("arcsim")
except PackageNotFoundError:  # running from a source tree without install
    VERSION = "0+unknown"

SUMMARY_SCHEMA = 1
CSV_SCHEMA = 1

_TOP_KEYS = {"name", "description", "seed", "out_dir", "grid", "params",
             "initial", "sim", "monitors", "sweep"}
_SIM_KEYS = {"t_end", "dt_init", "dt_min", "dt_max", "cfl_safety",
             "blowup_supnorm_threshold", "advection_scheme", "output_stride",
             "diffusion_only"}
_FAMILY_KEYS = {"mass", "k", "base_w", "base_z", "lambda_exponent",
                "mixing", "eps0", "eps_exponent"}
_SAMPLE_KEYS = {"mass", "z_l1_bound", "envelope_amplitude", "envelope_exponent"}


# ---------------------------------------------------------------------------
# config loading and validation
# ---------------------------------------------------------------------------

def _as_mapping(obj, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a mapping, got {type(obj).__name__}")
    return obj


def _check_keys(d: dict, allowed: set, where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}; "
                          f"allowed: {sorted(allowed)}")


def preset_files() -> dict[str, Path]:
    """Packaged preset configs, keyed by name (file stem)."""
    root = resources.files("arcsim") / "presets"
    out = {}
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".yaml"):
            out[entry.name[: -len(".yaml")]] = Path(str(entry))
    return out


def load_config(source: str) -> dict:
    """Parse a config from a file path or a packaged preset name."""
    path = Path(source)
    if not path.exists():
        presets = preset_files()
        name = source[: -len(".yaml")] if source.endswith(".yaml") else source
        if name not in presets:
            raise ConfigError(
                f"{source!r} is neither a config file nor a preset; "
                f"known presets: {sorted(presets)}")
        path = presets[name]
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse {path}: {exc}") from exc
    cfg = _as_mapping(raw, f"config {path}")
    _check_keys(cfg, _TOP_KEYS, "config")
    cfg.setdefault("name", path.stem)
    return cfg


def _build_params(cfg: dict):
    section = _as_mapping(cfg.get("params"), "params")
    form = section.get("form")
    fields = {k: v for k, v in section.items() if k != "form"}
    try:
        if form == "original":
            _check_keys(fields, {"chi", "xi", "alpha", "beta", "gamma", "delta"},
                        "params")
            return OriginalParams(**{k: float(v) for k, v in fields.items()})
        if form == "transformed":
            _check_keys(fields, {"a", "b", "c", "d"}, "params")
            return TransformedParams(**{k: float(v) for k, v in fields.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid params: {exc}") from exc
    raise ConfigError(f"params.form must be 'original' or 'transformed', got {form!r}")


def _build_grid(cfg: dict) -> RadialGrid:
    section = _as_mapping(cfg.get("grid"), "grid")
    _check_keys(section, {"R", "n", "N"}, "grid")
    if "N" not in section:
        raise ConfigError("grid.N is required")
    try:
        return RadialGrid.make(R=float(section.get("R", 1.0)),
                               n=int(section.get("n", 3)),
                               N=int(section["N"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc


def _profile(grid: RadialGrid, spec, where: str):
    try:
        return initdata.profile(grid, _as_mapping(spec, where))
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid profile {where}: {exc}") from exc


def _build_state(cfg: dict, grid: RadialGrid, params, seed: int):
    section = _as_mapping(cfg.get("initial"), "initial")
    kind = section.get("kind")
    transformed = isinstance(params, TransformedParams)
    try:
        if kind == "profiles":
            if transformed:
                _check_keys(section, {"kind", "w", "z", "v"}, "initial")
                return TransformedState(
                    w=_profile(grid, section.get("w"), "initial.w"),
                    z=_profile(grid, section.get("z"), "initial.z"),
                    v=_profile(grid, section.get("v"), "initial.v"),
                ).validate(grid)
            _check_keys(section, {"kind", "u", "v1", "v2"}, "initial")
            return OriginalState(
                u=_profile(grid, section.get("u"), "initial.u"),
                v1=_profile(grid, section.get("v1"), "initial.v1"),
                v2=_profile(grid, section.get("v2"), "initial.v2"),
            ).validate(grid)
        if kind == "family":
            fam_cfg = dict(_as_mapping(section.get("family"), "initial.family"))
            _check_keys(fam_cfg, _FAMILY_KEYS, "initial.family")
            for key in ("mass", "lambda_exponent", "eps0", "eps_exponent"):
                if key in fam_cfg:
                    fam_cfg[key] = float(fam_cfg[key])
            if "k" in fam_cfg:
                fam_cfg["k"] = int(fam_cfg["k"])
            spec = initdata.FamilySpec(**fam_cfg)
            if transformed:
                _check_keys(section, {"kind", "family", "v"}, "initial")
                w, z = initdata.concentration_family(grid, spec)
                v = _profile(grid, section.get("v", {"kind": "constant", "value": 0.0}),
                             "initial.v")
                return TransformedState(w=w, z=z, v=v).validate(grid)
            _check_keys(section, {"kind", "family", "v2_base"}, "initial")
            v2_base = section.get("v2_base", {"kind": "constant", "value": 0.0})
            return initdata.original_family_data(
                grid, spec, params, _as_mapping(v2_base, "initial.v2_base")
            ).validate(grid)
        if kind == "sample":
            if not transformed:
                raise ConfigError(
                    "initial.kind 'sample' draws combined-drift pairs and "
                    "requires params.form 'transformed'")
            _check_keys(section, {"kind", "sample", "v"}, "initial")
            sample_cfg = _as_mapping(section.get("sample"), "initial.sample")
            _check_keys(sample_cfg, _SAMPLE_KEYS, "initial.sample")
            spec = AdmissibleSet(**{k: float(v) for k, v in sample_cfg.items()})
            w, z = initdata.sample_admissible(grid, spec, seed)
            v = _profile(grid, section.get("v", {"kind": "constant", "value": 0.0}),
                         "initial.v")
            return TransformedState(w=w, z=z, v=v).validate(grid)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid initial data: {exc}") from exc
    raise ConfigError(
        f"initial.kind must be 'profiles', 'family' or 'sample', got {kind!r}")


def _build_sim(cfg: dict, monitors_cfg: dict) -> SimConfig:
    section = _as_mapping(cfg.get("sim"), "sim")
    _check_keys(section, _SIM_KEYS, "sim")
    if "t_end" not in section:
        raise ConfigError("sim.t_end is required")
    kwargs = dict(section)
    # values like 1.0e6 without an exponent sign arrive as strings from yaml
    for key in ("t_end", "dt_init", "dt_min", "dt_max", "cfl_safety",
                "blowup_supnorm_threshold"):
        if key in kwargs:
            kwargs[key] = float(kwargs[key])
    if "output_stride" in kwargs:
        kwargs["output_stride"] = int(kwargs["output_stride"])
    if "diffusion_only" in kwargs:
        kwargs["diffusion_only"] = bool(kwargs["diffusion_only"])
    try:
        return SimConfig(**kwargs,
                         monitor_p=float(monitors_cfg.get("p", 1.25)),
                         monitor_kappa=float(monitors_cfg.get("kappa", 1.5)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid sim section: {exc}") from exc


def _build_admissible(monitors_cfg: dict) -> AdmissibleSet | None:
    spec = monitors_cfg.get("admissible")
    if spec is None:
        return None
    spec = _as_mapping(spec, "monitors.admissible")
    _check_keys(spec, _SAMPLE_KEYS, "monitors.admissible")
    try:
        return AdmissibleSet(**{k: float(v) for k, v in spec.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid monitors.admissible: {exc}") from exc


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def _fmt17(x: float) -> str:
    return format(float(x), ".17g")


def write_diagnostics_csv(path: Path, records: list[DiagnosticsRecord]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in records:
            fh.write(",".join(_fmt17(getattr(rec, col)) for col in CSV_COLUMNS))
            fh.write("\n")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _record_ratio(rec: DiagnosticsRecord, kappa: float, n: int) -> float | None:
    if math.isnan(rec.wz_l1):
        return None
    try:
        theta = superlinear_exponent(kappa, n)
    except ValueError:
        return None
    terms = ConcentrationTerms(wz_l1=rec.wz_l1, defect_l2=rec.defect_l2,
                               flux_l2=rec.flux_l2)
    return concentration_ratio(terms, theta)


def _summarize(cfg: dict, grid: RadialGrid, params, state, sim: SimConfig,
               admissible: AdmissibleSet | None, outcome: RunOutcome,
               seed: int, wall_time_s: float) -> dict:
    first, last = outcome.records[0], outcome.records[-1]
    report = None
    if admissible is not None:
        pair = None
        if isinstance(state, TransformedState):
            pair = (state.w, state.z)
        elif classify(params) is Regime.ATTRACTION_DOMINATED:
            tr = transform_state(state, params)
            pair = (tr.w, tr.z)
        if pair is not None:
            rep = admissibility_report(grid, pair[0], pair[1], admissible)
            report = {
                "mass": rep.mass, "mass_error": rep.mass_error,
                "w_min": rep.w_min, "z_l1": rep.z_l1, "envelope": rep.envelope,
                "ok_mass": rep.ok_mass, "ok_positive": rep.ok_positive,
                "ok_z_l1": rep.ok_z_l1, "ok_envelope": rep.ok_envelope,
                "passed": rep.passed,
            }
    echo = {k: v for k, v in cfg.items() if k != "sweep"}
    echo["seed"] = seed
    return _json_safe({
        "schema": {"summary": SUMMARY_SCHEMA, "diagnostics_csv": CSV_SCHEMA,
                   "columns": list(CSV_COLUMNS)},
        "name": cfg.get("name"),
        "version": VERSION,
        "backend": "numba" if kernels.NUMBA_ENABLED else "numpy",
        "seed": seed,
        "status": outcome.status.value,
        "detection": outcome.detection,
        "t_final": outcome.t_final,
        "supnorm_final": outcome.supnorm_final,
        "n_accepted": outcome.n_accepted,
        "n_rejected": outcome.n_rejected,
        "mass_initial": outcome.mass_initial,
        "mass_drift_rel": outcome.mass_drift_rel,
        "monotone_F": monotone_energy(outcome.records),
        "final_monitors": {
            "z_l1": last.z_l1, "grad_z_lp": last.grad_z_lp,
            "decay_envelope": last.decay_envelope, "v_l2": last.v_l2,
        },
        "concentration_ratio_initial": _record_ratio(first, sim.monitor_kappa, grid.n),
        "concentration_ratio_final": _record_ratio(last, sim.monitor_kappa, grid.n),
        "admissibility": report,
        "grid": {"R": grid.R, "n": grid.n, "N": grid.N, "h": grid.h},
        "wall_time_s": wall_time_s,
        "config": echo,
    })


def execute_run(cfg: dict, out_dir: Path, seed_override: int | None) -> dict:
    """Build the scenario from cfg, run it, and write the artifacts."""
    seed = int(seed_override if seed_override is not None else cfg.get("seed", 0))
    monitors_cfg = _as_mapping(cfg.get("monitors", {}), "monitors")
    _check_keys(monitors_cfg, {"p", "kappa", "admissible"}, "monitors")
    grid = _build_grid(cfg)
    params = _build_params(cfg)
    sim = _build_sim(cfg, monitors_cfg)
    state = _build_state(cfg, grid, params, seed)
    admissible = _build_admissible(monitors_cfg)

    start = time.perf_counter()
    outcome = run(grid, state, params, sim)
    wall = time.perf_counter() - start

    out_dir.mkdir(parents=True, exist_ok=True)
    write_diagnostics_csv(out_dir / "diagnostics.csv", outcome.records)
    summary = _summarize(cfg, grid, params, state, sim, admissible, outcome,
                         seed, wall)
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def _apply_override(cfg: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = cfg
    for part in parts[:-1]:
        nxt = node.get(part)
        if nxt is None:
            nxt = {}
            node[part] = nxt
        node = _as_mapping(nxt, f"override path {dotted!r}")
    node[parts[-1]] = value


def expand_sweep(cfg: dict) -> list[dict]:
    """Cartesian product of the sweep axes, applied to the base config."""
    sweep = _as_mapping(cfg.get("sweep"), "sweep")
    if not sweep:
        raise ConfigError("sweep section is empty")
    keys = sorted(sweep)
    axes = []
    for key in keys:
        vals = sweep[key]
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"sweep.{key} must be a non-empty list")
        axes.append(vals)
    points = []
    for combo in itertools.product(*axes):
        point = copy.deepcopy({k: v for k, v in cfg.items() if k != "sweep"})
        overrides = dict(zip(keys, combo))
        for key, value in overrides.items():
            _apply_override(point, key, value)
        point["_overrides"] = overrides
        points.append(point)
    return points


def _run_point(payload) -> dict:
    point_cfg, dir_str, seed_override = payload
    overrides = point_cfg.pop("_overrides")
    summary = execute_run(point_cfg, Path(dir_str), seed_override)
    return {
        "dir": Path(dir_str).name,
        "overrides": overrides,
        "status": summary["status"],
        "detection": summary["detection"],
        "t_final": summary["t_final"],
        "supnorm_final": summary["supnorm_final"],
        "seed": summary["seed"],
    }


def execute_sweep(cfg: dict, out_dir: Path, seed_override: int | None,
                  workers: int) -> dict:
    points = expand_sweep(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    payloads = [
        (point, str(out_dir / f"point_{i:04d}"), seed_override)
        for i, point in enumerate(points)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_run_point, payloads))
    else:
        entries = [_run_point(p) for p in payloads]
    index = _json_safe({
        "name": cfg.get("name"),
        "version": VERSION,
        "n_points": len(entries),
        "sweep": cfg.get("sweep"),
        "base_config": {k: v for k, v in cfg.items() if k != "sweep"},
        "points": entries,
    })
    with open(out_dir / "index.json", "w") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return index


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def resolve_out_dir(flag: str | None, cfg: dict, default_name: str) -> Path:
    if flag:
        return Path(flag)
    env = os.environ.get("ARCSIM_OUT_DIR")
    if env:
        return Path(env)
    if cfg.get("out_dir"):
        return Path(str(cfg["out_dir"]))
    return Path("arcsim-out") / default_name


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; 2 is reserved for I/O here
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="arcsim",
                     description="finite-volume chemotaxis blow-up toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes for sweeps "
                            "(default: available parallelism)")
        p.add_argument("--out-dir", default=None,
                       help="output directory (overrides ARCSIM_OUT_DIR "
                            "and the config)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")

    p_run = sub.add_parser("run", help="execute one scenario")
    p_run.add_argument("config", help="config file path or preset name")
    common(p_run)

    p_sweep = sub.add_parser("sweep", help="execute a sweep over config axes")
    p_sweep.add_argument("config", help="config file path or preset name")
    common(p_sweep)

    p_presets = sub.add_parser("presets", help="inspect packaged presets")
    sub_presets = p_presets.add_subparsers(dest="presets_command", required=True)
    sub_presets.add_parser("list", help="list packaged preset names")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "presets":
            for name, path in preset_files().items():
                cfg = yaml.safe_load(path.read_text())
                desc = (cfg or {}).get("description", "")
                print(f"{name:24s} {desc}")
            return 0

        cfg = load_config(args.config)
        workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
        if workers < 1:
            raise ConfigError(f"--workers must be >= 1, got {workers}")
        out_dir = resolve_out_dir(args.out_dir, cfg, str(cfg.get("name")))
        if args.command == "run":
            summary = execute_run(cfg, out_dir, args.seed)
            print(f"{summary['name']}: {summary['status']}"
                  f" t_final={summary['t_final']:.6g}"
                  f" sup={summary['supnorm_final']:.6g} -> {out_dir}")
        else:
            index = execute_sweep(cfg, out_dir, args.seed, workers)
            print(f"{index['name']}: {index['n_points']} points -> {out_dir}")
        return 0
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except (SolverStalled, SolverFailure) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
