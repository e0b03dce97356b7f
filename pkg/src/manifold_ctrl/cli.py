"""Scenario runner CLI: validate a config, simulate, write CSV and JSON.

Usage:

    manifold-ctrl run <scenario|config.json> [--controller p1..p5|lee]
        [--k-e REAL] [--dt REAL] [--t-end REAL] [--out DIR] [--seed INT]
        [--extension additive|multiplicative] [--disturb] [--no-meta]
        [--json] [--batch]
    manifold-ctrl list [--json]

Configs are JSON documents (see :data:`CONFIG_SCHEMA`); command-line flags
override config fields. The environment variable ``MANIFOLD_CTRL_OUT``
overrides the default output directory ``./out``; ``--out`` beats both.

Exit codes: 0 success, 2 config parse/validation failure, 3 invalid gains,
4 simulation diverged, 5 I/O failure.

Per-scenario CSV columns (fixed):

    rigid scenarios:  t, err_R, err_Omega, ortho_residual, V_tilde, u1, u2, u3
    quad scenarios:   t, err_R, err_Omega, err_x, err_xdot, f,
                      ortho_residual, q, u1, u2, u3
    zs-decay:         t, zs_norm, V

Values are written with 17 significant digits so a round-trip through the
CSV is lossless. Apart from one suppressible metadata comment line
(``--no-meta``), rerunning the same config reproduces files byte for byte.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    BadGains,
    ConfigError,
    InvalidGains,
    ManifoldCtrlError,
    NonFiniteState,
)
from .odesim import (
    SimConfig,
    Trajectory,
    default_quad_initial,
    default_rigid_initial,
    metrics_summary,
    simulate,
)
from .quadcopter import QuadGains
from .rigid_body import VARIANTS, RigidGains

SCENARIO_NAMES = (
    "rigid-track",
    "rigid-compare-lee",
    "quad-track",
    "quad-track-disturbed",
    "zs-decay",
)

#: Published JSON schema of a scenario config. Matrix-valued gains accept a
#: scalar ``c`` (meaning ``c * I``), a list of three diagonal entries, or a
#: full 3x3 nested list.
CONFIG_SCHEMA = {
    "type": "object",
    "required": ["scenario"],
    "properties": {
        "scenario": {"enum": list(SCENARIO_NAMES)},
        "controller": {"enum": list(VARIANTS)},
        "gains": {
            "type": "object",
            "description": "per-variant fields: p1 {K_P,K_D}; p2 {K_P,K_D,K_I}; "
            "p3 {k_P,K_D}; p4 {k_P,K_D,eps}; p5/lee {k_R,k_Omega}; "
            "quad {K0,K1,K2,K3,a0,a1[,K_I,a_I,pid]}",
        },
        "k_e": {"type": "number", "exclusiveMinimum": 0},
        "g": {"type": "number", "exclusiveMinimum": 0},
        "dt": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.01},
        "t_end": {"type": "number", "exclusiveMinimum": 0},
        "record_stride": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "extension": {"enum": ["additive", "multiplicative"]},
        "disturb": {"type": "boolean"},
        "out_dir": {"type": "string"},
        "no_meta": {"type": "boolean"},
    },
}

_SCENARIO_DEFAULTS = {
    "rigid-track": {"t_end": 20.0, "controller": "p4", "description":
                    "attitude tracking from a near-maximal orientation error"},
    "rigid-compare-lee": {"t_end": 15.0, "controller": "p4", "description":
                          "linear controller vs the nonlinear comparison law"},
    "quad-track": {"t_end": 20.0, "controller": "quad", "description":
                   "quadcopter trajectory tracking with thrust extension"},
    "quad-track-disturbed": {"t_end": 20.0, "controller": "quad", "description":
                             "quadcopter tracking with a pulse disturbance on [3, 4]"},
    "zs-decay": {"t_end": 3.0, "controller": "none", "description":
                 "autonomous contraction of the symmetric error block"},
}

RIGID_CSV_COLUMNS = ("t", "err_R", "err_Omega", "ortho_residual", "V_tilde",
                     "u1", "u2", "u3")
QUAD_CSV_COLUMNS = ("t", "err_R", "err_Omega", "err_x", "err_xdot", "f",
                    "ortho_residual", "q", "u1", "u2", "u3")
ZS_CSV_COLUMNS = ("t", "zs_norm", "V")


@dataclass(frozen=True)
class ScenarioConfig:
    """Parsed and validated scenario configuration."""

    scenario: str
    controller: str
    k_e: float = 1.0
    g: float = 1.0
    dt: float = 1e-3
    t_end: float = 20.0
    record_stride: int = 10
    gains: dict | None = None
    out_dir: str | None = None
    disturb: bool = False
    no_meta: bool = False
    seed: int = 0
    extension: str = "additive"
    config_echo: dict = field(default_factory=dict)


def _as_mat3(value, name: str) -> np.ndarray:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value) * np.eye(3)
    if isinstance(value, list):
        arr = np.asarray(value, dtype=float)
        if arr.shape == (3,):
            return np.diag(arr)
        if arr.shape == (3, 3):
            return arr
    raise ConfigError(f"gain {name!r} must be a scalar, 3-list, or 3x3 list")


def _as_scalar(value, name: str) -> float:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    raise ConfigError(f"gain {name!r} must be a number")


def default_rigid_gains(variant: str) -> RigidGains:
    """Built-in gain sets for the rigid controller variants."""
    eye = np.eye(3)
    table = {
        "p1": RigidGains("p1", K_P=4 * eye, K_D=2 * eye),
        "p2": RigidGains("p2", K_P=11 * eye, K_D=6 * eye, K_I=6 * eye),
        "p3": RigidGains("p3", k_P=4.0, K_D=2 * eye),
        "p4": RigidGains("p4", k_P=4.0, K_D=2 * eye, eps=1.0),
        "p5": RigidGains("p5", k_R=4.0, k_Omega=2.0),
        "lee": RigidGains("lee", k_R=4.0, k_Omega=2.0),
    }
    try:
        return table[variant]
    except KeyError:
        raise ConfigError(f"unknown controller variant {variant!r}") from None


def default_quad_gains() -> QuadGains:
    """Built-in outer-loop gain set (poles at -2 +/- 2j and -4 +/- 2j)."""
    eye = np.eye(3)
    return QuadGains(K0=64 * eye, K1=64 * eye, K2=32 * eye, K3=8 * eye,
                     a0=20.0, a1=8.0)


def _rigid_gains_from_dict(variant: str, raw: dict) -> RigidGains:
    base = default_rigid_gains(variant)
    mats = {"K_P", "K_D", "K_I"}
    scalars = {"k_P", "k_R", "k_Omega", "eps"}
    updates = {}
    for key, value in raw.items():
        if key in mats:
            updates[key] = _as_mat3(value, key)
        elif key in scalars:
            updates[key] = _as_scalar(value, key)
        else:
            raise ConfigError(f"unknown rigid gain field {key!r}")
    return replace(base, **updates)


def _quad_gains_from_dict(raw: dict) -> QuadGains:
    base = default_quad_gains()
    mats = {"K0", "K1", "K2", "K3", "K_I"}
    scalars = {"a0", "a1", "a_I"}
    updates = {}
    for key, value in raw.items():
        if key in mats:
            updates[key] = _as_mat3(value, key)
        elif key in scalars:
            updates[key] = _as_scalar(value, key)
        elif key == "pid":
            if not isinstance(value, bool):
                raise ConfigError("gain field 'pid' must be a boolean")
            updates[key] = value
        else:
            raise ConfigError(f"unknown quad gain field {key!r}")
    return replace(base, **updates)


def parse_config(raw: dict) -> ScenarioConfig:
    """Validate a raw config mapping against the published schema."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - set(CONFIG_SCHEMA["properties"])
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    scenario = raw.get("scenario")
    if scenario not in SCENARIO_NAMES:
        raise ConfigError(
            f"scenario must be one of {list(SCENARIO_NAMES)}, got {scenario!r}"
        )
    defaults = _SCENARIO_DEFAULTS[scenario]
    controller = raw.get("controller", defaults["controller"])
    if scenario.startswith("rigid") and controller not in VARIANTS:
        raise ConfigError(f"controller must be one of {list(VARIANTS)}")

    def num(name, default, positive=True):
        value = raw.get(name, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config field {name!r} must be a number")
        if positive and not value > 0:
            raise ConfigError(f"config field {name!r} must be positive")
        return float(value)

    dt = num("dt", 1e-3)
    if dt > 1e-2:
        raise ConfigError("config field 'dt' must not exceed 1e-2")
    stride = raw.get("record_stride", 10)
    if isinstance(stride, bool) or not isinstance(stride, int) or stride < 1:
        raise ConfigError("config field 'record_stride' must be an integer >= 1")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("config field 'seed' must be an integer")
    extension = raw.get("extension", "additive")
    if extension not in ("additive", "multiplicative"):
        raise ConfigError("config field 'extension' must be additive|multiplicative")
    gains = raw.get("gains")
    if gains is not None and not isinstance(gains, dict):
        raise ConfigError("config field 'gains' must be an object")
    disturb = raw.get("disturb", scenario == "quad-track-disturbed")
    if not isinstance(disturb, bool):
        raise ConfigError("config field 'disturb' must be a boolean")
    no_meta = raw.get("no_meta", False)
    if not isinstance(no_meta, bool):
        raise ConfigError("config field 'no_meta' must be a boolean")
    out_dir = raw.get("out_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("config field 'out_dir' must be a string")

    return ScenarioConfig(
        scenario=scenario,
        controller=controller,
        k_e=num("k_e", 1.0),
        g=num("g", 1.0),
        dt=dt,
        t_end=num("t_end", defaults["t_end"]),
        record_stride=stride,
        gains=gains,
        out_dir=out_dir,
        disturb=disturb,
        no_meta=no_meta,
        seed=seed,
        extension=extension,
        config_echo=dict(raw),
    )


def zs_initial(seed: int) -> np.ndarray:
    """Deterministic random symmetric initial matrix for zs-decay runs."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3, 3))
    return 0.5 * (A + A.T)


def build_sim_configs(sc: ScenarioConfig) -> list[tuple[str, SimConfig]]:
    """Resolve a scenario config into labelled simulator configurations.

    ``rigid-compare-lee`` expands into two runs (the selected linear
    controller and the comparison law); every other scenario maps to one.
    """
    common = dict(dt=sc.dt, record_stride=sc.record_stride, k_e=sc.k_e, g=sc.g)
    if sc.scenario in ("rigid-track", "rigid-compare-lee"):
        angle = 0.99 * np.pi if sc.scenario == "rigid-track" else 0.9 * np.pi
        initial = default_rigid_initial(angle)

        def rigid_cfg(variant: str) -> SimConfig:
            gains = (
                _rigid_gains_from_dict(variant, sc.gains)
                if sc.gains is not None
                else default_rigid_gains(variant)
            )
            return SimConfig(
                scenario="rigid", t_end=sc.t_end, controller=variant,
                gains=gains, initial=initial, **common,
            )

        if sc.scenario == "rigid-track":
            return [(sc.controller, rigid_cfg(sc.controller))]
        first = sc.controller if sc.controller != "lee" else "p4"
        return [
            (first, rigid_cfg(first)),
            ("lee", SimConfig(
                scenario="rigid", t_end=sc.t_end, controller="lee",
                gains=default_rigid_gains("lee"), initial=initial, **common,
            )),
        ]
    if sc.scenario in ("quad-track", "quad-track-disturbed"):
        gains = (
            _quad_gains_from_dict(sc.gains)
            if sc.gains is not None
            else default_quad_gains()
        )
        mul = sc.extension == "multiplicative"
        return [(
            "quad",
            SimConfig(
                scenario="quad", t_end=sc.t_end, controller="quad",
                gains=gains, initial=default_quad_initial(sc.g, multiplicative=mul),
                disturb=sc.disturb, extension=sc.extension, **common,
            ),
        )]
    if sc.scenario == "zs-decay":
        return [(
            "zs",
            SimConfig(
                scenario="zs-decay", t_end=sc.t_end,
                initial=zs_initial(sc.seed), **common,
            ),
        )]
    raise ConfigError(f"unknown scenario {sc.scenario!r}")


def _csv_columns(traj: Trajectory) -> tuple[str, ...]:
    if traj.scenario == "rigid":
        return RIGID_CSV_COLUMNS
    if traj.scenario == "quad":
        return QUAD_CSV_COLUMNS
    return ZS_CSV_COLUMNS


def write_csv(traj: Trajectory, path: Path, meta: str | None) -> None:
    """Write a trajectory's documented column set at 17 significant digits."""
    columns = _csv_columns(traj)
    series = {"t": traj.times, **traj.metrics}
    for j, name in enumerate(traj.control_names):
        series[name] = traj.controls[:, j]
    rows = [series[c] for c in columns]
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        if meta is not None:
            fh.write(f"# {meta}\n")
        fh.write(",".join(columns) + "\n")
        for i in range(traj.times.size):
            fh.write(",".join(f"{col[i]:.17g}" for col in rows) + "\n")


def _early_peak_control(traj: Trajectory, window: float = 0.5) -> float | None:
    if not traj.controls.size:
        return None
    mask = traj.times <= window
    return float(np.linalg.norm(traj.controls[mask], axis=1).max())


def run_scenario(sc: ScenarioConfig, out_dir: Path) -> dict:
    """Run every simulation a scenario implies and write its output files.

    Returns the summary document (also written as
    ``<scenario>_summary.json``). Gains are validated before integration
    starts, so invalid gains never produce partial output.
    """
    labelled = build_sim_configs(sc)
    results = []
    for label, cfg in labelled:
        traj = simulate(cfg)
        results.append((label, traj))

    out_dir.mkdir(parents=True, exist_ok=True)
    multi = len(results) > 1
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    runs = {}
    for label, traj in results:
        name = f"{sc.scenario}_{label}.csv" if multi else f"{sc.scenario}.csv"
        meta = None
        if not sc.no_meta:
            meta = (f"manifold-ctrl {__version__} scenario={sc.scenario} "
                    f"run={label} generated={stamp}")
        write_csv(traj, out_dir / name, meta)
        runs[label] = {
            "csv": name,
            "summary": metrics_summary(traj),
            "peak_control_norm_early": _early_peak_control(traj),
        }
    document = {
        "scenario": sc.scenario,
        "controller": sc.controller,
        "config": {
            "k_e": sc.k_e, "g": sc.g, "dt": sc.dt, "t_end": sc.t_end,
            "record_stride": sc.record_stride, "seed": sc.seed,
            "disturb": sc.disturb, "extension": sc.extension,
        },
        "runs": runs,
    }
    summary_path = out_dir / f"{sc.scenario}_summary.json"
    summary_path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
    return document


def _resolve_out_dir(flag_value: str | None, sc: ScenarioConfig) -> Path:
    if flag_value:
        return Path(flag_value)
    if sc.out_dir:
        return Path(sc.out_dir)
    env = os.environ.get("MANIFOLD_CTRL_OUT")
    if env:
        return Path(env)
    return Path("out")


def _load_target(target: str) -> dict:
    if target in SCENARIO_NAMES:
        return {"scenario": target}
    path = Path(target)
    if not path.exists():
        raise ConfigError(
            f"{target!r} is neither a built-in scenario nor a config file"
        )
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {target}: invalid JSON ({exc})") from exc
    return raw


def _apply_flag_overrides(raw: dict, args: argparse.Namespace) -> dict:
    merged = dict(raw)
    if args.controller is not None:
        merged["controller"] = args.controller
    if args.k_e is not None:
        merged["k_e"] = args.k_e
    if args.dt is not None:
        merged["dt"] = args.dt
    if args.t_end is not None:
        merged["t_end"] = args.t_end
    if args.seed is not None:
        merged["seed"] = args.seed
    if args.extension is not None:
        merged["extension"] = args.extension
    if args.disturb:
        merged["disturb"] = True
    if args.no_meta:
        merged["no_meta"] = True
    return merged


def _run_one(target: str, args: argparse.Namespace) -> dict:
    raw = _apply_flag_overrides(_load_target(target), args)
    sc = parse_config(raw)
    out_dir = _resolve_out_dir(args.out, sc)
    document = run_scenario(sc, out_dir)
    document["out_dir"] = str(out_dir)
    return document


def _cmd_run(args: argparse.Namespace) -> int:
    if args.batch:
        with concurrent.futures.ThreadPoolExecutor(
            max_workers=min(4, len(args.target))
        ) as pool:
            documents = list(pool.map(lambda t: _run_one(t, args), args.target))
    else:
        if len(args.target) != 1:
            raise ConfigError("run takes exactly one scenario/config "
                              "(use --batch for several)")
        documents = [_run_one(args.target[0], args)]
    if args.json:
        payload = documents[0] if len(documents) == 1 else documents
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for doc in documents:
            for label, run in doc["runs"].items():
                settle = run["summary"]["settling_time"]
                print(f"{doc['scenario']}[{label}]: wrote {run['csv']} "
                      f"(settling_time={settle})")
            print(f"summary: {doc['out_dir']}/{doc['scenario']}_summary.json")
    return 0


def _cmd_list(args: argparse.Namespace) -> int:
    if args.json:
        payload = [
            {
                "name": name,
                "description": _SCENARIO_DEFAULTS[name]["description"],
                "defaults": {
                    "controller": _SCENARIO_DEFAULTS[name]["controller"],
                    "t_end": _SCENARIO_DEFAULTS[name]["t_end"],
                    "dt": 1e-3, "k_e": 1.0, "g": 1.0,
                },
            }
            for name in SCENARIO_NAMES
        ]
        print(json.dumps(payload, indent=2))
        return 0
    for name in SCENARIO_NAMES:
        d = _SCENARIO_DEFAULTS[name]
        print(f"{name:22s} controller={d['controller']:5s} t_end={d['t_end']:<5g} "
              f"dt=0.001  {d['description']}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manifold-ctrl",
        description="Run embedding-based tracking-control scenarios.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a built-in scenario or a config file")
    run.add_argument("target", nargs="+",
                     help="scenario name or config.json (several with --batch)")
    run.add_argument("--controller", choices=list(VARIANTS))
    run.add_argument("--k-e", dest="k_e", type=float)
    run.add_argument("--dt", type=float)
    run.add_argument("--t-end", dest="t_end", type=float)
    run.add_argument("--out", help="output directory")
    run.add_argument("--seed", type=int)
    run.add_argument("--extension", choices=["additive", "multiplicative"])
    run.add_argument("--disturb", action="store_true")
    run.add_argument("--no-meta", dest="no_meta", action="store_true")
    run.add_argument("--json", action="store_true",
                     help="print the summary document to stdout")
    run.add_argument("--batch", action="store_true",
                     help="treat positional arguments as independent configs "
                          "and run them concurrently")
    run.set_defaults(func=_cmd_run)

    lst = sub.add_parser("list", help="list built-in scenarios")
    lst.add_argument("--json", action="store_true")
    lst.set_defaults(func=_cmd_list)
    return parser


_EXIT_CODES = (
    (ConfigError, 2, "config-parse"),
    ((InvalidGains, BadGains), 3, "invalid-gains"),
    (NonFiniteState, 4, "simulation-diverged"),
    (OSError, 5, "io"),
)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - mapped to exit categories below
        for types, code, category in _EXIT_CODES:
            if isinstance(exc, types):
                print(f"manifold-ctrl: error[{category}]: {exc}", file=sys.stderr)
                return code
        if isinstance(exc, ManifoldCtrlError):
            print(f"manifold-ctrl: error[internal]: {exc}", file=sys.stderr)
            return 1
        raise


if __name__ == "__main__":
    sys.exit(main())
