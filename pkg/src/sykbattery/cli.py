"""Command-line front end: one subcommand per experiment.

Configs use a ``key = value`` grammar ('#' comments, lists comma-separated);
a JSON sidecar produced by an earlier run is also accepted as a config, which
reproduces that run's CSVs bit-exactly for any worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, ensemble
from .battery import Propagator, population_matrix
from .operators import QubitRegister, discharged_state
from .spectra import default_sparsity_grid, find_critical_sparsity, sff_from_terms
from .syk import DisorderSeed, apply_sparsity, draw_couplings
from .tables import write_csv, write_sidecar, format_value

TOOL = "sykbattery"
_REQUIRED = object()


class ConfigError(Exception):
    """Invalid or unknown configuration key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"config key '{key}': {message}")
        self.key = key


# ---------------------------------------------------------------------------
# config schema and parsing

_COMMON_KEYS = {
    "n_sites": ("int", _REQUIRED),
    "j_scale": ("float", 1.0),
    "omega0": ("float", 1.0),
    "n_dis": ("int", None),
    "master_seed": ("int", 0),
    "workers": ("int", 1),
    "out_dir": ("str", "out"),
}

SCHEMAS = {
    "gap-ratio": {
        **_COMMON_KEYS,
        "p_grid": ("float_list", None),
        "p_min": ("float", 0.01),
        "points_per_decade": ("int", 20),
    },
    "sff": {
        **_COMMON_KEYS,
        "p_list": ("float_list", [1.0]),
        "beta": ("float", 0.0),
        "t_min": ("float", 0.01),
        "t_max": ("float", 1.0e4),
        "t_points": ("int", 481),
        "sff_average": ("str", "ratio_of_means"),
    },
    "charge": {
        **_COMMON_KEYS,
        "p_list": ("float_list", [1.0]),
        "tau_max": ("float", 10.0),
        "tau_points": ("int", 101),
        "subset_size": ("int", None),
        "population": ("bool", True),
        "population_p": ("float", None),
        "population_realization": ("int", 0),
    },
    "efficiency": {
        **_COMMON_KEYS,
        "p_grid": ("float_list", None),
        "p_min": ("float", 0.01),
        "points_per_decade": ("int", 20),
        "tau_max": ("float", 10.0),
        "tau_points": ("int", 101),
        "tau_c": ("float_or_str", "optimal"),
        "average_mode": ("str", "mean_of_ratios"),
        "p2_marker": ("float", None),
    },
}

# paper-caption disorder counts by system size
_DEFAULT_N_DIS = {6: 1000, 8: 500, 10: 150}


def _coerce(key: str, kind: str, value):
    try:
        if kind == "int":
            if isinstance(value, bool):
                raise ValueError
            if isinstance(value, (int, np.integer)):
                return int(value)
            if isinstance(value, float):
                raise ValueError
            return int(str(value).strip())
        if kind == "float":
            if isinstance(value, bool):
                raise ValueError
            if isinstance(value, (int, float, np.floating, np.integer)):
                return float(value)
            return float(str(value).strip())
        if kind == "bool":
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in ("true", "1", "yes"):
                return True
            if text in ("false", "0", "no"):
                return False
            raise ValueError
        if kind == "str":
            return str(value).strip()
        if kind == "float_list":
            if isinstance(value, (list, tuple)):
                return [float(v) for v in value]
            parts = [p.strip() for p in str(value).split(",") if p.strip()]
            if not parts:
                raise ValueError
            return [float(p) for p in parts]
        if kind == "float_or_str":
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                return float(value)
            text = str(value).strip()
            try:
                return float(text)
            except ValueError:
                return text
    except (ValueError, TypeError):
        raise ConfigError(key, f"cannot parse {value!r} as {kind}") from None
    raise ConfigError(key, f"unknown value kind {kind}")


def parse_config_text(text: str) -> dict:
    """Parse the ``key = value`` grammar into a raw string map."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(body.split()[0], f"line {lineno} is not 'key = value'")
        key, value = body.split("=", 1)
        raw[key.strip()] = value.strip()
    return raw


def load_config(path: str) -> dict:
    """Load a config file; JSON sidecars are recognized by content."""
    with open(path) as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        payload = json.loads(text)
        return payload.get("config", payload)
    return parse_config_text(text)


def resolve_config(command: str, raw: dict, overrides: dict | None = None) -> dict:
    """Coerce, default, and validate a raw config for one command."""
    schema = SCHEMAS[command]
    for key in raw:
        if key not in schema:
            raise ConfigError(key, f"unknown key for command '{command}'")
    cfg = {}
    for key, (kind, default) in schema.items():
        if key in raw and raw[key] is not None:
            cfg[key] = _coerce(key, kind, raw[key])
        elif default is _REQUIRED:
            raise ConfigError(key, "required key is missing")
        else:
            cfg[key] = default
    for key, value in (overrides or {}).items():
        cfg[key] = value
    _validate(command, cfg)
    return cfg


def _validate(command: str, cfg: dict) -> None:
    n = cfg["n_sites"]
    if not 2 <= n <= 14:
        raise ConfigError("n_sites", f"must be in [2, 14], got {n}")
    if cfg["j_scale"] <= 0:
        raise ConfigError("j_scale", f"must be positive, got {cfg['j_scale']}")
    if cfg["omega0"] <= 0:
        raise ConfigError("omega0", f"must be positive, got {cfg['omega0']}")
    if cfg["n_dis"] is None:
        cfg["n_dis"] = _DEFAULT_N_DIS.get(n, 200)
    if cfg["n_dis"] < 1:
        raise ConfigError("n_dis", f"must be at least 1, got {cfg['n_dis']}")
    if cfg["workers"] < 1:
        raise ConfigError("workers", f"must be at least 1, got {cfg['workers']}")

    def check_probs(key, values):
        for p in values:
            if not 0.0 < p <= 1.0:
                raise ConfigError(key, f"probability {p} outside (0, 1]")

    if command == "gap-ratio":
        if n < 4:
            raise ConfigError("n_sites", "gap-ratio needs n_sites >= 4")
        if cfg["p_grid"] is None:
            if not 0.0 < cfg["p_min"] < 1.0:
                raise ConfigError("p_min", f"must be in (0, 1), got {cfg['p_min']}")
            if cfg["points_per_decade"] < 1:
                raise ConfigError("points_per_decade", "must be at least 1")
            cfg["p_grid"] = [float(p) for p in default_sparsity_grid(
                cfg["p_min"], cfg["points_per_decade"])]
        check_probs("p_grid", cfg["p_grid"])
        if cfg["p_grid"][0] != 1.0:
            raise ConfigError("p_grid", "must start at 1.0 (the fully connected point)")
        if np.any(np.diff(cfg["p_grid"]) >= 0):
            raise ConfigError("p_grid", "must be strictly descending")
    elif command == "sff":
        check_probs("p_list", cfg["p_list"])
        if cfg["t_points"] < 1:
            raise ConfigError("t_points", "time grid is empty")
        if cfg["t_min"] <= 0:
            raise ConfigError("t_min", f"must be positive, got {cfg['t_min']}")
        if cfg["t_max"] < cfg["t_min"]:
            raise ConfigError("t_max", "must be at least t_min")
        if cfg["beta"] < 0:
            raise ConfigError("beta", f"must be non-negative, got {cfg['beta']}")
        if cfg["sff_average"] not in ("ratio_of_means", "mean_of_ratios"):
            raise ConfigError("sff_average",
                              "must be ratio_of_means or mean_of_ratios")
    elif command == "charge":
        check_probs("p_list", cfg["p_list"])
        if cfg["tau_max"] <= 0:
            raise ConfigError("tau_max", f"must be positive, got {cfg['tau_max']}")
        if cfg["tau_points"] < 2:
            raise ConfigError("tau_points", "need at least 2 grid points")
        if cfg["subset_size"] is None:
            cfg["subset_size"] = n
        if not 1 <= cfg["subset_size"] <= n:
            raise ConfigError("subset_size", f"must be in [1, {n}]")
        if cfg["population_p"] is None:
            cfg["population_p"] = cfg["p_list"][0]
        check_probs("population_p", [cfg["population_p"]])
        if cfg["population_realization"] < 0:
            raise ConfigError("population_realization", "must be non-negative")
    elif command == "efficiency":
        if n % 2 != 0 or n < 4:
            raise ConfigError("n_sites",
                              "half-battery efficiency needs an even n_sites >= 4")
        if cfg["p_grid"] is None:
            if not 0.0 < cfg["p_min"] < 1.0:
                raise ConfigError("p_min", f"must be in (0, 1), got {cfg['p_min']}")
            if cfg["points_per_decade"] < 1:
                raise ConfigError("points_per_decade", "must be at least 1")
            cfg["p_grid"] = [float(p) for p in default_sparsity_grid(
                cfg["p_min"], cfg["points_per_decade"])]
        check_probs("p_grid", cfg["p_grid"])
        if cfg["tau_max"] <= 0:
            raise ConfigError("tau_max", f"must be positive, got {cfg['tau_max']}")
        if cfg["tau_points"] < 2:
            raise ConfigError("tau_points", "need at least 2 grid points")
        if isinstance(cfg["tau_c"], float):
            if cfg["tau_c"] <= 0:
                raise ConfigError("tau_c", "a fixed charging time must be positive")
        elif cfg["tau_c"] != "optimal":
            raise ConfigError("tau_c", "must be a positive number or 'optimal'")
        if cfg["average_mode"] not in ("mean_of_ratios", "ratio_of_means"):
            raise ConfigError("average_mode",
                              "must be mean_of_ratios or ratio_of_means")


# ---------------------------------------------------------------------------
# command implementations

def _checkpoint_path(cfg: dict, resume: bool, stem: str, tag: str):
    if not resume:
        return None
    return os.path.join(cfg["out_dir"], "checkpoints", f"{stem}_{tag}.jsonl")


def _sidecar_payload(command: str, cfg: dict) -> dict:
    return {
        "tool": TOOL,
        "version": __version__,
        "command": command,
        "config": cfg,
        "master_seed": cfg["master_seed"],
        "outputs": {},
        "extra": {},
    }


def cmd_gap_ratio(cfg: dict, resume: bool = False) -> int:
    """Gap-ratio curve over the sparsity grid plus the critical-sparsity file."""
    n = cfg["n_sites"]
    stem = f"gap_ratio_N{n}"
    os.makedirs(cfg["out_dir"], exist_ok=True)
    checkpoint_dir = None
    if resume:
        checkpoint_dir = os.path.join(cfg["out_dir"], "checkpoints", stem)
    result = find_critical_sparsity(
        n_sites=n,
        j_scale=cfg["j_scale"],
        p_grid=np.asarray(cfg["p_grid"]),
        n_dis=cfg["n_dis"],
        master_seed=cfg["master_seed"],
        workers=cfg["workers"],
        checkpoint_dir=checkpoint_dir,
    )

    curve_file = f"{stem}.csv"
    write_csv(
        os.path.join(cfg["out_dir"], curve_file),
        ["p", "r_mean", "r_stderr", "n_dis"],
        zip(result.p_grid, result.r_mean, result.r_stderr, result.n_eff),
    )
    p2_file = f"{stem}_p2.csv"
    write_csv(
        os.path.join(cfg["out_dir"], p2_file),
        ["n_sites", "p2", "r_reference", "threshold"],
        [(n, result.p2 if result.p2 is not None else float("nan"),
          result.r_reference, result.threshold)],
    )
    sidecar = _sidecar_payload("gap-ratio", cfg)
    sidecar["outputs"][curve_file] = {"columns": ["p", "r_mean", "r_stderr", "n_dis"]}
    sidecar["outputs"][p2_file] = {
        "columns": ["n_sites", "p2", "r_reference", "threshold"]}
    sidecar["extra"] = {
        "p2": result.p2,
        "r_reference": result.r_reference,
        "threshold": result.threshold,
    }
    write_sidecar(os.path.join(cfg["out_dir"], f"{stem}.sidecar.json"), sidecar)
    if result.p2 is None:
        print(f"{TOOL}: no threshold crossing within the sparsity grid",
              file=sys.stderr)
        return 3
    return 0


def cmd_sff(cfg: dict, resume: bool = False) -> int:
    """Disorder-averaged spectral form factor, one CSV per sparsity value."""
    n = cfg["n_sites"]
    stem = f"sff_N{n}"
    os.makedirs(cfg["out_dir"], exist_ok=True)
    times = np.logspace(np.log10(cfg["t_min"]), np.log10(cfg["t_max"]),
                        cfg["t_points"])
    sidecar = _sidecar_payload("sff", cfg)
    for a, p in enumerate(cfg["p_list"]):
        spec = ensemble.EnsembleSpec(
            observable="sff_terms",
            n_sites=n,
            j_scale=cfg["j_scale"],
            sparsity=float(p),
            n_dis=cfg["n_dis"],
            master_seed=cfg["master_seed"],
            omega0=cfg["omega0"],
            beta=cfg["beta"],
            time_grid=tuple(float(t) for t in times),
        )
        result = ensemble.run(
            spec, workers=cfg["workers"],
            checkpoint=_checkpoint_path(cfg, resume, stem, f"{a:03d}"),
            keep_values=True,
        )
        curve = sff_from_terms(result.values[:, :-1], result.values[:, -1],
                               cfg["beta"], times, cfg["sff_average"])
        name = f"{stem}_p{format_value(float(p))}.csv"
        write_csv(os.path.join(cfg["out_dir"], name),
                  ["t", "sff_value"], zip(curve.times, curve.values))
        sidecar["outputs"][name] = {"columns": ["t", "sff_value"], "p": float(p)}
    write_sidecar(os.path.join(cfg["out_dir"], f"{stem}.sidecar.json"), sidecar)
    return 0


def cmd_charge(cfg: dict, resume: bool = False) -> int:
    """Stored-energy curves over charging duration plus population dynamics."""
    n = cfg["n_sites"]
    stem = f"charge_N{n}"
    os.makedirs(cfg["out_dir"], exist_ok=True)
    taus = np.linspace(0.0, cfg["tau_max"], cfg["tau_points"])
    sidecar = _sidecar_payload("charge", cfg)
    for a, p in enumerate(cfg["p_list"]):
        spec = ensemble.EnsembleSpec(
            observable="charging_energy",
            n_sites=n,
            j_scale=cfg["j_scale"],
            sparsity=float(p),
            n_dis=cfg["n_dis"],
            master_seed=cfg["master_seed"],
            omega0=cfg["omega0"],
            tau_grid=tuple(float(t) for t in taus),
            subset_size=cfg["subset_size"],
        )
        result = ensemble.run(
            spec, workers=cfg["workers"],
            checkpoint=_checkpoint_path(cfg, resume, stem, f"{a:03d}"),
        )
        name = f"stored_energy_N{n}_p{format_value(float(p))}.csv"
        write_csv(os.path.join(cfg["out_dir"], name),
                  ["tau_c", "E_mean", "E_stderr"],
                  zip(taus, result.mean, result.stderr))
        sidecar["outputs"][name] = {
            "columns": ["tau_c", "E_mean", "E_stderr"],
            "p": float(p),
            "subset_size": cfg["subset_size"],
        }

    if cfg["population"]:
        p_pop = cfg["population_p"]
        seed = DisorderSeed(cfg["master_seed"], cfg["population_realization"])
        tensor = draw_couplings(n, cfg["j_scale"], seed)
        if p_pop < 1.0:
            tensor = apply_sparsity(tensor, p_pop, seed)
        reg = QubitRegister(n)
        amps = Propagator(tensor).evolve_grid(discharged_state(reg).amplitudes, taus)
        probs = population_matrix(amps, n)
        rows = [
            (t, 2 * m, probs[m, it])
            for it, t in enumerate(taus)
            for m in range(n + 1)
        ]
        name = f"populations_N{n}_p{format_value(float(p_pop))}.csv"
        write_csv(os.path.join(cfg["out_dir"], name), ["t", "k", "p_k"], rows)
        sidecar["outputs"][name] = {
            "columns": ["t", "k", "p_k"],
            "p": float(p_pop),
            "realization": cfg["population_realization"],
        }

    write_sidecar(os.path.join(cfg["out_dir"], f"{stem}.sidecar.json"), sidecar)
    return 0


def _ratio_of_means_efficiency(energies: np.ndarray, effs: np.ndarray):
    """Mean extractable work over mean stored energy, with jackknife error."""
    valid = np.isfinite(effs)
    e_r = energies[valid]
    w_r = effs[valid] * e_r
    n = len(e_r)
    value = w_r.mean() / e_r.mean()
    if n < 2:
        return float(value), 0.0
    loo = (w_r.sum() - w_r) / (n - 1) / ((e_r.sum() - e_r) / (n - 1))
    stderr = np.sqrt((n - 1) / n * ((loo - loo.mean()) ** 2).sum())
    return float(value), float(stderr)


def cmd_efficiency(cfg: dict, resume: bool = False) -> int:
    """Efficiency versus sparsity at the recorded charging time."""
    n = cfg["n_sites"]
    stem = f"efficiency_N{n}"
    os.makedirs(cfg["out_dir"], exist_ok=True)
    if isinstance(cfg["tau_c"], float):
        taus = np.array([cfg["tau_c"]])
    else:
        taus = np.linspace(0.0, cfg["tau_max"], cfg["tau_points"])
    rows = []
    per_p = {}
    for a, p in enumerate(cfg["p_grid"]):
        spec = ensemble.EnsembleSpec(
            observable="efficiency_curve",
            n_sites=n,
            j_scale=cfg["j_scale"],
            sparsity=float(p),
            n_dis=cfg["n_dis"],
            master_seed=cfg["master_seed"],
            omega0=cfg["omega0"],
            tau_grid=tuple(float(t) for t in taus),
        )
        result = ensemble.run(
            spec, workers=cfg["workers"],
            checkpoint=_checkpoint_path(cfg, resume, stem, f"{a:03d}"),
            keep_values=True,
        )
        t_len = taus.size
        energy_mean = result.mean[:t_len]
        star = int(np.argmax(energy_mean))
        if cfg["average_mode"] == "mean_of_ratios":
            e_mean = result.mean[t_len + star]
            e_stderr = result.stderr[t_len + star]
        else:
            e_mean, e_stderr = _ratio_of_means_efficiency(
                result.values[:, star], result.values[:, t_len + star])
        n_excluded = int(result.excluded[t_len + star])
        rows.append((float(p), e_mean, e_stderr, n_excluded))
        per_p[format_value(float(p))] = {
            "tau_c_star": float(taus[star]),
            "stored_energy_mean": float(energy_mean[star]),
            "n_excluded": n_excluded,
        }

    name = f"{stem}.csv"
    write_csv(os.path.join(cfg["out_dir"], name),
              ["p", "e_mean", "e_stderr", "n_excluded"], rows)
    sidecar = _sidecar_payload("efficiency", cfg)
    sidecar["outputs"][name] = {"columns": ["p", "e_mean", "e_stderr", "n_excluded"]}
    sidecar["extra"] = {"per_p": per_p}
    if cfg.get("p2_marker") is not None:
        sidecar["extra"]["p2"] = cfg["p2_marker"]
    write_sidecar(os.path.join(cfg["out_dir"], f"{stem}.sidecar.json"), sidecar)
    return 0


_HANDLERS = {
    "gap-ratio": cmd_gap_ratio,
    "sff": cmd_sff,
    "charge": cmd_charge,
    "efficiency": cmd_efficiency,
}


# ---------------------------------------------------------------------------
# entry point

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL,
        description="sparse random-interaction quantum battery experiments",
    )
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in _HANDLERS:
        p = sub.add_parser(command)
        p.add_argument("--config", required=True, help="key=value file or sidecar JSON")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--workers", type=int, default=None, help="override workers")
        p.add_argument("--out", default=None, help="override out_dir")
        p.add_argument("--resume", action="store_true",
                       help="keep checkpoints and continue an interrupted run")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.out is not None:
        overrides["out_dir"] = args.out
    try:
        raw = load_config(args.config)
        cfg = resolve_config(args.command, raw, overrides)
    except ConfigError as exc:
        print(f"{TOOL}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"{TOOL}: error: cannot load config {args.config}: {exc}",
              file=sys.stderr)
        return 2
    return _HANDLERS[args.command](cfg, resume=args.resume)


def entrypoint() -> None:
    sys.exit(main())
