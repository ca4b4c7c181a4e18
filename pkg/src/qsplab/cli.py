"""Command-line experiment runner.

Every subcommand resolves a configuration from defaults, an optional JSON
config file (``--config``) and explicit flags, in increasing precedence.
Results go to ``<output-dir>/<experiment>.csv`` with a JSON sidecar; both
carry the package version, a hash of the resolved configuration and the
seed.

Exit status: 0 success, 2 invalid configuration, 3 budget exceeded,
4 numerical-quality failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .fock import CutoffError, QuadratureError
from .gates import PrecisionError
from .mbqc import BudgetError, GraphPattern, PatternError
from .measurement import ZeroProbabilityError
from .noise import ConvergenceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_NUMERIC = 4


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# value parsing


def parse_values(text) -> list[float]:
    """Comma list of scalars or ranges.

    ``a..b`` steps by 0.5, ``a..b:s`` by ``s`` (both inclusive);
    ``log:a:b:n`` is ``n`` log-spaced points.
    """
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    out: list[float] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if part.startswith("log:"):
                _, a, b, n = part.split(":")
                out.extend(float(v) for v in np.geomspace(float(a), float(b), int(n)))
            elif ".." in part:
                rng, _, step = part.partition(":")
                a, b = (float(v) for v in rng.split(".."))
                step = float(step) if step else 0.5
                if step <= 0 or b < a:
                    raise ValueError
                n = int(math.floor((b - a) / step + 1e-9))
                out.extend(a + i * step for i in range(n + 1))
            else:
                out.append(float(part))
        except ValueError as exc:
            raise ConfigError(f"cannot parse value list {part!r}") from exc
    if not out:
        raise ConfigError(f"empty value list {text!r}")
    return out


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def config_hash(config: dict) -> str:
    body = {k: v for k, v in config.items() if k != "output_dir"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]


def metadata(config: dict) -> dict:
    return {"version": __version__, "experiment": config["experiment"], "config_hash": config_hash(config),
            "seed": config["seed"]}


def write_outputs(config: dict, rows: list[dict], extra: dict | None = None) -> Path:
    out = Path(config["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    meta = metadata(config)
    csv_path = out / f"{config['experiment']}.csv"
    lines = [f"# {k}: {v}" for k, v in meta.items()]
    if rows:
        cols = list(rows[0].keys())
        lines.append(",".join(cols))
        lines.extend(",".join(fmt(r[c]) for c in cols) for r in rows)
    csv_path.write_text("\n".join(lines) + "\n")
    side = {"metadata": meta, "config": config, "results": extra or {}}
    (out / f"{config['experiment']}.json").write_text(json.dumps(_plain(side), indent=2, sort_keys=True) + "\n")
    return csv_path


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


# ---------------------------------------------------------------------------
# experiments


def run_init_fidelity(cfg: dict):
    from .experiments import init_fidelity_rows

    rows = init_fidelity_rows(parse_values(cfg["n_bar"]), parse_values(cfg["alpha"]), cfg.get("cutoff"))
    worst = max(r["abs_diff"] for r in rows)
    return rows, {"max_abs_diff": worst}, f"max |sim - analytic| = {worst:.3g}"


def run_gate_check(cfg: dict):
    from .experiments import cphase_process, mse_independence

    proc = cphase_process(cfg["alpha"], cfg["n_bar"], cfg["cutoff"])
    mse = mse_independence(cfg["alpha"], tuple(parse_values(cfg["mse_n_bars"])))
    rows = [{"check": "logic_table", "input": r["input"], "value": r["fidelity"]} for r in proc.logic_table]
    rows.append({"check": "process_fidelity", "input": "all", "value": proc.process_fidelity})
    rows += [{"check": "mse_trace_distance", "input": r["input"], "value": r["trace_distance"]} for r in mse["rows"]]
    extra = {"process_fidelity": proc.process_fidelity, "max_trace_distance": mse["max_trace_distance"]}
    return rows, extra, f"process fidelity {proc.process_fidelity:.6f}, MSE max trace distance {mse['max_trace_distance']:.3g}"


def run_mbqc(cfg: dict):
    from .experiments import mbqc_check

    if not cfg.get("pattern"):
        raise ConfigError("mbqc-run needs --pattern FILE")
    try:
        pattern = GraphPattern.from_json(Path(cfg["pattern"]).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read pattern file: {exc}") from exc
    res = mbqc_check(pattern, cfg["alpha"], cfg["n_bar"], cfg["trajectories"], cfg["seed"], cfg.get("cutoff"),
                     cfg["backend"], cfg.get("postselect", False))
    logical = res["logical"]
    pauli = logical.pauli()
    rows = []
    for idx in np.ndindex(pauli.shape):
        label = "".join("IXYZ"[i] for i in idx)
        se = logical.diagnostics.get("stderr")
        rows.append({"pauli": label, "value": pauli[idx], "stderr": float(se[idx]) if se is not None else 0.0})
    extra = {"oracle_fidelity": res["fidelity"], "logical_state": json.loads(logical.to_json())}
    return rows, extra, f"oracle fidelity {res['fidelity']:.6f}"


def run_dephasing(cfg: dict):
    from .experiments import dephasing_rows

    rows = dephasing_rows(cfg["alpha"], parse_values(cfg["kt_grid"]), cfg["cutoff"])
    rows = [{k: r[k] for k in ("kappa_t", "f_avg_cs", "f_avg_qsp", "quad_error")} for r in rows]
    extra = {"alpha": cfg["alpha"], "cutoff": cfg["cutoff"], "nodes": {"cos_theta": 16, "phi": 16}}
    return rows, extra, f"{len(rows)} grid points"


def run_threshold(cfg: dict):
    from .experiments import threshold_rows

    rows = threshold_rows(parse_values(cfg["alpha"]), cfg["drop_level"], cfg["cutoff"])
    return rows, {}, "; ".join(f"alpha={r['alpha']:g}: cs {r['kt_cs']:.4g}, qsp {r['kt_qsp']:.4g}" for r in rows)


def run_truncation(cfg: dict):
    from .experiments import truncation_study

    budget, report = truncation_study(cfg["n_bar"], cfg["tol"], cfg["theta"])
    rows = [{"lambda": budget.lam, "r_max": budget.r_max, "k_max": budget.k_max, "n": n, "defect": d, "population": p,
             "weighted_error": e} for n, d, p, e in report.rows()]
    extra = {"lambda": budget.lam, "r_max": budget.r_max, "k_max": budget.k_max, "tol": budget.tol,
             "weighted_error": report.weighted_error, "alpha": report.diagnostics["alpha"]}
    return rows, extra, (f"lambda={budget.lam:g} r_max={budget.r_max} k_max={budget.k_max} "
                         f"weighted error={report.weighted_error:.3g}")


def run_homodyne(cfg: dict):
    from .experiments import homodyne_shots

    records = homodyne_shots(cfg["alpha"], cfg["n_bar"], cfg["shots"], cfg["basis"], cfg["theta"], cfg["seed"],
                             cfg.get("cutoff"), cfg["backend"])
    rows = [{"shot_id": i, "mode": r.mode, "basis": r.basis, "theta": r.theta, "raw_x": r.raw,
             "logical_bit": r.bit, "weight": r.weight} for i, r in enumerate(records)]
    plus = sum(r.bit > 0 for r in records)
    return rows, {"plus_fraction": plus / len(records)}, f"P(+) ~ {plus / len(records):.4f}"


EXPERIMENTS = {
    "init-fidelity": (run_init_fidelity, {"n_bar": "0,0.5,1,2", "alpha": "0.5,1,2,3", "cutoff": None}),
    "gate-check": (run_gate_check, {"alpha": 3.0, "n_bar": 0.5, "cutoff": 60, "mse_n_bars": "0,1"}),
    "mbqc-run": (run_mbqc, {"pattern": None, "alpha": 3.0, "n_bar": 0.5, "cutoff": None, "postselect": False}),
    "dephasing-bench": (run_dephasing, {"alpha": 2.0, "kt_grid": "log:0.01:2:25", "cutoff": 60}),
    "threshold-scan": (run_threshold, {"alpha": "1.5,2,3", "drop_level": 0.9, "cutoff": 60}),
    "truncation-study": (run_truncation, {"n_bar": 0.5, "tol": 0.01, "theta": math.pi / 4}),
    "homodyne-sample": (run_homodyne, {"alpha": 2.0, "n_bar": 0.5, "shots": 1000, "basis": "X", "theta": 0.0,
                                       "cutoff": None}),
}

COMMON = {"seed": 0, "output_dir": ".", "backend": "trajectory", "trajectories": 10_000}

FLAG_TYPES = {
    "n_bar": str, "alpha": str, "cutoff": int, "mse_n_bars": str, "pattern": str, "postselect": bool,
    "kt_grid": str, "drop_level": float, "tol": float, "theta": float, "shots": int, "basis": str,
}
SCALAR_KEYS = {"alpha", "n_bar"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsplab", description="QSP encoding simulator experiments")
    parser.add_argument("--version", action="version", version=f"qsplab {__version__}")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, (_, defaults) in EXPERIMENTS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file (flags override its fields)")
        p.add_argument("--seed", type=int)
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--backend", choices=["dense", "trajectory"])
        p.add_argument("--trajectories", type=int)
        for key in defaults:
            flag = "--" + key.replace("_", "-")
            if FLAG_TYPES.get(key) is bool:
                p.add_argument(flag, dest=key, action="store_const", const=True)
            else:
                p.add_argument(flag, dest=key, type=FLAG_TYPES.get(key, str))
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    _, defaults = EXPERIMENTS[args.experiment]
    cfg = {"experiment": args.experiment, **COMMON, **defaults}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        params = doc.get("params", {})
        state = doc.get("state")
        if state is not None:
            params = {**params, "n_bar": state.get("n_bar"), "alpha": state.get("alpha_re", 0.0)}
            if state.get("alpha_im", 0.0):
                raise ConfigError("complex displacements are not supported by the experiments")
        for k, v in {**{k: v for k, v in doc.items() if k not in ("params", "state", "experiment")}, **params}.items():
            if k not in cfg:
                raise ConfigError(f"unknown config field {k!r} for {args.experiment}")
            cfg[k] = v
        if doc.get("experiment", args.experiment) != args.experiment:
            raise ConfigError(f"config is for {doc['experiment']!r}, not {args.experiment!r}")
    for k, v in vars(args).items():
        if k in ("experiment", "config") or v is None:
            continue
        cfg[k] = v
    return validate(cfg)


def validate(cfg: dict) -> dict:
    seed = cfg["seed"]
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg["backend"] not in ("dense", "trajectory"):
        raise ConfigError("backend must be 'dense' or 'trajectory'")
    if int(cfg["trajectories"]) < 1:
        raise ConfigError("trajectories must be positive")
    cfg["trajectories"] = int(cfg["trajectories"])
    for key in SCALAR_KEYS:
        if key in cfg and cfg["experiment"] not in ("init-fidelity", "threshold-scan"):
            vals = parse_values(cfg[key])
            if len(vals) != 1:
                raise ConfigError(f"{key} must be a single value for {cfg['experiment']}")
            cfg[key] = vals[0]
    if cfg.get("n_bar") is not None and not isinstance(cfg["n_bar"], str) and cfg["n_bar"] < 0:
        raise ConfigError("n_bar must be >= 0")
    if cfg.get("cutoff") is not None:
        if int(cfg["cutoff"]) < 2:
            raise ConfigError("cutoff must be >= 2")
        cfg["cutoff"] = int(cfg["cutoff"])
    if "drop_level" in cfg and not 0 < float(cfg["drop_level"]) < 1:
        raise ConfigError("drop_level must lie in (0, 1)")
    if "tol" in cfg and not float(cfg["tol"]) > 0:
        raise ConfigError("tol must be positive")
    if "basis" in cfg and cfg["basis"] not in ("X", "Z", "XY"):
        raise ConfigError("basis must be X, Z or XY")
    if "shots" in cfg and int(cfg["shots"]) < 1:
        raise ConfigError("shots must be positive")
    for key in ("n_bar", "alpha", "kt_grid", "mse_n_bars"):
        if isinstance(cfg.get(key), str):
            parse_values(cfg[key])
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        fn, _ = EXPERIMENTS[cfg["experiment"]]
        rows, extra, summary = fn(cfg)
        path = write_outputs(cfg, rows, extra)
    except (ConfigError, PatternError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (CutoffError, QuadratureError, PrecisionError, ConvergenceError, ZeroProbabilityError) as exc:
        print(f"numerical quality check failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"{cfg['experiment']}: {summary}")
    print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
