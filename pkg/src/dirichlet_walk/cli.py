"""Batch front end.

Each command reads a validated configuration (flat ``key = value`` file plus
flag overrides), runs one experiment and writes a JSON report named after the
hash of its inputs, so different runs never overwrite each other. Errors are
reported as JSON on stderr with a non-zero exit status.

Environment: ``DIRICHLET_WALK_WORKERS`` sets the number of worker threads used
for genus-2 ensembles (results do not depend on it).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__

WORKERS_ENV = "DIRICHLET_WALK_WORKERS"

COMMANDS = (
    "simulate",
    "escape-rate",
    "clt",
    "progress-tail",
    "deviation-tail",
    "boundary",
    "torus-check",
    "recurrence",
    "folner",
    "perimeter",
)


class ConfigError(ValueError):
    pass


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _float_list(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _opt_float(text):
    return None if str(text).strip().lower() in ("", "none", "auto") else float(text)


# key -> (parser, default)
SCHEMA = {
    "space": (str, "genus2"),
    "n_steps": (int, 256),
    "n_trajectories": (int, 1000),
    "seed": (int, 0),
    "shift": (int, 0),
    "epsilon": (_opt_float, None),
    "m_min": (int, 8),
    "m_max": (int, 48),
    "r": (float, 1.0),
    "exit_radius": (_opt_float, None),
    "N": (_int_list, [100, 1000, 10000]),
    "radii": (_float_list, None),
    "n_samples": (int, 10**4),
    "k_fractions": (_float_list, [0.25, 0.5, 0.75]),
    "windows": (_int_list, [64, 128, 256]),
    "oracle_seed": (int, 1),
}

# per-command defaults that differ from the global ones
COMMAND_DEFAULTS = {
    "progress-tail": {"n_steps": 48, "n_trajectories": 10**5},
    "deviation-tail": {"n_steps": 128, "n_trajectories": 10**5},
    "boundary": {"n_steps": 512, "n_trajectories": 200},
    "torus-check": {"space": "lattice:2", "n_steps": 32, "n_trajectories": 10**4},
    "recurrence": {"space": "lattice:2", "n_trajectories": 2000},
    "folner": {"radii": [4, 5, 6, 7, 8]},
    "perimeter": {"radii": [2, 4, 6, 8]},
}


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def build_config(command: str, file_values: dict, overrides: dict) -> dict:
    """Merge defaults, file values and flag overrides, then validate every field."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    cfg = {k: default for k, (_, default) in SCHEMA.items()}
    cfg.update(COMMAND_DEFAULTS.get(command, {}))
    for source in (file_values, overrides):
        for key, value in source.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}")
            if value is None:
                continue
            parser = SCHEMA[key][0]
            try:
                cfg[key] = parser(value) if isinstance(value, str) else value
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {value!r}") from exc
    _validate(command, cfg)
    return cfg


def _validate(command, cfg):
    from .groups import presentation_from_name

    try:
        presentation_from_name(cfg["space"])
    except Exception as exc:
        raise ConfigError(f"bad space {cfg['space']!r}: {exc}") from exc
    if not 0 <= cfg["n_steps"] <= 10**6:
        raise ConfigError("n_steps must lie in [0, 10^6]")
    if cfg["n_trajectories"] < 1:
        raise ConfigError("n_trajectories must be positive")
    if not 0 <= cfg["seed"] < 2**63:
        raise ConfigError("seed must be a non-negative 63-bit integer")
    if cfg["shift"] < 0:
        raise ConfigError("shift must be non-negative")
    genus2 = cfg["space"].strip().lower() == "genus2"
    if command in ("deviation-tail", "boundary") and not genus2:
        raise ConfigError(f"{command} requires space = genus2")
    if command in ("torus-check", "recurrence") and genus2:
        raise ConfigError(f"{command} requires a lattice space")
    if command == "progress-tail" and not genus2 and cfg["epsilon"] is None:
        raise ConfigError("progress-tail on a lattice needs an explicit epsilon")
    if command in ("folner", "perimeter") and not cfg["radii"]:
        raise ConfigError("radii must be non-empty")
    if command == "recurrence" and max(cfg["N"]) > cfg["n_steps"]:
        cfg["n_steps"] = max(cfg["N"])


# -- hashing and output ---------------------------------------------------


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)


def content_hash(command: str, cfg: dict) -> str:
    """sha256 of a git-style header plus the canonical JSON of the inputs."""
    body = canonical_json({"command": command, "config": cfg, "version": __version__}).encode()
    return hashlib.sha256(b"inputs " + str(len(body)).encode() + b"\0" + body).hexdigest()


def _jsonable(x):
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not serialisable: {type(x).__name__}")


def _clean(x):
    # NaN/inf are not JSON; encode as null
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, np.integer)):
        return _clean(x.item())
    return x


def atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer") from exc
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be positive")
    return n


# -- commands -------------------------------------------------------------


def _ctx(cfg):
    from .dirichlet import context_from_name

    return context_from_name(cfg["space"])


def _ensemble(cfg, keep_path=True, **over):
    from .walk import simulate_ensemble

    c = dict(cfg, **over)
    return simulate_ensemble(
        _ctx(c), c["n_steps"], c["n_trajectories"], c["seed"], c["shift"], keep_path=keep_path, workers=workers()
    )


def cmd_simulate(cfg, out_dir: Path, digest: str):
    ens = _ensemble(cfg)
    files = []
    for t in range(ens.n_trajectories):
        name = f"traj-{digest[:16]}-{t:05d}.csv"
        atomic_write(out_dir / name, ens.trajectory(t).to_csv())
        files.append(name)
    D = ens.dists
    return {
        "files": files,
        "excluded_trajectories": ens.excluded,
        "final_dist_mean": float(np.mean(D[:, -1])),
        "max_step_bound": 2.0 * ens.ctx.R_dom,
    }


def cmd_escape_rate(cfg, *_):
    from .stats import diffusive_envelope, escape_rate

    ens = _ensemble(cfg, keep_path=False)
    est = escape_rate(ens)
    env = diffusive_envelope(ens)
    return {
        "escape": est.as_dict(),
        "envelope": env,
        "ci_excludes_zero": est.ci_low > 0,
        "excluded_trajectories": ens.excluded,
    }


def cmd_clt(cfg, *_):
    from .stats import NORMALITY_ALPHA, clt_check

    rep = clt_check(_ctx(cfg), cfg["n_steps"], cfg["n_trajectories"], cfg["seed"])
    return {"clt": rep.as_dict(), "passes": bool(rep.p_value > NORMALITY_ALPHA), "thresholds": {"alpha": NORMALITY_ALPHA, "max_relative_change": 0.1}}


def cmd_progress_tail(cfg, *_):
    from .stats import linear_progress_tail, progress_probabilities

    ens = _ensemble(cfg, keep_path=False)
    eps = cfg["epsilon"]
    if eps is None:
        eps = float(np.mean(ens.dists[:, -1]) / ens.n_steps) / 4
    ms = list(range(cfg["m_min"], min(cfg["m_max"], ens.n_steps) + 1))
    out = {"epsilon": eps, "m": ms, "probabilities": progress_probabilities(ens, eps, ms).tolist()}
    if ens.ctx.kind == "fuchsian":
        out["fit"] = linear_progress_tail(ens, eps, (cfg["m_min"], cfg["m_max"])).as_dict()
    return out


def cmd_deviation_tail(cfg, *_):
    from .stats import deviation_tail

    ens = _ensemble(cfg)
    fit = deviation_tail(ens, k_fractions=cfg["k_fractions"])
    return {"fit": fit.as_dict(), "n": ens.n_steps, "k_fractions": cfg["k_fractions"]}


def cmd_boundary(cfg, *_):
    from .stats import boundary_convergence

    rep = boundary_convergence(_ensemble(cfg), cfg["windows"])
    rep.pop("oscillation")
    rep.pop("min_gromov")
    return rep


def cmd_torus_check(cfg, *_):
    from .stats import iid_sum_distances, two_sample_ks

    ens = _ensemble(cfg, keep_path=False)
    oracle = iid_sum_distances(ens.ctx.lattice, ens.n_steps, cfg["n_trajectories"], cfg["oracle_seed"])
    stat, p = two_sample_ks(ens.dists[:, -1], oracle)
    return {"ks_statistic": stat, "ks_p_value": p, "n": ens.n_steps, "engine_mean": float(ens.dists[:, -1].mean()), "oracle_mean": float(oracle.mean())}


def cmd_recurrence(cfg, *_):
    from .stats import recurrence_stat

    ens = _ensemble(cfg, keep_path=False)
    rows = []
    for N in cfg["N"]:
        p, se = recurrence_stat(ens, cfg["r"], N, cfg["exit_radius"])
        rows.append({"N": N, "fraction": p, "stderr": se})
    return {"r": cfg["r"], "exit_radius": cfg["exit_radius"], "returns": rows}


def cmd_folner(cfg, *_):
    from .groups import folner_ratios, presentation_from_name
    from .stats import fit_line, fit_power_law

    P = presentation_from_name(cfg["space"])
    radii = [int(r) for r in cfg["radii"]]
    ratios = folner_ratios(P, radii)
    out = {
        "radii": radii,
        "ratios": [float(q) for q in ratios],
        "exact": [f"{q.numerator}/{q.denominator}" for q in ratios],
    }
    if len(radii) >= 3:
        out["power_law"] = fit_power_law(radii, out["ratios"])
        out["linear"] = fit_line(radii, out["ratios"])
    return out


def cmd_perimeter(cfg, *_):
    from .dirichlet import nonlocal_perimeter_ratio
    from .stats import fit_power_law

    ctx = _ctx(cfg)
    ests = [nonlocal_perimeter_ratio(ctx, r, cfg["n_samples"], cfg["seed"]) for r in cfg["radii"]]
    out = {"estimates": [e.as_dict() for e in ests]}
    if len(ests) >= 3 and all(e.ratio > 0 for e in ests):
        out["power_law"] = fit_power_law([e.radius for e in ests], [e.ratio for e in ests], [e.stderr for e in ests])
    return out


HANDLERS = {
    "simulate": cmd_simulate,
    "escape-rate": cmd_escape_rate,
    "clt": cmd_clt,
    "progress-tail": cmd_progress_tail,
    "deviation-tail": cmd_deviation_tail,
    "boundary": cmd_boundary,
    "torus-check": cmd_torus_check,
    "recurrence": cmd_recurrence,
    "folner": cmd_folner,
    "perimeter": cmd_perimeter,
}


def run(command: str, cfg: dict, out_dir) -> Path:
    """Execute ``command`` and write its report; returns the report path."""
    out_dir = Path(out_dir)
    digest = content_hash(command, cfg)
    results = HANDLERS[command](cfg, out_dir, digest)
    report = {
        "command": command,
        "config": cfg,
        "seed": cfg["seed"],
        "input_hash": "sha256:" + digest,
        "version": __version__,
        "results": results,
    }
    path = out_dir / f"{command}-{digest[:16]}.json"
    atomic_write(path, json.dumps(_clean(report), sort_keys=True, indent=2, default=_jsonable) + "\n")
    return path


def _parser():
    p = argparse.ArgumentParser(prog="dirichlet-walk", description="Dirichlet random walks on flat tori and the genus-2 cover.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="flat key = value file")
        s.add_argument("--out", default="runs", help="output directory (default: runs)")
        s.add_argument("--space")
        s.add_argument("--n", dest="n_steps")
        s.add_argument("--trajectories", dest="n_trajectories")
        s.add_argument("--seed")
        s.add_argument("--shift")
        s.add_argument("--epsilon")
        s.add_argument("--m-min", dest="m_min")
        s.add_argument("--m-max", dest="m_max")
        s.add_argument("--r")
        s.add_argument("--exit-radius", dest="exit_radius")
        s.add_argument("--N", dest="N")
        s.add_argument("--radii")
        s.add_argument("--samples", dest="n_samples")
        s.add_argument("--k-fractions", dest="k_fractions")
        s.add_argument("--windows")
        s.add_argument("--oracle-seed", dest="oracle_seed")
    return p


def _summary(path: Path, report: dict) -> str:
    lines = [f"{report['command']}  ->  {path}"]
    flat = {}

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k, v in obj.items():
                walk(f"{prefix}.{k}" if prefix else k, v)
        elif isinstance(obj, list) and len(obj) > 8:
            flat[prefix] = f"[{len(obj)} values]"
        else:
            flat[prefix] = obj

    walk("", report["results"])
    width = max((len(k) for k in flat), default=0)
    lines += [f"  {k.ljust(width)}  {v}" for k, v in flat.items()]
    return "\n".join(lines)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        file_values = read_config_file(args.config) if args.config else {}
        overrides = {k: getattr(args, k) for k in SCHEMA if getattr(args, k, None) is not None}
        cfg = build_config(args.command, file_values, overrides)
        path = run(args.command, cfg, args.out)
    except Exception as exc:  # reported to the caller as JSON
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    report = json.loads(path.read_text(encoding="utf-8"))
    print(_summary(path, report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
