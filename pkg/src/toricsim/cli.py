"""Command-line driver: one experiment per invocation, JSON config in, JSON/CSV out.

Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from dataclasses import asdict
from pathlib import Path

from . import __version__

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CHECK = 0, 2, 3, 4
COMMANDS = ("spectrum", "gap-scan", "scaling", "sweep", "protect", "duality", "lattice-dump")


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# config parsing
# --------------------------------------------------------------------------


def _fields(cfg: dict, defaults: dict) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return {**defaults, **cfg}


def _int(v, name, lo=None, hi=None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{name} must be an integer")
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"{name}={v} outside [{lo}, {hi}]")
    return v


def _float(v, name, positive=False, lo=None, hi=None) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{name} must be a finite number")
    v = float(v)
    if positive and v <= 0:
        raise ConfigError(f"{name} must be positive")
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"{name}={v} outside [{lo}, {hi}]")
    return v


def _params(d):
    from .model import ModelParams

    d = _fields(d or {}, {"U": 20.0, "g": 1.0, "xi": 1.0})
    return ModelParams(**{k: _float(v, k, positive=True) for k, v in d.items()})


def _schedule(s):
    from .model import Schedule

    if isinstance(s, dict):
        s = _fields(s, {"kind": "linear"})["kind"]
    if s not in ("linear", "trig-smooth"):
        raise ConfigError(f"unknown schedule {s!r}")
    return Schedule(s)


def _grid(g):
    import numpy as np

    if isinstance(g, int) and not isinstance(g, bool):
        return np.linspace(0.0, 1.0, _int(g, "grid", 3))
    if not isinstance(g, list) or len(g) < 3:
        raise ConfigError("grid must be a point count or a list of at least 3 taus")
    return np.array([_float(t, "grid point", lo=0.0, hi=1.0) for t in g])


def _lattice_size(v, name="L", allowed=(2, 3, 4, 5)) -> int:
    L = _int(v, name)
    if L not in allowed:
        raise ConfigError(f"{name}={L} not in {list(allowed)}")
    return L


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def fmt(x) -> str:
    """17 significant digits; integers and strings pass through."""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _header(command: str, config: dict, seed: int) -> dict:
    return {"artifact": {"name": "toricsim", "version": __version__}, "command": command, "seed": seed, "config": config}


def _jsonable(x):
    import numpy as np

    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def render_json(header: dict, result: dict) -> str:
    return json.dumps(_jsonable({**header, "result": result}), indent=2, sort_keys=False) + "\n"


def render_csv(header: dict, columns: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(f"# artifact: toricsim {__version__}\n")
    buf.write(f"# command: {header['command']} seed={header['seed']}\n")
    buf.write("# config: " + json.dumps(_jsonable(header["config"]), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _paths(out: str | None, command: str) -> tuple[Path, Path]:
    stem = Path(out) if out else Path(command)
    if stem.suffix in (".json", ".csv"):
        stem = stem.with_suffix("")
    return stem.with_suffix(".json"), stem.with_suffix(".csv")


# --------------------------------------------------------------------------
# commands; each returns (resolved config, result dict, optional csv, check passed)
# --------------------------------------------------------------------------


def cmd_spectrum(cfg: dict, seed: int):
    import numpy as np

    from .lattice import build_torus
    from .spectral import DEFAULT_TOL, SweepOperator, low_spectrum, sector_operator

    c = _fields(cfg, {
        "L": 2, "tau": 1.0, "params": None, "schedule": "linear", "m": 4,
        "winding": [0, 0], "space": "sector", "tol": DEFAULT_TOL, "degeneracy_tol": 1e-10,
    })
    L = _lattice_size(c["L"])
    tau = _float(c["tau"], "tau", lo=0.0, hi=1.0)
    m = _int(c["m"], "m", 1, 64)
    tol = _float(c["tol"], "tol", positive=True)
    dtol = _float(c["degeneracy_tol"], "degeneracy_tol", positive=True)
    params, sched = _params(c["params"]), _schedule(c["schedule"])
    if c["space"] not in ("sector", "full"):
        raise ConfigError("space must be 'sector' or 'full'")
    if c["space"] == "full" and L > 3:
        raise ConfigError(f"full space at L={L} is 2**{2 * L * L} states; use space='sector'")
    winding = c["winding"]
    if not (isinstance(winding, list) and len(winding) == 2 and all(w in (0, 1) for w in winding)):
        raise ConfigError("winding must be [i, j] with entries 0 or 1")
    lat = build_torus(L)
    if c["space"] == "full":
        op = SweepOperator(lat, params, sched).at(tau)
    else:
        op = sector_operator(lat, params, sched, tuple(winding))[1].at(tau)
    res = low_spectrum(op, min(m, op.dim), tol, seed=seed)
    e = res.eigenvalues
    resolved = {**c, "L": L, "tau": tau, "m": m, "params": asdict(params), "schedule": sched.kind}
    result = {
        "dim": op.dim,
        "eigenvalues": e,
        "residuals": res.residuals,
        "ground_degeneracy": int(np.sum(e - e[0] <= dtol)),
        "gap": float(e[1] - e[0]) if len(e) > 1 else None,
    }
    return resolved, result, None, True


def _scan_rows(scan):
    from .spectral import coupling_ratio

    return [
        [float(t), scan.schedule(float(t)), coupling_ratio(scan.params, scan.schedule, float(t)), float(g)]
        for t, g in zip(scan.taus, scan.gaps)
    ]


GAP_COLUMNS = ["tau", "f_tau", "lambda1_over_lambda2", "gap"]


def cmd_gap_scan(cfg: dict, seed: int):
    from .lattice import build_torus
    from .spectral import DEFAULT_TOL, gap_scan

    c = _fields(cfg, {"L": 2, "params": None, "schedule": "linear", "grid": 41, "tol": DEFAULT_TOL, "refine": True})
    L = _lattice_size(c["L"])
    params, sched, grid = _params(c["params"]), _schedule(c["schedule"]), _grid(c["grid"])
    scan = gap_scan(build_torus(L), params, sched, grid, _float(c["tol"], "tol", positive=True), refine=bool(c["refine"]))
    resolved = {**c, "L": L, "params": asdict(params), "schedule": sched.kind, "grid": grid.tolist()}
    return resolved, scan.to_dict(), (GAP_COLUMNS, _scan_rows(scan)), True


def loglog_slope(Ls, gaps):
    """Least-squares slope of ``log gap`` against ``log L`` and its standard error."""
    from scipy.stats import linregress

    if len(Ls) < 2:
        return None, None
    fit = linregress([math.log(L) for L in Ls], [math.log(g) for g in gaps])
    return float(fit.slope), (float(fit.stderr) if len(Ls) > 2 else None)


def cmd_scaling(cfg: dict, seed: int):
    from .lattice import build_torus
    from .spectral import DEFAULT_TOL, gap_scan

    c = _fields(cfg, {"Ls": [2, 3, 4], "params": None, "schedule": "linear", "grid": 41,
                      "tol": DEFAULT_TOL, "method": "sector"})
    if not isinstance(c["Ls"], list) or not c["Ls"]:
        raise ConfigError("Ls must be a non-empty list")
    Ls = sorted({_lattice_size(L, "Ls entry") for L in c["Ls"]})
    if c["method"] not in ("sector", "full"):
        raise ConfigError("method must be 'sector' or 'full'")
    if c["method"] == "full" and max(Ls) > 3:
        raise ConfigError(
            f"the full space at L={max(Ls)} has 2**{2 * max(Ls) ** 2} states; use method='sector', "
            "which works in one block of dimension 2**(L*L - 1)"
        )
    params, sched, grid = _params(c["params"]), _schedule(c["schedule"]), _grid(c["grid"])
    tol = _float(c["tol"], "tol", positive=True)
    scans = [gap_scan(build_torus(L), params, sched, grid, tol) for L in Ls]
    slope, stderr = loglog_slope(Ls, [s.gap_min for s in scans])
    rows = [[s.L, s.tau_min, s.gap_min, s.coupling_ratio] for s in scans]
    resolved = {**c, "Ls": Ls, "params": asdict(params), "schedule": sched.kind, "grid": grid.tolist()}
    result = {"minima": [s.to_dict() for s in scans], "slope": slope, "slope_stderr": stderr}
    return resolved, result, (["L", "tau_min", "gap_min", "lambda1_over_lambda2"], rows), True


SWEEP_COLUMNS = ["tau", "fidelity", "energy", "weight_00", "weight_01", "weight_10", "weight_11"]


def _sweep_config(c: dict):
    from .evolve import SweepConfig

    try:
        cfg = SweepConfig.from_dict(c)
    except (TypeError, ValueError, KeyError) as err:
        raise ConfigError(f"bad sweep config: {err}") from err
    _lattice_size(cfg.L, allowed=(2, 3, 4))
    return cfg


def cmd_sweep(cfg: dict, seed: int):
    from .evolve import propagate

    config = _sweep_config(cfg)
    res = propagate(config)
    result = res.to_dict()
    result.pop("wall_time", None)
    result.pop("config", None)
    rows = [[cp.tau, cp.fidelity, cp.energy] + [cp.weights[k] for k in ("00", "01", "10", "11")]
            for cp in res.checkpoints]
    return config.to_dict(), result, (SWEEP_COLUMNS, rows), True


def cmd_protect(cfg: dict, seed: int):
    from .evolve import default_checkpoints, perturbed_protection_experiment

    c = _fields(cfg, {"Ls": [2, 3], "strengths": [0.1, 0.25, 0.5], "params": {"U": 10.0}, "schedule": "trig-smooth",
                      "T": 10.0, "tol": 1e-9, "checkpoints": 21, "space": "symmetric"})
    if not isinstance(c["Ls"], list) or not c["Ls"]:
        raise ConfigError("Ls must be a non-empty list")
    Ls = [_lattice_size(L, "Ls entry", allowed=(2, 3)) for L in c["Ls"]]
    if not isinstance(c["strengths"], list) or not c["strengths"]:
        raise ConfigError("strengths must be a non-empty list")
    Vs = [_float(v, "strength", lo=0.0) for v in c["strengths"]]
    params, sched = _params(c["params"]), _schedule(c["schedule"])
    if c["space"] not in ("symmetric", "full"):
        raise ConfigError("space must be 'symmetric' or 'full'")
    cps = default_checkpoints(_int(c["checkpoints"], "checkpoints", 2)) if isinstance(c["checkpoints"], int) else tuple(
        _float(t, "checkpoint", lo=0.0, hi=1.0) for t in c["checkpoints"]
    )
    T, tol = _float(c["T"], "T", positive=True), _float(c["tol"], "tol", positive=True)
    rows = []
    for L in Ls:
        rows += perturbed_protection_experiment(L, Vs, params, sched, T, tol, cps, space=c["space"])
    resolved = {**c, "Ls": Ls, "strengths": Vs, "params": asdict(params), "schedule": sched.kind,
                "T": T, "tol": tol, "checkpoints": list(cps)}
    out = [
        {"L": r.L, "V": r.V, "bound": r.bound, "measured": r.measured,
         "status": "not claimed" if r.bound is None else ("pass" if r.passed else "fail"),
         "delta": r.delta, "max_norm_drift": r.max_norm_drift}
        for r in rows
    ]
    table = [[r["L"], r["V"], "" if r["bound"] is None else r["bound"], r["measured"], r["status"]] for r in out]
    ok = all(r["status"] != "fail" for r in out)
    return resolved, {"rows": out, "passed": ok}, (["L", "V", "bound", "leakage", "status"], table), ok


def cmd_duality(cfg: dict, seed: int):
    from .spectral import duality_spectrum_check

    c = _fields(cfg, {"L": 2, "lam1": 1.0, "lam2": 1.0, "m": 8, "tol": 1e-9})
    L = _lattice_size(c["L"], allowed=(2, 3))
    rep = duality_spectrum_check(
        L, _float(c["lam1"], "lam1", lo=0.0), _float(c["lam2"], "lam2", lo=0.0),
        _int(c["m"], "m", 1, 256), _float(c["tol"], "tol", positive=True),
    )
    resolved = {**c, "L": L}
    return resolved, rep.to_dict(), None, rep.passed


def cmd_lattice_dump(cfg: dict, seed: int):
    from .lattice import build_torus
    from .sector import WINDINGS, SectorLabel, enumerate_sector

    c = _fields(cfg, {"L": 2, "sectors": True, "first": 16})
    L = _lattice_size(c["L"], allowed=(2, 3, 4))
    first = _int(c["first"], "first", 0)
    lat = build_torus(L)
    result = {"lattice": lat.to_dict()}
    if c["sectors"]:
        result["sectors"] = [enumerate_sector(lat, SectorLabel(w)).to_dict(first) for w in WINDINGS]
    return {**c, "L": L, "first": first}, result, None, True


HANDLERS = {
    "spectrum": cmd_spectrum,
    "gap-scan": cmd_gap_scan,
    "scaling": cmd_scaling,
    "sweep": cmd_sweep,
    "protect": cmd_protect,
    "duality": cmd_duality,
    "lattice-dump": cmd_lattice_dump,
}


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _set_threads(n: int) -> None:
    # BLAS pools read these at load time; the matvec kernels are serial
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
        os.environ[var] = str(n)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="toricsim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"toricsim {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file (defaults when omitted)")
    p.add_argument("--out", help="output path stem; .json and, where tabular, .csv are written")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--seed", type=int, default=0)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.threads < 1 or not 0 <= args.seed < 2**64:
        print("error: --threads must be >= 1 and --seed a u64", file=sys.stderr)
        return EXIT_CONFIG
    _set_threads(args.threads)

    try:
        cfg = {}
        if args.config:
            with open(args.config) as fh:
                cfg = json.load(fh)
        from .model import ParameterError

        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                resolved, result, table, passed = HANDLERS[args.command](cfg, args.seed % 2**32)
        except ParameterError as err:
            raise ConfigError(str(err)) from err
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except (OSError, json.JSONDecodeError, ConfigError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, MemoryError, ValueError) as err:
        # solver, integrator and degeneracy failures all derive from these
        print(f"numerical failure: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_NUMERICAL

    header = _header(args.command, resolved, args.seed)
    json_path, csv_path = _paths(args.out, args.command)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(render_json(header, {**result, "passed": passed}))
    if table is not None:
        csv_path.write_text(render_csv(header, *table))
    print(json_path if table is None else f"{json_path} {csv_path}")
    return EXIT_OK if passed else EXIT_CHECK
