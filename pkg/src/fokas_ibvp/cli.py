"""Command-line front end.

One JSON file fully determines a run::

    python3 -m fokas_ibvp --config configs/example1_sweep.json --out results/

Commands are ``direct``, ``control``, ``roots``, ``verify`` and ``sweep``.
Every command writes CSV files with a header row into ``--out``; the column
types are listed in :data:`CSV_COLUMNS`. Exit status is 0 on success, 2 for
an unreadable or invalid config and 3 for a numerical failure.

``FOKAS_IBVP_THREADS`` sets the number of worker threads used by ``sweep``.
"""

from __future__ import annotations

import argparse
import copy
import csv
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from .contour import PROFILES, get_profile, with_profile
from .control import (
    ControlProblem,
    assemble_system,
    reconstruct_control,
    select_delta,
    synthesize,
)
from .direct_solver import (
    BRAESTER_DATA,
    BRAESTER_PARAMS,
    BCKind,
    IbvpSpec,
    braester_spec,
    philip_spec,
    solve_grid,
)
from .errors import FokasError, InvalidSpec
from .spectral import NEUMANN, ProblemParams, find_roots
from .transforms import (
    Constant,
    ExpSine,
    FullSine,
    HalfCosine,
    PiecewiseStep,
    SineSeries,
    Tabulated,
    Zero,
    constant_signal,
)

log = logging.getLogger("fokas_ibvp")

THREADS_ENV = "FOKAS_IBVP_THREADS"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_robin = {"oneOf": [{"type": "number", "minimum": 0}, {"const": "neumann"}]}


def _closed(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_initial = {
    "oneOf": [
        _closed({"type": {"const": "step"}, "height": _num, "split": _pos}, ["type"]),
        _closed({"type": {"const": "half_cosine"}, "amplitude": _num}, ["type"]),
        _closed({"type": {"const": "full_sine"}, "amplitude": _num}, ["type"]),
        _closed({"type": {"const": "constant"}, "value": _num}, ["type"]),
        _closed({"type": {"const": "exp_sine"}, "rate": _num, "mode": {"type": "integer", "minimum": 1},
                 "amplitude": _num}, ["type"]),
        _closed({"type": {"const": "tabulated"}, "xs": {"type": "array", "items": _num, "minItems": 2},
                 "values": {"type": "array", "items": _num, "minItems": 2}}, ["type", "xs", "values"]),
    ]
}

_signal = {
    "oneOf": [
        _closed({"type": {"const": "zero"}}, ["type"]),
        _closed({"type": {"const": "constant"}, "value": _num}, ["type", "value"]),
        _closed({"type": {"const": "sine_series"}, "coeffs": {"type": "array", "items": _num, "minItems": 1},
                 "tau": {"type": "number", "minimum": 0}, "T": _pos}, ["type", "coeffs", "T"]),
    ]
}

_profile_fields = {f.name: ({"type": "string"} if f.type == "str" else
                            {"type": "boolean"} if f.type == "bool" else
                            {"type": "integer"} if f.type == "int" else _num)
                   for f in dataclasses.fields(PROFILES["default"]) if f.name != "name"}

_int_or_list = {"oneOf": [{"type": "integer", "minimum": 1},
                          {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}]}
_pos_or_list = {"oneOf": [_pos, {"type": "array", "items": _pos, "minItems": 1}]}

CONFIG_SCHEMA = _closed({
    "command": {"enum": ["direct", "control", "roots", "verify", "sweep"]},
    "problem": _closed({
        "preset": {"enum": ["braester", "philip"]},
        "params": _closed({"D0": _pos, "K0": {"type": "number", "minimum": 0}, "L": _pos,
                           "alpha": _robin, "beta": _robin}, ["D0", "K0", "L"]),
        "bc": {"enum": [k.value for k in BCKind]},
        "initial": _initial,
        "left": _signal,
        "right": _signal,
        "q": _num, "theta0": _num, "thetas": _num, "R": _num, "L": _pos,
    }),
    "numerics": _closed({"profile": {"enum": sorted(PROFILES)}, "overrides": _closed(_profile_fields)}),
    "grid": _closed({
        "xs": {"oneOf": [{"type": "array", "items": _num, "minItems": 1},
                         _closed({"n": {"type": "integer", "minimum": 1}}, ["n"])]},
        "ts": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "time_unit": {"enum": ["s", "min"]},
        "signal_points": {"type": "integer", "minimum": 2},
    }),
    "control": _closed({
        "T": _pos_or_list,
        "N": _int_or_list,
        "tau": {"type": "number", "minimum": 0},
        "delta": {"oneOf": [_pos, {"enum": ["exact", "auto"]}]},
        "target_error": _pos,
        "precision": {"enum": ["auto", "double", "extended"]},
    }),
    "output": _closed({"prefix": {"type": "string", "pattern": "^[A-Za-z0-9_.-]*$"}}),
}, ["command", "problem"])

# column -> python type, for every CSV the CLI writes
CSV_COLUMNS = {
    "direct": {"x": float, "t": float, "theta": float, "converged": int, "imag_residual": float},
    "verify": {"x": float, "t": float, "kind": str, "theta": float, "residual": float, "tolerance": float,
               "ok": int},
    "roots": {"sigma": float, "rho": float, "predicted_count": int, "method": str, "ambiguous": int,
              "index": int, "re": float, "im": float},
    "control_summary": {"N": int, "T": float, "tau": float, "control_norm": float, "residual_norm": float,
                        "verified_error": float, "regularized": int, "delta": float,
                        "condition_estimate": float, "method": str},
    "control_coeffs": {"n": int, "coeff": float},
    "control_signal": {"t": float, "v": float},
    "control_profile": {"x": float, "theta_T": float},
    "sweep": {"N": int, "T": float, "control_norm": float, "verified_error": float,
              "condition_estimate": float, "method": str, "residual_norm": float},
}


class ConfigError(Exception):
    pass


# --------------------------------------------------------------------------
# config


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc


def _robin_value(v):
    return NEUMANN if v == "neumann" else v


def build_params(block) -> ProblemParams:
    return ProblemParams(block["D0"], block["K0"], block["L"],
                         _robin_value(block.get("alpha", 0.0)), _robin_value(block.get("beta", 0.0)))


def build_initial(block):
    if block is None:
        return Constant(0.0)
    kw = {k: v for k, v in block.items() if k != "type"}
    kind = block["type"]
    if kind == "tabulated":
        return Tabulated(tuple(kw["xs"]), tuple(kw["values"]))
    return {"step": PiecewiseStep, "half_cosine": HalfCosine, "full_sine": FullSine,
            "constant": Constant, "exp_sine": ExpSine}[kind](**kw)


def build_signal(block):
    if block is None or block["type"] == "zero":
        return Zero()
    if block["type"] == "constant":
        return constant_signal(block["value"])
    return SineSeries(tuple(block["coeffs"]), block.get("tau", 0.0), block["T"])


def build_profile(cfg, override: str | None = None):
    num = cfg.get("numerics", {})
    prof = get_profile(override or num.get("profile", "default"))
    if num.get("overrides"):
        prof = with_profile(prof, **num["overrides"])
    return prof


def _preset(cfg) -> str | None:
    return cfg["problem"].get("preset")


def build_spec(cfg) -> IbvpSpec:
    prob = cfg["problem"]
    preset = _preset(cfg)
    if preset == "braester":
        params = ProblemParams(**BRAESTER_PARAMS)
        if "params" in prob:
            params = build_params(prob["params"])
        data = {k: prob.get(k, v) for k, v in BRAESTER_DATA.items()}
        return braester_spec(data["q"], data["theta0"], data["thetas"], params)
    if preset == "philip":
        if "R" not in prob:
            raise ConfigError("philip preset needs problem.R")
        if "params" in prob:
            raise ConfigError("philip preset fixes D0, K0, alpha, beta; set problem.L only")
        return philip_spec(prob["R"], prob.get("L", 0.05))
    if "params" not in prob:
        raise ConfigError("problem.params is required without a preset")
    params = build_params(prob["params"])
    kind = BCKind(prob.get("bc", "RR"))
    return IbvpSpec(params, build_initial(prob.get("initial")), build_signal(prob.get("left")),
                    build_signal(prob.get("right")), kind)


def _time_scale(cfg) -> float:
    unit = cfg.get("grid", {}).get("time_unit", "min" if _preset(cfg) == "braester" else "s")
    return 60.0 if unit == "min" else 1.0


def build_grid(cfg, L: float):
    grid = cfg.get("grid", {})
    if "xs" not in grid or "ts" not in grid:
        raise ConfigError(f"{cfg['command']} needs grid.xs and grid.ts")
    xs = grid["xs"]
    xs = np.linspace(0.0, L, xs["n"]) if isinstance(xs, dict) else np.asarray(xs, dtype=float)
    if np.any(xs < 0) or np.any(xs > L):
        raise ConfigError(f"grid.xs must lie in [0, {L}]")
    ts = np.asarray(grid["ts"], dtype=float)
    return xs, ts


def _scalar(value, name):
    if isinstance(value, list):
        if len(value) != 1:
            raise ConfigError(f"control.{name} must be a single value for this command")
        return value[0]
    return value


def _as_list(value):
    return value if isinstance(value, list) else [value]


def build_control(cfg, T=None, N=None) -> ControlProblem:
    prob, ctl = cfg["problem"], cfg.get("control")
    if _preset(cfg) is not None:
        raise ConfigError("presets are direct problems; control needs explicit params")
    if ctl is None or "T" not in ctl or "N" not in ctl:
        raise ConfigError(f"{cfg['command']} needs control.T and control.N")
    if "params" not in prob:
        raise ConfigError("problem.params is required")
    T = _scalar(ctl["T"], "T") if T is None else T
    N = _scalar(ctl["N"], "N") if N is None else N
    return ControlProblem(build_params(prob["params"]), build_initial(prob.get("initial")), float(T), int(N),
                          float(ctl.get("tau", 0.0)))


# --------------------------------------------------------------------------
# output


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v) + 0.0, ".17g")  # no negative zero
    return "" if v is None else str(v)


def write_csv(path: Path, kind: str, rows) -> Path:
    cols = list(CSV_COLUMNS[kind])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in cols])
    return path


def read_csv(path, kind: str) -> list[dict]:
    """Parse a CSV written by :func:`write_csv`; empty cells become None."""
    types = CSV_COLUMNS[kind]
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(types):
            raise ValueError(f"{path}: header {reader.fieldnames} does not match {kind}")
        return [{k: (None if v == "" else types[k](v)) for k, v in row.items()} for row in reader]


# --------------------------------------------------------------------------
# commands


def cmd_direct(cfg, out: Path, prefix: str, profile) -> int:
    spec = build_spec(cfg)
    xs, ts_user = build_grid(cfg, spec.params.L)
    scale = _time_scale(cfg)
    grid = solve_grid(spec, xs, ts_user * scale, profile)
    offset = cfg["problem"].get("theta0", BRAESTER_DATA["theta0"]) if _preset(cfg) == "braester" else 0.0
    rows = []
    for i, t in enumerate(ts_user):
        for j, x in enumerate(xs):
            rows.append(dict(x=x, t=t, theta=grid.theta[i, j] + offset, converged=bool(grid.converged[i, j]),
                             imag_residual=grid.imag_residual[i, j]))
    write_csv(out / f"{prefix}direct.csv", "direct", rows)
    bad = [(r["x"], r["t"]) for r in rows if not r["converged"]]
    for x, t in bad:
        print(f"not converged at x={x:g}, t={t:g}", file=sys.stderr)
    return EXIT_NUMERIC if bad else EXIT_OK


def _bc_tolerance(gamma) -> float:
    return 1e-6 if gamma == 0 else 1e-4


def cmd_verify(cfg, out: Path, prefix: str, profile, h: float = 1e-3) -> int:
    """Finite-difference PDE and boundary residuals of a direct solution."""
    spec = build_spec(cfg)
    p = spec.params
    xs, ts_user = build_grid(cfg, p.L)
    ts = ts_user * _time_scale(cfg)
    if np.any(ts <= h):
        raise ConfigError(f"verify needs every t > {h}")
    inner = xs[(xs > h) & (xs < p.L - h)]
    rows = []
    for t_user, t in zip(ts_user, ts):
        g = solve_grid(spec, np.concatenate([inner - h, inner, inner + h]), [t - h, t, t + h], profile)
        n = inner.size
        left, mid, right = g.theta[1, :n], g.theta[1, n:2 * n], g.theta[1, 2 * n:]
        th_t = (g.theta[2, n:2 * n] - g.theta[0, n:2 * n]) / (2 * h)
        th_x = (right - left) / (2 * h)
        th_xx = (right - 2 * mid + left) / h ** 2
        res = th_t + p.K0 * th_x - p.D0 * th_xx
        for x, th, r in zip(inner, mid, res):
            rows.append(dict(x=x, t=t_user, kind="pde", theta=th, residual=abs(r), tolerance=1e-3))
        # one-sided second-order derivatives at the ends
        ends = solve_grid(spec, [0.0, h, 2 * h, p.L - 2 * h, p.L - h, p.L], [t], profile).theta[0]
        d0 = (-3 * ends[0] + 4 * ends[1] - ends[2]) / (2 * h)
        dL = (3 * ends[5] - 4 * ends[4] + ends[3]) / (2 * h)
        if spec.bc_kind is BCKind.NEUMANN_NEUMANN:
            checks = [(0.0, ends[0], d0 - spec.left.value(t), 1e-4), (p.L, ends[5], dL - spec.right.value(t), 1e-4)]
        else:
            checks = [(0.0, ends[0], ends[0] - p.alpha * d0 - spec.left.value(t), _bc_tolerance(p.alpha)),
                      (p.L, ends[5], ends[5] - p.beta * dL - spec.right.value(t), _bc_tolerance(p.beta))]
        for (x, th, r, tol), kind in zip(checks, ("left_bc", "right_bc")):
            rows.append(dict(x=x, t=t_user, kind=kind, theta=th, residual=abs(r), tolerance=tol))
    for r in rows:
        r["ok"] = r["residual"] <= r["tolerance"]
    write_csv(out / f"{prefix}verify.csv", "verify", rows)
    bad = [r for r in rows if not r["ok"]]
    for r in bad:
        print(f"{r['kind']} residual {r['residual']:.3e} > {r['tolerance']:.0e} at x={r['x']:g}, t={r['t']:g}",
              file=sys.stderr)
    return EXIT_NUMERIC if bad else EXIT_OK


def cmd_roots(cfg, out: Path, prefix: str, profile) -> int:
    spec = build_spec(cfg)
    rep = find_roots(spec.params)
    base = dict(sigma=rep.sigma, rho=rep.rho, predicted_count=rep.predicted_count, method=rep.method,
                ambiguous=rep.ambiguous)
    rows = [dict(base, index=k, re=z.real, im=z.imag) for k, z in enumerate(rep.roots)] or [base]
    write_csv(out / f"{prefix}roots.csv", "roots", rows)
    return EXIT_OK


def _solve_control(cfg, problem, profile):
    ctl = cfg["control"]
    delta = ctl.get("delta", "exact")
    precision = ctl.get("precision", "auto")
    if delta == "exact":
        return synthesize(problem, profile=profile, precision=precision)
    system = assemble_system(problem, profile)
    if delta == "auto":
        if "target_error" not in ctl:
            raise ConfigError("delta = 'auto' needs control.target_error")
        delta = select_delta(problem, ctl["target_error"], system=system, profile=profile)
    return synthesize(problem, delta=delta, profile=profile, system=system)


def _summary_row(problem, sol):
    return dict(N=problem.N, T=problem.T, tau=problem.tau, control_norm=sol.control_norm,
                residual_norm=sol.residual_norm, verified_error=sol.verified_error,
                regularized=sol.regularized, delta=sol.delta, condition_estimate=sol.condition_estimate,
                method=sol.method)


def cmd_control(cfg, out: Path, prefix: str, profile) -> int:
    problem = build_control(cfg)
    sol = _solve_control(cfg, problem, profile)
    write_csv(out / f"{prefix}control_summary.csv", "control_summary", [_summary_row(problem, sol)])
    write_csv(out / f"{prefix}control_coeffs.csv", "control_coeffs",
              [dict(n=n, coeff=c) for n, c in enumerate(sol.coeffs, start=1)])
    npts = cfg.get("grid", {}).get("signal_points", 201)
    ts = np.linspace(0.0, problem.T, npts)
    v = reconstruct_control(sol.coeffs, ts, problem.tau, problem.T)
    write_csv(out / f"{prefix}control_signal.csv", "control_signal", [dict(t=t, v=vv) for t, vv in zip(ts, v)])
    fp = sol.final_profile
    write_csv(out / f"{prefix}control_profile.csv", "control_profile",
              [dict(x=x, theta_T=th) for x, th in zip(fp.xs, fp.theta[0])])
    if not fp.all_converged:
        print("final-time profile has unconverged entries", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def cmd_sweep(cfg, out: Path, prefix: str, profile) -> int:
    ctl = cfg.get("control") or {}
    if "T" not in ctl or "N" not in ctl:
        raise ConfigError("sweep needs control.T and control.N")
    cells = [(N, T) for N in _as_list(ctl["N"]) for T in _as_list(ctl["T"])]
    problems = [build_control(cfg, T=T, N=N) for N, T in cells]

    def run(problem):
        try:
            return _solve_control(cfg, problem, profile), None
        except FokasError as exc:
            return None, exc

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(run, problems))
    rows, failed = [], []
    for problem, (sol, exc) in zip(problems, results):
        if sol is None:
            failed.append((problem, exc))
            rows.append(dict(N=problem.N, T=problem.T, method="failed"))
            continue
        rows.append(dict(N=problem.N, T=problem.T, control_norm=sol.control_norm,
                         verified_error=sol.verified_error, condition_estimate=sol.condition_estimate,
                         method=sol.method, residual_norm=sol.residual_norm))
    write_csv(out / f"{prefix}sweep.csv", "sweep", rows)
    for problem, exc in failed:
        print(f"N={problem.N}, T={problem.T:g}: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_NUMERIC if failed else EXIT_OK


COMMANDS = {"direct": cmd_direct, "control": cmd_control, "roots": cmd_roots, "verify": cmd_verify,
            "sweep": cmd_sweep}


def run(cfg: dict, out, profile_name: str | None = None) -> int:
    """Execute a validated config; returns the exit status."""
    cfg = copy.deepcopy(cfg)
    try:
        validate_config(cfg)
        profile = build_profile(cfg, profile_name)
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        prefix = cfg.get("output", {}).get("prefix", "")
        if prefix and not prefix.endswith(("_", "-", ".")):
            prefix += "_"
        return COMMANDS[cfg["command"]](cfg, out, prefix, profile)
    except (ConfigError, InvalidSpec, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FokasError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fokas-ibvp", description=__doc__.split("\n")[0])
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default=".", help="output directory (created if missing)")
    ap.add_argument("--profile", choices=["fast", "default", "paper"],
                    help="accuracy profile; overrides numerics.profile")
    ap.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, args.out, args.profile)


if __name__ == "__main__":
    sys.exit(main())
