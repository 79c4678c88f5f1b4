"""Command-line front end.

Exit codes: 0 when every check passes, 1 when a check fails (the first
failing check is named on stderr), 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys

import numpy as np

from . import flows, spectral, verification
from .errors import ParameterError
from .geometry import COMPLEMENT, ObataFunction, make_model_domain

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# per-command defaults; a value of None means "required or derived"
DEFAULTS = {
    "eigen": {"n": None, "theta": None, "a": None, "bc": "robin", "R": None, "ell_max": 3},
    "flow": {"n": None, "m": 0, "theta": None, "a": None, "dt": 1e-3, "starts": 100, "L": 1.0},
    "boundary": {"n": None, "m": 0, "theta": None, "a": None, "samples": 100, "L": 1.0, "dt": 1e-3},
    "phi": {"theta": None, "a": None, "h": 1e-3, "rho_max": 2.0},
    "jet": {"theta": None, "a": None, "L": 1.0, "K": 8, "float": False},
    "reilly": {"n": None, "R": None},
    "verify-all": {"profile": "quick"},
    "sweep": {"sweep_command": "eigen", "bc": "robin", "ell_max": 3, "m": 0, "dt": 1e-3, "starts": 100,
              "L": 1.0},
}
COMMON = {"seed": 0, "output": None, "format": "json"}
INT_KEYS = {"n", "m", "ell_max", "starts", "samples", "K", "seed"}
FLOAT_KEYS = {"theta", "a", "R", "dt", "L", "h", "rho_max"}


def _add_angle(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--theta", type=float, help="angle in radians")
    g.add_argument("--a", type=float, help="Robin coefficient; theta = arccot(a)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="obata-robin", description="Numerical checks for the Obata equation with Robin data.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="flat key=value file; command-line flags take precedence")
        p.add_argument("--output", help="report path (default: stdout)")
        p.add_argument("--format", choices=["json", "csv"])
        p.add_argument("--seed", type=int)
        p.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                       help="override a check tolerance")

    p = sub.add_parser("eigen", help="smallest eigenvalue on a cap")
    p.add_argument("--n", type=int)
    _add_angle(p)
    p.add_argument("--bc", choices=["robin", "dirichlet", "neumann"])
    p.add_argument("--R", type=float, help="cap radius (default: pi/2 - theta, or pi/2)")
    p.add_argument("--ell-max", dest="ell_max", type=int)
    common(p)

    p = sub.add_parser("flow", help="normalized gradient flows in model domains")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    _add_angle(p)
    p.add_argument("--dt", type=float)
    p.add_argument("--starts", type=int)
    p.add_argument("--L", type=float)
    common(p)

    p = sub.add_parser("boundary", help="boundary identities and curvature of T^m(theta)")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    _add_angle(p)
    p.add_argument("--samples", type=int)
    p.add_argument("--L", type=float)
    p.add_argument("--dt", type=float)
    common(p)

    p = sub.add_parser("phi", help="radial graph equation for a < 0")
    _add_angle(p)
    p.add_argument("--h", type=float)
    p.add_argument("--rho-max", dest="rho_max", type=float)
    common(p)

    p = sub.add_parser("jet", help="boundary jet recursion and matching")
    _add_angle(p)
    p.add_argument("--L", type=float)
    p.add_argument("--K", type=int)
    p.add_argument("--float", action="store_const", const=True, help="floating point instead of exact")
    common(p)

    p = sub.add_parser("reilly", help="Reilly identity for radial functions on a cap")
    p.add_argument("--n", type=int)
    p.add_argument("--R", type=float)
    common(p)

    p = sub.add_parser("verify-all", help="run every check group")
    p.add_argument("--profile", choices=["quick", "full"])
    common(p)

    p = sub.add_parser("sweep", help="cross-product sweep to CSV")
    p.add_argument("--command", dest="sweep_command", choices=["eigen", "flow"])
    p.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2,...")
    p.add_argument("--bc", choices=["robin", "dirichlet", "neumann"])
    p.add_argument("--ell-max", dest="ell_max", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--starts", type=int)
    p.add_argument("--L", type=float)
    common(p)
    return parser


def _coerce(key: str, raw: str):
    try:
        if key in INT_KEYS:
            return int(raw)
        if key in FLOAT_KEYS:
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}")
    if key == "float":
        return raw.strip().lower() in ("1", "true", "yes")
    return raw


def read_config(path: str) -> dict:
    out = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    for num, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{num}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _parse_tol(items) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"bad tolerance {item!r}; expected NAME=VALUE")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise ConfigError(f"bad tolerance value {v!r}")
    return out


def resolve(args) -> tuple[dict, dict]:
    """Merge defaults, config file and flags into (parameters, tolerance overrides)."""
    cmd = args.command
    allowed = {**DEFAULTS[cmd], **COMMON}
    params = dict(allowed)
    tol = {}
    grid = []
    if args.config:
        for k, v in read_config(args.config).items():
            if k.startswith("tol."):
                try:
                    tol[k[4:]] = float(v)
                except ValueError:
                    raise ConfigError(f"bad tolerance value {v!r}")
            elif k == "grid" and cmd == "sweep":
                grid.extend(x.strip() for x in v.split(";") if x.strip())
            elif k in allowed:
                params[k] = _coerce(k, v)
            else:
                raise ConfigError(f"unknown config key {k!r} for {cmd}")
        if params.get("theta") is not None and params.get("a") is not None:
            raise ConfigError("theta and a are mutually exclusive")
    for k in allowed:
        v = getattr(args, k, None)
        if v is not None:
            if k in ("theta", "a"):
                params["theta"] = params["a"] = None
            params[k] = v
    tol.update(_parse_tol(args.tol))
    for k, v in tol.items():
        if not v > 0:
            raise ConfigError(f"tolerance {k!r} must be positive")
    if cmd == "sweep":
        params["grid"] = grid + list(args.grid)
    if params.get("a") is not None:
        params["theta"] = math.atan2(1.0, params["a"])
    if "theta" in params and params["theta"] is not None:
        params["a"] = 1.0 / math.tan(params["theta"])
    return params, tol


def _need(params, *keys):
    for k in keys:
        if params.get(k) is None:
            raise ConfigError(f"missing required parameter {k!r}")


def _clean(x):
    if isinstance(x, float):
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def execute(cmd: str, params: dict, tol: dict):
    p = params
    if cmd == "eigen":
        _need(p, "n")
        if p["bc"] == "robin":
            _need(p, "theta")
        return verification.run_eigen(p["n"], p["bc"], p["theta"], p["a"] if p["bc"] == "robin" else None,
                                      p["R"], p["ell_max"], tol)
    if cmd == "flow":
        _need(p, "n", "theta")
        return verification.run_flow(p["n"], p["m"], p["theta"], p["dt"], p["starts"], p["seed"], p["L"], tol)
    if cmd == "boundary":
        _need(p, "n", "theta")
        return verification.run_boundary(p["n"], p["m"], p["theta"], p["samples"], p["seed"], p["L"], p["dt"], tol)
    if cmd == "phi":
        _need(p, "theta")
        return verification.run_phi(p["theta"], p["h"], p["rho_max"], tol)
    if cmd == "jet":
        _need(p, "theta")
        return verification.run_jet(p["theta"], p["L"], p["K"], not p["float"], tol)
    if cmd == "reilly":
        _need(p, "n", "R")
        return verification.run_reilly(p["n"], p["R"], tol)
    if cmd == "verify-all":
        return verification.run_all(p["profile"], p["seed"], tol)
    raise ConfigError(f"unknown command {cmd!r}")


def render_report(cmd: str, params: dict, checks, data, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "value", "tolerance", "pass"])
        for c in checks:
            w.writerow([c.name, repr(c.value), repr(c.tolerance), str(c.passed).lower()])
        return buf.getvalue()
    failing = next((c.name for c in checks if not c.passed), None)
    report = {
        "command": cmd,
        "parameters": {k: v for k, v in params.items() if k not in ("output", "format", "config")},
        "data": data,
        "checks": [c.to_dict() for c in checks],
        "pass": failing is None,
        "first_failure": failing,
    }
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


# sweeps --------------------------------------------------------------------

SWEEP_KEYS = {"eigen": ("n", "theta", "a", "bc", "R"), "flow": ("n", "m", "theta", "a", "seed")}


def parse_grid(specs, command: str) -> list[tuple[str, list]]:
    out, seen = [], set()
    for spec in specs:
        if "=" not in spec:
            raise ConfigError(f"bad grid entry {spec!r}; expected KEY=V1,V2,...")
        key, vals = spec.split("=", 1)
        key = key.strip()
        if key not in SWEEP_KEYS[command]:
            raise ConfigError(f"cannot sweep {key!r} for {command}")
        if key in seen:
            raise ConfigError(f"grid key {key!r} given twice")
        seen.add(key)
        out.append((key, [_coerce(key, v.strip()) for v in vals.split(",") if v.strip()]))
    if "theta" in seen and "a" in seen:
        raise ConfigError("theta and a are mutually exclusive")
    return out


def sweep(params: dict, tol: dict) -> tuple[str, bool]:
    command = params["sweep_command"]
    grid = parse_grid(params["grid"], command)
    tol = verification.merged_tolerances(tol)
    keys = [k for k, _ in grid]
    cells = list(itertools.product(*[v for _, v in grid])) if grid else []
    buf = io.StringIO()
    buf.write(f"# seed={params['seed']}\n")
    w = csv.writer(buf, lineterminator="\n")
    ok = True
    if command == "eigen":
        w.writerow(["n", "theta", "a", "R", "ell", "bc", "xi", "bc_residual", "ode_residual",
                    "value", "tolerance", "pass"])
        rows = []
        for cell in cells:
            c = {**params, **dict(zip(keys, cell))}
            if "a" in keys:
                c["theta"] = math.atan2(1.0, c["a"])
            _need(c, "n")
            bc = c["bc"]
            if bc == "robin":
                _need(c, "theta")
                if not 0.0 < c["theta"] < math.pi / 2:
                    raise ParameterError("the Robin cap needs theta in (0, pi/2)")
                a = 1.0 / math.tan(c["theta"])
                R = c.get("R") or math.pi / 2 - c["theta"]
            else:
                a, R = None, c.get("R") or math.pi / 2
            rows.append((c, bc, a, R))
        results = spectral.first_eigenvalue_scans([(c["n"], R, bc, a) for c, bc, a, R in rows],
                                                  params["ell_max"]) if rows else []
        for (c, bc, a, R), res in zip(rows, results):
            err = abs(res.xi - c["n"])
            good = err <= tol["eigen.xi_minus_n"]
            ok &= good
            w.writerow([c["n"], repr(c.get("theta")), repr(a), repr(R), res.ell, bc, repr(res.xi),
                        repr(res.bc_residual), repr(res.ode_residual), repr(err),
                        repr(tol["eigen.xi_minus_n"]), str(good).lower()])
    else:
        w.writerow(["n", "m", "theta", "a", "seed", "start", "f_start", "terminal_event", "terminal_time",
                    "value", "tolerance", "pass"])
        for cell in cells:
            c = {**params, **dict(zip(keys, cell))}
            if "a" in keys:
                c["theta"] = math.atan2(1.0, c["a"])
            _need(c, "n", "theta")
            if not 0.0 < c["theta"] < math.pi / 2:
                raise ParameterError("flow sweeps run on a > 0 model domains")
            f = ObataFunction.axial(c["n"], c["L"])
            domain = make_model_domain(c["n"], c["m"], c["theta"], COMPLEMENT)
            pts = verification._random_inside(domain, np.random.default_rng(c["seed"]), c["starts"], f)
            traces = flows.integrate_flows(f, pts, domain, c["dt"])
            for i, tr in enumerate(traces):
                d = flows.conservation_defect(tr, f)
                good = tr.terminal_event == flows.INTERIOR_MAX and d <= tol["flow.conservation"]
                ok &= good
                w.writerow([c["n"], c["m"], repr(c["theta"]), repr(1.0 / math.tan(c["theta"])), c["seed"], i,
                            repr(float(tr.f[0])), tr.terminal_event, repr(tr.terminal_time), repr(d),
                            repr(tol["flow.conservation"]), str(good).lower()])
    return buf.getvalue(), ok


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        params, tol = resolve(args)
        if args.command == "sweep":
            text, ok = sweep(params, tol)
            _emit(text, params["output"])
            if not ok:
                print("FAIL: sweep has failing rows", file=sys.stderr)
            return EXIT_OK if ok else EXIT_FAIL
        checks, data = execute(args.command, params, tol)
    except (ConfigError, ParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # solver breakdowns count as failed verification
        print(f"FAIL: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit(render_report(args.command, params, checks, data, params["format"]), params["output"])
    failing = next((c for c in checks if not c.passed), None)
    if failing is not None:
        print(f"FAIL: {failing.name} (value {failing.value!r}, tolerance {failing.tolerance!r})", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
