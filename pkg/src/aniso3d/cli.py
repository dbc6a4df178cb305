"""Command-line front end.

Every command writes CSV (numbers to 9 significant digits) whose first line
is ``# manifest: {...}``, a JSON record of the command and its fully
resolved configuration.  Passing that output file back through
``--config`` replays the run.  Explicit flags override values read from a
config file.

Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .analytic import PathLossModel, homogeneous_mass, pfc_homogeneous
from .boundary import Domain, OrientationGrid, corner_mass, min_corner_gain_integral, min_multisector_corner_mass
from .gain import (
    Cardioid,
    Donut,
    Isotropic,
    NarrowLobe,
    UnsupportedClosedForm,
    pattern_from_dict,
    s_functional_closed,
    s_functional_quadrature,
    verify_normalization,
)
from .mcsim import SimConfig, pattern_label, run_ensemble, sweep_eta
from .specfn import DomainError, QuadratureSpec
from .thomson import ThomsonConvergenceError, thomson_solve, write_thomson_file

__all__ = ["RunManifest", "UsageError", "run", "main", "CSV_HEADERS"]

MANIFEST_PREFIX = "# manifest: "

CSV_HEADERS = {
    "validate-gains": ["pattern", "normalization", "target", "rel_error", "pass"],
    "s-table": ["eta", "pattern", "s_closed", "s_quadrature"],
    "mass": ["eta", "beta", "pattern_tx", "pattern_rx", "mass", "rho", "mean_degree", "n_nodes", "p_fc"],
    "simulate": ["eta", "pattern", "mean_degree_over_rho", "stderr", "analytic_M", "p_fc"],
    "sweep-eta": ["eta", "pattern", "mean_degree_over_rho", "stderr", "analytic_M", "p_fc"],
    "corner-min": ["eta", "beta", "pattern", "partner", "truncation", "min_corner_integral",
                   "corner_mass", "theta", "phi", "vx", "vy", "vz"],
    "multisector": ["n", "lambda", "eta", "beta", "cube_side", "euler_step", "min_M_C", "blind_spot",
                    "margin", "euler_z1", "euler_y", "euler_z2"],
    "thomson": ["n", "energy", "grad_norm", "iterations", "restarts", "seed"],
}

SWEEP_PATTERNS = [NarrowLobe(1.0), Donut(8.0), Cardioid(1.0), Isotropic()]


class UsageError(Exception):
    """Bad flag, malformed JSON or out-of-range parameter (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.1.0"


@dataclass(frozen=True)
class RunManifest:
    command: str
    config: dict[str, Any]
    version: str = field(default_factory=_version)
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        d = json.loads(text)
        return cls(d["command"], d["config"], d["version"], d["timestamp"])


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "yes" if x else "no"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x) + 0.0, ".9g")
    if x is None:
        return ""
    return str(x)


# ---------------------------------------------------------------- config helpers


def _json_arg(text: str, name: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{name}: malformed JSON ({exc.msg} at char {exc.pos})") from None


def _pattern(obj, name: str):
    try:
        return pattern_from_dict(obj)
    except KeyError as exc:
        raise UsageError(f"{name}: missing field {exc.args[0]!r}") from None
    except (DomainError, TypeError, ValueError) as exc:
        raise UsageError(f"{name}: {exc}") from None


def _positive(cfg, key, integer=False):
    v = cfg[key]
    ok = isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0 and math.isfinite(v)
    if integer:
        ok = ok and float(v).is_integer()
    if not ok:
        kind = "positive integer" if integer else "positive number"
        raise UsageError(f"{key}: must be a {kind}, got {v!r}")
    return int(v) if integer else float(v)


def _spec(cfg) -> QuadratureSpec:
    try:
        return QuadratureSpec(float(cfg["abs_tol"]), float(cfg["rel_tol"]), int(cfg["max_subdivisions"]))
    except DomainError as exc:
        raise UsageError(f"abs_tol/rel_tol/max_subdivisions: {exc}") from None


def _model(cfg) -> PathLossModel:
    return PathLossModel(_positive(cfg, "eta"), _positive(cfg, "beta"))


def load_config_file(path: str) -> dict[str, Any]:
    """A JSON object, a manifest JSON, or any output file carrying a manifest line."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc.strerror}") from None
    for line in text.splitlines():
        if line.startswith(MANIFEST_PREFIX):
            return RunManifest.from_json(line[len(MANIFEST_PREFIX):]).config
    obj = _json_arg(text, "--config")
    if not isinstance(obj, dict):
        raise UsageError("--config: expected a JSON object")
    if "command" in obj and "config" in obj:
        return obj["config"]
    return obj


_QUAD_DEFAULTS = {"abs_tol": 1e-10, "rel_tol": 1e-9, "max_subdivisions": 2000}
_SIM_DEFAULTS = {
    "domain": {"kind": "cuboid", "lengths": [10.0, 10.0, 10.0], "periodic": False},
    "n_nodes": 100,
    "eta": 2.0,
    "beta": 10.0,
    "pattern": {"type": "isotropic"},
    "trials": 100,
    "master_seed": 0,
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "validate-gains": {"pattern": None, "check_tol": 1e-7, **_QUAD_DEFAULTS},
    "s-table": {
        "eta_min": 2.0, "eta_max": 6.0, "steps": 9,
        "patterns": [p.to_dict() for p in SWEEP_PATTERNS], **_QUAD_DEFAULTS,
    },
    "mass": {
        "pattern_tx": {"type": "isotropic"}, "pattern_rx": None, "eta": 2.0, "beta": 1.0,
        "rho": 1.0, "n_nodes": 100, **_QUAD_DEFAULTS,
    },
    "simulate": dict(_SIM_DEFAULTS),
    "sweep-eta": {
        **_SIM_DEFAULTS,
        "eta_values": [float(v) for v in np.linspace(2.0, 6.0, 9)],
        "patterns": [p.to_dict() for p in SWEEP_PATTERNS],
    },
    "corner-min": {
        "pattern": None, "partner": None, "eta": 2.0, "beta": 1.0, "truncation": None,
        "step_theta": 5.0, "step_phi": 5.0, **_QUAD_DEFAULTS,
    },
    "multisector": {
        "n_min": None, "n_max": None, "lambda": math.sqrt(30 * math.pi) / 3, "eta": 2.0, "beta": 1.0,
        "cube_side": 1.0, "euler_step": 2.0, "refine": 4, "thomson_restarts": 20, "thomson_seed": 0,
    },
    "thomson": {"n": None, "restarts": 20, "seed": 0, "tol": 1e-6},
}


# ---------------------------------------------------------------- commands

Rows = list[list[Any]]


def cmd_validate_gains(cfg) -> tuple[Rows, list[str], int]:
    if cfg["pattern"] is None:
        raise UsageError("pattern: required (--pattern '<json>')")
    pat = _pattern(cfg["pattern"], "pattern")
    total = verify_normalization(pat, _spec(cfg))
    err = abs(total - 4 * math.pi) / (4 * math.pi)
    ok = err <= float(cfg["check_tol"])
    return [[pattern_label(pat), total, 4 * math.pi, err, ok]], [], 0 if ok else 1


def cmd_s_table(cfg):
    steps = _positive(cfg, "steps", integer=True)
    lo, hi = _positive(cfg, "eta_min"), _positive(cfg, "eta_max")
    if hi < lo:
        raise UsageError("eta_max: must be >= eta_min")
    if not isinstance(cfg["patterns"], list) or not cfg["patterns"]:
        raise UsageError("patterns: expected a non-empty JSON list")
    pats = [_pattern(p, f"patterns[{k}]") for k, p in enumerate(cfg["patterns"])]
    spec = _spec(cfg)
    rows = []
    for eta in np.linspace(lo, hi, steps):
        for p in pats:
            try:
                closed = s_functional_closed(p, float(eta))
            except UnsupportedClosedForm:
                closed = None
            rows.append([float(eta), pattern_label(p), closed, s_functional_quadrature(p, float(eta), spec)])
    return rows, [], 0


def cmd_mass(cfg):
    tx = _pattern(cfg["pattern_tx"], "pattern_tx")
    rx = tx if cfg["pattern_rx"] is None else _pattern(cfg["pattern_rx"], "pattern_rx")
    model = _model(cfg)
    rho = _positive(cfg, "rho")
    n = _positive(cfg, "n_nodes", integer=True)
    m = homogeneous_mass(tx, rx, model, _spec(cfg)).mass
    row = [model.eta, model.beta, pattern_label(tx), pattern_label(rx), m, rho, rho * m, n,
           pfc_homogeneous(n, rho, m)]
    return [row], [], 0


def _sim_config(cfg) -> SimConfig:
    try:
        domain = Domain.from_dict(cfg["domain"])
    except (KeyError, TypeError, DomainError) as exc:
        raise UsageError(f"domain: {exc}") from None
    pat = _pattern(cfg["pattern"], "pattern")
    try:
        return SimConfig(domain, _positive(cfg, "n_nodes", integer=True), _model(cfg), pat,
                         trials=_positive(cfg, "trials", integer=True), master_seed=int(cfg["master_seed"]))
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(cfg):
    sc = _sim_config(cfg)
    rep = run_ensemble(sc)
    m = homogeneous_mass(sc.pattern, sc.pattern, sc.model).mass
    row = [sc.model.eta, pattern_label(sc.pattern), rep.mean_degree_over_rho,
           rep.mean_degree_over_rho_stderr, m, rep.p_fc]
    return [row], [], 0


def cmd_sweep_eta(cfg):
    sc = _sim_config(cfg)
    etas = cfg["eta_values"]
    if not isinstance(etas, list) or not etas:
        raise UsageError("eta_values: expected a non-empty list")
    for k, e in enumerate(etas):
        _positive({f"eta_values[{k}]": e}, f"eta_values[{k}]")
    pats = [_pattern(p, f"patterns[{k}]") for k, p in enumerate(cfg["patterns"])]
    rows = [[r.eta, r.pattern, r.mean_degree_over_rho, r.stderr, r.analytic_mass, r.p_fc]
            for r in sweep_eta(sc, etas, pats)]
    return rows, [], 0


def cmd_corner_min(cfg):
    if cfg["pattern"] is None:
        raise UsageError("pattern: required (--pattern '<json>')")
    pat = _pattern(cfg["pattern"], "pattern")
    if not pat.symmetric:
        raise UsageError("pattern: corner-min needs a rotationally symmetric pattern")
    partner = pat if cfg["partner"] is None else _pattern(cfg["partner"], "partner")
    model = _model(cfg)
    trunc = math.inf if cfg["truncation"] is None else _positive(cfg, "truncation")
    grid = OrientationGrid(_positive(cfg, "step_theta"), _positive(cfg, "step_phi"))
    spec = _spec(cfg)
    best = min_corner_gain_integral(pat, model.eta, grid, spec)
    v = best.orientation
    m = corner_mass(pat, v, partner, model, trunc, spec)
    theta = math.acos(max(-1.0, min(1.0, v[2])))
    phi = math.atan2(v[1], v[0]) % (2 * math.pi)
    row = [model.eta, model.beta, pattern_label(pat), pattern_label(partner), cfg["truncation"],
           best.value, m, theta, phi, *v]
    return [row], [], 0


def cmd_multisector(cfg):
    n_lo = _positive(cfg, "n_min", integer=True) if cfg["n_min"] is not None else None
    n_hi = _positive(cfg, "n_max", integer=True) if cfg["n_max"] is not None else n_lo
    if n_lo is None:
        raise UsageError("n: required (--n or --n-min/--n-max)")
    if n_hi < n_lo:
        raise UsageError("n_max: must be >= n_min")
    if n_lo < 2:
        raise UsageError("n: must be >= 2")
    lam_cfg = cfg["lambda"]
    if lam_cfg != "scaled":
        _positive(cfg, "lambda")
    model = _model(cfg)
    side = _positive(cfg, "cube_side")
    grid = OrientationGrid(step_euler=_positive(cfg, "euler_step"))
    rows, notes = [], []
    for n in range(n_lo, n_hi + 1):
        lam = math.sqrt(n * math.pi) / 3 if lam_cfg == "scaled" else float(lam_cfg)
        if lam < max(1.0, math.sqrt(n * math.pi) / 3) - 1e-12:
            raise UsageError(f"lambda: {lam:.9g} is below max(1, sqrt(n pi)/3) for n={n}; lobes overlap")
        base = thomson_solve(n, restarts=int(cfg["thomson_restarts"]), seed=int(cfg["thomson_seed"])).points
        res = min_multisector_corner_mass(n, lam, model, side, grid, base, refine=int(cfg["refine"]))
        rows.append([n, lam, model.eta, model.beta, side, grid.step_euler, res.value, res.blind_spot,
                     res.margin, *res.euler_zyz])
        notes.append(f"n={n} blind-spot: {'yes' if res.blind_spot else 'no'}, min M_C = {fmt(res.value)}")
    return rows, notes, 0


def cmd_thomson(cfg):
    n = _positive(cfg, "n", integer=True) if cfg["n"] is not None else None
    if n is None:
        raise UsageError("n: required (--n)")
    if n < 2:
        raise UsageError("n: must be >= 2")
    restarts = _positive(cfg, "restarts", integer=True)
    res = thomson_solve(n, restarts=restarts, tol=_positive(cfg, "tol"), seed=int(cfg["seed"]))
    return [[n, res.energy, res.grad_norm, res.iterations, restarts, int(cfg["seed"])]], [], 0, res


COMMANDS: dict[str, Callable] = {
    "validate-gains": cmd_validate_gains,
    "s-table": cmd_s_table,
    "mass": cmd_mass,
    "simulate": cmd_simulate,
    "sweep-eta": cmd_sweep_eta,
    "corner-min": cmd_corner_min,
    "multisector": cmd_multisector,
    "thomson": cmd_thomson,
}


# ---------------------------------------------------------------- argument parsing


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _lambda(text: str):
    if text == "scaled":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number or 'scaled'") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="aniso3d", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, quad=False):
        sp.add_argument("--config", help="JSON config, manifest, or a previous output file to replay")
        sp.add_argument("--out", help="write CSV here instead of stdout")
        if quad:
            sp.add_argument("--abs-tol", dest="abs_tol", type=float)
            sp.add_argument("--rel-tol", dest="rel_tol", type=float)
            sp.add_argument("--max-subdivisions", dest="max_subdivisions", type=int)
        return sp

    def model(sp):
        sp.add_argument("--eta", type=float)
        sp.add_argument("--beta", type=float)

    sp = common(sub.add_parser("validate-gains", help="check a pattern integrates to 4 pi"), quad=True)
    sp.add_argument("--pattern", type=str)
    sp.add_argument("--check-tol", dest="check_tol", type=float)

    sp = common(sub.add_parser("s-table", help="connectivity functional over a range of eta"), quad=True)
    sp.add_argument("--eta-min", dest="eta_min", type=float)
    sp.add_argument("--eta-max", dest="eta_max", type=float)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--patterns", type=str, help="JSON list of pattern objects")

    sp = common(sub.add_parser("mass", help="homogeneous mass, mean degree and P_fc"), quad=True)
    sp.add_argument("--pattern-tx", dest="pattern_tx", type=str)
    sp.add_argument("--pattern-rx", dest="pattern_rx", type=str)
    model(sp)
    sp.add_argument("--rho", type=float)
    sp.add_argument("--n-nodes", dest="n_nodes", type=int)

    for name in ("simulate", "sweep-eta"):
        sp = common(sub.add_parser(name, help="Monte Carlo ensemble" if name == "simulate" else "ensembles over eta"))
        model(sp)
        sp.add_argument("--n-nodes", dest="n_nodes", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--master-seed", dest="master_seed", type=int)
        if name == "simulate":
            sp.add_argument("--pattern", type=str)
        else:
            sp.add_argument("--eta-values", dest="eta_values", type=_floats)
            sp.add_argument("--patterns", type=str, help="JSON list of pattern objects")

    sp = common(sub.add_parser("corner-min", help="minimum corner integral over orientations"), quad=True)
    sp.add_argument("--pattern", type=str)
    sp.add_argument("--partner", type=str, help="pattern of the other node (default: same)")
    model(sp)
    sp.add_argument("--truncation", type=float, help="cube side; omit for an unbounded corner")
    sp.add_argument("--step-theta", dest="step_theta", type=float)
    sp.add_argument("--step-phi", dest="step_phi", type=float)

    sp = common(sub.add_parser("multisector", help="multi-sector corner mass minimised over rotations"))
    sp.add_argument("--n", dest="n_single", type=int)
    sp.add_argument("--n-min", dest="n_min", type=int)
    sp.add_argument("--n-max", dest="n_max", type=int)
    sp.add_argument("--lambda", dest="lambda", type=_lambda, help="lobe parameter, or 'scaled' for sqrt(n pi)/3")
    model(sp)
    sp.add_argument("--cube-side", dest="cube_side", type=float)
    sp.add_argument("--euler-step", dest="euler_step", type=float, help="degrees")
    sp.add_argument("--refine", type=int)
    sp.add_argument("--thomson-restarts", dest="thomson_restarts", type=int)
    sp.add_argument("--thomson-seed", dest="thomson_seed", type=int)

    sp = common(sub.add_parser("thomson", help="Thomson configuration; --out gets the fixture file"))
    sp.add_argument("--n", type=int)
    sp.add_argument("--restarts", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--tol", type=float)
    return p


_JSON_FLAGS = {"pattern", "pattern_tx", "pattern_rx", "partner", "patterns"}


def resolve(command: str, args: argparse.Namespace) -> dict[str, Any]:
    cfg = dict(DEFAULTS[command])
    if args.config:
        loaded = load_config_file(args.config)
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise UsageError(f"--config: unknown field(s) {sorted(unknown)} for {command}")
        cfg.update(loaded)
    given = {k: v for k, v in vars(args).items() if v is not None and k not in ("command", "config", "out")}
    if command == "multisector" and "n_single" in given:
        n = given.pop("n_single")
        given["n_min"] = given["n_max"] = n
    for k, v in given.items():
        cfg[k] = _json_arg(v, "--" + k.replace("_", "-")) if k in _JSON_FLAGS else v
    return cfg


def _render(command: str, manifest: RunManifest, rows: Rows, notes: list[str]) -> str:
    buf = io.StringIO()
    buf.write(MANIFEST_PREFIX + manifest.to_json() + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADERS[command])
    for r in rows:
        w.writerow([fmt(x) for x in r])
    for note in notes:
        buf.write(f"# {note}\n")
    return buf.getvalue()


def _check_threads():
    raw = os.environ.get("ANISO_THREADS")
    if raw is None:
        return
    try:
        ok = int(raw) >= 1
    except ValueError:
        ok = False
    if not ok:
        raise UsageError(f"ANISO_THREADS: must be a positive integer, got {raw!r}")


def run(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        _check_threads()
        args = build_parser().parse_args(argv)
        command = args.command
        cfg = resolve(command, args)
        manifest = RunManifest(command, cfg)
        result = COMMANDS[command](cfg)
        rows, notes, code = result[:3]
        text = _render(command, manifest, rows, notes)
        if command == "thomson" and args.out:
            # the fixture goes to --out; the energy table to stdout
            write_thomson_file(args.out, result[3].points, [MANIFEST_PREFIX[2:] + manifest.to_json()])
            stdout.write(text)
        elif args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            stdout.write(text)
        return code
    except UsageError as exc:
        print(f"aniso3d: error: {exc}", file=stderr)
        return 2
    except (DomainError, KeyError, TypeError) as exc:
        print(f"aniso3d: error: {exc}", file=stderr)
        return 2
    except (ArithmeticError, ThomsonConvergenceError) as exc:
        print(f"aniso3d: numerical failure: {exc}", file=stderr)
        return 1


def main() -> None:
    sys.exit(run())
