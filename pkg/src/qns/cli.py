"""Batch front door: JSON-configured runs, verification, and snapshot reports.

One JSON document drives every subcommand.  Sections: ``solver`` (mirrors
the solver configuration, with ``initial`` nested), ``output`` (file names
inside the --out directory), ``verify`` (suite parameters), and ``sweep``
(deformation strengths).  Validation is strict — unknown keys anywhere are
rejected by name before any compute starts.

Exit statuses: 0 completed, 1 configuration/IO error or failed hard checks,
2 norm-growth abort, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .harmonic import BatteryReport, CheckRecord, inequality_battery, sobolev_norm
from .flow import VelocityField
from .ns import InitialCondition, SolverConfig, picard_iterate, solve
from .qspace import (
    FrequencyGrid,
    QElement,
    ThetaMatrix,
    adjoint,
    edge_mass,
    schatten_norm,
    single_mode,
    trace_product,
    twisted_convolution,
)
from .semiclassic import theta_sweep
from .snapshots import SnapshotFormatError, load_snapshot, save_snapshot

__all__ = ["ConfigError", "load_config", "main", "parse_solver", "run_verify_suite"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NORM_GROWTH = 2
EXIT_NUMERICAL = 3
_STATUS_EXIT = {"completed": EXIT_OK, "norm-growth": EXIT_NORM_GROWTH,
                "numerical-failure": EXIT_NUMERICAL}


class ConfigError(ValueError):
    """Configuration document rejected before any compute."""


_TOP_KEYS = ("solver", "output", "verify", "sweep")
_SOLVER_KEYS = ("d", "K", "L", "theta", "nu", "form", "scheme", "dt", "T",
                "picard_iters", "snapshot_stride", "deterministic", "seed",
                "norm_ceiling", "initial")
_INITIAL_KEYS = ("kind", "amplitude", "band", "seed", "self_adjoint",
                 "width", "separation")
_OUTPUT_KEYS = ("csv", "snapshot_prefix", "report", "table")
_VERIFY_KEYS = ("seed", "trials", "K", "L", "theta12")
_SWEEP_KEYS = ("thetas",)


def _require_mapping(obj, where: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")


def _reject_unknown(obj, allowed, where: str):
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    _require_mapping(doc, "config")
    _reject_unknown(doc, _TOP_KEYS, "config")
    for key in _TOP_KEYS:
        if key in doc:
            _require_mapping(doc[key], key)
    _reject_unknown(doc.get("output", {}), _OUTPUT_KEYS, "output")
    return doc


def parse_solver(doc: dict, deterministic: bool = False) -> SolverConfig:
    if "solver" not in doc:
        raise ConfigError("config needs a 'solver' section")
    sec = dict(doc["solver"])
    _reject_unknown(sec, _SOLVER_KEYS, "solver")
    init = sec.pop("initial", None)
    if init is not None:
        _require_mapping(init, "solver.initial")
        _reject_unknown(init, _INITIAL_KEYS, "solver.initial")
        sec["initial"] = InitialCondition(**init)
    if isinstance(sec.get("theta"), list):
        sec["theta"] = ThetaMatrix(sec["theta"])
    try:
        cfg = SolverConfig(**sec)
    except TypeError as exc:
        raise ConfigError(f"solver section invalid: {exc}") from exc
    if deterministic and not cfg.deterministic:
        cfg = replace(cfg, deterministic=True)
    return cfg


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


# --- subcommands ------------------------------------------------------------------

def cmd_solve(args) -> int:
    doc = load_config(args.config)
    cfg = parse_solver(doc, args.deterministic)
    out = doc.get("output", {})
    outdir = _outdir(args)
    traj = solve(cfg)
    csv_path = os.path.join(outdir, out.get("csv", "diagnostics.csv"))
    traj.save_csv(csv_path)
    prefix = out.get("snapshot_prefix", "snapshot")
    for i, f in enumerate(traj.fields):
        save_snapshot(os.path.join(outdir, f"{prefix}_{i:06d}.qnsf"), f)
    print(f"{traj.status}: {len(traj.rows)} diagnostic rows, "
          f"{len(traj.fields)} snapshots -> {csv_path}")
    return _STATUS_EXIT[traj.status]


def cmd_picard(args) -> int:
    doc = load_config(args.config)
    cfg = parse_solver(doc, args.deterministic)
    out = doc.get("output", {})
    outdir = _outdir(args)
    rep = picard_iterate(cfg)
    payload = {
        "metric": rep.metric,
        "distances": rep.distances,
        "ratios": rep.ratios,
        "status": rep.status,
        "failed_iterate": rep.failed_iterate,
        "contraction_held": rep.contraction_held(),
    }
    path = os.path.join(outdir, out.get("report", "picard.json"))
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    held = "held" if payload["contraction_held"] else "not held"
    print(f"{rep.status}: {len(rep.distances)} refinements, contraction {held} -> {path}")
    return EXIT_OK if rep.status == "completed" else EXIT_NUMERICAL


def _algebra_records(seed: int, trials: int, K: int = 8) -> list:
    """Deformed-algebra invariant spot checks sized like the battery checks."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    grid = FrequencyGrid(2, K, 2 * np.pi)
    s = 0.8
    theta = ThetaMatrix.planar(s)
    half = K // 2
    tol = {"weyl_phase": 1e-13, "trace_cyclicity": 1e-12, "adjoint_antihom": 1e-12}
    passes = dict.fromkeys(tol, 0)
    worst = dict.fromkeys(tol, 0.0)

    def score(name, err, scale=1.0):
        ratio = err / (tol[name] * scale)
        worst[name] = max(worst[name], ratio)
        passes[name] += ratio <= 1.0

    for _ in range(trials):
        a = rng.integers(-half, half + 1, size=2)
        b = rng.integers(-half, half + 1, size=2)
        lam_a = single_mode(grid, theta, tuple(a), 1.0 / grid.weight)
        lam_b = single_mode(grid, theta, tuple(b), 1.0 / grid.weight)
        ab = twisted_convolution(lam_a, lam_b)
        ba = twisted_convolution(lam_b, lam_a)
        idx = grid.index_of(tuple(a + b))
        xi_a, xi_b = a * grid.spacing, b * grid.spacing
        want = np.exp(1j * s * (xi_a[0] * xi_b[1] - xi_a[1] * xi_b[0]))
        score("weyl_phase", abs(ab.coeffs[idx] / ba.coeffs[idx] - want))

        shape = grid.shape
        x = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        y = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        xe, ye = QElement(grid, theta, x), QElement(grid, theta, y)
        scale = schatten_norm(xe, 2) * schatten_norm(ye, 2)
        score("trace_cyclicity",
              abs(trace_product(xe, ye) - trace_product(ye, xe)), scale)

        lhs = adjoint(twisted_convolution(xe, ye))
        rhs = twisted_convolution(adjoint(ye), adjoint(xe))
        score("adjoint_antihom",
              float(np.abs(lhs.coeffs - rhs.coeffs).max()),
              max(1.0, float(np.abs(lhs.coeffs).max())))

    notes = {"weyl_phase": "mode-pair commutation phase vs closed form",
             "trace_cyclicity": "trace of xy vs yx, random band elements",
             "adjoint_antihom": "(xy)^* vs y^* x^*"}
    return [CheckRecord(name, trials, passes[name], worst[name], notes[name], True)
            for name in tol]


def run_verify_suite(seed: int = 7, trials: int = 100, K: int = 12,
                     L: float = 2 * np.pi, theta12: float = 0.8) -> BatteryReport:
    """Inequality battery plus algebra invariants, merged into one report."""
    battery = inequality_battery(seed=seed, trials=trials, K=K, L=L, theta12=theta12)
    return BatteryReport(list(battery.records) + _algebra_records(seed, trials))


def _plain(value):
    """Coerce numpy scalars (and containers of them) to JSON-friendly types."""
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def cmd_verify(args) -> int:
    doc = load_config(args.config) if args.config else {}
    sec = dict(doc.get("verify", {}))
    _reject_unknown(sec, _VERIFY_KEYS, "verify")
    out = doc.get("output", {})
    outdir = _outdir(args)
    path = os.path.join(outdir, out.get("report", "verify.json"))
    try:
        report = run_verify_suite(**sec)
    except ValueError as exc:
        with open(path, "w") as fh:
            json.dump({"error": str(exc)}, fh, indent=2)
            fh.write("\n")
        raise
    failures = [r.name for r in report.hard_failures()]
    payload = {
        "seed": sec.get("seed", 7),
        "trials": sec.get("trials", 100),
        "all_hard_passed": report.all_hard_passed(),
        "hard_failures": failures,
        "checks": [_plain(dict(r.as_dict(), hard=r.hard)) for r in report.records],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    print(report.format_table())
    if failures:
        print(f"hard check failures: {', '.join(failures)}", file=sys.stderr)
        return EXIT_USAGE
    print(f"all hard checks passed -> {path}")
    return EXIT_OK


def cmd_sweep_theta(args) -> int:
    doc = load_config(args.config)
    cfg = parse_solver(doc, args.deterministic)
    if "sweep" not in doc:
        raise ConfigError("config needs a 'sweep' section")
    sec = doc["sweep"]
    _reject_unknown(sec, _SWEEP_KEYS, "sweep")
    thetas = sec.get("thetas")
    if not isinstance(thetas, list) or not thetas:
        raise ConfigError("sweep.thetas must be a nonempty list")
    table = theta_sweep(cfg, thetas)
    out = doc.get("output", {})
    outdir = _outdir(args)
    path = os.path.join(outdir, out.get("table", "sweep.csv"))
    table.save(path)
    print(table.to_csv(), end="")
    return max((_STATUS_EXIT[s] for s in table.statuses()), default=EXIT_OK)


def cmd_norms(args) -> int:
    fields = load_snapshot(args.snapshot)
    grid = fields[0].grid
    p = grid.d + 2 + (grid.d % 2)
    print(f"grid: d={grid.d} K={grid.K} L={grid.L:.12g}; {len(fields)} field(s)")
    print(f"field,l2,h1dot,s{p},edge_mass")
    for i, f in enumerate(fields):
        print(f"{i},{schatten_norm(f, 2):.12e},{sobolev_norm(f, 1):.12e},"
              f"{schatten_norm(f, p):.12e},{edge_mass(f):.12e}")
    if len(fields) == grid.d:
        u = VelocityField(fields)
        print(f"velocity: l2={u.l2_norm():.12e} h1dot={u.h1dot_norm():.12e} "
              f"s{p}={u.schatten_p_norm(p):.12e} "
              f"divergence_defect={u.divergence_defect():.3e}")
    return EXIT_OK


# --- entry point ------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qns",
        description="Frequency-space incompressible-flow runs on deformed space")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="JSON run configuration")
        p.add_argument("--deterministic", action="store_true",
                       help="force ordered coefficient summation")
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("solve", help="integrate and write CSV + snapshots")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("picard", help="fixed-point iteration report")
    common(p)
    p.set_defaults(func=cmd_picard)

    p = sub.add_parser("verify", help="run the hard-check suite")
    common(p, config_required=False)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep-theta", help="deformation-strength convergence table")
    common(p)
    p.set_defaults(func=cmd_sweep_theta)

    p = sub.add_parser("norms", help="print the norm battery for one snapshot")
    p.add_argument("snapshot", help="QNSF snapshot path")
    p.set_defaults(func=cmd_norms)
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SnapshotFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
