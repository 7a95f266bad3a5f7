"""Command-line surface: seeded, manifest-stamped runs of the library.

Subcommands: sample (skeleton CSV), reach (control JSON), drift / growth
(diagnostic reports), estimate (path averages with batch-means CIs).  Every
run writes <out>.manifest.json recording the resolved configuration, seed,
package and dependency versions, wall time, and a sha256 digest per output
file.  Outputs are byte-identical across reruns with the same arguments and
seed; only the manifest's wall_time_s field varies.

Exit codes: 0 success, 2 validation or usage error, 3 numerical fault
(a thinning bound violation).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .control import ControlSequence, apply_control, build_reach_control, check_admissible
from .core import ExcessRate, State, Velocity
from .diagnostics import LyapunovParams, drift_scan, growth_probe
from .estimate import batch_means
from .expressions import ExpressionError, parse_observable
from .simulate import (SimConfig, ThinningBoundError, simulate_skeleton,
                       skeleton_to_csv)
from .targets import GaussianTarget, target_from_config

__all__ = ["main"]

_USAGE_ERROR = 2
_NUMERICAL_ERROR = 3


def _load_target(spec: str):
    """Target config as inline JSON or @path to a JSON file."""
    if spec.startswith("@"):
        path = Path(spec[1:])
        if not path.exists():
            raise ValueError(f"target file not found: {path}")
        return target_from_config(path.read_text())
    return target_from_config(spec)


def _parse_vector(text: str, d: int, what: str) -> np.ndarray:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ValueError(f"{what} must be comma-separated numbers, got {text!r}")
    if len(vals) != d:
        raise ValueError(f"{what} has {len(vals)} entries, target dimension is {d}")
    return np.asarray(vals)


def _parse_theta(text: str, d: int, what: str) -> Velocity:
    vals = _parse_vector(text, d, what)
    if not np.all(np.abs(vals) == 1.0):
        raise ValueError(f"{what} entries must be +1 or -1, got {text!r}")
    return Velocity(vals)


def _initial_state(args, d: int) -> State:
    x = _parse_vector(args.init, d, "--init") if args.init else np.zeros(d)
    theta = _parse_theta(args.init_theta, d, "--init-theta") if args.init_theta \
        else Velocity(np.ones(d))
    return State(x, theta)


def _excess(gamma: float):
    if gamma < 0:
        raise ValueError(f"--gamma must be >= 0, got {gamma}")
    return ExcessRate.constant(gamma) if gamma > 0 else None


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(args, config: dict, outputs, started: float) -> None:
    out = Path(args.out)
    manifest = {
        "command": args.command,
        "argv": list(args.raw_argv),
        "config": config,
        "seed": getattr(args, "seed", None),
        "versions": {
            "package": _package_version(),
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": time.monotonic() - started,
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    _write_json(Path(str(out) + ".manifest.json"), manifest)


def _package_version() -> str:
    from . import __version__
    return __version__


def _sidecar(out: str, suffix: str) -> Path:
    p = Path(out)
    return p.with_suffix(suffix) if p.suffix == ".json" else Path(str(p) + suffix)


def _cmd_sample(args) -> int:
    started = time.monotonic()
    tgt = _load_target(args.target)
    init = _initial_state(args, tgt.dim)
    ex = _excess(args.gamma)
    cfg = SimConfig(horizon=args.T, seed=args.seed, method=args.method,
                    window=args.window)
    skel = simulate_skeleton(tgt, ex, init, cfg)
    out = Path(args.out)
    skeleton_to_csv(skel, out)
    config = {"target": tgt.to_config(), "sim": cfg.to_json_dict(),
              "gamma": args.gamma, "init": list(map(float, init.x)),
              "init_theta": [int(v) for v in init.theta.as_array()]}
    _write_manifest(args, config, [out], started)
    if skel.truncated:
        print(f"warning: event cap reached at t={skel.horizon!r}; "
              f"CSV covers the truncated span", file=sys.stderr)
    print(f"wrote {out} ({skel.n_events} events)")
    return 0


def _cmd_reach(args) -> int:
    started = time.monotonic()
    tgt = _load_target(args.target)
    if not isinstance(tgt, GaussianTarget):
        raise ValueError("reach requires a gaussian target (SPD precision)")
    d = tgt.dim
    src = State(_parse_vector(args.from_x, d, "--from"),
                _parse_theta(args.from_theta, d, "--from-theta"))
    dst = State(_parse_vector(args.to_x, d, "--to"),
                _parse_theta(args.to_theta, d, "--to-theta"))
    ex = _excess(args.gamma)

    if args.check:
        payload = json.loads(Path(args.check).read_text())
        if not isinstance(payload, dict) or "times" not in payload \
                or "indices" not in payload:
            raise ValueError(f"{args.check} has no times/indices fields")
        control = ControlSequence.from_json_dict(
            {"times": payload["times"], "indices": payload["indices"]})
    else:
        control = build_reach_control(tgt.A, tgt.b, src, dst, T_init=args.T_init)
    end = apply_control(src, control)
    report = check_admissible(tgt, ex, src, control)
    doc = control.to_json_dict()
    doc.update({
        "endpoint_x": list(map(float, end.x)),
        "endpoint_theta": [int(v) for v in end.theta.as_array()],
        "endpoint_error": float(np.max(np.abs(end.x - dst.x))),
        "admissible": bool(report.admissible),
        "min_switch_rate": report.min_rate if np.isfinite(report.min_rate) else None,
        "n_switches": control.n_switches,
    })
    out = Path(args.out)
    _write_json(out, doc)
    config = {"target": tgt.to_config(),
              "from": list(map(float, src.x)),
              "from_theta": [int(v) for v in src.theta.as_array()],
              "to": list(map(float, dst.x)),
              "to_theta": [int(v) for v in dst.theta.as_array()],
              "gamma": args.gamma, "T_init": args.T_init,
              "check": args.check or None}
    _write_manifest(args, config, [out], started)
    print(f"wrote {out} ({control.n_switches} switches, "
          f"admissible={report.admissible})")
    return 0


def _cmd_drift(args) -> int:
    started = time.monotonic()
    tgt = _load_target(args.target)
    ex = _excess(args.gamma)
    params = LyapunovParams(args.alpha, args.delta, args.gamma)
    report = drift_scan(tgt, ex, params, args.r_min, args.r_max,
                        n_radial=args.n_radial, n_angular=args.n_angular)
    out = Path(args.out)
    _write_json(out, report.to_json_dict())
    grid = Path(args.grid_csv) if args.grid_csv else _sidecar(args.out, ".grid.csv")
    report.write_grid_csv(grid)
    config = {"target": tgt.to_config(), "alpha": args.alpha, "delta": args.delta,
              "gamma": args.gamma, "r_min": args.r_min, "r_max": args.r_max,
              "n_radial": args.n_radial, "n_angular": args.n_angular}
    _write_manifest(args, config, [out, grid], started)
    eps = report.epsilon
    print(f"wrote {out} (epsilon={'none' if eps is None else repr(eps)})")
    return 0


def _cmd_growth(args) -> int:
    started = time.monotonic()
    tgt = _load_target(args.target)
    radii = [float(v) for v in args.radii.split(",")]
    report = growth_probe(tgt, radii, n_angular=args.n_angular)
    out = Path(args.out)
    _write_json(out, report.to_json_dict())
    grid = Path(args.grid_csv) if args.grid_csv else _sidecar(args.out, ".grid.csv")
    report.write_grid_csv(grid)
    config = {"target": tgt.to_config(), "radii": radii,
              "n_angular": args.n_angular}
    _write_manifest(args, config, [out, grid], started)
    print(f"wrote {out} (gc3_consistent={report.gc3_consistent})")
    return 0


def _replicate_payload(args, tgt) -> dict:
    init = _initial_state(args, tgt.dim)
    return {
        "target": tgt.to_config(),
        "observable": args.observable,
        "T": args.T,
        "method": args.method,
        "window": args.window,
        "gamma": args.gamma,
        "n_batches": args.n_batches,
        "init": list(map(float, init.x)),
        "init_theta": [float(v) for v in init.theta.as_array()],
    }


def _run_replicate(payload: dict, seed: int) -> dict:
    """One seeded trajectory + batch means; module-level so workers can pickle it."""
    tgt = target_from_config(payload["target"])
    g = parse_observable(payload["observable"], tgt.dim)
    ex = _excess(payload["gamma"])
    init = State(np.asarray(payload["init"]), Velocity(np.asarray(payload["init_theta"])))
    cfg = SimConfig(horizon=payload["T"], seed=seed, method=payload["method"],
                    window=payload["window"])
    skel = simulate_skeleton(tgt, ex, init, cfg)
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        result = batch_means(skel, g, n_batches=payload["n_batches"])
    doc = result.to_json_dict()
    doc["seed"] = seed
    doc["n_events"] = skel.n_events
    return doc


def _cmd_estimate(args) -> int:
    started = time.monotonic()
    tgt = _load_target(args.target)
    parse_observable(args.observable, tgt.dim)
    payload = _replicate_payload(args, tgt)
    seeds = [args.seed + k for k in range(args.replicates)]
    if args.workers > 1 and args.replicates > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_run_replicate, [payload] * len(seeds), seeds))
    else:
        rows = [_run_replicate(payload, s) for s in seeds]

    out = Path(args.out)
    if args.replicates == 1:
        _write_json(out, rows[0])
    else:
        covered = sum(1 for r in rows if r["ci_low"] <= 0.0 <= r["ci_high"])
        _write_json(out, {"replicates": rows,
                          "n_replicates": len(rows),
                          "zero_coverage": covered / len(rows)})
    grid = Path(args.grid_csv) if args.grid_csv else _sidecar(args.out, ".batches.csv")
    with open(grid, "w", newline="") as fh:
        fh.write("replicate,batch,value\n")
        for k, r in enumerate(rows):
            for b, v in enumerate(r["batch_values"]):
                fh.write(f"{k},{b},{v!r}\n")
    _write_manifest(args, payload, [out, grid], started)
    print(f"wrote {out} ({args.replicates} replicate(s))")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zigzag",
        description="Zigzag sampler: simulation, reachability and drift diagnostics.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_target(p):
        p.add_argument("--target", required=True,
                       help="target config: inline JSON or @path/to/config.json")

    def add_sim(p):
        p.add_argument("--T", type=float, required=True, help="time horizon")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--method", choices=("exact", "thinning", "auto"),
                       default="auto")
        p.add_argument("--window", type=float, default=1.0,
                       help="thinning look-ahead window")
        p.add_argument("--gamma", type=float, default=0.0,
                       help="constant excess switching rate")
        p.add_argument("--init", default=None,
                       help="initial position, comma separated (default: origin)")
        p.add_argument("--init-theta", default=None,
                       help="initial velocity signs, comma separated (default: all +1)")

    p = sub.add_parser("sample", help="simulate one skeleton to CSV")
    add_target(p)
    add_sim(p)
    p.add_argument("--out", required=True, help="skeleton CSV path")
    p.set_defaults(fn=_cmd_sample)

    p = sub.add_parser("reach", help="build or check a reachability control")
    add_target(p)
    p.add_argument("--from", dest="from_x", required=True,
                   help="source position, comma separated")
    p.add_argument("--from-theta", required=True,
                   help="source velocity signs, comma separated")
    p.add_argument("--to", dest="to_x", required=True,
                   help="target position, comma separated")
    p.add_argument("--to-theta", required=True,
                   help="target velocity signs, comma separated")
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--T-init", dest="T_init", type=float, default=1.0,
                   help="initial travel-time guess for the doubling searches")
    p.add_argument("--check", default=None,
                   help="verify this control JSON instead of building one")
    p.add_argument("--out", required=True, help="control JSON path")
    p.set_defaults(fn=_cmd_reach)

    p = sub.add_parser("drift", help="scan Lyapunov drift ratios")
    add_target(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--r-min", type=float, required=True)
    p.add_argument("--r-max", type=float, required=True)
    p.add_argument("--n-radial", type=int, default=9)
    p.add_argument("--n-angular", type=int, default=16)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--grid-csv", default=None,
                   help="probe grid CSV path (default: derived from --out)")
    p.set_defaults(fn=_cmd_drift)

    p = sub.add_parser("growth", help="probe tail growth conditions")
    add_target(p)
    p.add_argument("--radii", required=True, help="comma-separated radii")
    p.add_argument("--n-angular", type=int, default=16)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--grid-csv", default=None)
    p.set_defaults(fn=_cmd_growth)

    p = sub.add_parser("estimate", help="path averages with batch-means CIs")
    add_target(p)
    add_sim(p)
    p.add_argument("--observable", required=True,
                   help="expression over x1..xd, th1..thd with + - * ^ cos exp")
    p.add_argument("--n-batches", type=int, default=30)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--grid-csv", default=None,
                   help="per-batch CSV path (default: derived from --out)")
    p.add_argument("--out", required=True, help="result JSON path")
    p.set_defaults(fn=_cmd_estimate)
    return parser


def main(argv=None) -> int:
    raw = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    args = parser.parse_args(raw)
    args.raw_argv = raw
    try:
        return args.fn(args)
    except ThinningBoundError as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return _NUMERICAL_ERROR
    except (ValueError, ExpressionError, OverflowError, OSError,
            json.JSONDecodeError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
