"""Configuration parsing, result export and the command-line interface.

Config documents are JSON::

    {"schema": 1, "L": 20, "r": 4, "B": 3, "T": 36,
     "uniform": {"M": 21, "A": 0.01, "R0": 2},
     "theta": [12.0],
     "optimizer": {"eps": 2e-10, "max_iters": 200},
     "rh": {"H": 8, "h": 4, "search": "binary"}}

``points`` (a list of ``{"alpha", "A", "R0"}`` objects, optionally with
``inflow_changes``) may replace ``uniform``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .hybrid_sim import Trajectory, simulate
from .ipa import finite_difference_gradient, ipa_gradient
from .model import (ConfigError, MissionConfig, SamplePoint, SwitchingSchedule,
                    uniform_config)
from .optimizer import ArmijoSettings, OptimizerSettings, optimize, project_schedule
from .receding_horizon import RhSettings, rh_run

SCHEMA_VERSION = 1
SUBCOMMANDS = ("simulate", "optimize", "rh", "gradcheck")

logger = logging.getLogger(__name__)


@dataclass
class ParsedConfig:
    config: MissionConfig
    theta: SwitchingSchedule | None = None
    optimizer: OptimizerSettings | None = None
    rh: dict | None = None


@dataclass
class RunManifest:
    subcommand: str
    config_path: str
    output_dir: str
    sample_dt: float = 0.1
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError("bad_subcommand", f"unknown subcommand {self.subcommand!r}")
        if not (self.sample_dt > 0 and math.isfinite(self.sample_dt)):
            raise ConfigError("bad_sample_dt", f"sample_dt must be > 0, got {self.sample_dt}")


# --- parsing ---------------------------------------------------------------

def _key_lines(text: str) -> dict[str, int]:
    """First line on which each quoted key appears (for error anchors)."""
    out: dict[str, int] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        start = 0
        while True:
            a = line.find('"', start)
            if a < 0:
                break
            b = line.find('"', a + 1)
            if b < 0:
                break
            if line[b + 1:].lstrip().startswith(":"):
                out.setdefault(line[a + 1:b], n)
            start = b + 1
    return out


def _number(doc: dict, key: str, lines: dict, where: str = "") -> float:
    label = f"{where}{key}"
    if key not in doc:
        raise ConfigError("missing_field", f"missing required field {label!r}",
                          lines.get(where.rstrip(".").split(".")[-1]) if where else None)
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("bad_type", f"{label} must be a number", lines.get(key))
    if not math.isfinite(value):
        raise ConfigError("non_finite", f"{label} must be finite", lines.get(key))
    return float(value)


def parse_config(text: str) -> ParsedConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("bad_json", exc.msg, exc.lineno) from None
    if not isinstance(doc, dict):
        raise ConfigError("bad_type", "top level must be an object", 1)
    lines = _key_lines(text)
    schema = doc.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise ConfigError("bad_schema", f"unsupported schema {schema!r}", lines.get("schema"))

    def anchored(exc: ConfigError, key: str) -> ConfigError:
        if exc.line is None:
            exc.line = lines.get(key)
        return exc

    L, r, B, T = (_number(doc, k, lines) for k in ("L", "r", "B", "T"))
    for k, v in (("L", L), ("r", r), ("B", B), ("T", T)):
        if v <= 0:
            raise ConfigError("nonpositive_parameter", f"{k} must be > 0", lines.get(k))

    if "uniform" in doc and "points" in doc:
        raise ConfigError("ambiguous_points", "give either uniform or points, not both",
                          lines.get("points"))
    try:
        if "uniform" in doc:
            u = doc["uniform"]
            if not isinstance(u, dict):
                raise ConfigError("bad_type", "uniform must be an object", lines.get("uniform"))
            M = _number(u, "M", lines, "uniform.")
            if M != int(M) or M < 1:
                raise ConfigError("empty_points", "uniform.M must be a positive integer",
                                  lines.get("M"))
            A = _number(u, "A", lines, "uniform.")
            R0 = _number(u, "R0", lines, "uniform.")
            if A <= 0:
                raise ConfigError("nonpositive_inflow", "A must be > 0", lines.get("A"))
            if R0 < 0:
                raise ConfigError("negative_uncertainty", "R0 must be >= 0", lines.get("R0"))
            if A >= B:
                raise ConfigError("inflow_not_below_B", f"requires B > A (A={A}, B={B})",
                                  lines.get("A"))
            config = uniform_config(L, r, B, T, int(M), A, R0)
        elif "points" in doc:
            pts = doc["points"]
            if not isinstance(pts, list):
                raise ConfigError("bad_type", "points must be a list", lines.get("points"))
            if not pts:
                raise ConfigError("empty_points", "points must be nonempty", lines.get("points"))
            points = []
            for k, p in enumerate(pts):
                if not isinstance(p, dict):
                    raise ConfigError("bad_type", f"points[{k}] must be an object",
                                      lines.get("points"))
                where = f"points[{k}]."
                alpha = _number(p, "alpha", lines, where)
                A = _number(p, "A", lines, where)
                R0 = _number(p, "R0", lines, where)
                changes = tuple((float(t), float(a)) for t, a in p.get("inflow_changes", ()))
                points.append(SamplePoint(alpha, A, R0, changes))
            config = MissionConfig(L=L, r=r, B=B, T=T, points=tuple(points))
        else:
            raise ConfigError("missing_field", "one of uniform or points is required", None)
    except ConfigError as exc:
        raise anchored(exc, "points" if "points" in doc else "uniform")

    theta = None
    if "theta" in doc:
        vals = doc["theta"]
        if not isinstance(vals, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
            raise ConfigError("bad_type", "theta must be a list of numbers", lines.get("theta"))
        theta = SwitchingSchedule(tuple(float(v) for v in vals))
        try:
            theta.check(config.L)
        except ConfigError as exc:
            raise anchored(exc, "theta")

    opt = None
    if "optimizer" in doc:
        o = doc["optimizer"]
        try:
            armijo = ArmijoSettings(**o.get("armijo", {}))
            rest = {k: v for k, v in o.items() if k != "armijo"}
            opt = OptimizerSettings(armijo=armijo, **rest)
        except (TypeError, ValueError) as exc:
            raise ConfigError("bad_optimizer", str(exc), lines.get("optimizer")) from None

    rh = None
    if "rh" in doc:
        rh = dict(doc["rh"])
        try:
            RhSettings(**rh)
        except TypeError as exc:
            raise ConfigError("bad_rh", str(exc), lines.get("rh")) from None
        except ConfigError as exc:
            raise anchored(exc, "rh")
    return ParsedConfig(config=config, theta=theta, optimizer=opt, rh=rh)


def serialize_config(parsed: ParsedConfig | MissionConfig) -> str:
    """Explicit-points JSON that :func:`parse_config` maps back to the same objects."""
    if isinstance(parsed, MissionConfig):
        parsed = ParsedConfig(parsed)
    cfg = parsed.config
    doc: dict[str, Any] = {"schema": SCHEMA_VERSION, "L": cfg.L, "r": cfg.r,
                           "B": cfg.B, "T": cfg.T, "points": []}
    for p in cfg.points:
        entry: dict[str, Any] = {"alpha": p.alpha, "A": p.A, "R0": p.R0}
        if p.inflow_changes:
            entry["inflow_changes"] = [list(c) for c in p.inflow_changes]
        doc["points"].append(entry)
    if parsed.theta is not None:
        doc["theta"] = list(parsed.theta.theta)
    if parsed.optimizer is not None:
        doc["optimizer"] = asdict(parsed.optimizer)
    if parsed.rh is not None:
        doc["rh"] = dict(parsed.rh)
    return _dumps(doc)


# --- export ----------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _dumps(doc) -> str:
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def trajectory_csv(traj: Trajectory, sample_dt: float) -> str:
    times, s, R = traj.sample(sample_dt)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "s"] + [f"R_{i + 1}" for i in range(traj.config.M)])
    for k in range(len(times)):
        w.writerow([_fmt(times[k]), _fmt(s[k])] + [_fmt(v) for v in R[k]])
    return buf.getvalue()


def events_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "kind", "detail"])
    for e in traj.events:
        w.writerow([_fmt(e.time), e.kind, e.detail()])
    return buf.getvalue()


def export(traj: Trajectory, summary: dict, manifest: RunManifest) -> list[Path]:
    """Write ``trajectory.csv``, ``events.csv`` and ``summary.json``."""
    out = Path(manifest.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError("io_error", f"{out}: {exc.strerror}") from None
    summary = dict(summary)
    if not summary.get("J_history"):
        summary.pop("J_history", None)
    files = {"trajectory.csv": trajectory_csv(traj, manifest.sample_dt),
             "events.csv": events_csv(traj),
             "summary.json": _dumps(summary)}
    written = []
    for name, text in files.items():
        path = out / name
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise ConfigError("io_error", f"{path}: {exc.strerror}") from None
        written.append(path)
    return written


# --- commands --------------------------------------------------------------

def _parse_theta(text: str) -> SwitchingSchedule:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError("bad_theta", f"cannot parse --theta {text!r}") from None
    return SwitchingSchedule(tuple(vals))


def _schedule(args, parsed: ParsedConfig) -> SwitchingSchedule | None:
    if args.theta is not None:
        return _parse_theta(args.theta)
    return parsed.theta


def _opt_settings(args, parsed: ParsedConfig) -> OptimizerSettings:
    base = parsed.optimizer or OptimizerSettings()
    changes = {}
    if args.eps is not None:
        changes["eps"] = args.eps
    if args.max_iters is not None:
        changes["max_iters"] = args.max_iters
    if not changes:
        return base
    kw = {k: getattr(base, k) for k in base.__dataclass_fields__}
    kw.update(changes)
    return OptimizerSettings(**kw)


def _rh_settings(args, parsed: ParsedConfig) -> RhSettings:
    cfg = parsed.config
    kw = dict(parsed.rh or {})
    if args.horizon is not None:
        kw["H"] = args.horizon
    kw.setdefault("H", min(2.0 * cfg.r, cfg.T))
    if args.action is not None:
        kw["h"] = args.action
    kw.setdefault("h", kw["H"] / 2.0)
    if args.binary_control is not None:
        kw["search"] = "binary" if args.binary_control else "continuous"
    return RhSettings(**kw)


def cmd_simulate(args, parsed):
    sched = _schedule(args, parsed)
    if sched is None:
        raise ConfigError("missing_field", "simulate needs theta (config or --theta)")
    traj = simulate(parsed.config, sched)
    summary = {"subcommand": "simulate", "J": traj.cost, "theta": list(sched.theta),
               "N": sched.N, "prop1_satisfied": traj.satisfies_prop1(),
               "warnings": list(traj.warnings)}
    return traj, summary


def cmd_optimize(args, parsed):
    settings = _opt_settings(args, parsed)
    rep = optimize(parsed.config, _schedule(args, parsed), settings)
    summary = {"subcommand": "optimize", "J": rep.J_star, "theta": list(rep.theta_star.theta),
               "N": rep.theta_star.N, "iterations": rep.iterations,
               "grad_norm": rep.grad_norm, "J_history": rep.J_history,
               "N_history": rep.N_history, "converged": rep.converged,
               "prop1_satisfied": rep.prop1_satisfied,
               "stop_reasons": [p.stop_reason for p in rep.phases],
               "settings": asdict(settings)}
    return rep.trajectory, summary


def cmd_rh(args, parsed):
    settings = _rh_settings(args, parsed)
    res = rh_run(parsed.config, settings)
    summary = {"subcommand": "rh", "J": res.J, "settings": asdict(settings),
               "decisions": [list(d) for d in res.decisions]}
    return res.trajectory, summary


def cmd_gradcheck(args, parsed):
    cfg = parsed.config
    sched = _schedule(args, parsed)
    if sched is None:
        rng = np.random.default_rng(args.seed)
        N = max(1, int(cfg.T // cfg.L))
        sched = SwitchingSchedule(tuple(project_schedule(rng.uniform(0, cfg.L, N), cfg.L)))
    traj = simulate(cfg, sched)
    g = ipa_gradient(cfg, sched, traj)
    fd = finite_difference_gradient(cfg, sched)
    rows = []
    for j in range(sched.N):
        f = fd.grad[j]
        rel = abs(g[j] - f) / max(abs(f), 1e-8) if np.isfinite(f) else None
        rows.append({"j": j + 1, "ipa": g[j], "fd": f if np.isfinite(f) else None,
                     "rel_err": rel})
    rels = [r["rel_err"] for r in rows if r["rel_err"] is not None]
    summary = {"subcommand": "gradcheck", "J": traj.cost, "theta": list(sched.theta),
               "N": sched.N, "table": rows, "max_rel_err": max(rels) if rels else None,
               "seed": args.seed}
    return traj, summary


COMMANDS = {"simulate": cmd_simulate, "optimize": cmd_optimize, "rh": cmd_rh,
            "gradcheck": cmd_gradcheck}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="persmon",
                                 description="1-D persistent monitoring: simulate and optimize")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="JSON mission description")
    ap.add_argument("--theta", help="comma-separated switching locations")
    ap.add_argument("--eps", type=float)
    ap.add_argument("--max-iters", type=int)
    ap.add_argument("--horizon", type=float, help="planning window H")
    ap.add_argument("--action", type=float, help="action interval h")
    ap.add_argument("--binary-control", dest="binary_control", action="store_true",
                    default=None)
    ap.add_argument("--continuous-control", dest="binary_control", action="store_false")
    ap.add_argument("--sample-dt", type=float, default=0.1)
    ap.add_argument("--out", default="out")
    ap.add_argument("--seed", type=int, default=0, help="gradcheck sampling seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _print_summary(summary: dict) -> None:
    J = summary.get("J")
    line = f"{summary['subcommand']}: J = {J:.4f}"
    if "theta" in summary:
        line += " theta = [" + ", ".join(f"{v:.4f}" for v in summary["theta"]) + "]"
    if summary.get("max_rel_err") is not None:
        line += f" max_rel_err = {summary['max_rel_err']:.3g}"
    print(line)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        manifest = RunManifest(args.subcommand, args.config, args.out, args.sample_dt)
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("io_error", f"{args.config}: {exc.strerror}") from None
        parsed = parse_config(text)
        traj, summary = COMMANDS[args.subcommand](args, parsed)
        summary["config"] = json.loads(serialize_config(parsed.config))
        export(traj, summary, manifest)
    except ConfigError as exc:
        sys.stderr.write(json.dumps(exc.to_dict(), sort_keys=True) + "\n")
        return 2
    except Exception as exc:  # surfaced as machine-readable error too
        sys.stderr.write(json.dumps({"error": "internal_error", "message": str(exc)}) + "\n")
        return 1
    _print_summary(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
