"""``stairplan`` command line: gen-terrain, plan, simulate, bench.

Every run writes ``manifest.json`` into ``--out-dir`` with the fully
resolved configuration. Exit codes: 0 ok, 2 invalid input, 3 no plan,
4 batched/scalar mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .bench import BenchMismatch, bench_planner
from .dcm import CommandVelocity, DynamicsError, GaitConfig, VhipParams, periodic_offset
from .planner import (
    NoPlanError,
    PlannerWeights,
    PlanningError,
    PlanRequest,
    candidate_costs,
    plan_foothold,
)
from .sim import EpisodeConfig, run_ensemble, run_episode, write_trace_csv
from .terrain import (
    TerrainError,
    TerrainSpec,
    generate_terrain,
    load_map,
    save_map,
    steepness_map,
    write_pgm,
)

log = logging.getLogger("stairplan")

EXIT_OK, EXIT_INVALID, EXIT_NO_PLAN, EXIT_MISMATCH = 0, 2, 3, 4
KIND_ALIASES = {"pyramid": "pyramid_stairs", "stairs": "pyramid_stairs"}


class UsageError(ValueError):
    pass


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}") from None
    return a, b


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _schedule(text: str):
    """``"0:1.0,3:0.5:0.1"`` -> ((0.0, cmd), (3.0, cmd)); fields t:vx[:vy[:wyaw]]."""
    out = []
    for item in text.split(","):
        parts = [float(v) for v in item.split(":")]
        if not 2 <= len(parts) <= 4:
            raise argparse.ArgumentTypeError(f"bad schedule entry {item!r}")
        parts += [0.0] * (4 - len(parts))
        out.append((parts[0], parts[1:]))
    return out


# -- parser --------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--config", help="JSON file whose keys override the flags")


def _terrain_flags(p: argparse.ArgumentParser, kind: str | None) -> None:
    g = p.add_argument_group("terrain")
    g.add_argument("--kind", "--terrain", dest="kind", default=kind,
                   choices=["flat", "pyramid", "pyramid_stairs", "stairs", "rough"])
    g.add_argument("--width-cells", type=int)
    g.add_argument("--length-cells", type=int)
    g.add_argument("--resolution", type=float, default=0.05)
    g.add_argument("--step-height", type=float)
    g.add_argument("--tread", type=float, default=0.30)
    g.add_argument("--num-steps", type=int)
    g.add_argument("--roughness", type=float, default=0.0)
    g.add_argument("--center", type=_pair)


def _weight_flags(p: argparse.ArgumentParser) -> None:
    w = PlannerWeights()
    p.add_argument("--alpha1", type=float, default=w.alpha1)
    p.add_argument("--alpha2", type=float, default=w.alpha2)
    p.add_argument("--alpha3", type=float, default=w.alpha3)
    p.add_argument("--half-extent", type=float, default=0.3)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stairplan", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-terrain", help="write an elevation map")
    _common(p)
    _terrain_flags(p, "flat")
    p.add_argument("-o", "--output", default="terrain.emap")
    p.add_argument("--pgm", action="store_true", help="also write a height image")

    p = sub.add_parser("plan", help="plan one foothold")
    _common(p)
    p.add_argument("--map", required=True)
    p.add_argument("--xi", type=_pair, help="support-relative DCM (default: periodic gait)")
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--k", type=float, default=0.0)
    p.add_argument("--z0", type=float, default=1.0)
    p.add_argument("--f", type=float, default=1.25)
    p.add_argument("--l", type=float, default=0.2)
    p.add_argument("--leg", type=int, default=0, choices=[0, 1])
    p.add_argument("--vx", type=float, default=1.0)
    p.add_argument("--vy", type=float, default=0.0)
    p.add_argument("--wyaw", type=float, default=0.0)
    p.add_argument("--support", type=_pair, help="world xy of the stance foot (default: map center)")
    p.add_argument("--yaw", type=float, default=0.0)
    _weight_flags(p)
    p.add_argument("--pgm", action="store_true", help="write the window cost image")

    p = sub.add_parser("simulate", help="run an episode or an ensemble")
    _common(p)
    _terrain_flags(p, "flat")
    p.add_argument("--map", help="EMAP file instead of a generated terrain")
    p.add_argument("--speed", type=float, default=1.0)
    p.add_argument("--vy", type=float, default=0.0)
    p.add_argument("--wyaw", type=float, default=0.0)
    p.add_argument("--schedule", type=_schedule, help="t:vx[:vy[:wyaw]],...")
    p.add_argument("--goal", type=float, default=5.0)
    p.add_argument("--max-steps", type=int, default=60)
    p.add_argument("--fall-radius", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--f", type=float, default=1.25)
    p.add_argument("--noise", type=float, default=0.0, help="touchdown noise std, m")
    p.add_argument("--start", type=_pair, default=(0.0, 0.0))
    p.add_argument("--yaw", type=float, default=0.0)
    _weight_flags(p)
    p.add_argument("--ensemble", type=int, help="number of walkers per speed")
    p.add_argument("--speeds", type=_floats, default=(0.5, 1.0, 1.5, 2.0))
    p.add_argument("--pose-radius", type=float, default=0.1)

    p = sub.add_parser("bench", help="batched vs scalar planner timing")
    _common(p)
    _terrain_flags(p, "pyramid")
    p.add_argument("--batch", type=int, default=4096)
    p.add_argument("--reps", type=int, default=5)
    return ap


# -- helpers ---------------------------------------------------------------------------

def _apply_config(args) -> None:
    if not args.config:
        return
    try:
        data = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    for key, value in data.items():
        attr = key.replace("-", "_")
        if attr in ("command", "config") or not hasattr(args, attr):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        if isinstance(value, list):
            value = tuple(value)
        setattr(args, attr, value)


def _terrain_spec(args, sim: bool = False) -> TerrainSpec:
    kind = KIND_ALIASES.get(args.kind, args.kind)
    if sim and kind == "flat":
        base = EpisodeConfig().terrain
    elif sim:
        base = TerrainSpec(kind=kind, width_cells=152, length_cells=152, num_steps=6,
                           step_height=0.25)
    elif kind == "pyramid_stairs":
        base = TerrainSpec(kind=kind, step_height=0.25)
    else:
        base = TerrainSpec(kind=kind)
    spec = TerrainSpec(
        kind=kind,
        width_cells=args.width_cells if args.width_cells is not None else base.width_cells,
        length_cells=args.length_cells if args.length_cells is not None else base.length_cells,
        resolution=args.resolution,
        step_height=args.step_height if args.step_height is not None else base.step_height,
        tread_depth=args.tread,
        num_steps=args.num_steps if args.num_steps is not None else base.num_steps,
        roughness_amplitude=args.roughness if kind == "rough" else base.roughness_amplitude,
        seed=args.seed,
        center=tuple(args.center) if args.center is not None else base.center,
    )
    spec.validate()
    return spec


def _weights(args) -> PlannerWeights:
    return PlannerWeights(args.alpha1, args.alpha2, args.alpha3)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if hasattr(obj, "__dataclass_fields__"):
        return _jsonable(asdict(obj))
    return obj


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _manifest(out: Path, args, outputs, extra=None) -> None:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
    body = {"command": args.command, "version": __version__, "config": cfg,
            "outputs": sorted(outputs)}
    if extra:
        body.update(extra)
    _write_json(out / "manifest.json", body)


# -- subcommands -------------------------------------------------------------------------

def cmd_gen_terrain(args, out: Path) -> int:
    spec = _terrain_spec(args)
    emap = generate_terrain(spec)
    target = out / args.output
    save_map(emap, target)
    outputs = [target.name]
    if args.pgm:
        write_pgm(emap.heights, target.with_suffix(".pgm"))
        outputs.append(target.with_suffix(".pgm").name)
    _manifest(out, args, outputs, {"terrain": spec})
    print(f"wrote {target} ({emap.width_cells}x{emap.length_cells} cells)")
    return EXIT_OK


def _plan_request(args) -> PlanRequest:
    path = Path(args.map)
    if not path.is_file():
        raise UsageError(f"map file not found: {path}")
    emap = load_map(path)
    gait = GaitConfig(l=args.l, f=args.f, leg_index=args.leg)
    params = VhipParams(z0=args.z0, k=args.k, T=1.0 / (2.0 * args.f))
    cmd = CommandVelocity(vx=args.vx, vy=args.vy, wyaw=args.wyaw)
    if args.support is None:
        sx, sy = emap.world_of(emap.length_cells // 2, emap.width_cells // 2)
        support = (float(sx), float(sy))
    else:
        support = tuple(args.support)
    if args.xi is None:
        b = periodic_offset(cmd, gait.flipped(), VhipParams(z0=args.z0, T=params.T))
        c, s = np.cos(args.yaw), np.sin(args.yaw)
        xi = (float(c * b[0] - s * b[1]), float(s * b[0] + c * b[1]))
    else:
        xi = tuple(args.xi)
    return PlanRequest(xi_t=xi, t=args.t, params=params, gait=gait, cmd=cmd, emap=emap,
                       steepness=steepness_map(emap), weights=_weights(args),
                       support_xy=support, yaw=args.yaw, half_extent=args.half_extent)


def cmd_plan(args, out: Path) -> int:
    req = _plan_request(args)
    try:
        plan = plan_foothold(req)
    except NoPlanError as exc:
        err = {"error": exc.cause, "message": str(exc)}
        _write_json(out / "plan.json", err)
        _manifest(out, args, ["plan.json"])
        print(json.dumps(err), file=sys.stderr)
        return EXIT_NO_PLAN
    body = {
        "u_T": plan.u_T, "u_world": plan.u_world, "b": plan.b, "h_z": plan.h_z,
        "cell_index": list(plan.cell_index),
        "cost": {"total": plan.cost_total, "target": plan.cost_target,
                 "offset": plan.cost_offset, "steep": plan.cost_steep},
        "xi_hat": plan.xi_hat, "n": plan.n, "b_nom": plan.b_nom,
    }
    _write_json(out / "plan.json", body)
    outputs = ["plan.json"]
    if args.pgm:
        cc = candidate_costs(req)
        write_pgm(cc.total, out / "cost.pgm", mark=cc.argmin())
        outputs.append("cost.pgm")
    _manifest(out, args, outputs)
    print(f"u_T=({plan.u_T[0]:.3f}, {plan.u_T[1]:.3f}) h_z={plan.h_z:.3f} "
          f"cell={plan.cell_index} cost={plan.cost_total:.6g}")
    return EXIT_OK


def _episode_config(args) -> EpisodeConfig:
    if args.schedule:
        schedule = tuple((t, CommandVelocity(vx=vx, vy=vy, wyaw=wz))
                         for t, (vx, vy, wz) in args.schedule)
    else:
        schedule = ((0.0, CommandVelocity(vx=args.speed, vy=args.vy, wyaw=args.wyaw)),)
    if args.map and not Path(args.map).is_file():
        raise UsageError(f"map file not found: {args.map}")
    return EpisodeConfig(
        terrain=_terrain_spec(args, sim=True), map_path=args.map, schedule=schedule,
        max_steps=args.max_steps, goal_distance=args.goal, fall_radius=args.fall_radius,
        gait=GaitConfig(f=args.f), weights=_weights(args), half_extent=args.half_extent,
        dt=args.dt, touchdown_noise=args.noise, start_xy=tuple(args.start),
        start_yaw=args.yaw, seed=args.seed)


def cmd_simulate(args, out: Path) -> int:
    cfg = _episode_config(args)
    if args.ensemble:
        report = run_ensemble(cfg, n_walkers=args.ensemble, speeds=args.speeds, seed=args.seed,
                              pose_radius=args.pose_radius, workers=args.workers)
        (out / "success_report.json").write_text(report.to_json() + "\n")
        _manifest(out, args, ["success_report.json"], {"episode": cfg})
        ratios = " ".join(f"{s:g}:{r:.3f}" for s, r in zip(report.speeds, report.success_ratio))
        print(f"ensemble n={report.n_walkers} success {ratios}")
        return EXIT_OK
    metrics, traces = run_episode(cfg)
    write_trace_csv(traces, out / "trace.csv")
    _write_json(out / "metrics.json", metrics.to_dict())
    _manifest(out, args, ["trace.csv", "metrics.json"], {"episode": cfg})
    mae = "nan" if metrics.to_dict()["velocity_mae"] is None else f"{metrics.velocity_mae:.4f}"
    cause = f" ({metrics.fall_cause})" if metrics.fall_cause else ""
    print(f"outcome={metrics.outcome}{cause} mae={mae} steps={metrics.steps_taken}")
    return EXIT_OK


def cmd_bench(args, out: Path) -> int:
    spec = _terrain_spec(args)
    try:
        report = bench_planner(args.batch, spec, args.reps, args.workers, args.seed)
    except BenchMismatch as exc:
        print(json.dumps({"error": "mismatch", "message": str(exc)}), file=sys.stderr)
        _manifest(out, args, [])
        return EXIT_MISMATCH
    (out / "bench.json").write_text(report.to_json() + "\n")
    _manifest(out, args, ["bench.json"], {"terrain": spec})
    print(f"batch={report.batch_size} batched={report.ms_batched_median:.2f} ms "
          f"scalar={report.ms_scalar_median:.2f} ms speedup={report.speedup:.2f}")
    return EXIT_OK


COMMANDS = {"gen-terrain": cmd_gen_terrain, "plan": cmd_plan,
            "simulate": cmd_simulate, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _apply_config(args)
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, out)
    except (UsageError, TerrainError, DynamicsError, PlanningError, ValueError) as exc:
        print(f"stairplan {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
