"""Unified command line: train, eval, serve, scene-check, reward-trace."""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, echo_config, load_config

DEFAULT_CONFIG_ENV = "PEDISIM_CONFIG"


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=os.environ.get(DEFAULT_CONFIG_ENV),
                   help="JSON run config (default: $PEDISIM_CONFIG)")
    p.add_argument("--override", "-o", action="append", default=[],
                   metavar="KEY=VALUE", help="dotted config override, repeatable")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pedisim",
                                     description="quadruped pedipulation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the policy-gradient trainer")
    _add_common(p)
    p.add_argument("--stage", type=int, choices=(1, 2, 3), default=None)
    p.add_argument("--envs", type=int, default=None)
    p.add_argument("--updates", type=int, default=None)

    p = sub.add_parser("eval", help="run eval scenes or the free-space protocol")
    _add_common(p)
    p.add_argument("--scene", action="append", default=[], help="eval scene name, repeatable")
    p.add_argument("--free-space", action="store_true")
    p.add_argument("--switch", action="store_true", help="free-space with the contact switch on")
    p.add_argument("--controller", default="baseline", help="baseline | checkpoint:<path>")
    p.add_argument("--n-commands", type=int, default=None)

    p = sub.add_parser("serve", help="run the live teleoperation service")
    _add_common(p)
    p.add_argument("--scene", default="switch_demo")
    p.add_argument("--controller", default="baseline")
    p.add_argument("--port", type=int, default=None)

    p = sub.add_parser("scene-check", help="validate scenario invariants by sampling")
    _add_common(p)
    p.add_argument("--samples", type=int, default=200, help="spawn samples per scenario")
    p.add_argument("--export", default=None, help="directory to export scene files to")

    p = sub.add_parser("reward-trace", help="replay a trajectory log through the reward engine")
    _add_common(p)
    p.add_argument("log", help="trajectory log (JSONL)")
    return parser


def _config_from_args(args) -> "RunConfig":
    cfg = load_config(args.config, args.override)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, out_dir=args.out)
    return cfg


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    if args.stage is not None:
        cfg = dataclasses.replace(cfg, stage=args.stage)
    if args.envs is not None:
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, num_envs=args.envs))
    if args.updates is not None:
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, updates=args.updates))
    echo_config(cfg, cfg.out_dir)

    from .training.ppo import PpoConfig, Trainer, TrainerConfig

    t = cfg.train
    trainer_cfg = TrainerConfig(
        num_envs=t.num_envs, updates=t.updates, stage=cfg.stage, seed=cfg.seed,
        ppo=PpoConfig(horizon=t.horizon, gamma=t.gamma, lam=t.lam, clip=t.clip,
                      epochs=t.epochs, minibatches=t.minibatches, lr=t.lr,
                      value_coef=t.value_coef, entropy_coef=t.entropy_coef,
                      max_grad_norm=t.max_grad_norm),
        env=dataclasses.replace(cfg.env, stage=cfg.stage),
        checkpoint_every=t.checkpoint_every,
        out_dir=cfg.out_dir,
    )
    trainer = Trainer(trainer_cfg)
    metrics = trainer.run()
    last = metrics[-1]
    print(f"done: {len(metrics)} updates, mean tracking reward {last['mean_tracking_reward']:.3f}, "
          f"stage {last['stage']}, checkpoints in {cfg.out_dir}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    from .evalrun import run_free_space_eval, run_scene_eval, summarize, write_summary_csv

    reports = []
    logs = []
    if args.free_space:
        n = args.n_commands or cfg.eval.n_commands
        report = run_free_space_eval(args.controller, n_commands=n, switch=args.switch,
                                     seed=cfg.seed, settle_seconds=cfg.eval.settle_seconds,
                                     morphology=cfg.env.morphology)
        reports.append(report)
    for scene in args.scene:
        log, report = run_scene_eval(scene, args.controller, log_scan=cfg.eval.log_scan,
                                     morphology=cfg.env.morphology)
        log.save(out_dir / f"log_{scene}.jsonl")
        logs.append(log)
        reports.append(report)
    if not reports:
        print("nothing to do: pass --scene and/or --free-space", file=sys.stderr)
        return 2
    if logs:
        write_summary_csv(summarize(logs), out_dir)
    for r in reports:
        print(json.dumps(r.to_dict()))
    (out_dir / "reports.json").write_text(json.dumps([r.to_dict() for r in reports], indent=2))
    return 0


def cmd_serve(args) -> int:
    cfg = _config_from_args(args)
    port = args.port or cfg.teleop.port

    from .teleop import serve_session

    serve_session(scene_name=args.scene, controller=args.controller, port=port, run_cfg=cfg)
    return 0


def cmd_scene_check(args) -> int:
    cfg = _config_from_args(args)
    from .scenarios import ConstraintViolation, default_scenarios, instantiate_scenario, spawn_between_pair
    from .mdp import SpawnExhausted, draw_randomization, sample_spawn
    from .geometry import save_scene

    rng = np.random.default_rng(cfg.seed)
    failures = 0
    if args.export:
        Path(args.export).mkdir(parents=True, exist_ok=True)
    for sid, spec in default_scenarios().items():
        exhausted = 0
        between = 0
        for k in range(args.samples):
            draw = draw_randomization(cfg.env.randomization, rng)
            try:
                scene = instantiate_scenario(spec, draw, rng, cfg.env.randomization)
            except ConstraintViolation as e:
                print(f"{sid}: constraint violation: {e}")
                failures += 1
                continue
            try:
                xy, yaw = sample_spawn(scene.world, scene.spawn_space, rng, cfg.env.spawn)
            except SpawnExhausted:
                exhausted += 1
                continue
            if sid == "E" and spawn_between_pair(scene, xy):
                between += 1
            if args.export and k == 0:
                save_scene(Path(args.export) / f"scenario_{sid}.json", scene.world,
                           spawn=((xy[0], xy[1], 0.0), yaw))
        line = f"{sid}: {args.samples} draws, {exhausted} spawn-exhausted"
        if sid == "E":
            line += f", {between / max(args.samples - exhausted, 1):.1%} spawns between the obstacles"
        print(line)
        if exhausted > 0:
            failures += 1
    print("scene-check:", "FAIL" if failures else "OK")
    return 1 if failures else 0


def cmd_reward_trace(args) -> int:
    cfg = _config_from_args(args)
    from .evalrun import TrajectoryLog, replay_reward_trace

    log = TrajectoryLog.load(args.log)
    result = replay_reward_trace(log, morphology=cfg.env.morphology)
    print(f"replayed {result['steps']} steps, {len(result['mismatches'])} mismatches")
    for t, term, logged, got in result["mismatches"][:20]:
        print(f"  t={t:.3f} {term}: logged {logged!r} recomputed {got!r}")
    return 1 if result["mismatches"] else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return {
            "train": cmd_train,
            "eval": cmd_eval,
            "serve": cmd_serve,
            "scene-check": cmd_scene_check,
            "reward-trace": cmd_reward_trace,
        }[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
