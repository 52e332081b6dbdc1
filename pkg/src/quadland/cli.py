"""Command-line front end: train, eval, render, inspect-config.

Exit codes: 0 on success, 2 for configuration problems (bad config
file, bad flags, unreadable checkpoint), 3 for runtime failures.
"""

import argparse
import dataclasses
import math
import os
import sys
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import (
    ExperimentConfig,
    apply_overrides,
    effective_text,
    load_config,
)
from .curriculum import EVAL_GOAL_TOLERANCE
from .errors import ConfigError, IntegrationError, TrainingError
from .landing_env import GoalBox, make_platform
from .policy import load_checkpoint
from .ppo import EvalReport, train
from .render import render_overlay
from .trajectory import (
    LANDING_COLUMNS,
    SETPOINT_COLUMNS,
    read_trajectory,
    record_episode,
    write_trajectory,
)

DEFAULT_EVAL_POSITIONS = ((0.0, 2.0), (-1.5, 1.6), (1.5, 1.8))
PROGRESS_EVERY = 10


def _parse_positions(text: str) -> List[Tuple[float, float]]:
    positions = []
    for chunk in text.split(";"):
        parts = chunk.split(",")
        if len(parts) != 2:
            raise ConfigError(f"bad position {chunk!r}; expected x,z pairs "
                              "separated by semicolons")
        try:
            positions.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ConfigError(f"bad position {chunk!r}: {exc}") from exc
    if not positions:
        raise ConfigError("empty position list")
    return positions


def _load_with_overrides(args) -> ExperimentConfig:
    config = load_config(args.config)
    config, notes = apply_overrides(
        config, task=getattr(args, "task", None),
        seed=getattr(args, "seed", None),
        output_dir=getattr(args, "out", None),
        total_timesteps=getattr(args, "total_timesteps", None))
    for note in notes:
        print(note, file=sys.stderr)
    return config


def cmd_train(args) -> int:
    config = _load_with_overrides(args)
    outdir = config.output_dir
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "config.ini"), "w") as fh:
        fh.write(effective_text(config))

    def progress(stats: dict):
        if stats["iteration"] % PROGRESS_EVERY != 0 and stats["iteration"] != 1:
            return
        rate = stats["success_rate"]
        rate_text = f"{100.0 * rate:5.1f}%" if math.isfinite(rate) else "  n/a"
        print(f"iter {stats['iteration']:5d}  "
              f"steps {stats['timesteps']:9d}  "
              f"return {stats['mean_return']:10.2f}  "
              f"success {rate_text}", flush=True)

    result = train(
        config.make_env, config.ppo,
        config.curriculum if config.uses_curriculum else None,
        metrics_path=os.path.join(outdir, "metrics.csv"),
        checkpoint_dir=os.path.join(outdir, "checkpoints"),
        progress=progress)
    stop = "success-rate stop" if result.stopped_early else "timestep budget"
    print(f"finished after {result.timesteps} steps, "
          f"{result.iterations} iterations, {result.episodes} episodes "
          f"({stop}); artifacts in {outdir}")
    return 0


def _format_summary(report: EvalReport) -> str:
    lines = ["initial (x, z)      success"]
    for (x, z), pct in zip(report.positions, report.per_position_pct):
        lines.append(f"({x:g}, {z:g})".ljust(20) + f"{pct:.1f}%")
    lines.append("total".ljust(20) + f"{report.total_pct:.1f}%")
    return "\n".join(lines) + "\n"


def cmd_eval(args) -> int:
    params, task = load_checkpoint(args.checkpoint)
    config = _load_with_overrides(args)
    if task and task != config.task:
        print(f"checkpoint was trained on task {task}; using it")
        config = dataclasses.replace(config, task=task)
    env = config.make_env(config.seed)
    if env.observation_dim != params.obs_dim:
        raise ConfigError(
            f"checkpoint expects {params.obs_dim}-dim observations but the "
            f"{config.task} environment produces {env.observation_dim}")
    outdir = args.out if args.out is not None else config.output_dir
    os.makedirs(outdir, exist_ok=True)

    if config.task == "landing2d":
        env.configure_eval()
        positions = (_parse_positions(args.positions)
                     if args.positions else list(DEFAULT_EVAL_POSITIONS))
        successes = []
        trial_rows = []
        for p_index, position in enumerate(positions, start=1):
            wins = 0
            for trial in range(1, args.trials + 1):
                success, total, rows = record_episode(params, env,
                                                      position=position)
                wins += success
                trial_rows.append((position[0], position[1], trial,
                                   int(success), len(rows) - 1, total))
                write_trajectory(
                    os.path.join(outdir, f"traj_p{p_index}_t{trial}.csv"),
                    LANDING_COLUMNS, rows)
            successes.append(wins)
        report = EvalReport(positions=positions, successes=successes,
                            n_trials=args.trials)
        write_trajectory(os.path.join(outdir, "trials.csv"),
                         ("position_x", "position_z", "trial", "success",
                          "steps", "total_reward"), trial_rows)
        summary = _format_summary(report)
    else:
        wins = 0
        trial_rows = []
        for trial in range(1, args.trials + 1):
            success, total, rows = record_episode(params, env)
            wins += success
            start = rows[0]
            trial_rows.append((start[2], start[3], start[4], trial,
                               int(success), total))
            write_trajectory(os.path.join(outdir, f"traj_t{trial}.csv"),
                             SETPOINT_COLUMNS, rows)
        write_trajectory(os.path.join(outdir, "trials.csv"),
                         ("start_x", "start_y", "start_z", "trial",
                          "success", "total_reward"), trial_rows)
        summary = (f"set-point hold success: {wins}/{args.trials} "
                   f"({100.0 * wins / args.trials:.1f}%)\n")

    with open(os.path.join(outdir, "summary.txt"), "w") as fh:
        fh.write(summary)
    print(summary, end="")
    return 0


def cmd_render(args) -> int:
    columns, rows = read_trajectory(args.trajectory)
    config = load_config(args.config)
    tilt = (math.radians(args.tilt_deg) if args.tilt_deg is not None
            else config.curriculum.tilt_final)
    landing = config.landing
    platform = make_platform(landing.goal_x, landing.goal_z, tilt,
                             active=True,
                             top_length=landing.platform_top_length,
                             base_depth=landing.platform_base_depth)
    goal_box = GoalBox(
        center=np.array([landing.goal_x, landing.goal_z, 0.0, 0.0, tilt]),
        tolerance=EVAL_GOAL_TOLERANCE.copy())
    out = args.out if args.out is not None else \
        os.path.splitext(args.trajectory)[0] + ".svg"
    render_overlay(columns, rows, platform, goal_box, out)
    print(f"wrote {out}")
    return 0


def cmd_inspect_config(args) -> int:
    config = _load_with_overrides(args)
    print(effective_text(config), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadland",
        description="Quadrotor set-point and inclined-landing training")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="experiment config file (INI)")
        p.add_argument("--task", choices=("landing2d", "setpoint3d"))
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")

    p_train = sub.add_parser("train", help="train a policy")
    add_common(p_train)
    p_train.add_argument("--total-timesteps", type=int,
                         help="override the training budget")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    add_common(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--trials", type=int, default=10)
    p_eval.add_argument("--positions",
                        help="landing starts as x,z;x,z;... "
                        "(default: 0,2;-1.5,1.6;1.5,1.8)")
    p_eval.set_defaults(func=cmd_eval)

    p_render = sub.add_parser("render", help="draw a trajectory figure")
    p_render.add_argument("--trajectory", required=True,
                          help="trajectory CSV from eval")
    p_render.add_argument("--config", help="experiment config file (INI)")
    p_render.add_argument("--out", help="output SVG path")
    p_render.add_argument("--tilt-deg", type=float,
                          help="platform tilt in degrees")
    p_render.set_defaults(func=cmd_render)

    p_inspect = sub.add_parser("inspect-config",
                               help="print the effective configuration")
    add_common(p_inspect)
    p_inspect.set_defaults(func=cmd_inspect_config)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (TrainingError, IntegrationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
