"""Command-line entry point: ``seeker {gen-maps,train,eval,render,replay}``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import checkpoint as ckpt
from .config import env_from_kv, load_run_config
from .dqn import TrainConfig, count_evaluations, desk_env_config, train
from .env import MODES, new_world
from .evaluation import ScriptedActions, evaluate, GreedyQPolicy, check_compatible, run_episode
from .gridgen import check_reachability, generate_gridworld, generate_solvable, make_rng, parse_ascii, render_ascii
from .nn import KINDS
from .render import render_depth_plot, render_scene
from .vision import observe
from .world import to_world

log = logging.getLogger("seeker")

_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _setup_logging() -> None:
    level = _LEVELS.get(os.environ.get("SEEKER_LOG_LEVEL", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="seeker", description="Seeker pathfinding environment and DQN harness")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("gen-maps", help="print random gridworld maps")
    g.add_argument("--width", type=int, default=10)
    g.add_argument("--height", type=int, default=8)
    g.add_argument("--obstacles", type=int, default=0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--require-solvable", action="store_true")
    g.add_argument("--max-attempts", type=int, default=1000)

    t = sub.add_parser("train", help="run the obstacle curriculum")
    t.add_argument("--config", type=Path)
    t.add_argument("--arch", choices=KINDS, default="dqn")
    t.add_argument("--mode", choices=MODES)
    t.add_argument("--out-dir", type=Path, required=True)
    t.add_argument("--dry-run", action="store_true", help="print the schedule only")

    e = sub.add_parser("eval", help="greedy evaluation on a fixed map sequence")
    e.add_argument("--checkpoint", type=Path, required=True)
    e.add_argument("--obstacles", type=int, required=True)
    e.add_argument("--maps", type=int, default=100)
    e.add_argument("--seed", type=int, default=0, help="map seed base; map i uses seed+i")
    e.add_argument("--csv", type=Path)
    e.add_argument("--episodes-log", type=Path, help="write per-episode action logs (JSON lines)")

    r = sub.add_parser("render", help="write SVG scene and depth plot")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--map", type=Path, help="ASCII map file")
    src.add_argument("--checkpoint", type=Path)
    r.add_argument("--episode", type=int, default=0)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--obstacles", type=int)
    r.add_argument("--out", type=Path, required=True)
    r.add_argument("--depth-out", type=Path)

    rp = sub.add_parser("replay", help="re-run logged episodes from seed + actions")
    rp.add_argument("--log", type=Path, required=True)
    rp.add_argument("--index", type=int, help="replay one line; default all")
    return p


def cmd_gen_maps(a) -> int:
    rng = make_rng(a.seed)
    maps = []
    for _ in range(a.count):
        if a.require_solvable:
            grid = generate_solvable(a.width, a.height, a.obstacles, rng, a.max_attempts)
        else:
            grid = generate_gridworld(a.width, a.height, a.obstacles, rng)
        maps.append(render_ascii(grid))
    sys.stdout.write("\n".join(maps))
    return 0


def cmd_train(a) -> int:
    text = a.config.read_text() if a.config else ""
    env_cfg, train_cfg = load_run_config(text, desk_env_config(), TrainConfig())
    if a.mode:
        env_cfg = replace(env_cfg, mode=a.mode)
    if a.dry_run:
        counts = count_evaluations(train_cfg)
        for i, ((obs, steps), n) in enumerate(zip(train_cfg.phases, counts)):
            print(f"phase {i}: obstacles={obs} steps={steps} evaluations={n} maps_per_eval={train_cfg.eval_maps}")
        print(f"total: steps={train_cfg.total_steps} evaluations={sum(counts)}")
        return 0
    log.info("training %s (%s) into %s", a.arch, env_cfg.mode, a.out_dir)
    res = train(train_cfg, env_cfg, a.arch, a.out_dir)
    evals = [r for r in res.metrics if r["event"] == "eval_episode"]
    print(f"wrote {len(res.checkpoints)} checkpoints and {len(res.metrics)} metric rows "
          f"({len(evals)} evaluation episodes) to {a.out_dir}")
    return 0


def _episode_log_line(env_cfg, row) -> str:
    from .config import env_to_kv

    return json.dumps({"event": "eval_episode", "map_seed": row.map_seed, "env": env_to_kv(env_cfg),
                       "actions": row.actions, "episode_reward": row.episode_reward,
                       "episode_len": row.episode_len, "path_len": row.path_len, "success": row.success})


def cmd_eval(a) -> int:
    ck = ckpt.load_checkpoint(a.checkpoint)
    env_cfg = ck.env.with_obstacles(a.obstacles)
    report = evaluate(ck.params, env_cfg, a.maps, a.seed)
    if a.csv:
        with open(a.csv, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["map_seed", "episode_reward", "episode_len", "path_len", "success"])
            for row in report.rows:
                w.writerow([row.map_seed, repr(row.episode_reward), row.episode_len, repr(row.path_len),
                            int(row.success)])
            w.writerow(["mean", repr(report.avg_reward), repr(report.avg_episode_len),
                        repr(report.avg_path_len), repr(report.success_rate)])
    if a.episodes_log:
        with open(a.episodes_log, "w") as f:
            for row in report.rows:
                f.write(_episode_log_line(env_cfg, row) + "\n")
    print(f"obstacles={a.obstacles} maps={a.maps} episode_len={report.avg_episode_len:.2f} "
          f"reward={report.avg_reward:.2f} path_len={report.avg_path_len:.2f} success={report.success_rate:.2f}")
    return 0


def cmd_render(a) -> int:
    if a.map:
        grid = parse_ascii(a.map.read_text(), strict=False)
        if not check_reachability(grid):
            log.warning("map %s: target is not reachable", a.map)
        world = to_world(grid, make_rng(a.seed))
        render_scene(world, a.out)
        if a.depth_out:
            render_depth_plot(observe(world), a.depth_out, world.diagonal)
        return 0
    ck = ckpt.load_checkpoint(a.checkpoint)
    env_cfg = ck.env if a.obstacles is None else ck.env.with_obstacles(a.obstacles)
    check_compatible(ck.params, env_cfg)
    map_seed = a.seed + a.episode
    world, _ = new_world(env_cfg, make_rng(map_seed))
    trajectory: list = []
    row = run_episode(env_cfg, map_seed, GreedyQPolicy(ck.params), trajectory=trajectory)
    render_scene(world, a.out, trajectory)
    if a.depth_out:
        render_depth_plot(observe(world, env_cfg.fov, env_cfg.n_slices), a.depth_out, world.diagonal)
    print(f"map_seed={map_seed} reward={row.episode_reward:.2f} steps={row.episode_len} "
          f"path_len={row.path_len:.3f} success={row.success}")
    return 0


def replay_entry(entry: dict) -> float:
    """Re-run one logged episode and return its cumulative reward."""
    env_cfg = env_from_kv({k: str(v) for k, v in entry["env"].items()})
    actions = entry["actions"]
    row = run_episode(env_cfg, int(entry["map_seed"]), ScriptedActions(actions), max_steps=len(actions))
    return row.episode_reward


def cmd_replay(a) -> int:
    lines = [ln for ln in a.log.read_text().splitlines() if ln.strip()]
    picks = range(len(lines)) if a.index is None else [a.index]
    mismatches = 0
    for i in picks:
        entry = json.loads(lines[i])
        got = replay_entry(entry)
        ok = got == entry["episode_reward"]
        mismatches += not ok
        print(f"{i}: map_seed={entry['map_seed']} logged={entry['episode_reward']!r} "
              f"replayed={got!r} {'ok' if ok else 'MISMATCH'}")
    return 0 if mismatches == 0 else 2


COMMANDS = {
    "gen-maps": cmd_gen_maps,
    "train": cmd_train,
    "eval": cmd_eval,
    "render": cmd_render,
    "replay": cmd_replay,
}


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "seeker: error: a subcommand is required")
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, RuntimeError, ckpt.CheckpointError, IndexError, KeyError) as e:
        print(f"seeker {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
