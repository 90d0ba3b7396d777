"""End-to-end acceptance checks, one test per criterion.

Every test prints a ``criterion N: PASS|FAIL`` line (also repeated in the
terminal summary) before asserting.
"""

import csv
import itertools
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seeker import checkpoint as ckpt
from seeker.cli import main
from seeker.dqn import Batch, TrainConfig, count_evaluations, desk_env_config, td_targets, train
from seeker.env import REWARD_VALUES, EnvConfig, SeekerEnv, compute_reward
from seeker.evaluation import RandomPolicy, StraightToTargetPolicy, evaluate, evaluate_policy
from seeker.gridgen import CellKind, GridMap, check_reachability, generate_gridworld, make_rng
from seeker.nn import KINDS, ArchDescriptor, init_params
from seeker.vision import cast_rays, slice_angles
from seeker.world import AGENT_RADIUS, AgentPose, Box2D, WorldState, to_world

from conftest import ACCEPTANCE_LINES
from oracles import flood_fill_reachable, march_ray, point_box_distance
from test_nn import fd_check


def verdict(n: int, ok: bool, detail: str) -> bool:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def test_c01_generation_census():
    rng = np.random.default_rng(2024)
    gen = make_rng(1)
    bad = 0
    t0 = time.perf_counter()
    for _ in range(10_000):
        w, h = int(rng.integers(3, 13)), int(rng.integers(3, 13))
        o = int(rng.integers(0, w * h - 1))
        g = generate_gridworld(w, h, o, gen)
        ok = (g.cells.shape == (h, w) and g.count(CellKind.AGENT) == 1 and g.count(CellKind.TARGET) == 1
              and g.count(CellKind.OBSTACLE) == o and g.count(CellKind.EMPTY) == w * h - o - 2)
        bad += not ok
    dt = time.perf_counter() - t0
    assert verdict(1, bad == 0 and dt < 10, f"{bad} bad maps of 10000, {dt:.2f}s (limit 10s)")


def test_c02_bfs_oracle_equivalence():
    t0 = time.perf_counter()
    mismatches = n = 0
    for a, t in itertools.permutations(range(9), 2):
        rest = [c for c in range(9) if c not in (a, t)]
        for mask in range(1 << len(rest)):
            cells = np.zeros(9, dtype=np.int8)
            cells[a], cells[t] = CellKind.AGENT, CellKind.TARGET
            for i, c in enumerate(rest):
                if mask >> i & 1:
                    cells[c] = CellKind.OBSTACLE
            cells = cells.reshape(3, 3)
            mismatches += check_reachability(GridMap(cells.copy())) != flood_fill_reachable(cells)
            n += 1
    assert n == 72 * 128
    rng = np.random.default_rng(7)
    gen = make_rng(8)
    for _ in range(10_000):
        g = generate_gridworld(10, 8, int(rng.integers(0, 79)), gen)
        mismatches += check_reachability(g) != flood_fill_reachable(g.cells)
        n += 1
    dt = time.perf_counter() - t0
    assert verdict(2, mismatches == 0 and dt < 60, f"{mismatches} mismatches in {n} instances, {dt:.1f}s (limit 60s)")


def test_c03_raycast_oracle():
    rng = np.random.default_rng(3)
    gen = make_rng(4)
    worst, kind_diff = 0.0, 0
    t0 = time.perf_counter()
    for _ in range(100):
        w, h = int(rng.integers(3, 13)), int(rng.integers(3, 13))
        g = generate_gridworld(w, h, int(rng.integers(0, w * h // 3 + 1)), gen)
        world = to_world(g, gen)
        angles = slice_angles(world.agent.heading)
        dist, kinds = cast_rays(world, angles)
        for ang, d, k in zip(angles, dist, kinds):
            md, mk = march_ray(g.cells, world.agent.x, world.agent.y, float(ang), step=1e-4)
            worst = max(worst, abs(d - md))
            kind_diff += int(k) != mk
    dt = time.perf_counter() - t0
    ok = worst < 1e-3 and kind_diff == 0 and dt < 60
    assert verdict(3, ok, f"max |d - march| = {worst:.2e}, {kind_diff} kind mismatches over 3200 rays, {dt:.1f}s")


# -- rewards and safety ------------------------------------------------------

def _scene(x, y, heading=0.0, target=(8, 3), obstacles=()):
    return WorldState(Box2D(0, 0, 10, 8), tuple(Box2D.cell(*c) for c in obstacles),
                      Box2D.cell(*target), AgentPose(x, y, heading))


# (prev, next, expected, label); each case isolates one condition or overlap
REWARD_SUITE = [
    (_scene(7.2, 3.5), _scene(8.2, 3.5), 0.0, "reached"),
    (_scene(0.9, 0.9, target=(0, 0)), _scene(0.2, 0.5, target=(0, 0)), 0.0, "reached+near"),
    (_scene(8.5, 3.5), _scene(8.5, 3.9), 0.0, "reached+away"),
    (_scene(4.5, 5.5, obstacles=[(5, 4)]), _scene(4.9, 4.5, obstacles=[(5, 4)]), -1.0, "near+toward"),
    (_scene(2.0, 4.0), _scene(0.1, 4.0), -1.0, "near+away"),
    (_scene(0.1, 4.0), _scene(0.1, 4.0, heading=1.0), -1.0, "near+still"),
    (_scene(4.5, 3.5), _scene(4.2, 3.5), -1.5, "away"),
    (_scene(4.5, 3.5), _scene(5.0, 3.5), -0.2, "toward"),
    (_scene(4.5, 3.5), _scene(4.5, 3.5, heading=2.0), -0.7, "default"),
    (_scene(4.5, 0.25), _scene(5.0, 0.25), -0.2, "toward at exact near threshold"),
]

ROLLOUT_CONFIGS = [EnvConfig(n_obstacles=o, width=w, height=h, max_steps=300, seed=s)
                   for s, (w, h, o) in enumerate([(10, 8, 0), (10, 8, 5), (10, 8, 20), (6, 5, 3), (12, 12, 40)])]


@pytest.fixture(scope="module")
def random_rollout():
    """1e5 uniform-random steps over many maps: rewards and independent clearances."""
    rng = np.random.default_rng(11)
    rewards, clear = [], []
    per = 100_000 // len(ROLLOUT_CONFIGS)
    for cfg in ROLLOUT_CONFIGS:
        env = SeekerEnv(cfg)
        env.reset()
        for _ in range(per):
            if env.done:
                env.reset()
            rewards.append(env.step(int(rng.integers(0, 5))).reward)
            w = env.world
            x, y = w.agent.x, w.agent.y
            c = min(x, w.boundary.max_x - x, y, w.boundary.max_y - y)
            for b in w.obstacles:
                c = min(c, point_box_distance(x, y, (b.min_x, b.min_y, b.max_x, b.max_y)))
            clear.append(c)
    return np.array(rewards), np.array(clear)


def test_c04_reward_exactness(random_rollout):
    cfg = EnvConfig()
    wrong = [label for prev, nxt, want, label in REWARD_SUITE if compute_reward(prev, nxt, cfg) != want]
    covered = {want for *_, want, _ in REWARD_SUITE}
    rewards, _ = random_rollout
    outside = set(np.unique(rewards)) - set(REWARD_VALUES)
    ok = not wrong and covered == set(REWARD_VALUES) and not outside and len(rewards) == 100_000
    assert verdict(4, ok, f"{len(REWARD_SUITE)} scripted cases, wrong={wrong}; "
                          f"{len(rewards)} random steps, values outside codomain={sorted(outside)}")


def test_c05_safety_invariant(random_rollout):
    _, clear = random_rollout
    r = AGENT_RADIUS
    worst = float(clear.min())
    ok = len(clear) == 100_000 and worst >= r - 1e-9
    assert verdict(5, ok, f"min clearance {worst:.12f} over {len(clear)} steps (radius {r})")


def test_c06_gradient_checks():
    t0 = time.perf_counter()
    errs = {k: fd_check(k, hidden=16, T=3) for k in KINDS}
    dt = time.perf_counter() - t0
    ok = max(errs.values()) < 1e-4 and dt < 30
    detail = ", ".join(f"{k} {e:.1e}" for k, e in errs.items())
    assert verdict(6, ok, f"max relative error {detail}; {dt:.1f}s (limit 30s)")


TERMINAL_FAILURES: list[str] = []
REWARDS = sorted(REWARD_VALUES)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0), st.integers(0, 2**32 - 1), st.sampled_from(KINDS))
def _terminal_rule(gamma, seed, kind):
    rng = np.random.default_rng(seed)
    p = init_params(ArchDescriptor(kind, 4, 6, 5), rng)
    p.tensors["out.b"][:] = rng.normal(0, 50, 5)  # large bootstrap values would show through
    if kind == "dqn":
        term = rng.random(10) < 0.5
        b = Batch(rng.normal(size=(10, 4)), rng.integers(0, 5, 10), rng.choice(REWARDS, 10),
                  rng.normal(size=(10, 4)), term)
    else:
        obs = rng.normal(size=(5, 3, 4))
        term = rng.random((4, 3)) < 0.5
        b = Batch(obs[:-1], rng.integers(0, 5, (4, 3)), rng.choice(REWARDS, (4, 3)), obs[1:],
                  term, np.ones((4, 3)))
    y = td_targets(b, p, gamma)
    if not np.array_equal(y[term], b.rewards[term]):
        TERMINAL_FAILURES.append(f"{kind} gamma={gamma}")


def test_c07_terminal_target_rule():
    TERMINAL_FAILURES.clear()
    _terminal_rule()
    ok = not TERMINAL_FAILURES
    assert verdict(7, ok, f"terminal targets equal raw reward for all sampled gamma; failures={TERMINAL_FAILURES[:3]}")


def test_c08_determinism(tmp_path, capsys):
    (tmp_path / "desk.cfg").write_text("phases = 0:2000,3:1000,5:1000\nseed = 5\n")
    runs = []
    for name in ("a", "b"):
        rc = main(["train", "--config", str(tmp_path / "desk.cfg"), "--arch", "dqn", "--out-dir", str(tmp_path / name)])
        assert rc == 0
        runs.append((tmp_path / name / "metrics.csv").read_bytes())
    capsys.readouterr()
    rc = main(["replay", "--log", str(tmp_path / "a" / "episodes.jsonl")])
    out = capsys.readouterr().out.splitlines()
    n_logged = len((tmp_path / "a" / "episodes.jsonl").read_text().splitlines())
    same = runs[0] == runs[1]
    replay_ok = rc == 0 and len(out) == n_logged and all(ln.endswith(" ok") for ln in out)
    assert verdict(8, same and replay_ok,
                   f"metrics identical={same} ({len(runs[0])} bytes); replay exit {rc}, {n_logged} episodes replayed exactly")


@pytest.mark.slow
def test_c09_learning_smoke():
    env = desk_env_config(n_obstacles=0)
    cfg = TrainConfig(phases=((0, 30_000),), eval_interval=5_000, seed=0)
    t0 = time.perf_counter()
    res = train(cfg, env, "dqn")
    base = 10_000
    dqn = evaluate(res.params, env, 100, base)
    rnd = evaluate_policy(RandomPolicy(0), env, 100, base)
    orc = evaluate_policy(StraightToTargetPolicy(env.turn_scale), env, 100, base)
    dt = time.perf_counter() - t0
    assert [r.map_key for r in dqn.rows] == [r.map_key for r in rnd.rows] == [r.map_key for r in orc.rows]
    gap = (dqn.avg_reward - rnd.avg_reward) / (orc.avg_reward - rnd.avg_reward)
    ok = dqn.success_rate >= 0.8 and gap >= 0.5
    assert verdict(9, ok, f"success {dqn.success_rate:.2f} (>= 0.8), reward dqn {dqn.avg_reward:.2f} / random "
                          f"{rnd.avg_reward:.2f} / oracle {orc.avg_reward:.2f}, gap fraction {gap:.3f} (>= 0.5), {dt:.0f}s")


def test_c10_schedule_arithmetic(tmp_path, capsys):
    (tmp_path / "full.cfg").write_text("phases = 0:500000,3:250000,5:250000\neval_interval = 25000\neval_maps = 5\n")
    rc = main(["train", "--config", str(tmp_path / "full.cfg"), "--out-dir", str(tmp_path / "o"), "--dry-run"])
    lines = capsys.readouterr().out.splitlines()
    counts = [int(ln.split("evaluations=")[1].split()[0]) for ln in lines if ln.startswith("phase")]
    maps = {ln.split("maps_per_eval=")[1] for ln in lines if ln.startswith("phase")}
    direct = count_evaluations(TrainConfig(phases=((0, 500_000), (3, 250_000), (5, 250_000)), eval_interval=25_000))
    ok = rc == 0 and counts == [20, 10, 10] == direct and maps == {"5"}
    assert verdict(10, ok, f"evaluations per phase {counts}, maps per evaluation {sorted(maps)}")


def test_c11_checkpoint_round_trip(tmp_path):
    env = desk_env_config(n_obstacles=3, max_steps=60)
    res = train(TrainConfig(phases=((3, 400),), eval_interval=400, eval_maps=1, hidden_dim=16, batch_size=16),
                env, "dqn-lstm")
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    ckpt.save_checkpoint(a, ckpt.Checkpoint(res.params, env, None))
    loaded = ckpt.load_checkpoint(a)
    ckpt.save_checkpoint(b, loaded)
    same_bytes = a.read_bytes() == b.read_bytes()
    mem = evaluate(res.params, env, 30, 900)
    disk = evaluate(loaded.params, loaded.env, 30, 900)
    rows_equal = mem.rows == disk.rows
    assert verdict(11, same_bytes and rows_equal,
                   f"save-load-save byte identical={same_bytes}; 30 evaluation rows identical={rows_equal}")
