"""DQN training: replay, target network, epsilon-greedy, recurrent windows, obstacle curriculum."""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .env import N_ACTIONS, EnvConfig, assemble_observation, new_world, step_world
from .evaluation import evaluate
from .gridgen import make_rng
from .nn import (
    AdamState,
    ArchDescriptor,
    QNetParams,
    adam_step,
    backward,
    clone_params,
    forward,
    forward_sequence,
    init_params,
    zero_hidden,
)

log = logging.getLogger(__name__)

METRICS_HEADER = ("phase", "global_step", "event", "map_seed", "episode_reward",
                  "episode_len", "path_len", "success")


@dataclass
class TrainConfig:
    phases: tuple[tuple[int, int], ...] = ((0, 12000), (3, 6000), (5, 6000))
    eval_interval: int = 1000
    eval_maps: int = 5
    lr: float = 1e-5
    gamma: float = 0.99
    buffer_capacity: int = 50_000
    episode_capacity: int = 5_000
    batch_size: int = 64
    seq_len: int = 8
    target_sync_interval: int = 1000
    train_every: int = 1
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int | None = None  # None: 10% of the total schedule
    hidden_dim: int = 128
    clear_buffer_on_phase: bool = False
    seed: int = 0

    def __post_init__(self):
        self.phases = tuple((int(o), int(n)) for o, n in self.phases)
        if not self.phases:
            raise ValueError("at least one phase is required")
        if any(n <= 0 for _, n in self.phases):
            raise ValueError("phase step counts must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        for name in ("eval_interval", "batch_size", "seq_len", "target_sync_interval",
                     "train_every", "buffer_capacity", "episode_capacity"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def total_steps(self) -> int:
        return sum(n for _, n in self.phases)

    @property
    def decay_steps(self) -> int:
        if self.epsilon_decay_steps is not None:
            return self.epsilon_decay_steps
        return max(1, self.total_steps // 10)


def full_scale_train_config(**overrides) -> TrainConfig:
    """Full-length schedule: 500k/250k/250k steps, evaluation every 25k on 5 maps, lr 1e-5."""
    base = dict(phases=((0, 500_000), (3, 250_000), (5, 250_000)), eval_interval=25_000,
                eval_maps=5, lr=1e-5)
    base.update(overrides)
    return TrainConfig(**base)


def desk_env_config(**overrides) -> EnvConfig:
    base = dict(width=6, height=5, max_steps=200)
    base.update(overrides)
    return EnvConfig(**base)


# -- replay ----------------------------------------------------------------

@dataclass
class Transition:
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    terminal: bool


@dataclass
class EpisodeRecord:
    """Observations ``o_0..o_T`` with the ``T`` actions, rewards and terminal flags between them."""

    obs: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    terminals: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.actions)

    def freeze(self) -> "EpisodeRecord":
        return EpisodeRecord(
            np.asarray(self.obs, dtype=np.float64),
            np.asarray(self.actions, dtype=np.int64),
            np.asarray(self.rewards, dtype=np.float64),
            np.asarray(self.terminals, dtype=bool),
        )


class Batch(NamedTuple):
    """Flat ``(B, ...)`` arrays, or ``(L, B, ...)`` windows when ``mask`` is set."""

    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    terminals: np.ndarray
    mask: np.ndarray | None = None


class ReplayBuffer:
    """Fixed-capacity ring of single transitions, evicting the oldest first."""

    def __init__(self, capacity: int, obs_dim: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.next_obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.terminals = np.zeros(capacity, dtype=bool)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    @property
    def n_transitions(self) -> int:
        return self._size

    def add(self, t: Transition) -> None:
        i = self._next
        self.obs[i] = t.obs
        self.next_obs[i] = t.next_obs
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.terminals[i] = t.terminal
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def ordered(self) -> list[int]:
        """Slot indices from oldest to newest."""
        start = (self._next - self._size) % self.capacity
        return [(start + k) % self.capacity for k in range(self._size)]

    def clear(self) -> None:
        self._next = 0
        self._size = 0

    def sample(self, batch_size: int, rng: np.random.Generator, seq_len: int = 1) -> Batch:
        idx = rng.integers(0, self._size, size=batch_size)
        return Batch(self.obs[idx], self.actions[idx], self.rewards[idx], self.next_obs[idx],
                     self.terminals[idx])


class EpisodeReplayBuffer:
    """FIFO store of whole episodes; samples contiguous windows inside single episodes."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.episodes: deque[EpisodeRecord] = deque(maxlen=capacity)
        self._n = 0

    def __len__(self) -> int:
        return len(self.episodes)

    @property
    def n_transitions(self) -> int:
        return self._n

    def add(self, ep: EpisodeRecord) -> None:
        if len(ep) == 0:
            return
        if len(self.episodes) == self.capacity:
            self._n -= len(self.episodes[0])
        self.episodes.append(ep.freeze() if isinstance(ep.obs, list) else ep)
        self._n += len(ep)

    def clear(self) -> None:
        self.episodes.clear()
        self._n = 0

    def sample(self, batch_size: int, rng: np.random.Generator, seq_len: int = 8) -> Batch:
        picks = []
        for _ in range(batch_size):
            ep = self.episodes[int(rng.integers(0, len(self.episodes)))]
            n = min(seq_len, len(ep))
            start = int(rng.integers(0, len(ep) - n + 1))
            picks.append((ep, start, n))
        L = max(n for _, _, n in picks)
        d = picks[0][0].obs.shape[1]
        obs = np.zeros((L + 1, batch_size, d))
        actions = np.zeros((L, batch_size), dtype=np.int64)
        rewards = np.zeros((L, batch_size))
        terminals = np.zeros((L, batch_size), dtype=bool)
        mask = np.zeros((L, batch_size))
        for b, (ep, s, n) in enumerate(picks):
            obs[:n + 1, b] = ep.obs[s:s + n + 1]
            actions[:n, b] = ep.actions[s:s + n]
            rewards[:n, b] = ep.rewards[s:s + n]
            terminals[:n, b] = ep.terminals[s:s + n]
            mask[:n, b] = 1.0
        return Batch(obs[:-1], actions, rewards, obs[1:], terminals, mask)


def make_buffer(arch: ArchDescriptor, cfg: TrainConfig):
    if arch.recurrent:
        return EpisodeReplayBuffer(cfg.episode_capacity)
    return ReplayBuffer(cfg.buffer_capacity, arch.input_dim)


# -- acting and learning ---------------------------------------------------

def epsilon(t: int, cfg: TrainConfig) -> float:
    """Linear decay from ``epsilon_start`` to ``epsilon_end`` over ``decay_steps``, then flat."""
    if t >= cfg.decay_steps:
        return cfg.epsilon_end
    frac = max(t, 0) / cfg.decay_steps
    return cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start)


def select_action(params: QNetParams, obs: np.ndarray, hidden, eps: float, rng: np.random.Generator):
    """Epsilon-greedy; the network always runs so a recurrent state follows the real trajectory."""
    explore = rng.random() < eps
    q, hidden = forward(params, obs[None, :], hidden)
    if explore:
        return int(rng.integers(0, N_ACTIONS)), hidden
    return int(np.argmax(q[0])), hidden


def td_targets(batch: Batch, target_params: QNetParams, gamma: float) -> np.ndarray:
    """``r + gamma * max_a Q_target(s', a)``, or just ``r`` on terminal transitions.

    For windows the target network replays ``o_0..o_L`` from a zero state, so the
    bootstrap at step ``t`` sees the same history the online network saw.
    """
    arch = target_params.arch
    if batch.mask is None:
        q_next, _ = forward(target_params, batch.next_obs, zero_hidden(arch, len(batch.rewards)))
    else:
        seq = np.concatenate([batch.obs[:1], batch.next_obs], axis=0)
        q_all, _ = forward_sequence(target_params, seq, zero_hidden(arch, seq.shape[1]))
        q_next = q_all[1:]
    return np.where(batch.terminals, batch.rewards, batch.rewards + gamma * q_next.max(axis=-1))


def q_loss_and_grad(params: QNetParams, target_params: QNetParams, batch: Batch, gamma: float):
    """Mean squared TD error over (unmasked) samples and its parameter gradients."""
    arch = params.arch
    if batch.mask is None:
        xs = batch.obs[None]
        actions = batch.actions[None]
        mask = np.ones((1, len(batch.actions)))
        y = td_targets(batch, target_params, gamma)[None]
    else:
        xs = batch.obs
        actions = batch.actions
        mask = batch.mask
        y = td_targets(batch, target_params, gamma)
    q, _, cache = forward_sequence(params, xs, zero_hidden(arch, xs.shape[1]), keep_cache=True)
    q_sa = np.take_along_axis(q, actions[..., None], axis=-1)[..., 0]
    n = mask.sum()
    err = (q_sa - y) * mask
    loss = float((err * err).sum() / n)
    dq = np.zeros_like(q)
    np.put_along_axis(dq, actions[..., None], (2.0 * err / n)[..., None], axis=-1)
    return loss, backward(params, cache, dq)


def train_step(params: QNetParams, target_params: QNetParams, buffer, cfg: TrainConfig,
               rng: np.random.Generator, adam: AdamState) -> float | None:
    """One sampled minibatch update.  Returns ``None`` while the buffer is still warming up."""
    if buffer.n_transitions < cfg.batch_size:
        return None
    batch = buffer.sample(cfg.batch_size, rng, cfg.seq_len)
    loss, grads = q_loss_and_grad(params, target_params, batch, cfg.gamma)
    adam_step(params, grads, adam, cfg.lr)
    return loss


def sync_target(params: QNetParams) -> QNetParams:
    return clone_params(params)


# -- schedule --------------------------------------------------------------

class ScheduleEvent(NamedTuple):
    phase: int
    global_step: int
    kind: str  # "eval" or "checkpoint"


def plan_schedule(cfg: TrainConfig) -> list[ScheduleEvent]:
    """Evaluations every ``eval_interval`` steps within each phase; a checkpoint at each phase end."""
    events = []
    offset = 0
    for p, (_, n) in enumerate(cfg.phases):
        for local in range(cfg.eval_interval, n + 1, cfg.eval_interval):
            events.append(ScheduleEvent(p, offset + local, "eval"))
        offset += n
        events.append(ScheduleEvent(p, offset, "checkpoint"))
    return events


def count_evaluations(cfg: TrainConfig) -> list[int]:
    counts = [0] * len(cfg.phases)
    for ev in plan_schedule(cfg):
        if ev.kind == "eval":
            counts[ev.phase] += 1
    return counts


# -- the training run ------------------------------------------------------

@dataclass
class TrainResult:
    params: QNetParams
    metrics: list[dict]
    checkpoints: list[Path]
    losses: list[float]
    schedule: list[ScheduleEvent]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


class _RunLog:
    """Streams metrics rows to CSV and episode action logs to JSON lines."""

    def __init__(self, out_dir: Path | None, env_kv: dict):
        self.rows: list[dict] = []
        self.env_kv = env_kv
        self._csv = self._jsonl = None
        if out_dir is not None:
            self._csv_f = open(out_dir / "metrics.csv", "w", newline="")
            self._csv = csv.writer(self._csv_f, lineterminator="\n")
            self._csv.writerow(METRICS_HEADER)
            self._jsonl = open(out_dir / "episodes.jsonl", "w")

    def episode(self, phase, global_step, event, n_obstacles, map_seed, reward, length, path, success, actions):
        row = dict(phase=phase, global_step=global_step, event=event, map_seed=map_seed,
                   episode_reward=reward, episode_len=length, path_len=path, success=bool(success))
        self.rows.append(row)
        if self._csv is not None:
            self._csv.writerow([_fmt(row[k]) for k in METRICS_HEADER])
            self._csv_f.flush()
            env = dict(self.env_kv, n_obstacles=n_obstacles)
            self._jsonl.write(json.dumps(dict(row, env=env, actions=list(actions))) + "\n")
            self._jsonl.flush()

    def close(self):
        if self._csv is not None:
            self._csv_f.close()
            self._jsonl.close()


def train(cfg: TrainConfig, env_cfg: EnvConfig, kind: str = "dqn", out_dir=None,
          dry_run: bool = False) -> TrainResult:
    """Run the obstacle curriculum.

    Each phase overrides ``env_cfg.n_obstacles``.  Evaluations use fresh maps
    and the greedy policy; checkpoints are written at every phase end and as
    ``final.ckpt``.  ``dry_run`` skips all environment interaction and learning
    and only walks the schedule.
    """
    from . import checkpoint as ckpt
    from .config import env_to_kv

    arch = ArchDescriptor(kind, env_cfg.obs_dim, cfg.hidden_dim, N_ACTIONS)
    schedule = plan_schedule(cfg)
    seeds = np.random.SeedSequence(cfg.seed).spawn(4)
    params = init_params(arch, np.random.Generator(np.random.PCG64(seeds[0])))
    if dry_run:
        return TrainResult(params, [], [], [], schedule)

    explore_rng = np.random.Generator(np.random.PCG64(seeds[1]))
    map_rng = np.random.Generator(np.random.PCG64(seeds[2]))
    eval_rng = np.random.Generator(np.random.PCG64(seeds[3]))

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    runlog = _RunLog(out, env_to_kv(env_cfg))
    target = sync_target(params)
    adam = AdamState.for_params(params)
    buffer = make_buffer(arch, cfg)
    losses: list[float] = []
    checkpoints: list[Path] = []
    global_step = 0

    def save(name: str, phase: int):
        if out is None:
            return
        path = out / name
        ckpt.save_checkpoint(path, ckpt.Checkpoint(params=clone_params(params), env=env_cfg, train=cfg))
        checkpoints.append(path)
        log.info("phase %d: wrote %s at step %d", phase, path, global_step)

    try:
        for phase, (n_obs, n_steps) in enumerate(cfg.phases):
            ecfg = env_cfg.with_obstacles(n_obs)
            if phase > 0 and cfg.clear_buffer_on_phase:
                buffer.clear()
            ep = None
            for local in range(1, n_steps + 1):
                if ep is None:
                    map_seed = int(map_rng.integers(0, 2**63 - 1))
                    world, _ = new_world(ecfg, make_rng(map_seed))
                    obs = assemble_observation(world, ecfg.mode, ecfg.fov, ecfg.n_slices)
                    hidden = zero_hidden(arch, 1)
                    ep = EpisodeRecord(obs=[obs])
                    ep_reward = 0.0

                a, hidden = select_action(params, obs, hidden, epsilon(global_step, cfg), explore_rng)
                world, res = step_world(world, a, ecfg)
                terminal = bool(res.info["reached"])
                if arch.recurrent:
                    ep.obs.append(res.observation)
                else:
                    buffer.add(Transition(obs, a, res.reward, res.observation, terminal))
                ep.actions.append(a)
                ep.rewards.append(res.reward)
                ep.terminals.append(terminal)
                ep_reward += res.reward
                obs = res.observation
                global_step += 1

                if global_step % cfg.train_every == 0:
                    loss = train_step(params, target, buffer, cfg, explore_rng, adam)
                    if loss is not None:
                        if not math.isfinite(loss):
                            raise FloatingPointError(f"non-finite loss at step {global_step}")
                        losses.append(loss)
                if global_step % cfg.target_sync_interval == 0:
                    target = sync_target(params)

                if res.done or local == n_steps:
                    if arch.recurrent:
                        buffer.add(ep)
                    runlog.episode(phase, global_step, "train_episode", n_obs, map_seed, ep_reward,
                                   world.steps_taken, world.path_length, terminal, ep.actions)
                    ep = None

                if local % cfg.eval_interval == 0:
                    base = int(eval_rng.integers(0, 2**62))
                    report = evaluate(params, ecfg, cfg.eval_maps, base)
                    for row in report.rows:
                        runlog.episode(phase, global_step, "eval_episode", n_obs, row.map_seed,
                                       row.episode_reward, row.episode_len, row.path_len,
                                       row.success, row.actions)
                    log.info("step %d phase %d: eval reward %.2f success %.2f",
                             global_step, phase, report.avg_reward, report.success_rate)
            save(f"phase{phase}.ckpt", phase)
        save("final.ckpt", len(cfg.phases) - 1)
    finally:
        runlog.close()
    return TrainResult(params, runlog.rows, checkpoints, losses, schedule)


def write_metrics_csv(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for row in rows:
            w.writerow([_fmt(row[k]) for k in METRICS_HEADER])


def read_metrics_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))

