"""Episode rollouts and the fixed-map-sequence evaluation protocol."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env import ACTIONS, N_ACTIONS, EnvConfig, assemble_observation, new_world, step_world
from .gridgen import make_rng
from .nn import QNetParams, forward, zero_hidden
from .world import WorldState


class ConfigError(ValueError):
    pass


@dataclass
class EpisodeRow:
    map_seed: int
    episode_reward: float
    episode_len: int
    path_len: float
    success: bool
    actions: list[int] = field(default_factory=list, repr=False)
    map_key: bytes = field(default=b"", repr=False)


@dataclass
class EvalReport:
    rows: list[EpisodeRow]
    n_obstacles: int = 0

    def _mean(self, attr: str) -> float:
        if not self.rows:
            return math.nan
        return float(np.mean([float(getattr(r, attr)) for r in self.rows]))

    @property
    def avg_episode_len(self) -> float:
        return self._mean("episode_len")

    @property
    def avg_reward(self) -> float:
        return self._mean("episode_reward")

    @property
    def avg_path_len(self) -> float:
        return self._mean("path_len")

    @property
    def success_rate(self) -> float:
        return self._mean("success")

    def summary(self) -> dict[str, float]:
        return {
            "avg_episode_len": self.avg_episode_len,
            "avg_reward": self.avg_reward,
            "avg_path_len": self.avg_path_len,
            "success_rate": self.success_rate,
        }


# -- policies --------------------------------------------------------------
# A policy sees the observation vector and, for scripted baselines, the world.

class GreedyQPolicy:
    def __init__(self, params: QNetParams):
        self.params = params
        self.hidden = None

    def reset(self, map_seed: int) -> None:
        self.hidden = zero_hidden(self.params.arch, 1)

    def act(self, obs: np.ndarray, world: WorldState) -> int:
        q, self.hidden = forward(self.params, obs[None, :], self.hidden)
        return int(np.argmax(q[0]))


class RandomPolicy:
    """Uniform actions; re-seeded per map so baselines are reproducible."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = make_rng(seed)

    def reset(self, map_seed: int) -> None:
        self.rng = np.random.Generator(np.random.PCG64([self.seed, map_seed]))

    def act(self, obs: np.ndarray, world: WorldState) -> int:
        return int(self.rng.integers(0, N_ACTIONS))


class StraightToTargetPolicy:
    """Scripted oracle: pick the action whose turn best aligns the heading with the target."""

    def __init__(self, turn_scale: float):
        self.turn_scale = turn_scale

    def reset(self, map_seed: int) -> None:
        pass

    def act(self, obs: np.ndarray, world: WorldState) -> int:
        tx, ty = world.target.center
        bearing = math.atan2(ty - world.agent.y, tx - world.agent.x)
        diff = (bearing - world.agent.heading + math.pi) % (2 * math.pi) - math.pi
        errors = [abs(diff - turn * self.turn_scale) for _, turn in ACTIONS]
        return int(np.argmin(errors))


class ScriptedActions:
    """Replays a fixed action list (used by ``replay``)."""

    def __init__(self, actions):
        self.actions = list(actions)
        self.i = 0

    def reset(self, map_seed: int) -> None:
        self.i = 0

    def act(self, obs, world) -> int:
        a = self.actions[self.i]
        self.i += 1
        return a


# -- rollouts --------------------------------------------------------------

def run_episode(env_cfg: EnvConfig, map_seed: int, policy, max_steps: int | None = None,
                trajectory: list | None = None) -> EpisodeRow:
    """One episode on the map built from ``map_seed``.

    ``trajectory``, when given, collects the agent ``(x, y)`` after reset and after every step.
    """
    world, grid = new_world(env_cfg, make_rng(map_seed))
    obs = assemble_observation(world, env_cfg.mode, env_cfg.fov, env_cfg.n_slices)
    policy.reset(map_seed)
    limit = env_cfg.max_steps if max_steps is None else max_steps
    total = 0.0
    actions = []
    reached = False
    if trajectory is not None:
        trajectory.append((world.agent.x, world.agent.y))
    for _ in range(limit):
        a = policy.act(obs, world)
        actions.append(a)
        world, res = step_world(world, a, env_cfg)
        total += res.reward
        obs = res.observation
        if trajectory is not None:
            trajectory.append((world.agent.x, world.agent.y))
        if res.done:
            reached = res.info["reached"]
            break
    return EpisodeRow(
        map_seed=int(map_seed),
        episode_reward=total,
        episode_len=world.steps_taken,
        path_len=world.path_length,
        success=bool(reached),
        actions=actions,
        map_key=grid.layout_key(),
    )


def evaluate_policy(policy, env_cfg: EnvConfig, n_maps: int, map_seed_base: int) -> EvalReport:
    """Map ``i`` is always built from seed ``map_seed_base + i``, whatever the policy."""
    rows = [run_episode(env_cfg, map_seed_base + i, policy) for i in range(n_maps)]
    return EvalReport(rows, env_cfg.n_obstacles)


def check_compatible(params: QNetParams, env_cfg: EnvConfig) -> None:
    arch = params.arch
    if arch.input_dim != env_cfg.obs_dim:
        raise ConfigError(
            f"network expects {arch.input_dim} inputs but {env_cfg.mode} observations "
            f"with {env_cfg.n_slices} slices have {env_cfg.obs_dim}"
        )
    if arch.n_actions != N_ACTIONS:
        raise ConfigError(f"network has {arch.n_actions} outputs, environment has {N_ACTIONS} actions")


def evaluate(params: QNetParams, env_cfg: EnvConfig, n_maps: int, map_seed_base: int) -> EvalReport:
    """Greedy rollouts of a Q-network over the fixed map sequence."""
    check_compatible(params, env_cfg)
    return evaluate_policy(GreedyQPolicy(params), env_cfg, n_maps, map_seed_base)
