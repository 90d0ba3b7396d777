"""The Seeker environment: reset, discrete actions, reward, observations, termination."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import vision
from .gridgen import GridMap, Rng, generate_solvable, make_rng
from .world import (
    REACH_THRESHOLD,
    WorldState,
    clearance,
    distance_to_target,
    move_agent,
    target_reached,
    to_world,
)

# (move, turn) per discrete action
ACTIONS: tuple[tuple[float, float], ...] = (
    (0.05, -1.0),
    (0.5, -0.5),
    (1.0, 0.0),
    (0.5, 0.5),
    (0.05, 1.0),
)
N_ACTIONS = len(ACTIONS)

R_REACHED = 0.0
R_NEAR = -1.0
R_AWAY = -1.5
R_TOWARD = -0.2
R_DEFAULT = -0.7
REWARD_VALUES = frozenset({R_REACHED, R_NEAR, R_AWAY, R_TOWARD, R_DEFAULT})

PURE = "pure"
IMPURE = "impure"
MODES = (PURE, IMPURE)
POSE_FEATURES = 6

MAX_GENERATION_ATTEMPTS = 1000


class InvalidActionError(ValueError):
    pass


class EpisodeFinishedError(RuntimeError):
    pass


@dataclass
class EnvConfig:
    width: int = 10
    height: int = 8
    n_obstacles: int = 0
    max_steps: int = 1000
    mode: str = IMPURE
    fov_deg: float = math.degrees(vision.DEFAULT_FOV)
    n_slices: int = vision.DEFAULT_SLICES
    move_scale: float = 0.5
    turn_scale: float = math.pi / 6
    near_threshold: float = 0.25
    reach_threshold: float = REACH_THRESHOLD
    seed: int = 0

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise ValueError("width and height must be >= 2")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not 0 <= self.n_obstacles <= self.width * self.height - 2:
            raise ValueError(f"n_obstacles must lie in [0, {self.width * self.height - 2}]")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_slices < 1:
            raise ValueError("n_slices must be >= 1")
        if not 0 < self.fov_deg < 360:
            raise ValueError("fov_deg must lie in (0, 360)")

    @property
    def fov(self) -> float:
        return math.radians(self.fov_deg)

    @property
    def obs_dim(self) -> int:
        return observation_dim(self.mode, self.n_slices)

    def with_obstacles(self, n: int) -> "EnvConfig":
        return replace(self, n_obstacles=n)


def observation_dim(mode: str, n_slices: int) -> int:
    return 2 * n_slices + (POSE_FEATURES if mode == IMPURE else 0)


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


def decode_action(a: int) -> tuple[float, float]:
    if isinstance(a, bool) or not isinstance(a, (int, np.integer)) or not 0 <= a < N_ACTIONS:
        raise InvalidActionError(f"action must be an integer in [0, {N_ACTIONS - 1}], got {a!r}")
    return ACTIONS[int(a)]


def compute_reward(prev: WorldState, nxt: WorldState, cfg: EnvConfig) -> float:
    """Reached > near obstacle/boundary > moved away > moved toward > default."""
    if target_reached(nxt, cfg.reach_threshold):
        return R_REACHED
    if min(clearance(nxt)) < cfg.near_threshold:
        return R_NEAR
    d_prev = distance_to_target(prev)
    d_next = distance_to_target(nxt)
    if d_next > d_prev:
        return R_AWAY
    if d_next < d_prev:
        return R_TOWARD
    return R_DEFAULT


def assemble_observation(world: WorldState, mode: str, fov: float = vision.DEFAULT_FOV,
                         n_slices: int = vision.DEFAULT_SLICES) -> np.ndarray:
    """Interleaved ``[d/D, kind, ...]`` with ``D`` the map diagonal; impure mode appends the pose block."""
    view = vision.observe(world, fov, n_slices)
    out = np.empty(observation_dim(mode, n_slices), dtype=np.float64)
    out[0:2 * n_slices:2] = view.distances / world.diagonal
    out[1:2 * n_slices:2] = view.kinds
    if mode == IMPURE:
        w, h = world.width, world.height
        tx, ty = world.target.center
        a = world.agent
        out[2 * n_slices:] = (a.x / w, a.y / h, math.sin(a.heading), math.cos(a.heading), tx / w, ty / h)
    return out


def reset(cfg: EnvConfig, rng: Rng) -> tuple[np.ndarray, WorldState]:
    """A fresh solvable map and starting pose drawn from ``rng``."""
    world, _ = new_world(cfg, rng)
    return assemble_observation(world, cfg.mode, cfg.fov, cfg.n_slices), world


def new_world(cfg: EnvConfig, rng: Rng) -> tuple[WorldState, GridMap]:
    grid = generate_solvable(cfg.width, cfg.height, cfg.n_obstacles, rng, MAX_GENERATION_ATTEMPTS)
    return to_world(grid, rng), grid


def step_world(world: WorldState, action: int, cfg: EnvConfig) -> tuple[WorldState, StepResult]:
    """Apply one discrete action to ``world`` (no episode bookkeeping)."""
    move, turn = decode_action(action)
    nxt = move_agent(world, move * cfg.move_scale, turn * cfg.turn_scale)
    reward = compute_reward(world, nxt, cfg)
    reached = target_reached(nxt, cfg.reach_threshold)
    done = reached or nxt.steps_taken >= cfg.max_steps
    info = {
        "reached": reached,
        "path_length": nxt.path_length,
        "steps_taken": nxt.steps_taken,
        "distance_to_target": distance_to_target(nxt),
    }
    obs = assemble_observation(nxt, cfg.mode, cfg.fov, cfg.n_slices)
    return nxt, StepResult(obs, reward, done, info)


class SeekerEnv:
    """Stateful wrapper: one episode at a time, a fresh map on every reset.

    ``reset()`` without a seed draws the next map seed from the stream seeded
    by ``cfg.seed``; ``reset(map_seed)`` rebuilds one specific episode.
    """

    def __init__(self, cfg: EnvConfig):
        self.cfg = cfg
        self._seed_stream = make_rng(cfg.seed)
        self.world: WorldState | None = None
        self.grid: GridMap | None = None
        self.map_seed: int | None = None
        self.done = True

    def reset(self, map_seed: int | None = None) -> np.ndarray:
        if map_seed is None:
            map_seed = int(self._seed_stream.integers(0, 2**63 - 1))
        self.map_seed = int(map_seed)
        self.world, self.grid = new_world(self.cfg, make_rng(self.map_seed))
        self.done = False
        return assemble_observation(self.world, self.cfg.mode, self.cfg.fov, self.cfg.n_slices)

    def step(self, action: int) -> StepResult:
        if self.world is None or self.done:
            raise EpisodeFinishedError("episode is finished; call reset()")
        self.world, result = step_world(self.world, action, self.cfg)
        self.done = result.done
        return result
