"""Seeker: a gridworld-derived 2D pathfinding environment with ray-cast vision,
numpy Q-networks (dense, GRU, LSTM) and a curriculum training harness."""

from .env import ACTIONS, EnvConfig, SeekerEnv, step_world
from .gridgen import GridMap, check_reachability, generate_gridworld, generate_solvable, make_rng
from .nn import ArchDescriptor, init_params
from .world import WorldState, to_world

__version__ = "0.1.0"

__all__ = [
    "ACTIONS", "ArchDescriptor", "EnvConfig", "GridMap", "SeekerEnv", "WorldState",
    "check_reachability", "generate_gridworld", "generate_solvable", "init_params",
    "make_rng", "step_world", "to_world",
]
