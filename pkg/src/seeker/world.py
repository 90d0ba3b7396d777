"""Continuous 2D scene built from a gridworld, with collision-blocked agent motion.

One grid cell is one world unit.  ``x`` grows to the right (columns) and
``y`` grows downward (rows), so cell ``(cx, cy)`` occupies the box
``(cx, cy)-(cx+1, cy+1)``.  A heading ``theta`` points along
``(cos theta, sin theta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .gridgen import GridMap, Rng

AGENT_RADIUS = 0.15
REACH_THRESHOLD = 0.5
TWO_PI = 2.0 * math.pi

# positional slack when deciding which side of a face the agent is on
_FACE_TOL = 1e-9


@dataclass(frozen=True)
class Box2D:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if not (self.min_x < self.max_x and self.min_y < self.max_y):
            raise ValueError(f"degenerate box {self}")

    @classmethod
    def cell(cls, cx: int, cy: int) -> "Box2D":
        return cls(float(cx), float(cy), float(cx + 1), float(cy + 1))

    @property
    def center(self) -> tuple[float, float]:
        return 0.5 * (self.min_x + self.max_x), 0.5 * (self.min_y + self.max_y)

    def distance_to(self, x: float, y: float) -> float:
        """Euclidean distance from a point to the box (0 inside)."""
        dx = max(self.min_x - x, 0.0, x - self.max_x)
        dy = max(self.min_y - y, 0.0, y - self.max_y)
        return math.hypot(dx, dy)

    def scaled(self, k: float) -> "Box2D":
        return Box2D(self.min_x * k, self.min_y * k, self.max_x * k, self.max_y * k)


@dataclass(frozen=True)
class AgentPose:
    x: float
    y: float
    heading: float


@dataclass(frozen=True)
class WorldState:
    boundary: Box2D
    obstacles: tuple[Box2D, ...]
    target: Box2D
    agent: AgentPose
    steps_taken: int = 0
    path_length: float = 0.0
    agent_radius: float = AGENT_RADIUS

    @property
    def width(self) -> float:
        return self.boundary.max_x - self.boundary.min_x

    @property
    def height(self) -> float:
        return self.boundary.max_y - self.boundary.min_y

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    @cached_property
    def obstacle_array(self) -> np.ndarray:
        """Obstacles as an ``(n, 4)`` array of ``min_x, min_y, max_x, max_y``."""
        arr = np.array([(b.min_x, b.min_y, b.max_x, b.max_y) for b in self.obstacles], dtype=np.float64)
        return arr.reshape(len(self.obstacles), 4)

    def with_agent(self, x: float, y: float, heading: float | None = None) -> "WorldState":
        h = self.agent.heading if heading is None else heading
        return replace(self, agent=AgentPose(x, y, h))

    def scaled(self, k: float) -> "WorldState":
        """Whole scene, pose and accounting scaled by ``k``."""
        return WorldState(
            boundary=self.boundary.scaled(k),
            obstacles=tuple(b.scaled(k) for b in self.obstacles),
            target=self.target.scaled(k),
            agent=AgentPose(self.agent.x * k, self.agent.y * k, self.agent.heading),
            steps_taken=self.steps_taken,
            path_length=self.path_length * k,
            agent_radius=self.agent_radius * k,
        )


def to_world(grid: GridMap, rng: Rng, agent_radius: float = AGENT_RADIUS) -> WorldState:
    """Obstacle and target cells become unit boxes; the agent gets a random pose in its cell."""
    ax, ay = grid.agent
    tx, ty = grid.target
    x = float(rng.uniform(ax + agent_radius, ax + 1 - agent_radius))
    y = float(rng.uniform(ay + agent_radius, ay + 1 - agent_radius))
    heading = float(rng.uniform(0.0, TWO_PI))
    return WorldState(
        boundary=Box2D(0.0, 0.0, float(grid.width), float(grid.height)),
        obstacles=tuple(Box2D.cell(cx, cy) for cx, cy in grid.obstacles),
        target=Box2D.cell(tx, ty),
        agent=AgentPose(x, y, wrap_angle(heading)),
        agent_radius=agent_radius,
    )


def wrap_angle(theta: float) -> float:
    a = theta % TWO_PI
    return 0.0 if a >= TWO_PI else a


def free_distance(world: WorldState, heading: float) -> float:
    """Longest advance along ``heading`` keeping the agent ``agent_radius`` clear of walls.

    Obstacles are inflated by the radius into larger squares; the advance stops
    where the centre first crosses a face of an inflated box from its outer side.
    """
    r = world.agent_radius
    x, y = world.agent.x, world.agent.y
    dx, dy = math.cos(heading), math.sin(heading)
    b = world.boundary

    t = math.inf
    if dx > 0.0:
        t = min(t, (b.max_x - r - x) / dx)
    elif dx < 0.0:
        t = min(t, (b.min_x + r - x) / dx)
    if dy > 0.0:
        t = min(t, (b.max_y - r - y) / dy)
    elif dy < 0.0:
        t = min(t, (b.min_y + r - y) / dy)
    t = max(t, 0.0)

    for box in world.obstacles:
        lo_x, hi_x = box.min_x - r, box.max_x + r
        lo_y, hi_y = box.min_y - r, box.max_y + r
        if dx > 0.0 and x <= lo_x + _FACE_TOL:
            tf = max((lo_x - x) / dx, 0.0)
            if tf < t and lo_y <= y + tf * dy <= hi_y:
                t = tf
        elif dx < 0.0 and x >= hi_x - _FACE_TOL:
            tf = max((hi_x - x) / dx, 0.0)
            if tf < t and lo_y <= y + tf * dy <= hi_y:
                t = tf
        if dy > 0.0 and y <= lo_y + _FACE_TOL:
            tf = max((lo_y - y) / dy, 0.0)
            if tf < t and lo_x <= x + tf * dx <= hi_x:
                t = tf
        elif dy < 0.0 and y >= hi_y - _FACE_TOL:
            tf = max((hi_y - y) / dy, 0.0)
            if tf < t and lo_x <= x + tf * dx <= hi_x:
                t = tf
    return t


def move_agent(world: WorldState, distance: float, dtheta: float) -> WorldState:
    """Turn by ``dtheta``, then advance up to ``distance`` along the new heading.

    Motion stops at contact (no sliding); the step is counted even when the
    advance is zero.
    """
    if distance < 0:
        raise ValueError("reverse movement is not allowed")
    heading = wrap_angle(world.agent.heading + dtheta)
    advance = 0.0
    x, y = world.agent.x, world.agent.y
    if distance > 0:
        advance = min(distance, free_distance(world, heading))
        x += advance * math.cos(heading)
        y += advance * math.sin(heading)
    return replace(
        world,
        agent=AgentPose(x, y, heading),
        steps_taken=world.steps_taken + 1,
        path_length=world.path_length + advance,
    )


def distance_to_target(world: WorldState) -> float:
    cx, cy = world.target.center
    return math.hypot(world.agent.x - cx, world.agent.y - cy)


def clearance(world: WorldState) -> tuple[float, float]:
    """Raw centre-to-surface clearances ``(obstacle, boundary)``.

    With no obstacles the obstacle clearance is the map diagonal.
    """
    x, y = world.agent.x, world.agent.y
    if world.obstacles:
        obs = min(box.distance_to(x, y) for box in world.obstacles)
    else:
        obs = world.diagonal
    b = world.boundary
    bnd = min(x - b.min_x, b.max_x - x, y - b.min_y, b.max_y - y)
    return obs, bnd


def target_reached(world: WorldState, threshold: float = REACH_THRESHOLD) -> bool:
    return distance_to_target(world) < threshold
