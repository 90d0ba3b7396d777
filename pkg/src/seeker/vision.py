"""Depth-and-label vision: slab-method ray casting over the agent's field of view."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .world import Box2D, WorldState

DEFAULT_FOV = math.pi / 2
DEFAULT_SLICES = 32

KIND_OTHER = 0
KIND_TARGET = 1


class RayHit(NamedTuple):
    distance: float
    kind: int


@dataclass(frozen=True)
class VisionObservation:
    """Per-slice hits ordered from the slice at ``heading - fov/2`` onward."""

    distances: np.ndarray
    kinds: np.ndarray

    @property
    def hits(self) -> list[RayHit]:
        return [RayHit(float(d), int(k)) for d, k in zip(self.distances, self.kinds)]

    def __len__(self) -> int:
        return len(self.distances)


def ray_box_intersect(origin, direction, box: Box2D) -> float | None:
    """Smallest ``t >= 0`` where the ray meets the closed box, or ``None``.

    A ray that starts inside (or on) the box returns 0.
    """
    ox, oy = origin
    dx, dy = direction
    t_near, t_far = -math.inf, math.inf
    for o, d, lo, hi in ((ox, dx, box.min_x, box.max_x), (oy, dy, box.min_y, box.max_y)):
        if d == 0.0:
            if o < lo or o > hi:
                return None
            continue
        t1 = (lo - o) / d
        t2 = (hi - o) / d
        if t1 > t2:
            t1, t2 = t2, t1
        t_near = max(t_near, t1)
        t_far = min(t_far, t2)
    if t_far < max(t_near, 0.0):
        return None
    return max(t_near, 0.0)


def _slab_many(ox: float, oy: float, dx: np.ndarray, dy: np.ndarray, boxes: np.ndarray) -> np.ndarray:
    """Entry distances for every (ray, box) pair, ``inf`` on a miss.  Shape ``(rays, boxes)``."""
    n, m = len(dx), len(boxes)
    if m == 0:
        return np.full((n, 0), np.inf)
    near = np.full((n, m), -np.inf)
    far = np.full((n, m), np.inf)
    for o, d, lo, hi in ((ox, dx, boxes[:, 0], boxes[:, 2]), (oy, dy, boxes[:, 1], boxes[:, 3])):
        d = d[:, None]
        nz = d != 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo[None, :] - o) / d
            t2 = (hi[None, :] - o) / d
        lo_t = np.where(nz, np.minimum(t1, t2), np.where((o >= lo) & (o <= hi), -np.inf, np.inf))
        hi_t = np.where(nz, np.maximum(t1, t2), np.where((o >= lo) & (o <= hi), np.inf, -np.inf))
        near = np.maximum(near, lo_t)
        far = np.minimum(far, hi_t)
    entry = np.maximum(near, 0.0)
    return np.where(far >= entry, entry, np.inf)


def _boundary_exit(world: WorldState, dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    b = world.boundary
    x, y = world.agent.x, world.agent.y
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = np.where(dx > 0, (b.max_x - x) / dx, np.where(dx < 0, (b.min_x - x) / dx, np.inf))
        ty = np.where(dy > 0, (b.max_y - y) / dy, np.where(dy < 0, (b.min_y - y) / dy, np.inf))
    return np.maximum(np.minimum(tx, ty), 0.0)


def cast_rays(world: WorldState, angles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest hit per absolute angle; the target wins exact ties."""
    angles = np.asarray(angles, dtype=np.float64)
    dx, dy = np.cos(angles), np.sin(angles)
    x, y = world.agent.x, world.agent.y
    t_other = _boundary_exit(world, dx, dy)
    if world.obstacles:
        t_other = np.minimum(t_other, _slab_many(x, y, dx, dy, world.obstacle_array).min(axis=1))
    tb = world.target
    t_target = _slab_many(x, y, dx, dy, np.array([[tb.min_x, tb.min_y, tb.max_x, tb.max_y]]))[:, 0]
    is_target = t_target <= t_other
    return np.where(is_target, t_target, t_other), is_target.astype(np.int8)


def cast_ray(world: WorldState, angle: float) -> RayHit:
    d, k = cast_rays(world, np.array([angle]))
    return RayHit(float(d[0]), int(k[0]))


def slice_angles(heading: float, fov: float = DEFAULT_FOV, n_slices: int = DEFAULT_SLICES) -> np.ndarray:
    """Centre angle of each FOV slice."""
    return heading - fov / 2 + (np.arange(n_slices) + 0.5) * (fov / n_slices)


def observe(world: WorldState, fov: float = DEFAULT_FOV, n_slices: int = DEFAULT_SLICES) -> VisionObservation:
    d, k = cast_rays(world, slice_angles(world.agent.heading, fov, n_slices))
    return VisionObservation(d, k)
