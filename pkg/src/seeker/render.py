"""Static SVG output: the 2D scene and the per-slice depth plot."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .vision import VisionObservation
from .world import WorldState

TARGET_FILL = "green"
OBSTACLE_FILL = "black"
AGENT_FILL = "blue"
OTHER_POINT = "red"

_HEADER = '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.0f}" height="{h:.0f}" viewBox="0 0 {w:.0f} {h:.0f}">\n'


def _rect(x, y, w, h, fill, cls, stroke="none"):
    return (f'<rect class="{cls}" x="{x:.3f}" y="{y:.3f}" width="{w:.3f}" height="{h:.3f}" '
            f'fill="{fill}" stroke="{stroke}"/>\n')


def scene_svg(world: WorldState, trajectory=None, scale: float = 40.0, margin: float = 10.0) -> str:
    """Map drawn with row 0 at the top, matching the ASCII layout."""
    def px(x):
        return margin + (x - world.boundary.min_x) * scale

    def py(y):
        return margin + (y - world.boundary.min_y) * scale

    W = world.width * scale + 2 * margin
    H = world.height * scale + 2 * margin
    out = [_HEADER.format(w=W, h=H)]
    out.append(_rect(px(world.boundary.min_x), py(world.boundary.min_y), world.width * scale,
                     world.height * scale, "white", "boundary", stroke="black"))
    for b in world.obstacles:
        out.append(_rect(px(b.min_x), py(b.min_y), (b.max_x - b.min_x) * scale,
                         (b.max_y - b.min_y) * scale, OBSTACLE_FILL, "obstacle"))
    t = world.target
    out.append(_rect(px(t.min_x), py(t.min_y), (t.max_x - t.min_x) * scale,
                     (t.max_y - t.min_y) * scale, TARGET_FILL, "target"))
    if trajectory:
        pts = " ".join(f"{px(x):.3f},{py(y):.3f}" for x, y in trajectory)
        out.append(f'<polyline class="trajectory" points="{pts}" fill="none" stroke="gray" stroke-width="1.5"/>\n')
    a = world.agent
    r = world.agent_radius * scale
    out.append(f'<circle class="agent" cx="{px(a.x):.3f}" cy="{py(a.y):.3f}" r="{r:.3f}" fill="{AGENT_FILL}"/>\n')
    tick = 2.0 * r
    out.append(f'<line class="heading" x1="{px(a.x):.3f}" y1="{py(a.y):.3f}" '
               f'x2="{px(a.x) + tick * math.cos(a.heading):.3f}" y2="{py(a.y) + tick * math.sin(a.heading):.3f}" '
               f'stroke="black" stroke-width="2"/>\n')
    out.append("</svg>\n")
    return "".join(out)


def depth_plot_svg(view: VisionObservation, max_distance: float | None = None,
                   width: float = 400.0, height: float = 200.0, margin: float = 20.0) -> str:
    """Slice index on x, distance on y; target points green, everything else red."""
    d = np.asarray(view.distances, dtype=float)
    k = np.asarray(view.kinds)
    top = max_distance if max_distance else max(float(d.max(initial=0.0)), 1e-9)
    n = len(d)
    W, H = width + 2 * margin, height + 2 * margin
    out = [_HEADER.format(w=W, h=H)]
    out.append(f'<line class="axis" x1="{margin}" y1="{margin + height}" x2="{margin + width}" y2="{margin + height}" stroke="black"/>\n')
    out.append(f'<line class="axis" x1="{margin}" y1="{margin}" x2="{margin}" y2="{margin + height}" stroke="black"/>\n')
    for i in range(n):
        x = margin + (i + 0.5) * width / max(n, 1)
        y = margin + height - (d[i] / top) * height
        colour = TARGET_FILL if k[i] == 1 else OTHER_POINT
        out.append(f'<circle class="slice" cx="{x:.3f}" cy="{y:.3f}" r="3" fill="{colour}"/>\n')
    out.append("</svg>\n")
    return "".join(out)


def render_scene(world: WorldState, path, trajectory=None) -> Path:
    path = Path(path)
    path.write_text(scene_svg(world, trajectory))
    return path


def render_depth_plot(view: VisionObservation, path, max_distance: float | None = None) -> Path:
    path = Path(path)
    path.write_text(depth_plot_svg(view, max_distance))
    return path
