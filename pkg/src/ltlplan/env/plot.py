"""Static SVG renderings of mazes, regions, plans, and executed paths."""

from __future__ import annotations

import numpy as np

from ..autodiff import atomic_write_bytes
from ..labeling import AxisRect, Circle
from .maze import MazeSpec

__all__ = ["render_svg", "save_svg"]

_SCALE = 40  # pixels per cell
_PLAN_COLORS = ["#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"]


def _y(maze: MazeSpec, y: float) -> float:
    return (maze.height * maze.cell - y) * _SCALE


def _polyline(maze, path, color, width, dash=None):
    points = " ".join(f"{p[0] * _SCALE:.1f},{_y(maze, p[1]):.1f}" for p in path)
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (
        f'<polyline points="{points}" fill="none" stroke="{color}" '
        f'stroke-width="{width}"{dash_attr} stroke-linejoin="round"/>'
    )


def render_svg(
    maze: MazeSpec,
    plans: list[np.ndarray] | None = None,
    executed: list[np.ndarray] | None = None,
    title: str | None = None,
) -> str:
    w = maze.width * maze.cell * _SCALE
    h = maze.height * maze.cell * _SCALE
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect width="{w}" height="{h}" fill="#fafafa"/>',
    ]
    ys, xs = np.nonzero(maze.grid)
    for x, y in zip(xs, ys):
        parts.append(
            f'<rect x="{x * _SCALE}" y="{_y(maze, (y + 1) * maze.cell):.1f}" '
            f'width="{_SCALE}" height="{_SCALE}" fill="#444"/>'
        )
    for name, region in zip(maze.props.names, maze.regions):
        if isinstance(region, Circle):
            cx, cy = region.center
            parts.append(
                f'<circle cx="{cx * _SCALE:.1f}" cy="{_y(maze, cy):.1f}" '
                f'r="{region.radius * _SCALE:.1f}" fill="#d62728" fill-opacity="0.25" '
                f'stroke="#d62728"/>'
            )
            parts.append(
                f'<text x="{cx * _SCALE:.1f}" y="{_y(maze, cy):.1f}" font-size="12" '
                f'text-anchor="middle" fill="#800">{name}</text>'
            )
        elif isinstance(region, AxisRect):
            x0, y0 = region.lo
            x1, y1 = region.hi
            parts.append(
                f'<rect x="{x0 * _SCALE:.1f}" y="{_y(maze, y1):.1f}" '
                f'width="{(x1 - x0) * _SCALE:.1f}" height="{(y1 - y0) * _SCALE:.1f}" '
                f'fill="#d62728" fill-opacity="0.25" stroke="#d62728"/>'
            )
    for k, plan in enumerate(plans or []):
        parts.append(_polyline(maze, np.asarray(plan)[:, :2], _PLAN_COLORS[k % len(_PLAN_COLORS)], 2))
    for k, path in enumerate(executed or []):
        parts.append(
            _polyline(maze, np.asarray(path)[:, :2], _PLAN_COLORS[k % len(_PLAN_COLORS)], 1.2, dash="4,3")
        )
    if title:
        parts.append(f'<text x="6" y="16" font-size="14" fill="#222">{title}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def save_svg(path: str, svg: str):
    atomic_write_bytes(path, svg.encode("utf-8"))
