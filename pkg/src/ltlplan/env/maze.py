"""Grid mazes with continuous dynamics on top.

Occupancy grids use ``grid[iy, ix] == True`` for walls; continuous positions
live in [0, W] x [0, H] with unit cells, cell (ix, iy) spanning
[ix, ix+1) x [iy, iy+1). The agent is a point; motion resolves wall contact
by per-axis sliding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..labeling import Circle, LabelingConfig, Region
from ..ltlf import PropSet

__all__ = ["MazeSpec", "open_maze", "u_maze", "rooms_maze", "builtin_maze", "astar"]


@dataclass(frozen=True)
class MazeSpec:
    """Occupancy grid plus named propositions over spatial regions."""

    name: str
    grid: np.ndarray  # (H, W) bool, True = wall
    props: PropSet
    regions: tuple[Region, ...]
    horizon: int
    cell: float = 1.0
    start_hint: tuple[float, float] | None = None
    goal_hint: tuple[float, float] | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=bool)
        object.__setattr__(self, "grid", grid)
        if len(self.regions) != len(self.props):
            raise ValueError("one region per proposition required")
        free = ~grid
        if not free.any():
            raise ValueError("maze has no free cells")
        component = self._component(free)
        if (free & ~component).any():
            raise ValueError(f"maze {self.name!r}: free cells are not connected")
        for region in self.regions:
            center = region.center if isinstance(region, Circle) else (
                (region.lo[0] + region.hi[0]) / 2.0,
                (region.lo[1] + region.hi[1]) / 2.0,
            )
            if not self.is_free(np.asarray(center)[None])[0]:
                raise ValueError(f"maze {self.name!r}: region center {center} is inside a wall")

    @staticmethod
    def _component(free: np.ndarray) -> np.ndarray:
        seed = tuple(np.argwhere(free)[0])
        seen = np.zeros_like(free)
        stack = [seed]
        seen[seed] = True
        while stack:
            y, x = stack.pop()
            for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ny, nx = y + dy, x + dx
                if 0 <= ny < free.shape[0] and 0 <= nx < free.shape[1]:
                    if free[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        stack.append((ny, nx))
        return seen

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def labeling(self) -> LabelingConfig:
        return LabelingConfig(self.props, self.regions)

    def is_free(self, pos: np.ndarray) -> np.ndarray:
        """Vectorized free-space test for positions (..., 2) in world units."""
        pos = np.asarray(pos, dtype=float) / self.cell
        ix = np.floor(pos[..., 0]).astype(int)
        iy = np.floor(pos[..., 1]).astype(int)
        inside = (ix >= 0) & (ix < self.width) & (iy >= 0) & (iy < self.height)
        out = np.zeros(pos.shape[:-1], dtype=bool)
        safe_x = np.clip(ix, 0, self.width - 1)
        safe_y = np.clip(iy, 0, self.height - 1)
        out[inside] = ~self.grid[safe_y[inside], safe_x[inside]]
        return out

    def free_cells(self) -> np.ndarray:
        ys, xs = np.nonzero(~self.grid)
        return np.stack([xs, ys], axis=1)

    def cell_center(self, cell_xy) -> np.ndarray:
        return (np.asarray(cell_xy, dtype=float) + 0.5) * self.cell

    def sample_free_position(self, rng: np.random.Generator, pad: float = 0.25,
                             reject=None, max_tries: int = 1000) -> np.ndarray:
        """Uniform position inside a random free cell, padded off the walls.

        ``reject(pos) -> bool`` filters out unwanted draws (e.g. inside an
        unsafe region).
        """
        cells = self.free_cells()
        for _ in range(max_tries):
            cell = cells[rng.integers(len(cells))]
            pos = (cell + pad + rng.random(2) * (1.0 - 2 * pad)) * self.cell
            if reject is None or not reject(pos):
                return pos
        raise RuntimeError("could not sample a free position")


def astar(maze: MazeSpec, start_cell, goal_cell) -> list[tuple[int, int]] | None:
    """4-connected shortest cell path, or None when unreachable."""
    import heapq

    start = tuple(int(v) for v in start_cell)
    goal = tuple(int(v) for v in goal_cell)
    free = ~maze.grid

    def ok(c):
        x, y = c
        return 0 <= x < maze.width and 0 <= y < maze.height and free[y, x]

    if not (ok(start) and ok(goal)):
        return None
    frontier = [(0.0, start)]
    came: dict = {start: None}
    cost = {start: 0.0}
    while frontier:
        _, current = heapq.heappop(frontier)
        if current == goal:
            path = []
            while current is not None:
                path.append(current)
                current = came[current]
            return path[::-1]
        cx, cy = current
        for nxt in ((cx + 1, cy), (cx - 1, cy), (cx, cy + 1), (cx, cy - 1)):
            if not ok(nxt):
                continue
            new_cost = cost[current] + 1.0
            if new_cost < cost.get(nxt, np.inf):
                cost[nxt] = new_cost
                came[nxt] = current
                heur = abs(nxt[0] - goal[0]) + abs(nxt[1] - goal[1])
                heapq.heappush(frontier, (new_cost + heur, nxt))
    return None


def _grid_from_rows(rows: list[str]) -> np.ndarray:
    # rows given top-down for readability; flip so grid[0] is y = 0
    return np.array([[c == "#" for c in row] for row in reversed(rows)], dtype=bool)


def open_maze() -> MazeSpec:
    """Empty 6x6 arena: border walls only."""
    grid = np.zeros((6, 6), dtype=bool)
    grid[0, :] = grid[-1, :] = grid[:, 0] = grid[:, -1] = True
    props = PropSet(["p0", "p1"])
    regions = (Circle((2.0, 2.0), 0.7), Circle((4.0, 4.0), 0.7))
    return MazeSpec("open", grid, props, regions, horizon=32,
                    start_hint=(1.5, 1.5), goal_hint=(4.5, 4.5))


def u_maze() -> MazeSpec:
    """8x8 ring corridor around a center block; two routes between any pair
    of corridor points. The three avoidance regions sit in the bottom
    corridor, leaving the top route as the detour."""
    rows = [
        "########",
        "#......#",
        "#......#",
        "#..##..#",
        "#..##..#",
        "#......#",
        "#......#",
        "########",
    ]
    grid = _grid_from_rows(rows)
    props = PropSet(["pL", "pM", "pR"])
    regions = (
        Circle((2.6, 2.0), 0.75),
        Circle((4.0, 2.0), 0.75),
        Circle((5.4, 2.0), 0.75),
    )
    return MazeSpec("umaze", grid, props, regions, horizon=48,
                    start_hint=(1.4, 1.4), goal_hint=(6.6, 1.4))


def rooms_maze() -> MazeSpec:
    """12x12 four-room layout with two-cell doorways and six regions."""
    grid = np.zeros((12, 12), dtype=bool)
    grid[0, :] = grid[-1, :] = grid[:, 0] = grid[:, -1] = True
    for y in range(1, 11):
        if y not in (2, 3, 8, 9):
            grid[y, 5] = True
    for x in range(1, 11):
        if x not in (2, 3, 8, 9):
            grid[5, x] = True
    props = PropSet([f"p{i}" for i in range(6)])
    regions = (
        Circle((2.5, 2.5), 0.8),
        Circle((8.5, 2.5), 0.8),
        Circle((2.5, 8.5), 0.8),
        Circle((8.5, 8.5), 0.8),
        Circle((6.5, 3.5), 0.8),
        Circle((3.5, 6.5), 0.8),
    )
    return MazeSpec("rooms", grid, props, regions, horizon=64,
                    start_hint=(1.5, 1.5), goal_hint=(10.5, 10.5))


_BUILTINS = {"open": open_maze, "umaze": u_maze, "rooms": rooms_maze}


def builtin_maze(name: str, horizon: int | None = None) -> MazeSpec:
    if name not in _BUILTINS:
        raise KeyError(f"unknown maze {name!r}; available: {sorted(_BUILTINS)}")
    maze = _BUILTINS[name]()
    if horizon is not None:
        maze = MazeSpec(maze.name, maze.grid, maze.props, maze.regions, horizon,
                        maze.cell, maze.start_hint, maze.goal_hint)
    return maze
