"""Random gridworld maps: generation, BFS reachability and the ASCII map format.

Coordinates are ``(x, y)`` with ``x`` the column and ``y`` the row, both
0-indexed from the top-left interior cell.  ``cells`` is indexed ``[y, x]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator

import numpy as np

Rng = np.random.Generator


def make_rng(seed: int) -> Rng:
    """PCG64 stream for a 64-bit seed (bit-stable across platforms)."""
    return np.random.Generator(np.random.PCG64(seed))


class CellKind(IntEnum):
    EMPTY = 0
    OBSTACLE = 1
    TARGET = 2
    AGENT = 3


GLYPHS = {
    CellKind.EMPTY: " ",
    CellKind.OBSTACLE: "#",
    CellKind.TARGET: "!",
    CellKind.AGENT: "@",
}
_KIND_OF_GLYPH = {g: k for k, g in GLYPHS.items()}

# Left, Up, Right, Down as (dx, dy) pairs
MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))


class InvalidParameterError(ValueError):
    pass


class NoEmptyCellError(ValueError):
    pass


class GenerationError(RuntimeError):
    pass


class MapParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(eq=False)
class GridMap:
    cells: np.ndarray  # (height, width) int8 of CellKind codes

    @property
    def width(self) -> int:
        return int(self.cells.shape[1])

    @property
    def height(self) -> int:
        return int(self.cells.shape[0])

    def _find(self, kind: CellKind) -> tuple[int, int]:
        ys, xs = np.nonzero(self.cells == kind)
        if len(xs) != 1:
            raise ValueError(f"expected exactly one {kind.name} cell, found {len(xs)}")
        return int(xs[0]), int(ys[0])

    @property
    def agent(self) -> tuple[int, int]:
        return self._find(CellKind.AGENT)

    @property
    def target(self) -> tuple[int, int]:
        return self._find(CellKind.TARGET)

    @property
    def obstacles(self) -> list[tuple[int, int]]:
        ys, xs = np.nonzero(self.cells == CellKind.OBSTACLE)
        return [(int(x), int(y)) for y, x in zip(ys, xs)]

    def count(self, kind: CellKind) -> int:
        return int(np.count_nonzero(self.cells == kind))

    def layout_key(self) -> bytes:
        """Hashable byte key of the layout, for map-identity checks."""
        return bytes([self.width, self.height]) + self.cells.astype(np.int8).tobytes()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridMap):
            return NotImplemented
        return self.cells.shape == other.cells.shape and bool(np.array_equal(self.cells, other.cells))

    def __str__(self) -> str:
        return render_ascii(self)


_EMPTY = int(CellKind.EMPTY)  # plain int: enum lookups dominate the rejection loop


def empty_grid(width: int, height: int) -> GridMap:
    return GridMap(np.zeros((height, width), dtype=np.int8))


def get_empty_cell(grid: GridMap, rng: Rng) -> tuple[int, int]:
    """Rejection-sample an empty cell, redrawing ``x`` then ``y`` until it is free."""
    cells = grid.cells
    if not (cells == _EMPTY).any():
        raise NoEmptyCellError("grid has no empty cell")
    h, w = cells.shape
    draw = rng.integers
    while True:
        x = int(draw(0, w))
        y = int(draw(0, h))
        if cells[y, x] == _EMPTY:
            return x, y


def generate_gridworld(w: int, h: int, o: int, rng: Rng) -> GridMap:
    """Place ``o`` obstacles, then the target, then the agent, each on a random empty cell."""
    if w < 2 or h < 2:
        raise InvalidParameterError(f"map must be at least 2x2, got {w}x{h}")
    if o < 0 or o > w * h - 2:
        raise InvalidParameterError(f"obstacle count {o} outside [0, {w * h - 2}] for a {w}x{h} map")
    grid = empty_grid(w, h)
    for _ in range(o):
        x, y = get_empty_cell(grid, rng)
        grid.cells[y, x] = CellKind.OBSTACLE
    x, y = get_empty_cell(grid, rng)
    grid.cells[y, x] = CellKind.TARGET
    x, y = get_empty_cell(grid, rng)
    grid.cells[y, x] = CellKind.AGENT
    return grid


def check_reachability(grid: GridMap) -> bool:
    """Level-by-level BFS from the agent; true as soon as the target is a 4-neighbour.

    Visited cells are marked on a private copy, so ``grid`` is left untouched.
    """
    cells = grid.cells.copy()
    w, h = grid.width, grid.height
    visited = 4  # marker outside CellKind
    frontier = [grid.agent]
    while frontier:
        nxt = []
        for cx, cy in frontier:
            for dx, dy in MOVES:
                nx, ny = cx + dx, cy + dy
                if nx < 0 or ny < 0 or nx >= w or ny >= h:
                    continue
                c = cells[ny, nx]
                if c == CellKind.TARGET:
                    return True
                if c == CellKind.EMPTY:
                    cells[ny, nx] = visited
                    nxt.append((nx, ny))
        frontier = nxt
    return False


def generate_solvable(w: int, h: int, o: int, rng: Rng, max_attempts: int = 1000) -> GridMap:
    """Regenerate from scratch until the target is reachable from the agent."""
    if max_attempts < 1:
        raise InvalidParameterError("max_attempts must be >= 1")
    for _ in range(max_attempts):
        grid = generate_gridworld(w, h, o, rng)
        if check_reachability(grid):
            return grid
    raise GenerationError(
        f"no solvable {w}x{h} map with {o} obstacles in {max_attempts} attempts"
    )


def render_ascii(grid: GridMap) -> str:
    border = "-" * (grid.width + 2)
    rows = ["|" + "".join(GLYPHS[CellKind(int(c))] for c in row) + "|" for row in grid.cells]
    return "\n".join([border, *rows, border]) + "\n"


def parse_ascii(text: str, strict: bool = True) -> GridMap:
    """Parse one bordered map.  ``strict=False`` tolerates trailing spaces on each line."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not strict:
        lines = [ln.rstrip(" ") for ln in lines]
        while lines and lines[-1] == "":
            lines.pop()
    if len(lines) < 4:
        raise MapParseError("map needs a top border, at least two rows and a bottom border", len(lines) + 1, 1)

    top = lines[0]
    width = len(top) - 2
    if width < 2 or set(top) != {"-"}:
        raise MapParseError("top border must be 2+width '-' characters", 1, 1)
    if lines[-1] != top:
        raise MapParseError("bottom border must match the top border", len(lines), 1)

    rows = []
    for li, line in enumerate(lines[1:-1], start=2):
        if len(line) != width + 2:
            raise MapParseError(f"row has {len(line) - 2} cells, expected {width}", li, min(len(line), width + 2) + 1)
        if line[0] != "|":
            raise MapParseError("row must start with '|'", li, 1)
        if line[-1] != "|":
            raise MapParseError("row must end with '|'", li, width + 2)
        row = []
        for ci, ch in enumerate(line[1:-1], start=2):
            if ch not in _KIND_OF_GLYPH:
                raise MapParseError(f"unknown cell glyph {ch!r}", li, ci)
            row.append(int(_KIND_OF_GLYPH[ch]))
        rows.append(row)

    cells = np.array(rows, dtype=np.int8)
    for kind, glyph in ((CellKind.AGENT, "@"), (CellKind.TARGET, "!")):
        ys, xs = np.nonzero(cells == kind)
        if len(xs) == 0:
            raise MapParseError(f"missing {glyph!r}", 1, 1)
        if len(xs) > 1:
            raise MapParseError(f"duplicate {glyph!r}", int(ys[1]) + 2, int(xs[1]) + 2)
    return GridMap(cells)


def parse_ascii_many(text: str, strict: bool = True) -> Iterator[GridMap]:
    """Parse a stream of maps separated by blank lines (the ``gen-maps`` output)."""
    block: list[str] = []
    for line in text.split("\n") + [""]:
        if line.strip() == "":
            if block:
                yield parse_ascii("\n".join(block) + "\n", strict=strict)
                block = []
        else:
            block.append(line)
