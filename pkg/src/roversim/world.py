"""Occupancy-grid arena the rover drives in, plus collision sweep and the
distance-to-base measurement the link model feeds on.

World-map file grammar (bit-exact):
    line 1:  W H CELL_M BX BY
    then H rows of exactly W characters, '.' = Free, '#' = Wall.
Row 0 is the first row after the header; world y grows down the rows, x
grows along the columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .kinematics import Pose2D

FREE_CH = "."
WALL_CH = "#"


class WorldFormatError(ValueError):
    pass


@dataclass
class WorldMap:
    width_cells: int
    height_cells: int
    cell_size_m: float
    rows: list[str]  # rows[r][c], r indexes y, c indexes x
    base_station: tuple[float, float]

    @property
    def width_m(self) -> float:
        return self.width_cells * self.cell_size_m

    @property
    def height_m(self) -> float:
        return self.height_cells * self.cell_size_m

    def is_wall_cell(self, cx: int, cy: int) -> bool:
        if not (0 <= cx < self.width_cells and 0 <= cy < self.height_cells):
            return True  # outside the grid reads as solid
        return self.rows[cy][cx] == WALL_CH

    def is_free_point(self, x_m: float, y_m: float) -> bool:
        return not self.is_wall_cell(
            int(math.floor(x_m / self.cell_size_m)),
            int(math.floor(y_m / self.cell_size_m)),
        )

    def validate(self) -> None:
        if self.width_cells <= 0 or self.height_cells <= 0:
            raise WorldFormatError("non-positive grid dimensions")
        if self.cell_size_m <= 0:
            raise WorldFormatError("non-positive cell size")
        if len(self.rows) != self.height_cells:
            raise WorldFormatError(f"expected {self.height_cells} rows, got {len(self.rows)}")
        for r, row in enumerate(self.rows):
            if len(row) != self.width_cells:
                raise WorldFormatError(f"row {r} has {len(row)} cells, expected {self.width_cells}")
            bad = set(row) - {FREE_CH, WALL_CH}
            if bad:
                raise WorldFormatError(f"row {r} contains invalid cells {sorted(bad)}")
        top, bottom = self.rows[0], self.rows[-1]
        if set(top) != {WALL_CH} or set(bottom) != {WALL_CH}:
            raise WorldFormatError("top/bottom border must be all walls")
        for r, row in enumerate(self.rows):
            if row[0] != WALL_CH or row[-1] != WALL_CH:
                raise WorldFormatError(f"row {r} border must be walls")
        bx, by = self.base_station
        if not self.is_free_point(bx, by):
            raise WorldFormatError(f"base station ({bx}, {by}) is not in a free cell")


def parse_world(text: str) -> WorldMap:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if not lines:
        raise WorldFormatError("empty world file")
    header = lines[0].split(" ")
    if len(header) != 5:
        raise WorldFormatError(f"header must be 'W H CELL_M BX BY', got {lines[0]!r}")
    try:
        w, h = int(header[0]), int(header[1])
        cell = float(header[2])
        bx, by = float(header[3]), float(header[4])
    except ValueError as e:
        raise WorldFormatError(f"bad header field: {e}") from None
    if len(lines) - 1 != h:
        raise WorldFormatError(f"expected {h} rows, found {len(lines) - 1}")
    world = WorldMap(w, h, cell, lines[1:], (bx, by))
    world.validate()
    return world


def format_world(world: WorldMap) -> str:
    bx, by = world.base_station
    header = f"{world.width_cells} {world.height_cells} {world.cell_size_m:g} {bx:g} {by:g}"
    return "\n".join([header, *world.rows]) + "\n"


def load_world(path: str) -> WorldMap:
    with open(path, "r", encoding="utf-8") as f:
        return parse_world(f.read())


def make_arena(width_cells: int, height_cells: int, cell_size_m: float,
               base_station: tuple[float, float],
               pillars: list[tuple[int, int, int, int]] | None = None) -> WorldMap:
    """Closed rectangular arena; pillars are (cx, cy, w, h) wall blocks."""
    grid = [[FREE_CH] * width_cells for _ in range(height_cells)]
    for c in range(width_cells):
        grid[0][c] = WALL_CH
        grid[height_cells - 1][c] = WALL_CH
    for r in range(height_cells):
        grid[r][0] = WALL_CH
        grid[r][width_cells - 1] = WALL_CH
    for (cx, cy, w, h) in pillars or []:
        for r in range(cy, cy + h):
            for c in range(cx, cx + w):
                grid[r][c] = WALL_CH
    world = WorldMap(width_cells, height_cells, cell_size_m,
                     ["".join(r) for r in grid], base_station)
    world.validate()
    return world


def default_desk_world() -> WorldMap:
    """10 m x 7.5 m desk-scale arena with a couple of pillars to look at."""
    return make_arena(40, 30, 0.25, (2.0, 2.0),
                      pillars=[(18, 8, 2, 2), (10, 20, 3, 2), (28, 16, 2, 4)])


def default_field_world() -> WorldMap:
    """125 m x 125 m open field for range experiments."""
    return make_arena(500, 500, 0.25, (1.0, 1.0))


def distance_to_base(world: WorldMap, pose: Pose2D) -> float:
    bx, by = world.base_station
    return math.hypot(pose.x_m - bx, pose.y_m - by)


def move_with_collisions(world: WorldMap, pose: Pose2D, proposed: Pose2D) -> Pose2D:
    """Slide toward `proposed`, stopping at the last collision-free sample.

    The straight segment between the two positions is sampled at intervals
    no larger than a quarter cell; heading always comes from `proposed`.
    """
    dx = proposed.x_m - pose.x_m
    dy = proposed.y_m - pose.y_m
    dist = math.hypot(dx, dy)
    if dist == 0.0:
        return Pose2D(pose.x_m, pose.y_m, proposed.heading_rad)
    n = max(1, math.ceil(dist / (world.cell_size_m / 4.0)))
    last_x, last_y = pose.x_m, pose.y_m
    for i in range(1, n + 1):
        t = i / n
        x = pose.x_m + dx * t
        y = pose.y_m + dy * t
        if not world.is_free_point(x, y):
            return Pose2D(last_x, last_y, proposed.heading_rad)
        last_x, last_y = x, y
    return proposed
