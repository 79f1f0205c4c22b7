"""Gain-annotated occupancy grid: ingestion, synthesis, and spatial queries.

The grid is the shared data model for every planner in this package. Each
cell carries a normalized wireless path gain in [0, 1], quantized to steps
of 0.1, plus an obstacle flag. Cells are addressed as (col, row) with row 0
at the bottom edge (world y grows with the row index).

Radio-map JSON schema (ingest):

    {"cell_size_m": float, "origin_m": [x, y],
     "cells": [{"x": float, "y": float, "gain_db": float}, ...]}

where x, y are world coordinates of cell centers and ``origin_m`` is the
world position of the map's lower-left corner. Lattice positions missing
from ``cells`` are marked as obstacles. Export uses the same schema with
``gain_norm`` in place of ``gain_db``; re-ingesting an exported map is
lossless (normalized gains are validated, never re-scaled).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

GAIN_STEP = 0.1


class RadioMapError(Exception):
    """Base class for radio-map ingestion problems."""


class RadioMapParseError(RadioMapError):
    """Document is not valid JSON or misses required fields."""


class RadioMapGeometryError(RadioMapError):
    """Cell coordinates do not form a consistent rectangular lattice."""


class EmptyMapError(RadioMapError):
    """Document contains no cells."""


class Cell(NamedTuple):
    col: int
    row: int


def quantize_gain(values):
    """Snap normalized gains to the 0.1 grid (ties follow round-half-to-even)."""
    return np.round(np.asarray(values, dtype=np.float64) * 10.0) / 10.0


@dataclass(frozen=True)
class GridMap:
    """Immutable 2-D traversable area with per-cell normalized path gain.

    Attributes:
        width_cells / height_cells: grid dimensions, both >= 1.
        cell_size: edge length of one cell in meters.
        origin: world (x, y) of the lower-left corner of cell (0, 0); the
            center of cell (col, row) sits at origin + (col+0.5, row+0.5)
            * cell_size.
        gains: float array of shape (height, width), quantized to 0.1 steps.
        obstacles: bool array of the same shape, True = non-traversable.
    """

    width_cells: int
    height_cells: int
    cell_size: float
    origin: tuple[float, float]
    gains: np.ndarray = field(repr=False)
    obstacles: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.width_cells < 1 or self.height_cells < 1:
            raise ValueError("grid must have at least one cell per axis")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        gains = np.asarray(self.gains, dtype=np.float64)
        obstacles = np.asarray(self.obstacles, dtype=bool)
        shape = (self.height_cells, self.width_cells)
        if gains.shape != shape or obstacles.shape != shape:
            raise ValueError(f"gain/obstacle arrays must have shape {shape}")
        traversable = gains[~obstacles]
        if traversable.size:
            if traversable.min() < 0.0 or traversable.max() > 1.0 + 1e-12:
                raise ValueError("gains must lie in [0, 1]")
            if np.abs(traversable * 10.0 - np.round(traversable * 10.0)).max() > 1e-9:
                raise ValueError("gains must be quantized to multiples of 0.1")
        gains.setflags(write=False)
        obstacles.setflags(write=False)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "obstacles", obstacles)

    # -- coordinate conversions ------------------------------------------

    def cell_center(self, cell: Cell) -> tuple[float, float]:
        """World coordinates of a cell's center."""
        return (
            self.origin[0] + (cell.col + 0.5) * self.cell_size,
            self.origin[1] + (cell.row + 0.5) * self.cell_size,
        )

    def world_to_cell(self, x: float, y: float) -> Cell:
        """Cell containing the world point; raises ValueError outside the grid."""
        col = math.floor((x - self.origin[0]) / self.cell_size)
        row = math.floor((y - self.origin[1]) / self.cell_size)
        if not (0 <= col < self.width_cells and 0 <= row < self.height_cells):
            raise ValueError(f"world point ({x}, {y}) lies outside the grid")
        return Cell(col, row)

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell.col < self.width_cells and 0 <= cell.row < self.height_cells

    def is_traversable(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and not self.obstacles[cell.row, cell.col]

    def gain(self, cell: Cell) -> float:
        return float(self.gains[cell.row, cell.col])

    # -- bulk queries ----------------------------------------------------

    @property
    def traversable_count(self) -> int:
        return int((~self.obstacles).sum())

    def traversable_cells(self) -> Iterator[Cell]:
        """All traversable cells in row-major order (row, then col)."""
        free = ~self.obstacles
        for row in range(self.height_cells):
            for col in range(self.width_cells):
                if free[row, col]:
                    yield Cell(col, row)

    def slice_region(self, center: tuple[float, float], radius: float) -> list[tuple[Cell, float]]:
        """Traversable cells whose center lies within ``radius`` of a world point.

        Returns (cell, gain) pairs in row-major order. An empty result is
        valid; the radius must be positive.
        """
        if radius <= 0:
            raise ValueError("radius must be positive")
        cx, cy = center
        out = []
        # Limit the scan to the bounding box of the disc.
        lo_col = max(0, math.floor((cx - radius - self.origin[0]) / self.cell_size) - 1)
        hi_col = min(self.width_cells, math.ceil((cx + radius - self.origin[0]) / self.cell_size) + 1)
        lo_row = max(0, math.floor((cy - radius - self.origin[1]) / self.cell_size) - 1)
        hi_row = min(self.height_cells, math.ceil((cy + radius - self.origin[1]) / self.cell_size) + 1)
        r2 = radius * radius
        for row in range(lo_row, hi_row):
            for col in range(lo_col, hi_col):
                if self.obstacles[row, col]:
                    continue
                x, y = self.cell_center(Cell(col, row))
                if (x - cx) ** 2 + (y - cy) ** 2 <= r2:
                    out.append((Cell(col, row), float(self.gains[row, col])))
        return out


# -- ingestion ------------------------------------------------------------


def _normalize(raw: np.ndarray) -> np.ndarray:
    lo, hi = raw.min(), raw.max()
    if hi - lo < 1e-12:
        # Degenerate map: every cell gets the maximum gain so that any
        # threshold <= 1 is satisfied uniformly.
        return np.ones_like(raw)
    return (raw - lo) / (hi - lo)


def ingest_radio_map(document) -> GridMap:
    """Build a GridMap from a radio-map document.

    ``document`` may be an already-parsed dict or a JSON string. Raw
    ``gain_db`` values are min-max normalized to [0, 1]; ``gain_norm``
    values (exported maps) are taken as-is. Either way the result is
    quantized to 0.1 steps once, here, and never re-quantized downstream.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise RadioMapParseError(
                f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
    if not isinstance(document, dict):
        raise RadioMapParseError("radio-map document must be a JSON object")

    try:
        cell_size = float(document["cell_size_m"])
        ox, oy = (float(v) for v in document["origin_m"])
        cells = document["cells"]
    except (KeyError, TypeError, ValueError) as exc:
        raise RadioMapParseError(f"missing or malformed field: {exc}") from exc
    if cell_size <= 0:
        raise RadioMapGeometryError("cell_size_m must be positive")
    if not cells:
        raise EmptyMapError("radio-map document contains no cells")

    has_db = "gain_db" in cells[0]
    gain_key = "gain_db" if has_db else "gain_norm"
    cols, rows, raw = [], [], []
    for i, entry in enumerate(cells):
        try:
            x, y, g = float(entry["x"]), float(entry["y"]), float(entry[gain_key])
        except (KeyError, TypeError, ValueError) as exc:
            raise RadioMapParseError(f"cell {i}: missing or malformed field ({exc})") from exc
        fcol = (x - ox) / cell_size - 0.5
        frow = (y - oy) / cell_size - 0.5
        col, row = round(fcol), round(frow)
        if abs(fcol - col) > 1e-6 or abs(frow - row) > 1e-6:
            raise RadioMapGeometryError(
                f"cell {i} at ({x}, {y}) is not on the lattice implied by "
                f"origin {(ox, oy)} and cell_size {cell_size}"
            )
        if col < 0 or row < 0:
            raise RadioMapGeometryError(f"cell {i} at ({x}, {y}) lies before the origin")
        cols.append(col)
        rows.append(row)
        raw.append(g)

    width = max(cols) + 1
    height = max(rows) + 1
    occupied = set()
    for i, (col, row) in enumerate(zip(cols, rows)):
        if (col, row) in occupied:
            raise RadioMapGeometryError(f"cell {i} duplicates lattice position ({col}, {row})")
        occupied.add((col, row))

    raw_arr = np.asarray(raw, dtype=np.float64)
    if has_db:
        norm = _normalize(raw_arr)
    else:
        if raw_arr.min() < -1e-9 or raw_arr.max() > 1.0 + 1e-9:
            raise RadioMapParseError("gain_norm values must lie in [0, 1]")
        norm = np.clip(raw_arr, 0.0, 1.0)
    norm = quantize_gain(norm)

    gains = np.zeros((height, width), dtype=np.float64)
    obstacles = np.ones((height, width), dtype=bool)
    for col, row, g in zip(cols, rows, norm):
        gains[row, col] = g
        obstacles[row, col] = False
    return GridMap(width, height, cell_size, (ox, oy), gains, obstacles)


def export_radio_map(grid: GridMap) -> dict:
    """Serialize a GridMap back to the radio-map schema (normalized gains)."""
    cells = [
        {"x": x, "y": y, "gain_norm": grid.gain(cell)}
        for cell in grid.traversable_cells()
        for x, y in [grid.cell_center(cell)]
    ]
    return {
        "cell_size_m": grid.cell_size,
        "origin_m": [grid.origin[0], grid.origin[1]],
        "cells": cells,
    }


def load_radio_map(path) -> GridMap:
    return ingest_radio_map(Path(path).read_text())


def save_radio_map(grid: GridMap, path) -> None:
    Path(path).write_text(json.dumps(export_radio_map(grid), indent=1, sort_keys=True))


# -- synthetic maps --------------------------------------------------------


@dataclass(frozen=True)
class SynthMapSpec:
    """Parameters for the synthetic radio-map generator.

    Gains fall off monotonically with distance to the nearest access point
    (inverse-square profile), then get min-max normalized and quantized.
    ``obstacle_rects`` are inclusive cell-index rectangles
    (col_min, row_min, col_max, row_max). ``extra_obstacles`` additionally
    turns that many randomly chosen free cells into obstacles, using
    ``seed``; the gain field itself is deterministic regardless of seed.
    """

    width_cells: int
    height_cells: int
    cell_size: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)
    access_points: tuple[tuple[float, float], ...] = ()
    obstacle_rects: tuple[tuple[int, int, int, int], ...] = ()
    falloff: float | None = None
    seed: int = 0
    extra_obstacles: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "SynthMapSpec":
        return cls(
            width_cells=int(d["width_cells"]),
            height_cells=int(d["height_cells"]),
            cell_size=float(d.get("cell_size", 1.0)),
            origin=tuple(d.get("origin", (0.0, 0.0))),
            access_points=tuple(tuple(p) for p in d.get("access_points", ())),
            obstacle_rects=tuple(tuple(r) for r in d.get("obstacle_rects", ())),
            falloff=d.get("falloff"),
            seed=int(d.get("seed", 0)),
            extra_obstacles=int(d.get("extra_obstacles", 0)),
        )


def synthesize_map(spec: SynthMapSpec) -> GridMap:
    """Generate a deterministic synthetic map from a SynthMapSpec."""
    if spec.width_cells < 2 or spec.height_cells < 2:
        raise ValueError("synthetic maps must be at least 2x2 cells")
    if not spec.access_points:
        raise ValueError("at least one access point is required")
    falloff = spec.falloff
    if falloff is None:
        falloff = max(spec.width_cells, spec.height_cells) * spec.cell_size / 3.0

    xs = spec.origin[0] + (np.arange(spec.width_cells) + 0.5) * spec.cell_size
    ys = spec.origin[1] + (np.arange(spec.height_cells) + 0.5) * spec.cell_size
    gx, gy = np.meshgrid(xs, ys)
    dist = np.full(gx.shape, np.inf)
    for ax, ay in spec.access_points:
        dist = np.minimum(dist, np.hypot(gx - ax, gy - ay))
    raw = 1.0 / (1.0 + (dist / falloff) ** 2)
    gains = quantize_gain(_normalize(raw))

    obstacles = np.zeros(gains.shape, dtype=bool)
    for col0, row0, col1, row1 in spec.obstacle_rects:
        if not (0 <= col0 <= col1 < spec.width_cells and 0 <= row0 <= row1 < spec.height_cells):
            raise ValueError(f"obstacle rect {(col0, row0, col1, row1)} exceeds grid bounds")
        obstacles[row0 : row1 + 1, col0 : col1 + 1] = True

    if spec.extra_obstacles:
        rng = np.random.default_rng(spec.seed)
        free = np.flatnonzero(~obstacles.ravel())
        if spec.extra_obstacles > free.size:
            raise ValueError("extra_obstacles exceeds the number of free cells")
        picks = rng.choice(free, size=spec.extra_obstacles, replace=False)
        obstacles.ravel()[picks] = True

    return GridMap(
        spec.width_cells, spec.height_cells, spec.cell_size, spec.origin, gains, obstacles
    )


def random_map(
    width: int,
    height: int,
    seed: int,
    obstacle_density: float = 0.1,
    gain_choices: Sequence[float] | None = None,
    cell_size: float = 1.0,
) -> GridMap:
    """Seeded random map with decile gains; handy for tests and demos."""
    rng = np.random.default_rng(seed)
    if gain_choices is None:
        gain_choices = np.arange(11) / 10.0
    gains = rng.choice(np.asarray(gain_choices, dtype=np.float64), size=(height, width))
    obstacles = rng.random((height, width)) < obstacle_density
    return GridMap(width, height, cell_size, (0.0, 0.0), quantize_gain(gains), obstacles)
