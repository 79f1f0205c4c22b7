"""Deterministic heatmap rendering with a fixed 10-band gain palette.

Each cell becomes a ``scale``-pixel square separated by 1-px black grid
lines; obstacles are white. The palette is discrete (one color per gain
decile, red/orange for low gains through blue for high gains), which makes
the render -> classify round trip exact: ``classify_color`` recovers the
gain band of every traversable cell from the rendered pixels.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, ImageDraw

from .grid import Cell, GridMap

# One RGB color per gain decile, low to high (ColorBrewer RdYlBu-10 reversed).
BAND_COLORS = (
    (165, 0, 38),
    (215, 48, 39),
    (244, 109, 67),
    (253, 174, 97),
    (254, 224, 144),
    (224, 243, 248),
    (171, 217, 233),
    (116, 173, 209),
    (69, 117, 180),
    (49, 54, 149),
)
BAND_NAMES = (
    "dark-red",
    "red",
    "orange-red",
    "orange",
    "light-orange",
    "pale-blue",
    "light-blue",
    "sky-blue",
    "blue",
    "dark-blue",
)
OBSTACLE_COLOR = (255, 255, 255)
GRID_LINE_COLOR = (0, 0, 0)

# classify_color sentinel codes for the two non-gain colors.
OBSTACLE_CODE = -1
GRID_LINE_CODE = -2


def gain_band(gain: float) -> int:
    """Decile band of a normalized gain: 0 for [0, 0.1), ..., 9 for [0.9, 1]."""
    if not 0.0 <= gain <= 1.0 + 1e-9:
        raise ValueError(f"gain {gain} outside [0, 1]")
    return min(int(math.floor(gain * 10.0 + 1e-9)), 9)


def band_name(band: int) -> str:
    return BAND_NAMES[band]


def classify_color(rgb: Sequence[int]) -> int:
    """Band index for a palette pixel; OBSTACLE_CODE / GRID_LINE_CODE otherwise."""
    rgb = tuple(int(v) for v in rgb[:3])
    if rgb == OBSTACLE_COLOR:
        return OBSTACLE_CODE
    if rgb == GRID_LINE_COLOR:
        return GRID_LINE_CODE
    try:
        return BAND_COLORS.index(rgb)
    except ValueError:
        raise ValueError(f"pixel color {rgb} is not part of the heatmap palette") from None


@dataclass(frozen=True)
class PathOverlay:
    """A polyline drawn on top of the heatmap, one per planner path."""

    waypoints: tuple[Cell, ...]
    color: tuple[int, int, int]
    label: str = ""

    def __init__(self, waypoints, color, label=""):
        object.__setattr__(self, "waypoints", tuple(Cell(*w) for w in waypoints))
        object.__setattr__(self, "color", tuple(color))
        object.__setattr__(self, "label", label)


def _cell_pixel_center(cell: Cell, height_cells: int, scale: int) -> tuple[int, int]:
    # Row 0 renders at the bottom of the image.
    px = 1 + cell.col * (scale + 1) + scale // 2
    py = 1 + (height_cells - 1 - cell.row) * (scale + 1) + scale // 2
    return px, py


def render_heatmap(
    grid: GridMap,
    overlays: Sequence[PathOverlay] = (),
    scale: int = 8,
) -> np.ndarray:
    """Render the gain heatmap as an RGB uint8 array of deterministic pixels."""
    if grid.width_cells < 1 or grid.height_cells < 1:
        raise ValueError("cannot render an empty map")
    if scale < 3:
        raise ValueError("scale must be at least 3 pixels per cell")
    for ov in overlays:
        for wp in ov.waypoints:
            if not grid.in_bounds(wp):
                raise ValueError(f"overlay '{ov.label}' waypoint {wp} outside map bounds")

    w_px = grid.width_cells * (scale + 1) + 1
    h_px = grid.height_cells * (scale + 1) + 1
    img = np.zeros((h_px, w_px, 3), dtype=np.uint8)  # grid lines: black background
    for row in range(grid.height_cells):
        y0 = 1 + (grid.height_cells - 1 - row) * (scale + 1)
        for col in range(grid.width_cells):
            x0 = 1 + col * (scale + 1)
            if grid.obstacles[row, col]:
                color = OBSTACLE_COLOR
            else:
                color = BAND_COLORS[gain_band(grid.gains[row, col])]
            img[y0 : y0 + scale, x0 : x0 + scale] = color

    if overlays:
        pil = Image.fromarray(img)
        draw = ImageDraw.Draw(pil)
        width = max(1, scale // 4)
        for ov in overlays:
            points = [
                _cell_pixel_center(wp, grid.height_cells, scale) for wp in ov.waypoints
            ]
            if len(points) == 1:
                draw.point(points[0], fill=ov.color)
            else:
                draw.line(points, fill=ov.color, width=width)
        img = np.asarray(pil)
    return img


def classify_cell(image: np.ndarray, grid: GridMap, cell: Cell, scale: int = 8) -> int:
    """Classify a cell in a rendered (overlay-free) heatmap via its center pixel."""
    px, py = _cell_pixel_center(cell, grid.height_cells, scale)
    return classify_color(image[py, px])


def png_bytes(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image).save(buf, format="PNG")
    return buf.getvalue()


def save_png(image: np.ndarray, path) -> None:
    Path(path).write_bytes(png_bytes(image))


def load_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))
