import numpy as np

from wirepath.grid import Cell, GridMap

# Text maps: one character per cell, rows written top-down the way you'd
# sketch them, '#' is an obstacle, digits are gain tenths, '*' is gain 1.0.
_GAIN_CHARS = {str(d): d / 10.0 for d in range(10)}
_GAIN_CHARS["*"] = 1.0


def text_grid(sketch: str, cell_size: float = 1.0, origin=(0.0, 0.0)) -> GridMap:
    rows = [line.strip() for line in sketch.strip().splitlines()]
    rows.reverse()  # row 0 is the bottom row
    height = len(rows)
    width = len(rows[0])
    assert all(len(r) == width for r in rows), "ragged sketch"
    gains = np.zeros((height, width))
    obstacles = np.zeros((height, width), dtype=bool)
    for r, line in enumerate(rows):
        for c, ch in enumerate(line):
            if ch == "#":
                obstacles[r, c] = True
            else:
                gains[r, c] = _GAIN_CHARS[ch]
    return GridMap(width, height, cell_size, tuple(origin), gains, obstacles)


def first_last_traversable(grid: GridMap) -> tuple[Cell, Cell]:
    cells = list(grid.traversable_cells())
    return cells[0], cells[-1]
