"""
Synthesizing a radio map and rendering it as a heatmap
======================================================

Builds a small indoor map with two access points and a rectangular
obstacle block, saves it as JSON, and renders the gain heatmap to PNG.
"""

from pathlib import Path

from wirepath import (
    BAND_NAMES,
    SynthMapSpec,
    gain_band,
    render_heatmap,
    save_png,
    save_radio_map,
    synthesize_map,
)

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)

# A 20 m x 14 m room at 1 m resolution. Access points sit near the top
# corners; the block in the middle shadows everything behind it.
spec = SynthMapSpec(
    width_cells=20,
    height_cells=14,
    cell_size=1.0,
    access_points=((4.5, 11.5), (15.5, 11.5)),
    obstacle_rects=((8, 5, 11, 8),),
    seed=7,
)
grid = synthesize_map(spec)

print(f"map: {grid.width_cells}x{grid.height_cells} cells, "
      f"{grid.traversable_count} traversable")

# Census of the five gain bands the renderer uses.
counts = dict.fromkeys(BAND_NAMES, 0)
for row in range(grid.height_cells):
    for col in range(grid.width_cells):
        if not grid.obstacles[row, col]:
            counts[BAND_NAMES[gain_band(grid.gains[row, col])]] += 1
for name in BAND_NAMES:
    print(f"  {name:>10}: {counts[name]} cells")

map_path = out_dir / "room.json"
save_radio_map(grid, map_path)
print(f"wrote {map_path}")

png_path = out_dir / "room.png"
save_png(render_heatmap(grid, scale=16), png_path)
print(f"wrote {png_path}")
