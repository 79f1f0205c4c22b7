"""
Comparing the three planners on one map
=======================================

Runs classical A*, the gain-biased greedy planner, and the optimal
constrained planner on the same start/goal pair, prints their metrics,
and renders all three paths on a single heatmap.

A* ignores signal entirely. The greedy planner trades extra distance for
gain but offers no guarantee. The dynamic-programming planner returns
the shortest path whose average gain actually meets the threshold.
"""

from pathlib import Path

from wirepath import (
    Cell,
    PathOverlay,
    PlanRequest,
    SynthMapSpec,
    plan_astar,
    plan_dpwa,
    plan_nwa,
    render_heatmap,
    save_png,
    synthesize_map,
)

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)

grid = synthesize_map(SynthMapSpec(
    width_cells=18,
    height_cells=12,
    access_points=((3.5, 9.5),),
    obstacle_rects=((8, 3, 9, 9),),
))
request = PlanRequest(Cell(1, 1), Cell(16, 1), threshold=0.4)

results = [
    plan_astar(grid, request),
    plan_nwa(grid, request),
    plan_dpwa(grid, request),
]

print(f"start {tuple(request.start)} -> goal {tuple(request.goal)}, "
      f"threshold {request.threshold}")
print(f"{'planner':<12} {'length_m':>9} {'avg_gain':>9} {'meets?':>7} {'expanded':>9}")
for res in results:
    meets = "yes" if res.feasible else "no"
    print(f"{res.algorithm:<12} {res.path_length:>9.2f} {res.avg_gain:>9.3f} "
          f"{meets:>7} {res.expanded_states:>9}")

overlays = [
    PathOverlay(results[0].waypoints, (235, 20, 235), "astar"),
    PathOverlay(results[1].waypoints, (0, 200, 0), "nwa"),
    PathOverlay(results[2].waypoints, (0, 0, 0), "dpwa"),
]
png_path = out_dir / "planner_comparison.png"
save_png(render_heatmap(grid, overlays, scale=16), png_path)
print(f"wrote {png_path}")
