"""
Driving the three-stage pipeline with a scripted model
======================================================

The pipeline asks a vision-language model for a coarse path over the
rendered heatmap (subtask 1), for focus-area centers along it
(subtask 2), and then for a refined segment inside each area
(subtask 3), validating every reply and retrying with feedback when a
reply is malformed or violates the map.

No live endpoint is needed here: MockClient replays a canned script
keyed by "stage:attempt". make_mock_script builds one from the
dynamic-programming optimum, so the stitched result is the true optimal
path and the demo stays deterministic.
"""

import json

from wirepath import (
    Cell,
    MockClient,
    PlanRequest,
    ScottConfig,
    SynthMapSpec,
    make_mock_script,
    run_scott,
    synthesize_map,
)

grid = synthesize_map(SynthMapSpec(
    width_cells=14,
    height_cells=10,
    access_points=((3.0, 7.0), (11.0, 3.0)),
    obstacle_rects=((6, 4, 7, 7),),
))
request = PlanRequest(Cell(0, 0), Cell(13, 9), threshold=0.45)
config = ScottConfig(n_areas=6)

script = make_mock_script(grid, request, config)
result, transcript = run_scott(grid, request, config, MockClient(script))

print(f"final path: {result.path_length:.2f} m at avg gain {result.avg_gain:.3f} "
      f"({'meets' if result.feasible else 'misses'} threshold {request.threshold})")
print(f"{len(transcript.records)} model calls:")
for rec in transcript.records:
    where = f" area {rec.area_index}" if rec.area_index is not None else ""
    print(f"  subtask {rec.stage}{where} attempt {rec.attempt}: {rec.verdict}")

# Corrupt the first coarse-path reply to show the retry loop. The
# rejection reason is echoed back to the model on the second attempt.
bad = dict(script)
bad["1:1"] = bad["1:0"]
bad["1:0"] = "```json\n[[6.5, 5.5], [13.5, 9.5]]\n```"
result2, transcript2 = run_scott(grid, request, config, MockClient(bad))
stage1 = [r for r in transcript2.records if r.stage == 1]
print(f"\nwith one bad coarse reply: {len(stage1)} attempts on subtask 1")
print(f"  first verdict:  {stage1[0].verdict}")
print(f"  retry prompt mentions the rejection: "
      f"{'Previous attempt rejected' in stage1[1].prompt}")
assert result2.waypoints == result.waypoints

# The whole exchange serializes for audit.
doc = transcript.to_json_dict()
print(f"\ntranscript serializes to {len(json.dumps(doc))} bytes of JSON")
