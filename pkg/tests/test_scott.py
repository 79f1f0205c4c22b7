"""Pipeline tests: prompts, parsing, validation, retries, scripted runs."""

import json
import math
import re

import pytest

from wirepath.dpwa import plan_dpwa
from wirepath.focus import FocusArea, MaskCache
from wirepath.grid import Cell, SynthMapSpec, synthesize_map
from wirepath.planners import PlanRequest
from wirepath.scott import (
    HttpChatClient,
    MockClient,
    PipelineError,
    ReplyParseError,
    ScottConfig,
    SubtaskError,
    TransportError,
    make_mock_script,
    parse_waypoint_reply,
    render_subtask_prompt,
    run_scott,
    snap_world_point,
    validate_candidate,
)

from conftest import text_grid


@pytest.fixture()
def demo_grid():
    spec = SynthMapSpec(
        width_cells=14,
        height_cells=10,
        access_points=((3.0, 7.0), (11.0, 3.0)),
        obstacle_rects=((6, 4, 7, 7),),
    )
    return synthesize_map(spec)


@pytest.fixture()
def demo_request():
    return PlanRequest(Cell(0, 0), Cell(13, 9), threshold=0.45)


def run_scripted(grid, request, config, script_edit=None, **kwargs):
    script = make_mock_script(grid, request, config)
    if script_edit:
        script = script_edit(script)
    client = MockClient(script)
    result, transcript = run_scott(grid, request, config, client, **kwargs)
    return result, transcript, client


def splice_attempt(script, stage, insert_at, bad_reply):
    """Insert a doomed reply, shifting later attempts of that stage down."""
    prefix = f"{stage}:"
    seq = [
        v
        for _, v in sorted(
            (int(k.split(":")[1]), v) for k, v in script.items() if k.startswith(prefix)
        )
    ]
    seq.insert(insert_at, bad_reply)
    out = {k: v for k, v in script.items() if not k.startswith(prefix)}
    for i, v in enumerate(seq):
        out[f"{stage}:{i}"] = v
    return out


# -- reply parsing -------------------------------------------------------


def test_parse_uses_last_fenced_block(demo_grid):
    raw = (
        "Thinking out loud...\n```json\n[[99.0, 99.0]]\n```\n"
        "Correction below.\n```json\n[[0.5, 0.5], [1.5, 1.5]]\n```\n"
    )
    cells = parse_waypoint_reply(raw, demo_grid)
    assert cells == [Cell(0, 0), Cell(1, 1)]


def test_parse_requires_fenced_json(demo_grid):
    with pytest.raises(ReplyParseError, match="no fenced JSON block"):
        parse_waypoint_reply("[[0.5, 0.5]]", demo_grid)
    with pytest.raises(ReplyParseError, match="not valid JSON"):
        parse_waypoint_reply("```json\n[[0.5,\n```", demo_grid)
    with pytest.raises(ReplyParseError, match="non-empty JSON array"):
        parse_waypoint_reply("```json\n[]\n```", demo_grid)
    with pytest.raises(ReplyParseError, match="is not an \\[x, y\\] pair"):
        parse_waypoint_reply('```json\n[{"x": 1}]\n```', demo_grid)


def test_parse_names_unsnappable_points(demo_grid):
    raw = "```json\n[[0.5, 0.5], [-40.0, -40.0]]\n```"
    with pytest.raises(ReplyParseError, match=r"\(-40.0, -40.0\)"):
        parse_waypoint_reply(raw, demo_grid)


def test_snap_tolerance_is_half_cell_diagonal(demo_grid):
    # offset 0.3,0.3 from the (0,0) center: distance 0.424 < sqrt(2)/2
    assert snap_world_point(demo_grid, 0.8, 0.8) == Cell(0, 0)
    # nudged past the midpoint it snaps to the nearer diagonal neighbor
    assert snap_world_point(demo_grid, 1.21, 1.21) == Cell(1, 1)
    # obstacle centers have no traversable center within tolerance
    assert snap_world_point(demo_grid, 6.5, 5.5) is None
    assert snap_world_point(demo_grid, -40.0, -40.0) is None


# -- candidate validation --------------------------------------------------


def test_validate_accepts_planner_output(demo_grid, demo_request):
    res = plan_dpwa(demo_grid, demo_request)
    assert res.found
    verdict = validate_candidate(demo_grid, res.waypoints, demo_request.threshold)
    assert verdict.valid
    assert verdict.violations == ()
    assert verdict.path == res.waypoints
    assert verdict.path_length == pytest.approx(res.path_length)
    assert verdict.avg_gain == pytest.approx(res.avg_gain)


def test_validate_interpolates_small_gaps():
    grid = text_grid("999\n999\n999\n999")
    verdict = validate_candidate(grid, [Cell(0, 0), Cell(2, 2)], 0.5)
    assert verdict.valid
    assert verdict.path == (Cell(0, 0), Cell(1, 1), Cell(2, 2))
    assert verdict.path_length == pytest.approx(2 * math.sqrt(2.0))
    assert verdict.avg_gain == pytest.approx(0.9)


def test_validate_rejects_wide_gaps():
    grid = text_grid("99999\n99999\n99999\n99999\n99999")
    verdict = validate_candidate(grid, [Cell(0, 0), Cell(4, 4)], 0.0)
    assert not verdict.valid
    assert any("gap of 4" in v and "exceeds 3" in v for v in verdict.violations)


def test_validate_checks_interpolated_cells():
    grid = text_grid("99999\n99999\n99999\n9#999\n99999")
    verdict = validate_candidate(grid, [Cell(0, 0), Cell(2, 2)], 0.0)
    assert not verdict.valid
    assert any("interpolated cell (1, 1)" in v for v in verdict.violations)


def test_validate_rejects_obstacles_and_out_of_bounds():
    grid = text_grid("99\n9#")
    verdict = validate_candidate(grid, [Cell(0, 0), Cell(1, 0)], 0.0)
    assert any("waypoint 1 at (1, 0) is inside an obstacle" in v
               for v in verdict.violations)
    verdict = validate_candidate(grid, [Cell(0, 0), Cell(5, 0)], 0.0)
    assert any("outside the map" in v for v in verdict.violations)
    verdict = validate_candidate(grid, [], 0.0)
    assert verdict.violations == ("path is empty",)


def test_validate_rejects_corner_cutting():
    grid = text_grid("5#\n#5")
    verdict = validate_candidate(grid, [Cell(1, 0), Cell(0, 1)], 0.0)
    assert not verdict.valid
    assert any("cuts an obstacle corner" in v for v in verdict.violations)


def test_validate_reports_gain_deficit():
    grid = text_grid("333\n333")
    verdict = validate_candidate(grid, [Cell(0, 0), Cell(1, 0), Cell(2, 0)], 0.5)
    assert not verdict.valid
    assert any("misses threshold 0.5000 by 0.2000" in v for v in verdict.violations)
    assert verdict.avg_gain == pytest.approx(0.3)


def test_validate_collapses_consecutive_duplicates():
    grid = text_grid("99\n99")
    verdict = validate_candidate(grid, [Cell(0, 0), Cell(0, 0), Cell(1, 1)], 0.0)
    assert verdict.valid
    assert verdict.path == (Cell(0, 0), Cell(1, 1))


# -- prompts ---------------------------------------------------------------


def test_stage1_prompt_mentions_threshold_and_image(demo_grid):
    ctx = {
        "grid": demo_grid,
        "start": Cell(0, 0),
        "goal": Cell(13, 9),
        "threshold": 0.45,
        "image": b"\x89PNG fake",
    }
    text, image = render_subtask_prompt(1, ctx)
    assert "Subtask 1" in text
    assert "0.45" in text
    assert "[attached image: gain heatmap PNG]" in text
    assert "forbidden zones" in text and "must be avoided" in text
    assert "<Workflow>" in text and "<Reasoning Strategy>" in text
    assert image == ctx["image"]


def test_stage2_prompt_mentions_count_and_radius(demo_grid):
    ctx = {
        "grid": demo_grid,
        "coarse_path": [Cell(0, 0), Cell(1, 1), Cell(2, 2)],
        "n_areas": 6,
        "max_distance": 3.5,
    }
    text, image = render_subtask_prompt(2, ctx)
    assert "exactly 6 focus-area centers" in text
    assert "radius 3.5 m" in text
    assert image is None


def test_stage3_payload_is_exactly_the_area_slice(demo_grid):
    center = demo_grid.cell_center(Cell(3, 3))
    members = [c for c, _ in demo_grid.slice_region(center, 2.5)]
    area = FocusArea.from_cells(demo_grid, center, 2.5, members)
    ctx = {
        "grid": demo_grid,
        "area": area,
        "area_index": 2,
        "n_areas": 6,
        "threshold": 0.45,
        "anchor_from": demo_grid.cell_center(Cell(1, 1)),
        "anchor_to": demo_grid.cell_center(Cell(6, 6)),
    }
    text, _ = render_subtask_prompt(3, ctx)
    assert "area 3 of 6" in text
    payload = json.loads(re.search(r"<Data>\n(.*?)\n</Data>", text, re.S).group(1))
    got = {(x, y): g for x, y, g in payload}
    want = {demo_grid.cell_center(c): demo_grid.gain(c) for c in members}
    assert got == want


def test_unknown_stage_rejected(demo_grid):
    with pytest.raises(ValueError, match="unknown subtask stage"):
        render_subtask_prompt(4, {"grid": demo_grid})


# -- scripted pipeline runs --------------------------------------------------


def test_scripted_run_reproduces_dpwa_path(demo_grid, demo_request):
    config = ScottConfig(n_areas=6, max_distance=4.0)
    result, transcript, client = run_scripted(demo_grid, demo_request, config)
    dp = plan_dpwa(demo_grid, demo_request)
    assert result.found and result.feasible
    assert result.algorithm == "scott"
    assert result.waypoints == dp.waypoints
    assert result.path_length == pytest.approx(dp.path_length)
    assert result.avg_gain == pytest.approx(dp.avg_gain)
    assert result.avg_gain >= demo_request.threshold - 1e-9
    assert result.expanded_states == 0
    assert transcript.final_result is result
    stages = [r.stage for r in transcript.records]
    assert stages == sorted(stages)
    assert stages.count(1) == 1 and stages.count(2) == 1
    assert stages.count(3) == len([r for r in transcript.records if r.stage == 3])
    assert all(r.verdict == "ok" for r in transcript.records)
    # stage 1 attaches the heatmap, later stages are text-only
    assert transcript.records[0].image_attached
    assert not any(r.image_attached for r in transcript.records[1:])


def test_auto_max_distance_is_derived_and_noted(demo_grid, demo_request):
    config = ScottConfig(n_areas=6)
    result, transcript, _ = run_scripted(demo_grid, demo_request, config)
    assert result.found
    assert any("auto max_distance" in n for n in transcript.notes)


def test_obstacle_waypoint_triggers_retry_then_accepted(demo_grid, demo_request):
    config = ScottConfig(n_areas=6, max_distance=4.0)
    bad = 'Looks clear.\n```json\n[[0.5, 0.5], [6.5, 5.5], [13.5, 9.5]]\n```'

    result, transcript, _ = run_scripted(
        demo_grid, demo_request, config,
        script_edit=lambda s: splice_attempt(s, 1, 0, bad),
    )
    assert result.found
    stage1 = [r for r in transcript.records if r.stage == 1]
    assert len(stage1) == 2
    assert stage1[0].attempt == 0 and stage1[1].attempt == 1
    assert "rejected" in stage1[0].verdict and "(6.5, 5.5)" in stage1[0].verdict
    assert stage1[1].verdict == "ok"
    assert "Previous attempt rejected" in stage1[1].prompt


def test_malformed_replies_exhaust_retries(demo_grid, demo_request):
    config = ScottConfig(n_areas=6, max_distance=4.0, max_retries_per_subtask=1)

    def corrupt(script):
        script = dict(script)
        script["1:0"] = "no structured output here"
        script["1:1"] = "```json\nstill { not json\n```"
        return script

    with pytest.raises(SubtaskError, match="subtask 1 failed after 2 attempts") as exc:
        run_scripted(demo_grid, demo_request, config, script_edit=corrupt)
    assert exc.value.stage == 1
    transcript = exc.value.transcript
    assert len(transcript.records) == 2
    assert all(r.stage == 1 for r in transcript.records)
    assert all(r.verdict.startswith("rejected") for r in transcript.records)


def test_stage2_falls_back_to_arc_length_sampling(demo_grid, demo_request):
    config = ScottConfig(n_areas=6, max_distance=4.0)

    def corrupt(script):
        script = dict(script)
        for attempt in range(3):
            script[f"2:{attempt}"] = "I cannot decide."
        return script

    result, transcript, _ = run_scripted(demo_grid, demo_request, config,
                                         script_edit=corrupt)
    dp = plan_dpwa(demo_grid, demo_request)
    assert result.waypoints == dp.waypoints
    stage2 = [r for r in transcript.records if r.stage == 2]
    assert len(stage2) == 3
    assert all(r.verdict.startswith("rejected") for r in stage2)
    assert any("falling back" in n for n in transcript.notes)


def test_segment_outside_area_fails_pipeline(demo_grid, demo_request):
    config = ScottConfig(n_areas=6, max_distance=4.0)
    rogue = 'Shortcut.\n```json\n[[13.5, 9.5]]\n```'

    def corrupt(script):
        script = dict(script)
        for attempt in range(3):
            script[f"3:{attempt}"] = rogue
        return script

    with pytest.raises(PipelineError, match="outside focus area 1") as exc:
        run_scripted(demo_grid, demo_request, config, script_edit=corrupt)
    transcript = exc.value.transcript
    stage3 = [r for r in transcript.records if r.stage == 3]
    assert len(stage3) == 3
    assert "Previous attempt rejected" in stage3[1].prompt
    assert exc.value.candidate == ()


def test_segment_must_anchor_at_start(demo_grid, demo_request):
    config = ScottConfig(n_areas=6, max_distance=4.0)

    def corrupt(script):
        first = script["3:0"]
        block = re.search(r"```json\n(.*?)\n```", first, re.S).group(1)
        pts = json.loads(block)
        assert len(pts) >= 2
        bad = first.replace(block, json.dumps(pts[1:]))
        return splice_attempt(script, 3, 0, bad)

    result, transcript, _ = run_scripted(demo_grid, demo_request, config,
                                         script_edit=corrupt)
    assert result.found
    stage3 = [r for r in transcript.records if r.stage == 3]
    assert "must begin at the start cell" in stage3[0].verdict


def test_missing_script_key_is_transport_error(demo_grid, demo_request):
    config = ScottConfig(n_areas=6, max_distance=4.0)

    def corrupt(script):
        script = dict(script)
        del script["3:0"]
        return script

    with pytest.raises(TransportError, match="no reply for 3:0") as exc:
        run_scripted(demo_grid, demo_request, config, script_edit=corrupt)
    transcript = exc.value.transcript
    assert transcript is not None
    assert transcript.records[-1].verdict.startswith("transport-error")


def test_mask_cache_skips_stage_two(demo_grid, demo_request):
    config = ScottConfig(n_areas=6, max_distance=4.0)
    cache = MaskCache()
    script = make_mock_script(demo_grid, demo_request, config)

    first_client = MockClient(script)
    res1, tr1 = run_scott(demo_grid, demo_request, config, first_client,
                          mask_cache=cache)
    assert any(stage == 2 for stage, _, _ in first_client.calls)

    second_client = MockClient(script)
    res2, tr2 = run_scott(demo_grid, demo_request, config, second_client,
                          mask_cache=cache)
    assert not any(stage == 2 for stage, _, _ in second_client.calls)
    assert any("served from cache" in n for n in tr2.notes)
    assert res2.waypoints == res1.waypoints


def test_transcript_serializes_to_json(demo_grid, demo_request):
    config = ScottConfig(n_areas=6, max_distance=4.0)
    _, transcript, _ = run_scripted(demo_grid, demo_request, config)
    doc = json.loads(json.dumps(transcript.to_json_dict()))
    assert doc["config"]["n_areas"] == 6
    assert doc["final_result"]["algorithm"] == "scott"
    assert doc["final_result"]["feasible"] is True
    assert len(doc["records"]) == len(transcript.records)
    for rec in doc["records"]:
        assert {"stage", "attempt", "prompt", "raw_reply", "verdict",
                "duration_s"} <= rec.keys()


def test_config_validation():
    with pytest.raises(ValueError, match="n_areas"):
        ScottConfig(n_areas=0)
    with pytest.raises(ValueError, match="max_distance"):
        ScottConfig(max_distance=0.0)
    with pytest.raises(ValueError, match="max_retries"):
        ScottConfig(max_retries_per_subtask=-1)


def test_mock_script_requires_feasible_instance(demo_grid):
    request = PlanRequest(Cell(0, 0), Cell(13, 9), threshold=0.999)
    with pytest.raises(ValueError, match="infeasible"):
        make_mock_script(demo_grid, request, ScottConfig())


def test_scripted_runs_across_seeds():
    from wirepath.grid import random_map
    from conftest import first_last_traversable

    config = ScottConfig(n_areas=4, max_distance=5.0)
    successes = 0
    for seed in range(10):
        grid = random_map(10, 10, seed=seed, obstacle_density=0.12)
        start, goal = first_last_traversable(grid)
        request = PlanRequest(start, goal, threshold=0.3)
        dp = plan_dpwa(grid, request)
        if not dp.found:
            continue
        result, transcript, _ = run_scripted(grid, request, config)
        assert result.waypoints == dp.waypoints
        assert transcript.final_result is result
        successes += 1
    assert successes >= 8


# -- HTTP client -------------------------------------------------------------


def test_http_client_requires_endpoint(monkeypatch):
    monkeypatch.delenv("WIREPATH_MODEL_ENDPOINT", raising=False)
    with pytest.raises(TransportError, match="no model endpoint"):
        HttpChatClient()


def test_http_client_round_trip(monkeypatch):
    import requests

    seen = {}

    class FakeResponse:
        def raise_for_status(self):
            pass

        def json(self):
            return {"choices": [{"message": {"content": "fine."}}]}

    def fake_post(url, json=None, headers=None, timeout=None):
        seen.update(url=url, payload=json, headers=headers, timeout=timeout)
        return FakeResponse()

    monkeypatch.setattr(requests, "post", fake_post)
    client = HttpChatClient(endpoint="http://unit.test/v1", api_key="k",
                            model="m", timeout=7.0)
    out = client.complete("## Subtask 1: hello", image=b"\x89PNG...")
    assert out == "fine."
    assert seen["url"] == "http://unit.test/v1"
    assert seen["timeout"] == 7.0
    assert seen["headers"]["Authorization"] == "Bearer k"
    content = seen["payload"]["messages"][0]["content"]
    assert content[0]["type"] == "text"
    assert content[1]["image_url"]["url"].startswith("data:image/png;base64,")


def test_http_client_wraps_transport_failures(monkeypatch):
    import requests

    def boom(*args, **kwargs):
        raise requests.ConnectionError("refused")

    monkeypatch.setattr(requests, "post", boom)
    client = HttpChatClient(endpoint="http://unit.test/v1")
    with pytest.raises(TransportError, match="refused"):
        client.complete("## Subtask 1: hello")
