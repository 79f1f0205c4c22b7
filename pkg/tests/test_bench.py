"""Scenario runner tests: aggregation math, determinism, artifacts."""

import json
import statistics
from pathlib import Path

import pytest

from wirepath.bench import (
    ALGORITHM_STYLES,
    ALGORITHMS,
    MetricsRow,
    Scenario,
    ScenarioError,
    emit_figure,
    emit_table,
    load_scenario,
    run_scenario,
    write_report,
)
from wirepath.grid import SynthMapSpec, save_radio_map, synthesize_map

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def small_scenario(**overrides):
    kwargs = dict(
        name="unit",
        start=(1.5, 1.5),
        goal=(8.5, 1.5),
        threshold=0.45,
        synth=SynthMapSpec(
            width_cells=10,
            height_cells=8,
            access_points=((7.5, 6.5),),
            obstacle_rects=((4, 3, 5, 4),),
        ),
        runs=3,
        horizon=20,
    )
    kwargs.update(overrides)
    return Scenario(**kwargs)


def test_scenario_validation():
    with pytest.raises(ScenarioError, match="runs"):
        small_scenario(runs=0)
    with pytest.raises(ScenarioError, match="exactly one"):
        small_scenario(synth=None)
    with pytest.raises(ScenarioError, match="exactly one"):
        small_scenario(map_file="x.json")
    with pytest.raises(ScenarioError, match="unknown algorithms: warp"):
        small_scenario(algorithms=("astar", "warp"))
    with pytest.raises(ScenarioError, match="include scott"):
        small_scenario(algorithms=("dpwa", "scott_dpwa"))
    with pytest.raises(ScenarioError, match="bad scenario document"):
        Scenario.from_dict({"name": "x"})


def test_scenario_file_round_trip(tmp_path):
    grid = synthesize_map(
        SynthMapSpec(width_cells=6, height_cells=5, access_points=((3.0, 2.0),))
    )
    save_radio_map(grid, tmp_path / "m.json")
    doc = {
        "name": "filed",
        "map": {"file": "m.json"},
        "start": [0.5, 0.5],
        "goal": [5.5, 4.5],
        "threshold": 0.2,
        "runs": 2,
        "algorithms": ["astar"],
    }
    (tmp_path / "s.json").write_text(json.dumps(doc))
    scenario = load_scenario(tmp_path / "s.json")
    assert scenario.name == "filed"
    assert scenario.runs == 2
    loaded = scenario.load_grid()
    assert loaded.width_cells == 6 and loaded.height_cells == 5

    with pytest.raises(ScenarioError, match="cannot load scenario"):
        load_scenario(tmp_path / "missing.json")


def test_endpoint_snapping_errors():
    scenario = small_scenario(start=(-30.0, -30.0))
    with pytest.raises(ScenarioError, match="start"):
        run_scenario(scenario)


def test_run_scenario_aggregates_match_records():
    scenario = small_scenario()
    report = run_scenario(scenario)
    assert len(report.records) == len(ALGORITHMS) * scenario.runs
    assert [row.algorithm for row in report.rows] == list(ALGORITHMS)

    for row in report.rows:
        recs = [r for r in report.records if r.algorithm == row.algorithm]
        ok = [r for r in recs if r.success]
        assert row.success_rate_percent == pytest.approx(100.0 * len(ok) / len(recs))
        assert row.runtime_s == pytest.approx(
            statistics.fmean(r.runtime_s for r in recs)
        )
        assert row.expanded_states == pytest.approx(
            statistics.fmean(r.expanded_states for r in recs)
        )
        if ok:
            assert row.avg_path_gain == pytest.approx(
                statistics.fmean(r.avg_gain for r in ok)
            )
            assert row.path_length_m == pytest.approx(
                statistics.fmean(r.path_length for r in ok)
            )
        else:
            assert row.avg_path_gain is None and row.path_length_m is None

    # seeds are scenario.seed + run index, recorded per run
    dp = [r for r in report.records if r.algorithm == "dpwa"]
    assert [r.seed for r in dp] == [scenario.seed + i for i in range(scenario.runs)]
    # deterministic planner: zero variance across runs
    assert len({(r.path_length, r.avg_gain, r.expanded_states) for r in dp}) == 1


def test_scott_rows_reuse_dpwa_optimum():
    report = run_scenario(small_scenario())
    dpwa = report.row("dpwa")
    scott = report.row("scott")
    masked = report.row("scott_dpwa")
    assert scott.avg_path_gain == pytest.approx(dpwa.avg_path_gain)
    assert scott.path_length_m == pytest.approx(dpwa.path_length_m)
    assert masked.path_length_m == pytest.approx(dpwa.path_length_m)
    assert masked.expanded_states < dpwa.expanded_states
    assert masked.speedup_vs_reference > 1.0
    assert dpwa.speedup_vs_reference == pytest.approx(1.0)
    assert scott.speedup_vs_reference is None  # no search states to compare
    assert report.transcripts and len(report.transcripts) == report.scenario.runs


def test_rerun_reproduces_records():
    scenario = small_scenario()
    first = run_scenario(scenario)
    second = run_scenario(scenario)

    def stable(report):
        out = []
        for r in report.records:
            d = r.to_json_dict()
            d.pop("runtime_s")  # wall clock, not part of the contract
            out.append(d)
        return out

    assert stable(first) == stable(second)


def test_failure_runs_counted():
    scenario = small_scenario(threshold=0.95, runs=2)
    report = run_scenario(scenario)
    dpwa = report.row("dpwa")
    assert dpwa.success_rate_percent == 0.0
    assert dpwa.avg_path_gain is None
    scott = report.row("scott")
    assert scott.success_rate_percent == 0.0
    assert all(
        r.error for r in report.records if r.algorithm == "scott"
    )
    masked = report.row("scott_dpwa")
    assert masked.success_rate_percent == 0.0
    # the unconstrained baseline still finds its shortest path
    assert report.row("astar").success_rate_percent == 100.0


def test_emit_table_formats():
    rows = [
        MetricsRow("astar", 0.091, 19.0, 0.004, 100.0, 20.0, None),
        MetricsRow("dpwa", 0.7, 36.07, 0.21, 100.0, 1747260.0, 1.0),
        MetricsRow("scott", None, None, 0.3, 0.0, 0.0, None),
    ]
    markdown, csv_text = emit_table(rows)
    md_lines = markdown.strip().split("\n")
    assert len(md_lines) == 5
    assert md_lines[0].startswith("| Algorithm | Avg Path Gain |")
    assert "| A* | 0.09 | 19.00 |" in md_lines[2]
    assert "| DP-WA* | 0.70 |" in md_lines[3]
    assert "| SCoTT | n/a | n/a |" in md_lines[4]
    csv_lines = csv_text.strip().split("\n")
    assert csv_lines[0] == (
        "algorithm,avg_path_gain,path_length_m,runtime_s,"
        "success_rate_percent,expanded_states,speedup_vs_reference"
    )
    assert csv_lines[1] == "astar,0.09,19.00,0.00,100.00,20.00,"
    assert len(csv_lines) == 4

    markdown, csv_text = emit_table([])
    assert len(markdown.strip().split("\n")) == 2
    assert len(csv_text.strip().split("\n")) == 1


def test_emit_figure_deterministic_and_styled():
    report = run_scenario(small_scenario(runs=1))
    png1 = emit_figure(report.grid, report.records)
    png2 = emit_figure(report.grid, report.records)
    assert png1 == png2
    assert png1.startswith(b"\x89PNG")
    styles = list(ALGORITHM_STYLES.values())
    assert len(set(styles)) == len(styles)

    rogue = report.records[0]
    rogue.algorithm = "warp"
    with pytest.raises(ScenarioError, match="no overlay style"):
        emit_figure(report.grid, report.records)


def test_write_report_artifacts(tmp_path):
    report = run_scenario(small_scenario(runs=2))
    written = write_report(report, tmp_path, formats=("md", "csv", "json"))
    names = {p.name for p in written}
    assert names == {
        "unit.md", "unit.csv", "unit.json", "unit-runs.json",
        "unit-transcripts.json", "unit.png",
    }
    assert not list(tmp_path.glob("*.tmp*"))
    runs_doc = json.loads((tmp_path / "unit-runs.json").read_text())
    assert runs_doc["scenario"] == "unit"
    assert len(runs_doc["records"]) == len(report.records)
    rows_doc = json.loads((tmp_path / "unit.json").read_text())
    assert [r["algorithm"] for r in rows_doc] == list(ALGORITHMS)


def test_shipped_scenarios_parse():
    paths = sorted(SCENARIO_DIR.glob("*.json"))
    assert {p.stem for p in paths} == {
        "across_the_room", "wall_to_wall", "extreme_case",
    }
    for path in paths:
        scenario = load_scenario(path)
        assert scenario.name == path.stem
        assert scenario.runs == 10
        assert set(scenario.algorithms) == set(ALGORITHMS)
        grid = scenario.load_grid()
        assert grid.traversable_count > 0
