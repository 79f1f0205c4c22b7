"""Scenario benchmarking: run every planner on a shared map, aggregate
per-run metrics into table rows, and render annotated heatmap figures.

A scenario is a small JSON document (map source, endpoints, threshold,
run count, planner subset, pipeline config). Runs are seeded and
sequential, so a scenario file reproduces its per-run records exactly.
The masked planner row reuses the focus-area mask built by the pipeline
run's second subtask, via the shared mask cache.
"""

from __future__ import annotations

import json
import os
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dpwa import plan_dpwa, plan_dpwa_masked
from .focus import FocusAreaSet, MaskCache
from .grid import Cell, GridMap, SynthMapSpec, load_radio_map, synthesize_map
from .heatmap import PathOverlay, png_bytes, render_heatmap
from .planners import PlanInputError, PlanRequest, plan_astar, plan_nwa
from .scott import (
    MockClient,
    ModelClient,
    ScottConfig,
    ScottError,
    ScottTranscript,
    make_mock_script,
    run_scott,
    snap_world_point,
)

ALGORITHMS = ("astar", "nwa", "dpwa", "scott", "scott_dpwa")

DISPLAY_NAMES = {
    "astar": "A*",
    "nwa": "N-WA*",
    "dpwa": "DP-WA*",
    "scott": "SCoTT",
    "scott_dpwa": "SCoTT-DP-WA*",
}

# Overlay styling; chosen to stay clear of the gain palette and of the
# white obstacle fill.
ALGORITHM_STYLES = {
    "astar": (235, 20, 235),
    "nwa": (0, 200, 0),
    "dpwa": (0, 0, 0),
    "scott": (255, 90, 0),
    "scott_dpwa": (110, 110, 110),
}


class ScenarioError(ValueError):
    """Scenario document is malformed or internally inconsistent."""


@dataclass(frozen=True)
class Scenario:
    """One benchmark case: a map, endpoints in world meters, and knobs."""

    name: str
    start: tuple[float, float]
    goal: tuple[float, float]
    threshold: float
    map_file: str | None = None
    synth: SynthMapSpec | None = None
    runs: int = 10
    algorithms: tuple[str, ...] = ALGORITHMS
    scott: ScottConfig = field(default_factory=ScottConfig)
    seed: int = 0
    horizon: int | None = None

    def __post_init__(self):
        if self.runs < 1:
            raise ScenarioError("runs must be at least 1")
        if (self.map_file is None) == (self.synth is None):
            raise ScenarioError("scenario needs exactly one of map file or synthetic spec")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ScenarioError(f"unknown algorithms: {', '.join(unknown)}")
        if not self.algorithms:
            raise ScenarioError("algorithms must not be empty")
        if "scott_dpwa" in self.algorithms and "scott" not in self.algorithms:
            raise ScenarioError("scott_dpwa reuses the scott run's mask; include scott")

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None) -> "Scenario":
        try:
            map_doc = doc["map"]
            map_file = None
            synth = None
            if "file" in map_doc:
                map_file = str(map_doc["file"])
                if base_dir is not None and not os.path.isabs(map_file):
                    map_file = str(base_dir / map_file)
            if "synthetic" in map_doc:
                synth = SynthMapSpec.from_dict(map_doc["synthetic"])
            scott_cfg = ScottConfig(**doc.get("scott", {}))
            return cls(
                name=str(doc["name"]),
                start=tuple(float(v) for v in doc["start"]),
                goal=tuple(float(v) for v in doc["goal"]),
                threshold=float(doc["threshold"]),
                map_file=map_file,
                synth=synth,
                runs=int(doc.get("runs", 10)),
                algorithms=tuple(doc.get("algorithms", ALGORITHMS)),
                scott=scott_cfg,
                seed=int(doc.get("seed", 0)),
                horizon=None if doc.get("horizon") is None else int(doc["horizon"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"bad scenario document: {exc}") from exc

    def load_grid(self) -> GridMap:
        if self.map_file is not None:
            return load_radio_map(self.map_file)
        return synthesize_map(self.synth)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot load scenario {path}: {exc}") from exc
    return Scenario.from_dict(doc, base_dir=path.parent)


@dataclass
class RunRecord:
    algorithm: str
    run_index: int
    seed: int
    success: bool
    runtime_s: float
    path_length: float | None = None
    avg_gain: float | None = None
    expanded_states: int = 0
    pruned_states: int | None = None
    waypoints: tuple[Cell, ...] = ()
    error: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "run_index": self.run_index,
            "seed": self.seed,
            "success": self.success,
            "runtime_s": self.runtime_s,
            "path_length_m": self.path_length,
            "avg_gain": self.avg_gain,
            "expanded_states": self.expanded_states,
            "pruned_states": self.pruned_states,
            "waypoints": [[c.col, c.row] for c in self.waypoints],
            "error": self.error,
        }


@dataclass(frozen=True)
class MetricsRow:
    """Aggregate of one algorithm's runs.

    Gain and length average successful runs only; runtime and expanded
    states average all runs. speedup_vs_reference is the full DP-WA* row's
    mean expanded states divided by this row's (search-state proxy for
    wall-clock speedup; None when either side is missing or zero).
    """

    algorithm: str
    avg_path_gain: float | None
    path_length_m: float | None
    runtime_s: float
    success_rate_percent: float
    expanded_states: float
    speedup_vs_reference: float | None

    def to_json_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "avg_path_gain": self.avg_path_gain,
            "path_length_m": self.path_length_m,
            "runtime_s": self.runtime_s,
            "success_rate_percent": self.success_rate_percent,
            "expanded_states": self.expanded_states,
            "speedup_vs_reference": self.speedup_vs_reference,
        }


@dataclass
class ScenarioReport:
    scenario: Scenario
    grid: GridMap
    request: PlanRequest
    records: list[RunRecord]
    rows: list[MetricsRow]
    transcripts: list[ScottTranscript] = field(default_factory=list)

    def row(self, algorithm: str) -> MetricsRow:
        for row in self.rows:
            if row.algorithm == algorithm:
                return row
        raise KeyError(algorithm)


def _snap_endpoint(grid: GridMap, xy: Sequence[float], label: str) -> Cell:
    cell = snap_world_point(grid, float(xy[0]), float(xy[1]))
    if cell is None:
        raise ScenarioError(
            f"{label} ({xy[0]}, {xy[1]}) does not snap to a traversable cell"
        )
    return cell


def _mask_must_exist() -> FocusAreaSet:
    raise PlanInputError(
        "no cached focus-area mask; the scott run must execute first"
    )


def run_scenario(
    scenario: Scenario,
    client_factory: Callable[[], ModelClient] | None = None,
) -> ScenarioReport:
    """Execute every selected algorithm ``runs`` times and aggregate.

    Without a client factory, pipeline runs use a scripted MockClient that
    replays the DP-WA* optimum, which keeps benchmark output deterministic.
    A failing run (planner input error, pipeline failure, infeasible
    instance) is recorded with its error and counts against success rate.
    """
    grid = scenario.load_grid()
    start = _snap_endpoint(grid, scenario.start, "start")
    goal = _snap_endpoint(grid, scenario.goal, "goal")
    request = PlanRequest(start, goal, threshold=scenario.threshold)
    cache = MaskCache()
    report = ScenarioReport(scenario, grid, request, [], [])

    script: dict | None = None

    def default_factory() -> ModelClient:
        nonlocal script
        if script is None:
            script = make_mock_script(grid, request, scenario.scott,
                                      horizon=scenario.horizon)
        return MockClient(script)

    factory = client_factory or default_factory

    ordered = [a for a in ALGORITHMS if a in scenario.algorithms]
    for algorithm in ordered:
        for run_index in range(scenario.runs):
            seed = scenario.seed + run_index
            report.records.append(
                _run_once(algorithm, run_index, seed, grid, request, scenario,
                          cache, factory, report)
            )

    reference = None
    for algorithm in ordered:
        recs = [r for r in report.records if r.algorithm == algorithm]
        if algorithm == "dpwa":
            reference = statistics.fmean(r.expanded_states for r in recs)
    for algorithm in ordered:
        recs = [r for r in report.records if r.algorithm == algorithm]
        report.rows.append(_aggregate(algorithm, recs, reference))
    return report


def _run_once(
    algorithm: str,
    run_index: int,
    seed: int,
    grid: GridMap,
    request: PlanRequest,
    scenario: Scenario,
    cache: MaskCache,
    factory: Callable[[], ModelClient],
    report: ScenarioReport,
) -> RunRecord:
    t0 = time.perf_counter()
    try:
        if algorithm == "astar":
            result = plan_astar(grid, request)
        elif algorithm == "nwa":
            result = plan_nwa(grid, request)
        elif algorithm == "dpwa":
            result = plan_dpwa(grid, request, horizon=scenario.horizon)
        elif algorithm == "scott":
            result, transcript = run_scott(grid, request, scenario.scott,
                                           factory(), mask_cache=cache)
            report.transcripts.append(transcript)
        elif algorithm == "scott_dpwa":
            mask = cache.get_or_build(grid, request.start, request.goal,
                                      _effective_threshold(scenario, request),
                                      _mask_must_exist)
            result = plan_dpwa_masked(grid, request, mask,
                                      horizon=scenario.horizon)
        else:  # pragma: no cover - Scenario validation rejects these
            raise ScenarioError(f"unknown algorithm {algorithm}")
    except (PlanInputError, ScottError, ValueError) as exc:
        return RunRecord(
            algorithm, run_index, seed, success=False,
            runtime_s=time.perf_counter() - t0, error=str(exc),
        )

    return RunRecord(
        algorithm,
        run_index,
        seed,
        success=result.found,
        runtime_s=result.runtime,
        path_length=result.path_length if result.found else None,
        avg_gain=result.avg_gain if result.found else None,
        expanded_states=result.expanded_states,
        pruned_states=result.pruned_states,
        waypoints=result.waypoints,
        error=None,
    )


def _effective_threshold(scenario: Scenario, request: PlanRequest) -> float:
    if scenario.scott.threshold is not None:
        return scenario.scott.threshold
    return request.threshold


def _aggregate(algorithm: str, records: list[RunRecord],
               reference_expanded: float | None) -> MetricsRow:
    ok = [r for r in records if r.success]
    expanded = statistics.fmean(r.expanded_states for r in records)
    speedup = None
    if reference_expanded and expanded > 0:
        speedup = reference_expanded / expanded
    return MetricsRow(
        algorithm=algorithm,
        avg_path_gain=statistics.fmean(r.avg_gain for r in ok) if ok else None,
        path_length_m=statistics.fmean(r.path_length for r in ok) if ok else None,
        runtime_s=statistics.fmean(r.runtime_s for r in records),
        success_rate_percent=100.0 * len(ok) / len(records),
        expanded_states=expanded,
        speedup_vs_reference=speedup,
    )


# -- table and figure output ---------------------------------------------


_COLUMNS = (
    ("avg_path_gain", "Avg Path Gain"),
    ("path_length_m", "Path Length (m)"),
    ("runtime_s", "Runtime (s)"),
    ("success_rate_percent", "Success Rate (%)"),
    ("expanded_states", "Expanded States"),
    ("speedup_vs_reference", "Speedup"),
)


def _fmt_cell(value, blank: str) -> str:
    if value is None:
        return blank
    return f"{value:.2f}"


def emit_table(rows: Sequence[MetricsRow]) -> tuple[str, str]:
    """Render aggregate rows as (Markdown table, CSV text)."""
    md_lines = [
        "| Algorithm | " + " | ".join(title for _, title in _COLUMNS) + " |",
        "|" + "---|" * (len(_COLUMNS) + 1),
    ]
    csv_lines = ["algorithm," + ",".join(key for key, _ in _COLUMNS)]
    for row in rows:
        values = [_fmt_cell(getattr(row, key), "n/a") for key, _ in _COLUMNS]
        md_lines.append(
            "| " + DISPLAY_NAMES[row.algorithm] + " | " + " | ".join(values) + " |"
        )
        csv_values = [_fmt_cell(getattr(row, key), "") for key, _ in _COLUMNS]
        csv_lines.append(row.algorithm + "," + ",".join(csv_values))
    return "\n".join(md_lines) + "\n", "\n".join(csv_lines) + "\n"


def _legend_strip(width: int, entries: list[tuple[str, tuple[int, int, int]]]) -> np.ndarray:
    from PIL import Image, ImageDraw

    row_h = 16
    strip = Image.new("RGB", (width, row_h * len(entries) + 8), (0, 0, 0))
    draw = ImageDraw.Draw(strip)
    for i, (algorithm, color) in enumerate(entries):
        y = 4 + i * row_h
        draw.line([(6, y + 6), (28, y + 6)], fill=color, width=3)
        draw.text((36, y), DISPLAY_NAMES[algorithm], fill=(255, 255, 255))
    return np.asarray(strip, dtype=np.uint8)


def emit_figure(
    grid: GridMap,
    records: Sequence[RunRecord],
    out_path=None,
    scale: int = 12,
) -> bytes:
    """Heatmap with one overlay per algorithm (first successful run) and a
    legend strip. Deterministic bytes; optionally written atomically."""
    chosen: dict[str, RunRecord] = {}
    for rec in records:
        if rec.algorithm not in ALGORITHM_STYLES:
            raise ScenarioError(f"no overlay style for algorithm '{rec.algorithm}'")
        if rec.success and rec.algorithm not in chosen:
            chosen[rec.algorithm] = rec

    entries = [(a, ALGORITHM_STYLES[a]) for a in ALGORITHMS if a in chosen]
    overlays = [
        PathOverlay(chosen[a].waypoints, style, label=DISPLAY_NAMES[a])
        for a, style in entries
    ]
    image = render_heatmap(grid, overlays, scale=scale)
    width = max(image.shape[1], 180)
    if width > image.shape[1]:
        pad = np.zeros((image.shape[0], width - image.shape[1], 3), np.uint8)
        image = np.concatenate([image, pad], axis=1)
    strip = _legend_strip(width, entries)
    data = png_bytes(np.concatenate([image, strip], axis=0))
    if out_path is not None:
        _atomic_write(Path(out_path), data)
    return data


def _atomic_write(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f"{path.name}.tmp{os.getpid()}")
    if isinstance(data, bytes):
        tmp.write_bytes(data)
    else:
        tmp.write_text(data)
    os.replace(tmp, path)


def write_report(report: ScenarioReport, out_dir, formats: Sequence[str] = ("md", "csv")) -> list[Path]:
    """Write tables, per-run records, transcripts, and the figure; returns paths."""
    out_dir = Path(out_dir)
    name = report.scenario.name
    written: list[Path] = []
    markdown, csv_text = emit_table(report.rows)
    if "md" in formats:
        path = out_dir / f"{name}.md"
        _atomic_write(path, markdown)
        written.append(path)
    if "csv" in formats:
        path = out_dir / f"{name}.csv"
        _atomic_write(path, csv_text)
        written.append(path)
    if "json" in formats:
        path = out_dir / f"{name}.json"
        _atomic_write(path, json.dumps([r.to_json_dict() for r in report.rows], indent=1))
        written.append(path)

    runs_path = out_dir / f"{name}-runs.json"
    _atomic_write(
        runs_path,
        json.dumps(
            {
                "scenario": name,
                "seed": report.scenario.seed,
                "threshold": report.scenario.threshold,
                "records": [r.to_json_dict() for r in report.records],
            },
            indent=1,
        ),
    )
    written.append(runs_path)

    if report.transcripts:
        t_path = out_dir / f"{name}-transcripts.json"
        _atomic_write(
            t_path,
            json.dumps([t.to_json_dict() for t in report.transcripts], indent=1),
        )
        written.append(t_path)

    if any(r.success for r in report.records):
        fig_path = out_dir / f"{name}.png"
        emit_figure(report.grid, report.records, out_path=fig_path)
        written.append(fig_path)
    return written
