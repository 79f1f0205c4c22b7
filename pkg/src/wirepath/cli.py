"""Command-line interface.

Verbs: plan (one algorithm on one scenario, JSON to stdout), bench
(scenario files to tables and figures), render (radio map to heatmap PNG),
gen-map (synthetic spec to radio-map JSON), scott (run the pipeline with a
live or scripted client, transcript saved per run).

Exit codes: 0 success, 1 no feasible path, 2 input error, 3 model client
transport error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .bench import (
    ALGORITHMS,
    Scenario,
    ScenarioError,
    emit_table,
    load_scenario,
    run_scenario,
    write_report,
)
from .dpwa import plan_dpwa, plan_dpwa_masked
from .focus import MaskCache, MaskFormatError
from .grid import (
    RadioMapError,
    SynthMapSpec,
    load_radio_map,
    save_radio_map,
    synthesize_map,
)
from .heatmap import png_bytes, render_heatmap
from .planners import PlanInputError, PlanRequest, plan_astar, plan_nwa
from .scott import (
    HttpChatClient,
    MockClient,
    PipelineError,
    ScottError,
    SubtaskError,
    TransportError,
    make_mock_script,
    run_scott,
)

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_INPUT = 2
EXIT_TRANSPORT = 3


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario's random seed")
    parser.add_argument("--out-dir", default="out",
                        help="directory for generated artifacts")
    parser.add_argument("--format", choices=("csv", "md", "json"), default="md",
                        help="table format for bench output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wirepath",
        description="Coverage-aware path planning over gain heatmaps.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_plan = sub.add_parser("plan", help="run one algorithm on one scenario")
    p_plan.add_argument("scenario", help="scenario JSON file")
    p_plan.add_argument("--algorithm", choices=ALGORITHMS, default="dpwa")
    p_plan.add_argument("--mock-script", default=None,
                        help="scripted replies for pipeline algorithms "
                             "(default: auto-generated)")
    _common_flags(p_plan)
    p_plan.set_defaults(func=cmd_plan)

    p_bench = sub.add_parser("bench", help="run scenario files, emit tables and figures")
    p_bench.add_argument("scenarios", nargs="+", help="scenario JSON files")
    _common_flags(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    p_render = sub.add_parser("render", help="render a radio map as a heatmap PNG")
    p_render.add_argument("map", help="radio-map JSON file")
    p_render.add_argument("--scale", type=int, default=8,
                          help="pixels per cell (minimum 3)")
    p_render.add_argument("--out", default=None, help="output PNG path")
    _common_flags(p_render)
    p_render.set_defaults(func=cmd_render)

    p_gen = sub.add_parser("gen-map", help="synthesize a radio-map JSON from a spec")
    p_gen.add_argument("spec", help="generator spec JSON file")
    p_gen.add_argument("--out", default=None, help="output radio-map JSON path")
    _common_flags(p_gen)
    p_gen.set_defaults(func=cmd_gen_map)

    p_scott = sub.add_parser("scott", help="run the three-subtask pipeline")
    p_scott.add_argument("scenario", help="scenario JSON file")
    p_scott.add_argument("--mock-script", default=None,
                         help="JSON file of scripted replies; omit for the "
                              "live endpoint from WIREPATH_MODEL_ENDPOINT")
    _common_flags(p_scott)
    p_scott.set_defaults(func=cmd_scott)

    return parser


def _load_scenario(args) -> Scenario:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    return scenario


def _request_for(scenario: Scenario, grid) -> PlanRequest:
    from .bench import _snap_endpoint

    start = _snap_endpoint(grid, scenario.start, "start")
    goal = _snap_endpoint(grid, scenario.goal, "goal")
    return PlanRequest(start, goal, threshold=scenario.threshold)


def _mock_client(args) -> MockClient | None:
    if args.mock_script is None:
        return None
    try:
        script = json.loads(Path(args.mock_script).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot load mock script: {exc}") from exc
    return MockClient(script)


def cmd_plan(args) -> int:
    scenario = _load_scenario(args)
    grid = scenario.load_grid()
    request = _request_for(scenario, grid)

    if args.algorithm == "astar":
        result = plan_astar(grid, request)
    elif args.algorithm == "nwa":
        result = plan_nwa(grid, request)
    elif args.algorithm == "dpwa":
        result = plan_dpwa(grid, request, horizon=scenario.horizon)
    else:
        client = _mock_client(args)
        if client is None:
            try:
                script = make_mock_script(grid, request, scenario.scott,
                                          horizon=scenario.horizon)
            except ValueError as exc:
                print(str(exc), file=sys.stderr)
                return EXIT_INFEASIBLE
            client = MockClient(script)
        cache = MaskCache()
        result, _ = run_scott(grid, request, scenario.scott, client,
                              mask_cache=cache)
        if args.algorithm == "scott_dpwa":
            mask = cache.get_or_build(
                grid, request.start, request.goal,
                scenario.scott.threshold if scenario.scott.threshold is not None
                else request.threshold,
                lambda: (_ for _ in ()).throw(PlanInputError("mask missing")),
            )
            result = plan_dpwa_masked(grid, request, mask,
                                      horizon=scenario.horizon)

    print(json.dumps(result.to_json_dict(), indent=1))
    return EXIT_OK if result.found else EXIT_INFEASIBLE


def cmd_bench(args) -> int:
    out_dir = Path(args.out_dir)
    for path in args.scenarios:
        scenario = load_scenario(path)
        if args.seed is not None:
            scenario = dataclasses.replace(scenario, seed=args.seed)
        report = run_scenario(scenario)
        written = write_report(report, out_dir, formats=(args.format,))
        markdown, _ = emit_table(report.rows)
        print(f"# {scenario.name}")
        print(markdown)
        for p in written:
            print(f"wrote {p}")
    return EXIT_OK


def cmd_render(args) -> int:
    grid = load_radio_map(args.map)
    image = render_heatmap(grid, scale=args.scale)
    out = Path(args.out) if args.out else Path(args.out_dir) / (
        Path(args.map).stem + ".png"
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(png_bytes(image))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_gen_map(args) -> int:
    try:
        doc = json.loads(Path(args.spec).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot load generator spec: {exc}") from exc
    spec = SynthMapSpec.from_dict(doc)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    grid = synthesize_map(spec)
    out = Path(args.out) if args.out else Path(args.out_dir) / (
        Path(args.spec).stem + "-map.json"
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    save_radio_map(grid, out)
    print(f"wrote {out} ({grid.traversable_count} traversable cells)")
    return EXIT_OK


def cmd_scott(args) -> int:
    scenario = _load_scenario(args)
    grid = scenario.load_grid()
    request = _request_for(scenario, grid)
    client = _mock_client(args)
    if client is None:
        client = HttpChatClient(temperature=scenario.scott.temperature)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    transcript_path = out_dir / f"{scenario.name}-transcript.json"
    try:
        result, transcript = run_scott(grid, request, scenario.scott, client)
    except ScottError as exc:
        if exc.transcript is not None:
            transcript_path.write_text(
                json.dumps(exc.transcript.to_json_dict(), indent=1)
            )
            print(f"wrote {transcript_path}", file=sys.stderr)
        raise
    transcript_path.write_text(json.dumps(transcript.to_json_dict(), indent=1))
    print(json.dumps(result.to_json_dict(), indent=1))
    print(f"wrote {transcript_path}", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (SubtaskError, PipelineError) as exc:
        print(f"pipeline failed: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (PlanInputError, RadioMapError, MaskFormatError, ScenarioError,
            OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
