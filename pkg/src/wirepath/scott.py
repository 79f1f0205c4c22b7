"""Three-stage model-orchestrated planning over gain heatmaps.

The pipeline decomposes wireless-aware planning into subtasks small enough
for a vision-language model to answer reliably:

1. coarse path: the model reads the rendered heatmap and proposes a rough
   start-to-goal route through high-gain regions;
2. focus areas: the model picks N region centers along that route (with an
   arc-length fallback when its reply is unusable);
3. refinement: per focus area, the model receives only that area's gain
   slice and returns the fine waypoints, which are stitched in order.

Every model exchange goes through a pluggable client; the scripted
MockClient makes whole runs deterministic. All prompts, replies, parses,
verdicts, and retries are captured in a transcript.
"""

from __future__ import annotations

import base64
import json
import math
import os
import re
import time
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .dpwa import plan_dpwa
from .focus import FocusArea, FocusAreaSet, MaskCache, build_focus_areas
from .grid import Cell, GridMap
from .heatmap import png_bytes, render_heatmap
from .planners import PlanRequest, PlanResult, average_gain, path_length

DEFAULT_TIMEOUT_S = 120.0

MAX_INTERPOLATION_GAP = 3  # cells; larger gaps are connectivity violations


class ReplyParseError(ValueError):
    """Model reply could not be turned into usable structured output."""


class ScottError(Exception):
    """Base for pipeline failures; carries the transcript when available."""

    def __init__(self, message, transcript=None):
        super().__init__(message)
        self.transcript = transcript


class TransportError(ScottError):
    """The model client could not complete a call (network, protocol)."""


class SubtaskError(ScottError):
    """A subtask ran out of retries on unusable replies."""

    def __init__(self, message, stage, transcript=None):
        super().__init__(message, transcript)
        self.stage = stage


class PipelineError(ScottError):
    """Assembled candidate failed validation; keeps it for diagnostics."""

    def __init__(self, message, candidate=(), transcript=None):
        super().__init__(message, transcript)
        self.candidate = tuple(candidate)


@dataclass(frozen=True)
class ScottConfig:
    """Pipeline knobs. ``n_areas`` of 5-7 works best; 6 is the default.

    ``max_distance`` is the focus-area radius in meters; leave it None to
    derive one from the coarse path (half the center spacing plus a cell
    diagonal). ``threshold`` overrides the request's average-gain threshold
    when set. ``temperature`` is forwarded to HTTP clients; keep 0 for
    reproducibility.
    """

    n_areas: int = 6
    max_distance: float | None = None
    threshold: float | None = None
    max_retries_per_subtask: int = 2
    model_endpoint: str = "mock"
    temperature: float = 0.0

    def __post_init__(self):
        if self.n_areas < 1:
            raise ValueError("n_areas must be at least 1")
        if self.max_distance is not None and self.max_distance <= 0:
            raise ValueError("max_distance must be positive")
        if self.max_retries_per_subtask < 0:
            raise ValueError("max_retries_per_subtask must be >= 0")

    def to_json_dict(self) -> dict:
        return {
            "n_areas": self.n_areas,
            "max_distance": self.max_distance,
            "threshold": self.threshold,
            "max_retries_per_subtask": self.max_retries_per_subtask,
            "model_endpoint": self.model_endpoint,
            "temperature": self.temperature,
        }


@dataclass
class SubtaskRecord:
    stage: int
    attempt: int
    prompt: str
    image_attached: bool
    data_ref: str | None
    raw_reply: str
    parsed: list | None
    verdict: str
    duration_s: float
    area_index: int | None = None

    def to_json_dict(self) -> dict:
        return {
            "stage": self.stage,
            "attempt": self.attempt,
            "area_index": self.area_index,
            "prompt": self.prompt,
            "image_attached": self.image_attached,
            "data_ref": self.data_ref,
            "raw_reply": self.raw_reply,
            "parsed": self.parsed,
            "verdict": self.verdict,
            "duration_s": self.duration_s,
        }


@dataclass
class ScottTranscript:
    config: ScottConfig
    records: list[SubtaskRecord] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    final_result: PlanResult | None = None

    def note(self, text: str) -> None:
        self.notes.append(text)

    def to_json_dict(self) -> dict:
        return {
            "config": self.config.to_json_dict(),
            "records": [r.to_json_dict() for r in self.records],
            "notes": list(self.notes),
            "final_result": (
                self.final_result.to_json_dict() if self.final_result else None
            ),
        }


# -- model clients -----------------------------------------------------------


class ModelClient(Protocol):
    def complete(self, prompt: str, image: bytes | None = None) -> str: ...


_STAGE_RE = re.compile(r"Subtask (\d)")


class MockClient:
    """Deterministic scripted client.

    The script maps "stage:attempt" (attempt counts every call made for
    that stage, across areas and retries) to the reply text. A missing key
    is a transport error, mirroring a dead endpoint.
    """

    def __init__(self, script: dict):
        self.script = dict(script)
        self.calls: list[tuple[int, str, bool]] = []
        self._per_stage: dict[int, int] = {}

    def complete(self, prompt: str, image: bytes | None = None) -> str:
        m = _STAGE_RE.search(prompt)
        if not m:
            raise TransportError("prompt does not identify its subtask")
        stage = int(m.group(1))
        attempt = self._per_stage.get(stage, 0)
        self._per_stage[stage] = attempt + 1
        self.calls.append((stage, prompt, image is not None))
        key = f"{stage}:{attempt}"
        if key not in self.script:
            raise TransportError(f"mock script has no reply for {key}")
        return self.script[key]


class HttpChatClient:
    """Chat-completions client: one text + optional PNG image per call."""

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        model: str = "default",
        timeout: float = DEFAULT_TIMEOUT_S,
        temperature: float = 0.0,
    ):
        self.endpoint = endpoint or os.environ.get("WIREPATH_MODEL_ENDPOINT")
        self.api_key = api_key or os.environ.get("WIREPATH_MODEL_KEY")
        self.model = model
        self.timeout = timeout
        self.temperature = temperature
        if not self.endpoint:
            raise TransportError(
                "no model endpoint configured (set WIREPATH_MODEL_ENDPOINT)"
            )

    def complete(self, prompt: str, image: bytes | None = None) -> str:
        import requests

        content: list[dict] = [{"type": "text", "text": prompt}]
        if image is not None:
            b64 = base64.b64encode(image).decode()
            content.append(
                {
                    "type": "image_url",
                    "image_url": {"url": f"data:image/png;base64,{b64}"},
                }
            )
        payload = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": content}],
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = requests.post(
                self.endpoint, json=payload, headers=headers, timeout=self.timeout
            )
            resp.raise_for_status()
            body = resp.json()
            return body["choices"][0]["message"]["content"]
        except requests.RequestException as exc:
            raise TransportError(f"model endpoint failed: {exc}") from exc
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise TransportError(f"unexpected reply shape: {exc}") from exc


# -- prompt templates ---------------------------------------------------------

_REASONING_BLOCK = """<Reasoning Strategy>
Work step by step. First explain, in a short paragraph, how you weigh
signal quality against detour length and which regions you rely on.
Only after the explanation, output exactly one fenced JSON code block.
</Reasoning Strategy>"""


def _fmt(value: float) -> str:
    return f"{value:.3f}".rstrip("0").rstrip(".")


def _points_json(points: Sequence[tuple[float, float]]) -> str:
    return json.dumps([[round(x, 4), round(y, 4)] for x, y in points])


def render_subtask_prompt(stage: int, context: dict) -> tuple[str, bytes | None]:
    """Build the prompt text (and optional PNG attachment) for one subtask."""
    grid: GridMap = context["grid"]
    if stage == 1:
        threshold = _fmt(context["threshold"])
        sx, sy = (_fmt(v) for v in grid.cell_center(context["start"]))
        gx, gy = (_fmt(v) for v in grid.cell_center(context["goal"]))
        x_hi = _fmt(grid.origin[0] + grid.width_cells * grid.cell_size)
        y_hi = _fmt(grid.origin[1] + grid.height_cells * grid.cell_size)
        text = f"""## Subtask 1: coarse path over the signal heatmap

[attached image: gain heatmap PNG]

The image shows a wireless path-gain map of a {grid.width_cells} x {grid.height_cells} cell area
(cell size {_fmt(grid.cell_size)} m, world x from {_fmt(grid.origin[0])} to {x_hi} m,
y from {_fmt(grid.origin[1])} to {y_hi} m, y grows upward in the image).
Red cells have the weakest normalized gain (near 0.0), blue cells the
strongest (near 1.0). We define forbidden zones (e.g., obstacles in white)
that must be avoided at all times.

<Workflow>
1. Locate the start at ({sx}, {sy}) and the goal at ({gx}, {gy}) in world meters.
2. Trace a coarse route from start to goal that stays out of forbidden
   zones and prefers stronger (bluer) cells, so that the average gain
   along the route can reach at least {threshold}.
3. List the route as world-coordinate waypoints, first waypoint exactly
   the start, last waypoint exactly the goal.
</Workflow>

{_REASONING_BLOCK}

Output schema: a JSON array of [x, y] waypoint pairs in meters, e.g.
```json
[[0.5, 0.5], [1.5, 1.5]]
```"""
        return text, context["image"]

    if stage == 2:
        path_pts = [grid.cell_center(c) for c in context["coarse_path"]]
        n_areas = context["n_areas"]
        radius = _fmt(context["max_distance"])
        text = f"""## Subtask 2: choose focus areas along the coarse route

The coarse route from Subtask 1, as world-coordinate waypoints:
```json
{_points_json(path_pts)}
```

<Workflow>
1. Pick exactly {n_areas} focus-area centers on or near this route,
   covering it from the first to the last waypoint.
2. Each area is a disc of radius {radius} m; neighboring
   discs should overlap so the corridor has no gaps.
</Workflow>

{_REASONING_BLOCK}

Output schema: a JSON array of [x, y] center pairs in meters."""
        return text, None

    if stage == 3:
        area: FocusArea = context["area"]
        rows = []
        for cell in area.cells:
            x, y = grid.cell_center(cell)
            rows.append([round(x, 4), round(y, 4), grid.gain(cell)])
        index_label = f"{context['area_index'] + 1} of {context['n_areas']}"
        threshold = _fmt(context["threshold"])
        ax, ay = (_fmt(v) for v in context["anchor_from"])
        bx, by = (_fmt(v) for v in context["anchor_to"])
        text = f"""## Subtask 3: refine the path inside focus area {index_label}

This area is a disc centered at ({_fmt(area.center[0])}, {_fmt(area.center[1])}) with radius {_fmt(area.radius)} m.
Its traversable cells and their normalized gains ([x, y, gain] per row):
<Data>
{json.dumps(rows)}
</Data>

<Workflow>
1. Continue the path: it currently ends at ({ax}, {ay}); steer it
   toward ({bx}, {by}).
2. Use only cells listed above. Keep consecutive waypoints adjacent
   (8-neighborhood); prefer high-gain cells so the final average gain
   meets the threshold of {threshold}.
</Workflow>

{_REASONING_BLOCK}

Output schema: a JSON array of [x, y] waypoint pairs in meters."""
        return text, None

    raise ValueError(f"unknown subtask stage {stage}")


# -- reply parsing ------------------------------------------------------------

_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def _last_fenced_json(raw: str):
    blocks = _FENCE_RE.findall(raw)
    if not blocks:
        raise ReplyParseError("no fenced JSON block in reply")
    try:
        return json.loads(blocks[-1])
    except json.JSONDecodeError as exc:
        raise ReplyParseError(f"fenced block is not valid JSON: {exc.msg}") from exc


def snap_world_point(grid: GridMap, x: float, y: float) -> Cell | None:
    """Nearest traversable cell center within half a cell diagonal, else None."""
    tol = grid.cell_size * math.sqrt(2.0) / 2.0 + 1e-9
    col = round((x - grid.origin[0]) / grid.cell_size - 0.5)
    row = round((y - grid.origin[1]) / grid.cell_size - 0.5)
    best: Cell | None = None
    best_d = tol
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            cell = Cell(col + dc, row + dr)
            if not grid.is_traversable(cell):
                continue
            cx, cy = grid.cell_center(cell)
            d = math.hypot(cx - x, cy - y)
            if d < best_d:
                best, best_d = cell, d
    return best


def _parse_points(raw: str, grid: GridMap, kind: str) -> list[Cell]:
    data = _last_fenced_json(raw)
    if not isinstance(data, list) or not data:
        raise ReplyParseError(f"expected a non-empty JSON array of {kind}")
    cells: list[Cell] = []
    bad: list[str] = []
    for entry in data:
        if (
            not isinstance(entry, (list, tuple))
            or len(entry) != 2
            or not all(isinstance(v, (int, float)) for v in entry)
        ):
            raise ReplyParseError(f"{kind} entry {entry!r} is not an [x, y] pair")
        cell = snap_world_point(grid, float(entry[0]), float(entry[1]))
        if cell is None:
            bad.append(f"({entry[0]}, {entry[1]})")
        else:
            cells.append(cell)
    if bad:
        raise ReplyParseError(
            f"{len(bad)} {kind} cannot be snapped to a traversable cell: "
            + ", ".join(bad)
        )
    return cells


def parse_waypoint_reply(raw: str, grid: GridMap) -> list[Cell]:
    """Waypoints from the last fenced JSON block, snapped to cell centers."""
    return _parse_points(raw, grid, "waypoints")


def parse_region_reply(raw: str, grid: GridMap) -> list[Cell]:
    """Focus-area center cells from a stage-2 reply."""
    return _parse_points(raw, grid, "centers")


# -- candidate validation ------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    valid: bool
    violations: tuple[str, ...]
    path: tuple[Cell, ...]  # waypoints after gap interpolation
    path_length: float
    avg_gain: float


def _interpolate_gap(a: Cell, b: Cell) -> list[Cell]:
    steps = max(abs(b.col - a.col), abs(b.row - a.row))
    return [
        Cell(
            a.col + round((b.col - a.col) * t / steps),
            a.row + round((b.row - a.row) * t / steps),
        )
        for t in range(1, steps)
    ]


def validate_candidate(grid: GridMap, waypoints: Sequence[Cell], threshold: float) -> Verdict:
    """Check a waypoint list; sparse gaps up to 3 cells are interpolated.

    Violations cover out-of-bounds or obstacle waypoints (including
    interpolated ones), gaps too large to bridge, corner-cutting diagonal
    steps, and a final average gain below the threshold. Interpolated cells
    count toward length and average gain.
    """
    violations: list[str] = []
    cells = [Cell(*c) for c in waypoints]
    if not cells:
        return Verdict(False, ("path is empty",), (), math.inf, 0.0)

    # Collapse exact consecutive duplicates before structural checks.
    deduped = [cells[0]]
    for c in cells[1:]:
        if c != deduped[-1]:
            deduped.append(c)

    for i, c in enumerate(deduped):
        if not grid.in_bounds(c):
            violations.append(f"waypoint {i} at {tuple(c)} is outside the map")
        elif not grid.is_traversable(c):
            violations.append(f"waypoint {i} at {tuple(c)} is inside an obstacle")
    if violations:
        return Verdict(False, tuple(violations), (), math.inf, 0.0)

    full: list[Cell] = [deduped[0]]
    for i, (a, b) in enumerate(zip(deduped, deduped[1:])):
        gap = max(abs(b.col - a.col), abs(b.row - a.row))
        if gap > MAX_INTERPOLATION_GAP:
            violations.append(
                f"gap of {gap} cells between waypoints {i} and {i + 1} "
                f"exceeds {MAX_INTERPOLATION_GAP}"
            )
            full.append(b)
            continue
        inserted = _interpolate_gap(a, b)
        for c in inserted:
            if not grid.is_traversable(c):
                violations.append(
                    f"interpolated cell {tuple(c)} between waypoints {i} "
                    f"and {i + 1} is inside an obstacle"
                )
        full.extend(inserted)
        full.append(b)

    if not violations:
        for a, b in zip(full, full[1:]):
            dc, dr = b.col - a.col, b.row - a.row
            if dc != 0 and dr != 0:
                if not grid.is_traversable(Cell(a.col + dc, a.row)) or not (
                    grid.is_traversable(Cell(a.col, a.row + dr))
                ):
                    violations.append(
                        f"diagonal step {tuple(a)} -> {tuple(b)} cuts an obstacle corner"
                    )

    avg = average_gain(grid, full)
    if avg < threshold - 1e-9:
        violations.append(
            f"average gain {avg:.4f} misses threshold {threshold:.4f} "
            f"by {threshold - avg:.4f}"
        )
    if violations:
        return Verdict(False, tuple(violations), tuple(full), math.inf, avg)
    return Verdict(True, (), tuple(full), path_length(grid, full), avg)


# -- pipeline -----------------------------------------------------------------


def _auto_max_distance(grid: GridMap, coarse: Sequence[Cell], n_areas: int) -> float:
    arc = 0.0
    for a, b in zip(coarse, coarse[1:]):
        xa, ya = grid.cell_center(a)
        xb, yb = grid.cell_center(b)
        arc += math.hypot(xb - xa, yb - ya)
    spacing = arc / max(n_areas - 1, 1)
    return spacing / 2.0 + grid.cell_size * math.sqrt(2.0)


def _call(
    client: ModelClient,
    transcript: ScottTranscript,
    stage: int,
    prompt: str,
    image: bytes | None,
    attempt: int,
    data_ref: str | None = None,
    area_index: int | None = None,
):
    t0 = time.perf_counter()
    try:
        raw = client.complete(prompt, image=image)
    except TransportError as exc:
        transcript.records.append(
            SubtaskRecord(
                stage, attempt, prompt, image is not None, data_ref,
                raw_reply="", parsed=None, verdict=f"transport-error: {exc}",
                duration_s=time.perf_counter() - t0, area_index=area_index,
            )
        )
        exc.transcript = transcript
        raise
    record = SubtaskRecord(
        stage, attempt, prompt, image is not None, data_ref,
        raw_reply=raw, parsed=None, verdict="pending",
        duration_s=time.perf_counter() - t0, area_index=area_index,
    )
    transcript.records.append(record)
    return raw, record


def _attempt_loop(max_retries: int):
    """Yield (attempt, is_last) pairs: one initial try plus max_retries."""
    for attempt in range(max_retries + 1):
        yield attempt, attempt == max_retries


def run_scott(
    grid: GridMap,
    request: PlanRequest,
    config: ScottConfig,
    client: ModelClient,
    mask_cache: MaskCache | None = None,
) -> tuple[PlanResult, ScottTranscript]:
    """Run the full three-subtask pipeline and validate the result.

    Raises SubtaskError when a stage's replies stay unusable through the
    retry budget, TransportError when the client fails, and PipelineError
    when the assembled path fails validation. All of these carry the
    transcript; PipelineError also carries the failed candidate.
    """
    threshold = config.threshold if config.threshold is not None else request.threshold
    transcript = ScottTranscript(config=config)
    t_start = time.perf_counter()
    start, goal = request.start, request.goal

    # ---- Subtask 1: coarse path off the rendered heatmap
    image = png_bytes(render_heatmap(grid))
    ctx1 = {"grid": grid, "start": start, "goal": goal, "threshold": threshold,
            "image": image}
    prompt1, attach1 = render_subtask_prompt(1, ctx1)
    coarse: list[Cell] | None = None
    failure = ""
    for attempt, is_last in _attempt_loop(config.max_retries_per_subtask):
        prompt = prompt1 if attempt == 0 else f"{prompt1}\n\nPrevious attempt rejected: {failure}"
        raw, record = _call(client, transcript, 1, prompt, attach1, attempt,
                            data_ref="heatmap.png")
        try:
            cells = parse_waypoint_reply(raw, grid)
            if cells[0] != start:
                raise ReplyParseError(
                    f"coarse path must start at the start cell {tuple(start)}"
                )
            if cells[-1] != goal:
                raise ReplyParseError(
                    f"coarse path must end at the goal cell {tuple(goal)}"
                )
        except ReplyParseError as exc:
            failure = str(exc)
            record.verdict = f"rejected: {failure}"
            if is_last:
                raise SubtaskError(
                    f"subtask 1 failed after {attempt + 1} attempts: {failure}",
                    stage=1,
                    transcript=transcript,
                )
            continue
        record.parsed = [[c.col, c.row] for c in cells]
        record.verdict = "ok"
        coarse = cells
        break

    max_distance = config.max_distance
    if max_distance is None:
        max_distance = _auto_max_distance(grid, coarse, config.n_areas)
        transcript.note(f"auto max_distance = {max_distance:.3f} m")

    # ---- Subtask 2: focus areas (cached per map/start/goal/threshold)
    def build_mask() -> FocusAreaSet:
        ctx2 = {"grid": grid, "coarse_path": coarse, "n_areas": config.n_areas,
                "max_distance": max_distance}
        prompt2, _ = render_subtask_prompt(2, ctx2)
        failure2 = ""
        for attempt, is_last in _attempt_loop(config.max_retries_per_subtask):
            prompt = prompt2 if attempt == 0 else f"{prompt2}\n\nPrevious attempt rejected: {failure2}"
            raw, record = _call(client, transcript, 2, prompt, None, attempt)
            try:
                centers = parse_region_reply(raw, grid)
            except ReplyParseError as exc:
                failure2 = str(exc)
                record.verdict = f"rejected: {failure2}"
                if is_last:
                    transcript.note(
                        "subtask 2 replies unusable; falling back to "
                        "arc-length sampled focus areas"
                    )
                    return build_focus_areas(
                        grid, coarse, config.n_areas, max_distance,
                        source="auto-generated",
                    )
                continue
            record.parsed = [[c.col, c.row] for c in centers]
            record.verdict = "ok"
            areas = tuple(
                FocusArea.from_cells(
                    grid,
                    grid.cell_center(c),
                    max_distance,
                    [cell for cell, _ in grid.slice_region(grid.cell_center(c), max_distance)],
                )
                for c in centers
            )
            return FocusAreaSet(areas, source="model-proposed")
        raise AssertionError("unreachable")

    if mask_cache is not None:
        before = len(transcript.records)
        mask = mask_cache.get_or_build(grid, start, goal, threshold, build_mask)
        if len(transcript.records) == before:
            transcript.note("focus-area mask served from cache; subtask 2 skipped")
    else:
        mask = build_mask()

    # The masked planner needs both endpoints inside the mask; patch the
    # mask with endpoint discs when a model-proposed set missed them. The
    # start disc goes first and the goal disc last so stitching order holds.
    union = mask.member_cells()

    def endpoint_area(cell: Cell) -> FocusArea:
        center = grid.cell_center(cell)
        return FocusArea.from_cells(
            grid, center, max_distance,
            [c for c, _ in grid.slice_region(center, max_distance)],
        )

    prefix: tuple[FocusArea, ...] = ()
    suffix: tuple[FocusArea, ...] = ()
    if start not in union:
        prefix = (endpoint_area(start),)
        transcript.note("mask did not cover the start; prepended an area around it")
    if goal not in union:
        suffix = (endpoint_area(goal),)
        transcript.note("mask did not cover the goal; appended an area around it")
    if prefix or suffix:
        mask = FocusAreaSet(prefix + mask.areas + suffix, source=mask.source,
                            key=mask.key)

    # ---- Subtask 3: per-area refinement, stitched in area order
    stitched: list[Cell] = []
    n = len(mask.areas)
    for idx, area in enumerate(mask.areas):
        anchor_from = grid.cell_center(stitched[-1]) if stitched else grid.cell_center(start)
        anchor_to = grid.cell_center(goal) if idx == n - 1 else mask.areas[idx + 1].center
        ctx3 = {
            "grid": grid, "area": area, "area_index": idx, "n_areas": n,
            "threshold": threshold, "anchor_from": anchor_from, "anchor_to": anchor_to,
        }
        prompt3, _ = render_subtask_prompt(3, ctx3)
        member_set = set(area.cells)
        failure3 = ""
        segment: list[Cell] | None = None
        for attempt, is_last in _attempt_loop(config.max_retries_per_subtask):
            prompt = prompt3 if attempt == 0 else f"{prompt3}\n\nPrevious attempt rejected: {failure3}"
            raw, record = _call(client, transcript, 3, prompt, None, attempt,
                                data_ref=f"area-{idx}-slice", area_index=idx)
            try:
                cells = parse_waypoint_reply(raw, grid)
                outside = [c for c in cells if c not in member_set]
                if outside:
                    raise ReplyParseError(
                        f"{len(outside)} waypoints outside focus area {idx + 1}, "
                        f"first: {tuple(outside[0])}"
                    )
                if idx == 0 and cells[0] != start:
                    raise ReplyParseError(
                        f"first segment must begin at the start cell {tuple(start)}"
                    )
                if idx == n - 1 and cells[-1] != goal:
                    raise ReplyParseError(
                        f"last segment must end at the goal cell {tuple(goal)}"
                    )
            except ReplyParseError as exc:
                failure3 = str(exc)
                record.verdict = f"rejected: {failure3}"
                if is_last:
                    raise PipelineError(
                        f"focus area {idx + 1} refinement failed after "
                        f"{attempt + 1} attempts: {failure3}",
                        candidate=stitched,
                        transcript=transcript,
                    )
                continue
            record.parsed = [[c.col, c.row] for c in cells]
            record.verdict = "ok"
            segment = cells
            break
        for cell in segment:
            if not stitched or cell != stitched[-1]:
                stitched.append(cell)

    # ---- final validation
    verdict = validate_candidate(grid, stitched, threshold)
    runtime = time.perf_counter() - t_start
    if not verdict.valid:
        transcript.note("final candidate failed validation: "
                        + "; ".join(verdict.violations))
        raise PipelineError(
            "assembled path failed validation: " + "; ".join(verdict.violations),
            candidate=stitched,
            transcript=transcript,
        )
    result = PlanResult(
        algorithm="scott",
        waypoints=verdict.path,
        path_length=verdict.path_length,
        avg_gain=verdict.avg_gain,
        runtime=runtime,
        feasible=True,
        expanded_states=0,
    )
    transcript.final_result = result
    return result, transcript


# -- scripted-run helper -------------------------------------------------------


def make_mock_script(
    grid: GridMap,
    request: PlanRequest,
    config: ScottConfig,
    horizon: int | None = None,
) -> dict:
    """Script a MockClient so the pipeline reproduces the DP-WA* optimum.

    The coarse path is the DP-WA* path itself; focus-area centers are its
    arc-length samples; each area's refinement reply is the matching path
    chunk (split at arc midpoints, one-waypoint overlap at the seams), so
    the stitched result equals the DP-WA* path exactly.
    """
    res = plan_dpwa(grid, request, horizon=horizon)
    if not res.found:
        raise ValueError("cannot script a mock run for an infeasible instance")
    path = list(res.waypoints)
    pts = [grid.cell_center(c) for c in path]

    def reply(points, prose):
        return f"{prose}\n```json\n{_points_json(points)}\n```"

    script = {
        "1:0": reply(
            pts,
            "The strongest cells form a corridor between the endpoints; "
            "I follow it and detour only where obstacles force it.",
        )
    }

    n = min(config.n_areas, len(path))
    pos = [0.0]
    for a, b in zip(pts, pts[1:]):
        pos.append(pos[-1] + math.hypot(b[0] - a[0], b[1] - a[1]))
    total = pos[-1]
    if n == 1:
        center_idx = [0]
    else:
        targets = [total * i / (n - 1) for i in range(n)]
        center_idx = [
            min(range(len(path)), key=lambda i: (abs(pos[i] - t), i)) for t in targets
        ]
    script["2:0"] = reply(
        [pts[i] for i in center_idx],
        "I spread the areas evenly along the route so neighboring discs overlap.",
    )

    # Segment boundaries at arc midpoints between consecutive centers.
    bounds = [0]
    for a, b in zip(center_idx, center_idx[1:]):
        mid = (pos[a] + pos[b]) / 2.0
        bounds.append(min(range(len(path)), key=lambda i: (abs(pos[i] - mid), i)))
    bounds.append(len(path) - 1)
    for k in range(n):
        lo, hi = bounds[k], bounds[k + 1]
        chunk = pts[lo : hi + 1]
        script[f"3:{k}"] = reply(
            chunk, f"Within area {k + 1} I keep to the listed high-gain cells."
        )
    return script
