"""Coverage-aware path planning on gain-annotated occupancy grids.

The package splits into the data model (grid, heatmap), the planners
(planners for A* and N-WA*, dpwa for the optimal constrained planner,
focus for search-space masks), the model-orchestration pipeline (scott),
and the benchmark harness (bench, cli).
"""

from .grid import (
    GAIN_STEP,
    Cell,
    GridMap,
    RadioMapError,
    SynthMapSpec,
    export_radio_map,
    ingest_radio_map,
    load_radio_map,
    quantize_gain,
    random_map,
    save_radio_map,
    synthesize_map,
)
from .heatmap import (
    BAND_NAMES,
    PathOverlay,
    classify_cell,
    gain_band,
    load_png,
    png_bytes,
    render_heatmap,
    save_png,
)
from .planners import (
    COMPASS_MOVES,
    PlanInputError,
    PlanRequest,
    PlanResult,
    average_gain,
    neighbors,
    nwa_path_cost,
    path_length,
    plan_astar,
    plan_nwa,
)
from .dpwa import (
    DpTable,
    max_achievable_avg_gain,
    plan_dpwa,
    plan_dpwa_masked,
    solve_table,
    state_count,
)
from .focus import (
    FocusArea,
    FocusAreaSet,
    KdTree,
    MaskCache,
    MaskFormatError,
    build_focus_areas,
    cache_key,
    deserialize_mask,
    map_hash,
    mask_stats,
    serialize_mask,
)
from .scott import (
    HttpChatClient,
    MockClient,
    PipelineError,
    ReplyParseError,
    ScottConfig,
    ScottError,
    ScottTranscript,
    SubtaskError,
    TransportError,
    make_mock_script,
    parse_region_reply,
    parse_waypoint_reply,
    render_subtask_prompt,
    run_scott,
    snap_world_point,
    validate_candidate,
)
from .bench import (
    ALGORITHMS,
    DISPLAY_NAMES,
    MetricsRow,
    RunRecord,
    Scenario,
    ScenarioError,
    ScenarioReport,
    emit_figure,
    emit_table,
    load_scenario,
    run_scenario,
    write_report,
)

__version__ = "0.1.0"
