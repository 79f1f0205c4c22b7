"""Grid planners sharing one movement model: classic A* and a naive
gain-biased variant.

Movement is 8-connected; straight steps cost one cell size, diagonal steps
sqrt(2) times that, and diagonals may not cut corners past obstacles. The
gain-biased planner adds the inverse path gain of the entered cell to each
step cost, which pulls routes toward good coverage without enforcing any
average-gain threshold.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from heapq import heappop, heappush
from typing import Callable, Iterator

from .grid import Cell, GridMap

SQRT2 = math.sqrt(2.0)

# (dcol, drow) per compass direction, in fixed priority order.
COMPASS_MOVES = (
    (0, 1),  # N
    (1, 1),  # NE
    (1, 0),  # E
    (1, -1),  # SE
    (0, -1),  # S
    (-1, -1),  # SW
    (-1, 0),  # W
    (-1, 1),  # NW
)


class PlanInputError(ValueError):
    """Start/goal/threshold arguments violate a planner precondition."""


@dataclass(frozen=True)
class PlanRequest:
    """Start, goal, average-gain threshold, and division-guard epsilon.

    The threshold is ignored by plain A*, advisory for the gain-biased
    planner (it only sets the ``feasible`` flag), and enforced by the
    dynamic-programming planner.
    """

    start: Cell
    goal: Cell
    threshold: float = 0.0
    epsilon: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "start", Cell(*self.start))
        object.__setattr__(self, "goal", Cell(*self.goal))
        if not 0.0 <= self.threshold <= 1.0:
            raise PlanInputError(f"threshold {self.threshold} outside [0, 1]")
        if self.epsilon <= 0:
            raise PlanInputError("epsilon must be positive")


@dataclass(frozen=True)
class PlanResult:
    algorithm: str
    waypoints: tuple[Cell, ...]
    path_length: float
    avg_gain: float
    runtime: float
    feasible: bool
    expanded_states: int
    horizon: int | None = None
    pruned_states: int | None = None
    # On an infeasible constrained plan: the best average gain any path
    # within the horizon could have reached, for actionable error output.
    best_achievable_gain: float | None = None

    @property
    def found(self) -> bool:
        return len(self.waypoints) > 0

    def to_json_dict(self) -> dict:
        def num(v):
            return v if math.isfinite(v) else None

        out = {
            "algorithm": self.algorithm,
            "waypoints": [[c.col, c.row] for c in self.waypoints],
            "path_length_m": num(self.path_length) if self.found else None,
            "avg_gain": num(self.avg_gain) if self.found else None,
            "runtime_s": self.runtime,
            "feasible": self.feasible,
            "expanded_states": self.expanded_states,
        }
        if self.horizon is not None:
            out["horizon"] = self.horizon
        if self.pruned_states is not None:
            out["pruned_states"] = self.pruned_states
        if self.best_achievable_gain is not None:
            out["best_achievable_gain"] = self.best_achievable_gain
        return out


def neighbors(grid: GridMap, cell: Cell) -> Iterator[tuple[Cell, float]]:
    """Reachable 8-neighbors with step costs, in compass order.

    Diagonal moves require both adjacent orthogonal cells to be free so a
    path can never slip between two diagonally touching obstacles.
    """
    for dc, dr in COMPASS_MOVES:
        nxt = Cell(cell.col + dc, cell.row + dr)
        if not grid.is_traversable(nxt):
            continue
        if dc != 0 and dr != 0:
            if not grid.is_traversable(Cell(cell.col + dc, cell.row)):
                continue
            if not grid.is_traversable(Cell(cell.col, cell.row + dr)):
                continue
            yield nxt, SQRT2 * grid.cell_size
        else:
            yield nxt, grid.cell_size


def path_length(grid: GridMap, waypoints) -> float:
    """Sum of per-step Euclidean distances along an 8-connected path."""
    total = 0.0
    for a, b in zip(waypoints, waypoints[1:]):
        dc, dr = abs(b.col - a.col), abs(b.row - a.row)
        if max(dc, dr) != 1:
            raise ValueError(f"waypoints {a} -> {b} are not 8-neighbors")
        total += (SQRT2 if dc and dr else 1.0) * grid.cell_size
    return total


def average_gain(grid: GridMap, waypoints) -> float:
    """Mean gain over all waypoints, start and goal included; repeats count."""
    if not waypoints:
        return 0.0
    return sum(grid.gain(c) for c in waypoints) / len(waypoints)


def _check_endpoints(grid: GridMap, request: PlanRequest) -> None:
    for name, cell in (("start", request.start), ("goal", request.goal)):
        if not grid.in_bounds(cell):
            raise PlanInputError(f"{name} {tuple(cell)} outside map bounds")
        if not grid.is_traversable(cell):
            raise PlanInputError(f"{name} {tuple(cell)} is an obstacle cell")
    if request.start == request.goal:
        raise PlanInputError("start and goal must differ")


def _best_first(
    grid: GridMap,
    request: PlanRequest,
    edge_cost: Callable[[Cell, float], float],
    algorithm: str,
) -> PlanResult:
    """A* skeleton over the shared movement model.

    ``edge_cost(entered_cell, step_cost)`` returns the full cost of one move;
    the Euclidean distance-to-goal heuristic stays admissible for any edge
    cost that is at least the step distance. Ties on f are broken toward
    larger accumulated cost, then lowest row-major cell index, so runs are
    reproducible across platforms.
    """
    _check_endpoints(grid, request)
    t0 = time.perf_counter()
    start, goal = request.start, request.goal
    gx, gy = goal

    def heuristic(cell: Cell) -> float:
        return math.hypot(cell.col - gx, cell.row - gy) * grid.cell_size

    def rm_index(cell: Cell) -> int:
        return cell.row * grid.width_cells + cell.col

    best_g: dict[Cell, float] = {start: 0.0}
    came_from: dict[Cell, Cell] = {}
    open_heap: list[tuple[float, float, int, Cell]] = []
    heappush(open_heap, (heuristic(start), 0.0, rm_index(start), start))
    closed: set[Cell] = set()
    expanded = 0

    goal_reached = False
    while open_heap:
        f, neg_g, _, current = heappop(open_heap)
        if current in closed:
            continue
        closed.add(current)
        expanded += 1
        if current == goal:
            goal_reached = True
            break
        g_here = -neg_g
        for nxt, step in neighbors(grid, current):
            if nxt in closed:
                continue
            tentative = g_here + edge_cost(nxt, step)
            if tentative < best_g.get(nxt, math.inf):
                best_g[nxt] = tentative
                came_from[nxt] = current
                heappush(
                    open_heap,
                    (tentative + heuristic(nxt), -tentative, rm_index(nxt), nxt),
                )

    runtime = time.perf_counter() - t0
    if not goal_reached:
        return PlanResult(algorithm, (), math.inf, 0.0, runtime, False, expanded)

    path = [goal]
    while path[-1] != start:
        path.append(came_from[path[-1]])
    path.reverse()
    waypoints = tuple(path)
    length = path_length(grid, waypoints)
    avg = average_gain(grid, waypoints)
    return PlanResult(
        algorithm,
        waypoints,
        length,
        avg,
        runtime,
        avg >= request.threshold - 1e-9,
        expanded,
    )


def plan_astar(grid: GridMap, request: PlanRequest) -> PlanResult:
    """Shortest 8-connected path by Euclidean length; gain is reported only."""
    return _best_first(grid, request, lambda _cell, step: step, "astar")


def plan_nwa(grid: GridMap, request: PlanRequest) -> PlanResult:
    """Minimize distance plus the inverse gain of each entered cell.

    Optimal for that combined objective (the start cell contributes its gain
    to the reported average but no movement cost). The threshold is not
    enforced; the result's ``feasible`` flag records whether it was met.
    """
    eps = request.epsilon

    def cost(entered: Cell, step: float) -> float:
        return step + 1.0 / (grid.gain(entered) + eps)

    return _best_first(grid, request, cost, "nwa")


def nwa_path_cost(grid: GridMap, waypoints, epsilon: float = 1e-6) -> float:
    """Accumulated cost of a path under the gain-biased objective."""
    total = 0.0
    for a, b in zip(waypoints, waypoints[1:]):
        dc, dr = abs(b.col - a.col), abs(b.row - a.row)
        step = (SQRT2 if dc and dr else 1.0) * grid.cell_size
        total += step + 1.0 / (grid.gain(b) + epsilon)
    return total
