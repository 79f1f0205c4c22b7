"""Optimal coverage-constrained planner via backward dynamic programming.

States are (cell, step k, accumulated gain). Because gains are quantized to
0.1 at ingestion, the accumulated gain is tracked exactly as an integer
count of tenths, so the table is lossless: the planner returns the true
minimum-distance path whose average gain over all visited waypoints meets
the threshold, or reports infeasibility.

Key semantics:

* Paths may terminate at the goal at any step k <= horizon provided the
  running average meets the threshold; the horizon is an upper bound, not
  an exact path length.
* Cells may be revisited within the horizon; every visit contributes its
  gain to the accumulated total (loitering near an access point can lift
  the average at a distance cost, and sometimes that is the optimum).
* A state whose accumulated gain is so low that even earning the maximum
  gain of 1.0 on every remaining step cannot reach the threshold is
  pruned. Pruning only skips work: such states have infinite cost-to-go
  anyway, so the returned path never changes.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .grid import Cell, GridMap
from .planners import (
    COMPASS_MOVES,
    PlanInputError,
    PlanRequest,
    PlanResult,
    SQRT2,
    _check_endpoints,
    average_gain,
    path_length,
)

if TYPE_CHECKING:
    from .focus import FocusAreaSet

TERMINATE = 8
NO_ACTION = -1

_FEAS_TOL = 1e-9


def state_count(grid: GridMap, horizon: int) -> int:
    """Capacity of the DP table: cells x time layers x gain levels."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    levels = 10 * (horizon + 1) + 1
    return grid.traversable_count * (horizon + 1) * levels


@dataclass
class DpTable:
    """Solved value table plus per-layer policies for path reconstruction."""

    grid: GridMap
    horizon: int
    threshold: float
    cells: tuple[Cell, ...]
    cell_index: dict[Cell, int]
    unit_gains: np.ndarray  # per active cell, gain in integer tenths
    start_index: int
    goal_index: int
    windows: list[tuple[int, int]]  # admitted [lo, hi] gain-unit range per layer
    policies: list[np.ndarray]  # per layer k < horizon: int8 (cells, w_max+1)
    first_values: np.ndarray  # layer-0 value array
    values: list[np.ndarray] | None  # all layers, only when keep_values=True
    expanded_states: int
    pruned_states: int

    @property
    def w_max(self) -> int:
        return 10 * (self.horizon + 1)

    @property
    def start_units(self) -> int:
        return int(self.unit_gains[self.start_index])

    def optimal_cost(self) -> float:
        return float(self.first_values[self.start_index, self.start_units])

    def reconstruct(self) -> tuple[Cell, ...] | None:
        """Follow stored actions from the start state; None when infeasible."""
        if not math.isfinite(self.optimal_cost()):
            return None
        i, w, k = self.start_index, self.start_units, 0
        path = [self.cells[i]]
        while True:
            if k == self.horizon:
                break  # layer-T states with finite value terminate by construction
            action = int(self.policies[k][i, w])
            if action == TERMINATE:
                break
            if action == NO_ACTION:
                raise RuntimeError("policy missing for a finite-value state")
            dc, dr = COMPASS_MOVES[action]
            cell = Cell(path[-1].col + dc, path[-1].row + dr)
            i = self.cell_index[cell]
            w += int(self.unit_gains[i])
            k += 1
            path.append(cell)
        return tuple(path)


def _active_cells(grid: GridMap, allowed) -> list[Cell]:
    if allowed is None:
        return list(grid.traversable_cells())
    allowed = set(Cell(*c) for c in allowed)
    return [c for c in grid.traversable_cells() if c in allowed]


def _transition_arrays(grid: GridMap, cells: Iterable[Cell], index: dict[Cell, int]):
    """Per-action arrays of successor cell indices (-1 = invalid move)."""
    cells = list(cells)
    n = len(cells)
    to = np.full((8, n), -1, dtype=np.int64)
    for a, (dc, dr) in enumerate(COMPASS_MOVES):
        for i, c in enumerate(cells):
            nxt = Cell(c.col + dc, c.row + dr)
            j = index.get(nxt)
            if j is None:
                continue
            if dc != 0 and dr != 0:
                # Corner rule is physical: the two orthogonal cells must be
                # obstacle-free even if the search space excludes them.
                if not grid.is_traversable(Cell(c.col + dc, c.row)):
                    continue
                if not grid.is_traversable(Cell(c.col, c.row + dr)):
                    continue
            to[a, i] = j
    return to


def solve_table(
    grid: GridMap,
    request: PlanRequest,
    horizon: int,
    prune: bool = True,
    keep_values: bool = False,
    allowed: Iterable[Cell] | None = None,
) -> DpTable:
    """Run the backward sweep and return the solved table."""
    if horizon < 1:
        raise PlanInputError("horizon must be at least 1")
    cells = _active_cells(grid, allowed)
    index = {c: i for i, c in enumerate(cells)}
    if request.start not in index:
        raise PlanInputError(f"start {tuple(request.start)} not in the search space")
    if request.goal not in index:
        raise PlanInputError(f"goal {tuple(request.goal)} not in the search space")

    n = len(cells)
    T = horizon
    G = request.threshold
    w_max = 10 * (T + 1)
    units = np.round(np.array([grid.gain(c) for c in cells]) * 10.0).astype(np.int64)
    to = _transition_arrays(grid, cells, index)
    step_costs = [
        (SQRT2 if dc and dr else 1.0) * grid.cell_size for dc, dr in COMPASS_MOVES
    ]
    w_axis = np.arange(w_max + 1)
    goal_i = index[request.goal]

    def window(k: int) -> tuple[int, int]:
        hi = min(10 * (k + 1), w_max)
        if prune:
            lo = max(0, math.ceil(10 * (T + 1) * G - 10 * (T - k) - 1e-6))
        else:
            lo = 0
        return lo, min(hi, w_max)

    def terminate_legal(k: int) -> np.ndarray:
        # Average gain over the k+1 waypoints visited so far meets G.
        return w_axis / (10.0 * (k + 1)) >= G - _FEAS_TOL

    windows = [window(k) for k in range(T + 1)]

    # Boundary layer: only feasible goal states cost nothing.
    v_next = np.full((n, w_max + 1), np.inf)
    v_next[goal_i, terminate_legal(T)] = 0.0
    lo, hi = windows[T]
    v_next[:, :lo] = np.inf
    v_next[:, hi + 1 :] = np.inf

    all_values = [v_next] if keep_values else None
    policies: list[np.ndarray] = [None] * T  # filled back to front
    expanded = 0
    pruned = 0

    shifted = np.empty_like(v_next)
    for k in range(T - 1, -1, -1):
        # shifted[i, w] = V_{k+1}[i, w + units[i]]: value after entering cell i.
        shifted.fill(np.inf)
        for s in range(11):
            rows = np.flatnonzero(units == s)
            if rows.size == 0:
                continue
            if s == 0:
                shifted[rows] = v_next[rows]
            else:
                shifted[rows, : w_max + 1 - s] = v_next[rows, s:]

        v_k = np.full((n, w_max + 1), np.inf)
        p_k = np.full((n, w_max + 1), NO_ACTION, dtype=np.int8)
        for a in range(8):
            valid = to[a] >= 0
            if not valid.any():
                continue
            cand = np.full((n, w_max + 1), np.inf)
            cand[valid] = step_costs[a] + shifted[to[a, valid]]
            better = cand < v_k  # strict: earlier compass actions win ties
            v_k[better] = cand[better]
            p_k[better] = a
        legal = terminate_legal(k)
        v_k[goal_i, legal] = 0.0
        p_k[goal_i, legal] = TERMINATE

        lo, hi = windows[k]
        v_k[:, hi + 1 :] = np.inf
        p_k[:, hi + 1 :] = NO_ACTION
        if lo > 0:
            v_k[:, :lo] = np.inf
            p_k[:, :lo] = NO_ACTION
        expanded += n * (hi - lo + 1)
        pruned += n * lo

        policies[k] = p_k
        if keep_values:
            all_values.insert(0, v_k)
        v_next = v_k

    return DpTable(
        grid=grid,
        horizon=T,
        threshold=G,
        cells=tuple(cells),
        cell_index=index,
        unit_gains=units,
        start_index=index[request.start],
        goal_index=goal_i,
        windows=windows,
        policies=policies,
        first_values=v_next,
        values=all_values,
        expanded_states=expanded,
        pruned_states=pruned,
    )


def max_achievable_avg_gain(
    grid: GridMap,
    request: PlanRequest,
    horizon: int,
    allowed: Iterable[Cell] | None = None,
) -> float:
    """Best average gain of any start->goal path within the horizon.

    Forward sweep maximizing accumulated gain per (cell, step); used to
    report how close an infeasible instance comes to its threshold.
    """
    cells = _active_cells(grid, allowed)
    index = {c: i for i, c in enumerate(cells)}
    if request.start not in index or request.goal not in index:
        return 0.0
    n = len(cells)
    units = np.round(np.array([grid.gain(c) for c in cells]) * 10.0).astype(np.int64)
    to = _transition_arrays(grid, cells, index)
    goal_i = index[request.goal]

    best = -np.ones(n, dtype=np.int64)  # -1 = unreachable
    best[index[request.start]] = units[index[request.start]]
    best_avg = 0.0
    for k in range(1, horizon + 1):
        nxt = -np.ones(n, dtype=np.int64)
        for a in range(8):
            valid = (to[a] >= 0) & (best >= 0)
            if not valid.any():
                continue
            dest = to[a, valid]
            np.maximum.at(nxt, dest, best[valid] + units[dest])
        best = nxt
        if best[goal_i] >= 0:
            best_avg = max(best_avg, best[goal_i] / (10.0 * (k + 1)))
    return best_avg


def _auto_horizon(request: PlanRequest, cap: int) -> int:
    dist = math.hypot(
        request.goal.col - request.start.col, request.goal.row - request.start.row
    )
    return max(1, min(math.ceil(2.0 * dist), cap))


def _plan(
    grid: GridMap,
    request: PlanRequest,
    horizon: int | None,
    prune: bool,
    allowed: Iterable[Cell] | None,
    algorithm: str,
) -> PlanResult:
    _check_endpoints(grid, request)
    t0 = time.perf_counter()
    cap = len(_active_cells(grid, allowed))
    auto = horizon is None
    T = _auto_horizon(request, cap) if auto else horizon

    expanded = 0
    pruned = 0
    while True:
        table = solve_table(grid, request, T, prune=prune, allowed=allowed)
        expanded += table.expanded_states
        pruned += table.pruned_states
        path = table.reconstruct()
        if path is not None or not auto or T >= cap:
            break
        T = min(2 * T, cap)  # widen the horizon and retry before giving up
    runtime = time.perf_counter() - t0

    if path is None:
        best = max_achievable_avg_gain(grid, request, T, allowed=allowed)
        return PlanResult(
            algorithm,
            (),
            math.inf,
            0.0,
            runtime,
            False,
            expanded,
            horizon=T,
            pruned_states=pruned,
            best_achievable_gain=best,
        )

    avg = average_gain(grid, path)
    return PlanResult(
        algorithm,
        path,
        path_length(grid, path),
        avg,
        runtime,
        avg >= request.threshold - _FEAS_TOL,
        expanded,
        horizon=T,
        pruned_states=pruned,
    )


def plan_dpwa(
    grid: GridMap,
    request: PlanRequest,
    horizon: int | None = None,
    prune: bool = True,
) -> PlanResult:
    """Shortest path whose average gain meets the request threshold.

    With ``horizon=None`` the step budget starts at twice the straight-line
    cell distance and doubles on infeasibility, capped by the traversable
    cell count; pass an explicit horizon to pin it.
    """
    return _plan(grid, request, horizon, prune, None, "dpwa")


def plan_dpwa_masked(
    grid: GridMap,
    request: PlanRequest,
    mask: "FocusAreaSet | Iterable[Cell]",
    horizon: int | None = None,
    prune: bool = True,
) -> PlanResult:
    """plan_dpwa restricted to the cells of a focus-area mask."""
    member_cells = getattr(mask, "member_cells", None)
    cells = set(member_cells()) if callable(member_cells) else set(Cell(*c) for c in mask)
    if not cells:
        raise PlanInputError("mask is empty")
    for name, cell in (("start", request.start), ("goal", request.goal)):
        if Cell(*cell) not in cells:
            raise PlanInputError(f"{name} {tuple(cell)} lies outside the mask")
    return _plan(grid, request, horizon, prune, cells, "dpwa_masked")
