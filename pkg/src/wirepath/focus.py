"""Focus areas: circular regions along a coarse path, indexed by kd-trees.

A focus-area set is the search-space mask used by the refinement stages:
the union of N discs of radius ``max_distance`` centered on waypoints
sampled at uniform arc length along a coarse path. Masks serialize to JSON
and are cached per (map content, start, goal, threshold) so repeated
queries on the same instance skip the rebuild.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .grid import Cell, GridMap, export_radio_map

MASK_VERSION = 1


class MaskFormatError(ValueError):
    """Serialized mask is malformed or has an unsupported version."""


# -- kd-tree ---------------------------------------------------------------


class _KdNode:
    __slots__ = ("point", "payload", "axis", "left", "right")

    def __init__(self, point, payload, axis, left, right):
        self.point = point
        self.payload = payload
        self.axis = axis
        self.left = left
        self.right = right


class KdTree:
    """Static 2-D kd-tree with median splits (balanced, no updates).

    Payloads are arbitrary objects attached to points; queries return them.
    """

    def __init__(self, points: Sequence[tuple[float, float]], payloads=None):
        if payloads is None:
            payloads = list(range(len(points)))
        if len(points) != len(payloads):
            raise ValueError("points and payloads must have equal length")
        items = list(zip([tuple(map(float, p)) for p in points], payloads))
        self._size = len(items)
        self._root = self._build(items, 0)

    def __len__(self) -> int:
        return self._size

    @classmethod
    def _build(cls, items, depth):
        if not items:
            return None
        axis = depth % 2
        items.sort(key=lambda it: it[0][axis])
        mid = len(items) // 2
        point, payload = items[mid]
        return _KdNode(
            point,
            payload,
            axis,
            cls._build(items[:mid], depth + 1),
            cls._build(items[mid + 1 :], depth + 1),
        )

    def nearest(self, point: tuple[float, float]):
        """(payload, distance) of the closest stored point; None when empty."""
        if self._root is None:
            return None
        px, py = float(point[0]), float(point[1])
        best = [None, math.inf]

        def visit(node):
            if node is None:
                return
            d = math.hypot(node.point[0] - px, node.point[1] - py)
            if d < best[1]:
                best[0], best[1] = node.payload, d
            delta = (px, py)[node.axis] - node.point[node.axis]
            near, far = (node.left, node.right) if delta < 0 else (node.right, node.left)
            visit(near)
            if abs(delta) <= best[1]:
                visit(far)

        visit(self._root)
        return best[0], best[1]

    def within_radius(self, point: tuple[float, float], radius: float) -> list:
        """Payloads of all stored points within radius (inclusive) of point."""
        if radius < 0:
            raise ValueError("radius must be non-negative")
        px, py = float(point[0]), float(point[1])
        out = []

        def visit(node):
            if node is None:
                return
            if math.hypot(node.point[0] - px, node.point[1] - py) <= radius:
                out.append(node.payload)
            delta = (px, py)[node.axis] - node.point[node.axis]
            near, far = (node.left, node.right) if delta < 0 else (node.right, node.left)
            visit(near)
            if abs(delta) <= radius:
                visit(far)

        visit(self._root)
        return out


# -- focus areas -----------------------------------------------------------


@dataclass(frozen=True)
class FocusArea:
    """One disc of the mask: world center, radius, member cells, their index."""

    center: tuple[float, float]
    radius: float
    cells: tuple[Cell, ...]
    tree: KdTree = field(repr=False, compare=False)

    @classmethod
    def from_cells(cls, grid: GridMap, center, radius, cells) -> "FocusArea":
        cells = tuple(Cell(*c) for c in cells)
        tree = KdTree([grid.cell_center(c) for c in cells], list(cells))
        return cls(tuple(map(float, center)), float(radius), cells, tree)


@dataclass(frozen=True)
class FocusAreaSet:
    areas: tuple[FocusArea, ...]
    source: str = "auto-generated"  # or "model-proposed"
    key: dict | None = None

    def __post_init__(self):
        if not self.areas:
            raise ValueError("a focus-area set needs at least one area")
        if self.source not in ("auto-generated", "model-proposed"):
            raise ValueError(f"unknown focus-area source {self.source!r}")

    def __len__(self) -> int:
        return len(self.areas)

    def member_cells(self) -> set[Cell]:
        out: set[Cell] = set()
        for area in self.areas:
            out.update(area.cells)
        return out

    def with_key(self, key: dict) -> "FocusAreaSet":
        return FocusAreaSet(self.areas, self.source, dict(key))


def _arc_positions(grid: GridMap, path: Sequence[Cell]) -> list[float]:
    pos = [0.0]
    for a, b in zip(path, path[1:]):
        xa, ya = grid.cell_center(a)
        xb, yb = grid.cell_center(b)
        pos.append(pos[-1] + math.hypot(xb - xa, yb - ya))
    return pos


def _mask_connected(grid: GridMap, cells: set[Cell]) -> bool:
    if not cells:
        return True
    start = next(iter(sorted(cells)))
    seen = {start}
    stack = [start]
    while stack:
        cur = stack.pop()
        for dc in (-1, 0, 1):
            for dr in (-1, 0, 1):
                if dc == 0 and dr == 0:
                    continue
                nxt = Cell(cur.col + dc, cur.row + dr)
                if nxt in seen or nxt not in cells:
                    continue
                if dc != 0 and dr != 0:
                    # Diagonal hops stay subject to the corner-cut rule.
                    if not grid.is_traversable(Cell(cur.col + dc, cur.row)):
                        continue
                    if not grid.is_traversable(Cell(cur.col, cur.row + dr)):
                        continue
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == len(cells)


def build_focus_areas(
    grid: GridMap,
    coarse_path: Sequence[Cell],
    n_areas: int,
    max_distance: float,
    source: str = "auto-generated",
) -> FocusAreaSet:
    """Sample N area centers at uniform arc length along a coarse path.

    Centers are actual path waypoints (first and last always included);
    each area's members come from ``grid.slice_region``. Asking for more
    areas than there are waypoints clamps N with a warning. A disconnected
    resulting mask (possible when the radius is small relative to the
    spacing) warns but does not fail.
    """
    path = [Cell(*c) for c in coarse_path]
    if not path:
        raise ValueError("coarse path is empty")
    for c in path:
        if not grid.is_traversable(c):
            raise ValueError(f"coarse-path waypoint {tuple(c)} is not traversable")
    if n_areas < 1:
        raise ValueError("n_areas must be at least 1")
    if max_distance <= 0:
        raise ValueError("max_distance must be positive")
    if n_areas > len(path):
        warnings.warn(
            f"n_areas={n_areas} exceeds the {len(path)} coarse-path waypoints; clamping",
            stacklevel=2,
        )
        n_areas = len(path)

    pos = _arc_positions(grid, path)
    total = pos[-1]
    if n_areas == 1:
        targets = [0.0]
    else:
        targets = [total * i / (n_areas - 1) for i in range(n_areas)]

    areas = []
    for t in targets:
        # Closest waypoint by arc position; ties go to the earlier one.
        idx = min(range(len(path)), key=lambda i: (abs(pos[i] - t), i))
        center = grid.cell_center(path[idx])
        members = [c for c, _ in grid.slice_region(center, max_distance)]
        areas.append(FocusArea.from_cells(grid, center, max_distance, members))

    mask = FocusAreaSet(tuple(areas), source=source)
    union = mask.member_cells()
    uncovered = [c for c in path if c not in union]
    if uncovered:
        warnings.warn(
            f"{len(uncovered)} coarse-path waypoints fall outside the mask "
            f"(first: {tuple(uncovered[0])}); consider a larger max_distance",
            stacklevel=2,
        )
    path_connected = all(
        max(abs(b.col - a.col), abs(b.row - a.row)) == 1 for a, b in zip(path, path[1:])
    )
    if path_connected and not _mask_connected(grid, union):
        warnings.warn(
            "focus-area union is disconnected despite a connected coarse path",
            stacklevel=2,
        )
    return mask


def mask_stats(grid: GridMap, mask: FocusAreaSet) -> dict:
    mask_cells = len(mask.member_cells())
    traversable = grid.traversable_count
    return {
        "mask_cells": mask_cells,
        "traversable_cells": traversable,
        "reduction_fraction": 1.0 - mask_cells / traversable,
    }


# -- serialization and caching ----------------------------------------------


def serialize_mask(mask: FocusAreaSet) -> dict:
    doc = {
        "version": MASK_VERSION,
        "areas": [
            {
                "center_m": [area.center[0], area.center[1]],
                "radius_m": area.radius,
                "members": [[c.col, c.row] for c in area.cells],
            }
            for area in mask.areas
        ],
        "source": mask.source,
    }
    if mask.key is not None:
        doc["key"] = mask.key
    return doc


def deserialize_mask(document, grid: GridMap) -> FocusAreaSet:
    """Rebuild a FocusAreaSet (including its kd-trees) from mask JSON."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise MaskFormatError(f"invalid mask JSON: {exc.msg}") from exc
    if not isinstance(document, dict):
        raise MaskFormatError("mask document must be a JSON object")
    version = document.get("version")
    if version != MASK_VERSION:
        raise MaskFormatError(
            f"unsupported mask version {version!r} (expected {MASK_VERSION})"
        )
    try:
        areas = tuple(
            FocusArea.from_cells(
                grid,
                tuple(entry["center_m"]),
                float(entry["radius_m"]),
                [Cell(int(c), int(r)) for c, r in entry["members"]],
            )
            for entry in document["areas"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MaskFormatError(f"malformed mask areas: {exc}") from exc
    return FocusAreaSet(
        areas,
        source=document.get("source", "auto-generated"),
        key=document.get("key"),
    )


def map_hash(grid: GridMap) -> str:
    """Content hash of the exported radio map; changes iff the map changes."""
    canonical = json.dumps(export_radio_map(grid), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def cache_key(grid: GridMap, start: Cell, goal: Cell, threshold: float) -> dict:
    return {
        "map_hash": map_hash(grid),
        "start": [start.col, start.row],
        "goal": [goal.col, goal.row],
        "G": float(threshold),
    }


class MaskCache:
    """Keyed store of focus-area masks, optionally persisted to a directory.

    Lookups and inserts are serialized by a lock; the builder passed to
    ``get_or_build`` only runs on a miss.
    """

    def __init__(self, directory=None):
        self._lock = threading.Lock()
        self._masks: dict[str, FocusAreaSet] = {}
        self._dir = Path(directory) if directory is not None else None
        if self._dir is not None:
            self._dir.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def _slug(key: dict) -> str:
        return hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:24]

    def get_or_build(
        self,
        grid: GridMap,
        start: Cell,
        goal: Cell,
        threshold: float,
        builder: Callable[[], FocusAreaSet],
    ) -> FocusAreaSet:
        key = cache_key(grid, Cell(*start), Cell(*goal), threshold)
        slug = self._slug(key)
        with self._lock:
            mask = self._masks.get(slug)
            if mask is None and self._dir is not None:
                path = self._dir / f"mask-{slug}.json"
                if path.exists():
                    mask = deserialize_mask(path.read_text(), grid)
                    self._masks[slug] = mask
            if mask is None:
                mask = builder().with_key(key)
                self._masks[slug] = mask
                if self._dir is not None:
                    path = self._dir / f"mask-{slug}.json"
                    path.write_text(json.dumps(serialize_mask(mask), indent=1))
            return mask
