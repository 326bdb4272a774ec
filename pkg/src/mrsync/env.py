"""Polygonal environments: loading, validation, cell adjacency and point location."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import jsonschema

Point = tuple[float, float]

_SCHEMA = {
    "type": "object",
    "required": ["cells"],
    "properties": {
        "cells": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "vertices"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "vertices": {
                        "type": "array",
                        "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                    },
                },
            },
        },
        "regions": {
            "type": "object",
            "additionalProperties": {"type": "array", "items": {"type": "string"}},
        },
        "robots": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id"],
                "properties": {
                    "id": {"type": "integer", "minimum": 1},
                    "position": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                    "cell": {"type": "string"},
                },
                "oneOf": [{"required": ["position"]}, {"required": ["cell"]}],
            },
        },
    },
}

_PROP_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_RESERVED = {"G", "F", "U", "X", "R", "true", "false"}


class EnvError(ValueError):
    """Invalid environment; ``ident`` names the offending cell, region or robot."""

    def __init__(self, message: str, ident=None):
        super().__init__(message if ident is None else f"{message}: {ident}")
        self.ident = ident


def natural_key(s: str):
    """Sort key that orders c2 before c10."""
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", s)]


@dataclass(frozen=True)
class Cell:
    id: str
    vertices: tuple[Point, ...]  # counter-clockwise

    def edges(self):
        v = self.vertices
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    def centroid(self) -> Point:
        # area-weighted centroid via the shoelace formula
        a = cx = cy = 0.0
        for (x0, y0), (x1, y1) in self.edges():
            cr = x0 * y1 - x1 * y0
            a += cr
            cx += (x0 + x1) * cr
            cy += (y0 + y1) * cr
        return (cx / (3 * a), cy / (3 * a))

    def area(self) -> float:
        return 0.5 * sum(x0 * y1 - x1 * y0 for (x0, y0), (x1, y1) in self.edges())


@dataclass(frozen=True)
class RobotPlacement:
    id: int
    position: Point | None = None
    cell: str | None = None


@dataclass(frozen=True)
class Partition:
    cells: tuple[Cell, ...]
    regions: Mapping[str, frozenset]
    robots: tuple[RobotPlacement, ...] = ()
    eps: float = field(default=1e-9, compare=False)

    @property
    def props(self) -> frozenset:
        return frozenset(self.regions)

    @property
    def cell_ids(self) -> list[str]:
        return [c.id for c in self.cells]

    def cell(self, cid: str) -> Cell:
        for c in self.cells:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def region_of(self, cid: str) -> str | None:
        """The region containing a cell, or None for free space."""
        for name, cs in self.regions.items():
            if cid in cs:
                return name
        return None

    def initial_cells(self) -> list[str]:
        out = []
        for r in sorted(self.robots, key=lambda r: r.id):
            out.append(r.cell if r.cell is not None else locate(self, r.position))
        return out

    def to_json(self) -> dict:
        robots = []
        for r in self.robots:
            d = {"id": r.id}
            if r.cell is not None:
                d["cell"] = r.cell
            else:
                d["position"] = list(r.position)
            robots.append(d)
        return {
            "cells": [{"id": c.id, "vertices": [list(v) for v in c.vertices]} for c in self.cells],
            "regions": {k: sorted(v, key=natural_key) for k, v in sorted(self.regions.items())},
            "robots": robots,
        }


# --------------------------------------------------------------------------
# geometry helpers

def _cross(o: Point, a: Point, b: Point) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _dist(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _normalize_polygon(cid: str, pts: Sequence[Point], eps: float) -> tuple[Point, ...]:
    pts = [tuple(map(float, p)) for p in pts]
    if len(pts) > 1 and _dist(pts[0], pts[-1]) <= eps:
        pts = pts[:-1]  # tolerate a closed ring
    if len(pts) < 3:
        raise EnvError("cell needs at least 3 vertices", cid)
    if any(not math.isfinite(c) for p in pts for c in p):
        raise EnvError("non-finite coordinate", cid)
    area2 = sum(x0 * y1 - x1 * y0 for (x0, y0), (x1, y1) in zip(pts, pts[1:] + pts[:1]))
    if abs(area2) <= eps * eps:
        raise EnvError("degenerate cell", cid)
    if area2 < 0:
        pts.reverse()
    n = len(pts)
    for i in range(n):
        if _dist(pts[i], pts[(i + 1) % n]) <= eps:
            raise EnvError("repeated vertex", cid)
        # a strictly convex or straight corner; reflex corners are rejected
        if _cross(pts[i - 1], pts[i], pts[(i + 1) % n]) < -eps * max(1.0, _dist(pts[i - 1], pts[(i + 1) % n])):
            raise EnvError("cell is not convex", cid)
    # winding number check rules out star-shaped self-intersections
    turn = 0.0
    for i in range(n):
        a, b, c = pts[i - 1], pts[i], pts[(i + 1) % n]
        turn += math.atan2(_cross(a, b, c), (b[0] - a[0]) * (c[0] - b[0]) + (b[1] - a[1]) * (c[1] - b[1]))
    if abs(turn - 2 * math.pi) > 1e-6:
        raise EnvError("cell is not a simple convex polygon", cid)
    return tuple(pts)


def _bbox(c: Cell):
    xs = [p[0] for p in c.vertices]
    ys = [p[1] for p in c.vertices]
    return min(xs), min(ys), max(xs), max(ys)


def _bbox_overlap(a, b, eps) -> bool:
    return a[0] <= b[2] + eps and b[0] <= a[2] + eps and a[1] <= b[3] + eps and b[1] <= a[3] + eps


def _interiors_overlap(a: Cell, b: Cell, eps: float) -> bool:
    """Separating-axis test for convex polygons; touching does not count."""
    for poly in (a, b):
        for p, q in poly.edges():
            nx, ny = q[1] - p[1], p[0] - q[0]
            norm = math.hypot(nx, ny)
            pa = [(v[0] * nx + v[1] * ny) / norm for v in a.vertices]
            pb = [(v[0] * nx + v[1] * ny) / norm for v in b.vertices]
            if max(pa) <= min(pb) + eps or max(pb) <= min(pa) + eps:
                return False
    return True


def _segment_overlap(e1, e2, eps: float) -> float:
    """Length of the collinear overlap of two segments (0 if not collinear)."""
    (a, b), (c, d) = e1, e2
    length = _dist(a, b)
    if abs(_cross(a, b, c)) / length > eps or abs(_cross(a, b, d)) / length > eps:
        return 0.0
    ux, uy = (b[0] - a[0]) / length, (b[1] - a[1]) / length
    tc = (c[0] - a[0]) * ux + (c[1] - a[1]) * uy
    td = (d[0] - a[0]) * ux + (d[1] - a[1]) * uy
    lo, hi = max(0.0, min(tc, td)), min(length, max(tc, td))
    return max(0.0, hi - lo)


def _same_segment(e1, e2, eps: float) -> bool:
    (a, b), (c, d) = e1, e2
    return (_dist(a, c) <= eps and _dist(b, d) <= eps) or (_dist(a, d) <= eps and _dist(b, c) <= eps)


def _shared_facets(cells: Sequence[Cell], eps: float):
    """Pairs of cells sharing a facet, plus pairs sharing only part of one."""
    boxes = [_bbox(c) for c in cells]
    full, partial = [], []
    for i in range(len(cells)):
        for j in range(i + 1, len(cells)):
            if not _bbox_overlap(boxes[i], boxes[j], eps):
                continue
            shared = exact = False
            for e1 in cells[i].edges():
                for e2 in cells[j].edges():
                    if _segment_overlap(e1, e2, eps) > eps:
                        shared = True
                        if _same_segment(e1, e2, eps):
                            exact = True
                        else:
                            partial.append((cells[i].id, cells[j].id))
            if shared and exact:
                full.append((cells[i].id, cells[j].id))
    return full, partial


# --------------------------------------------------------------------------
# public operations

def parse_partition(doc: dict) -> Partition:
    try:
        jsonschema.validate(doc, _SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "document"
        raise EnvError(f"schema violation ({e.message})", where) from None

    raw = [(c["id"], c["vertices"]) for c in doc["cells"]]
    seen = set()
    for cid, _ in raw:
        if cid in seen:
            raise EnvError("duplicate cell id", cid)
        seen.add(cid)
    pts = [p for _, vs in raw for p in vs]
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    diag = math.hypot(max(xs) - min(xs), max(ys) - min(ys))
    eps = 1e-9 * diag if diag > 0 else 1e-9
    cells = tuple(Cell(cid, _normalize_polygon(cid, vs, eps)) for cid, vs in raw)

    boxes = [_bbox(c) for c in cells]
    for i in range(len(cells)):
        for j in range(i + 1, len(cells)):
            if _bbox_overlap(boxes[i], boxes[j], eps) and _interiors_overlap(cells[i], cells[j], eps):
                raise EnvError("overlapping cells", f"{cells[i].id}/{cells[j].id}")
    _, partial = _shared_facets(cells, eps)
    if partial:
        a, b = partial[0]
        raise EnvError("cells share only part of a facet", f"{a}/{b}")

    regions = {}
    owner = {}
    for name, members in (doc.get("regions") or {}).items():
        if not _PROP_NAME.match(name) or name in _RESERVED:
            raise EnvError("region name is not a valid proposition identifier", name)
        if not members:
            raise EnvError("empty region", name)
        for cid in members:
            if cid not in seen:
                raise EnvError(f"region {name} references unknown cell", cid)
            if cid in owner and owner[cid] != name:
                raise EnvError(f"regions {owner[cid]} and {name} overlap at cell", cid)
            owner[cid] = name
        regions[name] = frozenset(members)

    robots = []
    rids = set()
    for r in doc.get("robots") or []:
        if r["id"] in rids:
            raise EnvError("duplicate robot id", r["id"])
        rids.add(r["id"])
        if "cell" in r:
            if r["cell"] not in seen:
                raise EnvError("robot placed in unknown cell", r["cell"])
            robots.append(RobotPlacement(r["id"], cell=r["cell"]))
        else:
            robots.append(RobotPlacement(r["id"], position=tuple(map(float, r["position"]))))
    if rids and rids != set(range(1, len(rids) + 1)):
        raise EnvError("robot ids must be 1..n", sorted(rids))
    p = Partition(cells, regions, tuple(sorted(robots, key=lambda r: r.id)), eps)
    for r in p.robots:
        if r.position is not None:
            try:
                locate(p, r.position)
            except EnvError:
                raise EnvError("robot start position outside the environment", r.id) from None
    return p


def load_partition(document) -> Partition:
    """Load from a path, a JSON string or an already parsed dict."""
    if isinstance(document, dict):
        return parse_partition(document)
    if isinstance(document, Path) or (isinstance(document, str) and not document.lstrip().startswith("{")):
        text = Path(document).read_text(encoding="utf-8")
    else:
        text = document
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise EnvError(f"invalid JSON ({e.msg})", f"line {e.lineno}") from None
    return parse_partition(doc)


def adjacency(p: Partition) -> dict[str, frozenset]:
    """Cells sharing a facet of positive length."""
    full, _ = _shared_facets(p.cells, p.eps)
    adj: dict[str, set] = {c.id: set() for c in p.cells}
    for a, b in full:
        adj[a].add(b)
        adj[b].add(a)
    return {k: frozenset(v) for k, v in adj.items()}


def locate(p: Partition, point: Sequence[float]) -> str:
    """Cell containing ``point``; on a shared boundary the smallest id wins."""
    x, y = float(point[0]), float(point[1])
    hits = []
    for c in p.cells:
        if all(_cross(a, b, (x, y)) / _dist(a, b) >= -p.eps for a, b in c.edges()):
            hits.append(c.id)
    if not hits:
        raise EnvError("point outside the environment", (x, y))
    return min(hits, key=natural_key)
