"""Road routes, rectangular obstacles, and line-of-sight tests.

A route is a directed polyline: vehicles enter at its first vertex, travel
along it at constant speed and leave the map at its last vertex.  Obstacles
are axis-aligned rectangles; a link is line-of-sight iff the segment between
its endpoints meets no obstacle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle with normalized corners (x0 <= x1, y0 <= y1)."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        xs = sorted((float(self.x0), float(self.x1)))
        ys = sorted((float(self.y0), float(self.y1)))
        object.__setattr__(self, "x0", xs[0])
        object.__setattr__(self, "x1", xs[1])
        object.__setattr__(self, "y0", ys[0])
        object.__setattr__(self, "y1", ys[1])

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


def segments_intersect_rect(starts: np.ndarray, ends: np.ndarray, rect: Rect) -> np.ndarray:
    """Vectorized Liang-Barsky clip: does each segment meet the closed rect?

    starts/ends are (n, 2) arrays; returns an (n,) bool array.  Segments that
    merely touch the boundary count as intersecting.
    """
    p = np.atleast_2d(np.asarray(starts, dtype=float))
    q = np.atleast_2d(np.asarray(ends, dtype=float))
    d = q - p
    n = p.shape[0]
    tmin = np.zeros(n)
    tmax = np.ones(n)
    alive = np.ones(n, dtype=bool)
    for axis, lo, hi in ((0, rect.x0, rect.x1), (1, rect.y0, rect.y1)):
        da = d[:, axis]
        pa = p[:, axis]
        parallel = da == 0.0
        alive &= ~(parallel & ((pa < lo) | (pa > hi)))
        with np.errstate(divide="ignore", invalid="ignore"):
            t_lo = (lo - pa) / da
            t_hi = (hi - pa) / da
        enter = np.where(parallel, 0.0, np.minimum(t_lo, t_hi))
        leave = np.where(parallel, 1.0, np.maximum(t_lo, t_hi))
        tmin = np.maximum(tmin, enter)
        tmax = np.minimum(tmax, leave)
    return alive & (tmin <= tmax)


def segment_blocked(start, end, obstacles: list[Rect]) -> bool:
    """True iff the segment from start to end meets any obstacle."""
    s = np.asarray([start], dtype=float)
    e = np.asarray([end], dtype=float)
    for rect in obstacles:
        if segments_intersect_rect(s, e, rect)[0]:
            return True
    return False


def segments_blocked(starts: np.ndarray, ends: np.ndarray, obstacles: list[Rect]) -> np.ndarray:
    """Vectorized blockage flags for a batch of segments."""
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    ends = np.atleast_2d(np.asarray(ends, dtype=float))
    blocked = np.zeros(starts.shape[0], dtype=bool)
    for rect in obstacles:
        remaining = ~blocked
        if not remaining.any():
            break
        blocked[remaining] |= segments_intersect_rect(
            starts[remaining], ends[remaining], rect
        )
    return blocked


class Route:
    """Directed polyline with arc-length interpolation."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
            raise ValueError("a route needs at least two 2-D waypoints")
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len == 0):
            raise ValueError("route has a zero-length segment")
        self.points = pts
        self._cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        self._dirs = seg / seg_len[:, None]
        self.length = float(self._cum[-1])

    def position(self, s: float) -> np.ndarray:
        """Point at arc length s (clamped to the route)."""
        s = min(max(s, 0.0), self.length)
        x = np.interp(s, self._cum, self.points[:, 0])
        y = np.interp(s, self._cum, self.points[:, 1])
        return np.array([x, y])

    def direction(self, s: float) -> np.ndarray:
        """Unit travel direction at arc length s."""
        s = min(max(s, 0.0), self.length)
        idx = int(np.searchsorted(self._cum, s, side="right")) - 1
        idx = min(max(idx, 0), len(self._dirs) - 1)
        return self._dirs[idx]


@dataclass
class MapSpec:
    """Static world geometry: routes, obstacles, and base-station positions."""

    routes: list[Route]
    obstacles: list[Rect]
    stations: dict[int, tuple]


def manhattan_grid_routes(span=1000.0, lines=(250.0, 750.0)) -> list[Route]:
    """Routes over a grid of horizontal/vertical streets crossing a square map.

    For each directed street the straight pass plus every single-turn path
    branching at each intersection is generated.
    """
    routes = []
    for line in lines:
        # horizontal street at y=line, then vertical at x=line, both directions
        for flip in (False, True):
            for vertical in (False, True):
                a, b = (0.0, span) if not flip else (span, 0.0)

                def pt(s):
                    return (line, s) if vertical else (s, line)

                routes.append(Route([pt(a), pt(b)]))
                for cross in lines:
                    # turn at the intersection with the crossing street
                    if not min(a, b) < cross < max(a, b):
                        continue
                    corner = (line, cross) if vertical else (cross, line)
                    for exit_end in (0.0, span):
                        if vertical:
                            leg_end = (exit_end, cross)
                        else:
                            leg_end = (cross, exit_end)
                        routes.append(Route([pt(a), corner, leg_end]))
    return routes


def default_map() -> MapSpec:
    """Synthetic 1 km Manhattan-style map: 4 streets, 4 BSs, 6 obstacles.

    The buildings are sized to throw large, irregular NLOS shadows so that
    the blockage pattern over (direction, distance) is non-trivial to learn.
    """
    routes = manhattan_grid_routes(span=1000.0, lines=(250.0, 750.0))
    obstacles = [
        Rect(280.0, 280.0, 470.0, 470.0),
        Rect(530.0, 530.0, 720.0, 720.0),
        Rect(280.0, 530.0, 470.0, 720.0),
        Rect(30.0, 30.0, 220.0, 220.0),
        Rect(780.0, 30.0, 970.0, 220.0),
        Rect(280.0, 780.0, 720.0, 970.0),
    ]
    stations = {
        1: (500.0, 200.0),
        2: (200.0, 500.0),
        3: (800.0, 500.0),
        4: (500.0, 800.0),
    }
    return MapSpec(routes=routes, obstacles=obstacles, stations=stations)


def parse_geometry_file(path) -> MapSpec:
    """Load a map from a plain-text geometry file.

    Line syntax (blank lines and '#' comments ignored):
        road x1,y1 x2,y2 [x3,y3 ...]    directed route polyline
        obstacle x0,y0 x1,y1            axis-aligned rectangle, two corners
        bs id x,y                       base station with integer id
    """
    routes: list[Route] = []
    obstacles: list[Rect] = []
    stations: dict[int, tuple] = {}

    def parse_point(token, lineno):
        parts = token.split(",")
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'x,y', got {token!r}")
        return (float(parts[0]), float(parts[1]))

    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            kind = fields[0].lower()
            if kind == "road":
                if len(fields) < 3:
                    raise ValueError(f"{path}:{lineno}: road needs >= 2 points")
                routes.append(Route([parse_point(t, lineno) for t in fields[1:]]))
            elif kind == "obstacle":
                if len(fields) != 3:
                    raise ValueError(f"{path}:{lineno}: obstacle needs 2 corners")
                (x0, y0) = parse_point(fields[1], lineno)
                (x1, y1) = parse_point(fields[2], lineno)
                obstacles.append(Rect(min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1)))
            elif kind == "bs":
                if len(fields) != 3:
                    raise ValueError(f"{path}:{lineno}: bs needs an id and a point")
                stations[int(fields[1])] = parse_point(fields[2], lineno)
            else:
                raise ValueError(f"{path}:{lineno}: unknown record {kind!r}")
    if not routes:
        raise ValueError(f"{path}: no roads defined")
    if not stations:
        raise ValueError(f"{path}: no base stations defined")
    return MapSpec(routes=routes, obstacles=obstacles, stations=stations)
