"""Nest geometry: outer bounds, wall segments, doorways and named sections.

Geometry files are JSON::

    {
      "bounds": [xl, xu, yl, yu],
      "walls": [[x0, y0, x1, y1], ...],
      "doorways": [[x0, y0, x1, y1], ...],
      "sections": [{"name": "Ia", "rect": [x0, x1, y0, y1]}, ...],
      "exit": [x, y]
    }

Walls are line segments in mm. Each doorway is a sub-segment of one wall that
agents may pass through. The outer boundary is always solid. Sections are
half-open rectangles ``[x0, x1) x [y0, y1)`` and must not overlap.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError

_TOL = 1e-9


@dataclass(frozen=True)
class NestGeometry:
    bounds: tuple
    walls: tuple = ()
    doorways: tuple = ()
    sections: tuple = ()  # ((name, (x0, x1, y0, y1)), ...)
    exit: tuple | None = None
    _solid: np.ndarray = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        b = tuple(float(v) for v in self.bounds)
        if len(b) != 4 or not (b[0] < b[1] and b[2] < b[3]):
            raise ValidationError(f"invalid bounds {self.bounds!r}")
        object.__setattr__(self, "bounds", b)
        walls = tuple(tuple(float(v) for v in w) for w in self.walls)
        doors = tuple(tuple(float(v) for v in d) for d in self.doorways)
        secs = tuple((str(n), tuple(float(v) for v in r)) for n, r in self.sections)
        for seg in walls + doors:
            if len(seg) != 4:
                raise ValidationError(f"segment {seg!r} must have 4 coordinates")
        object.__setattr__(self, "walls", walls)
        object.__setattr__(self, "doorways", doors)
        object.__setattr__(self, "sections", secs)
        if self.exit is not None:
            object.__setattr__(self, "exit", (float(self.exit[0]), float(self.exit[1])))
        self._validate_sections()
        object.__setattr__(self, "_solid", self._build_solid())

    # -- validation -----------------------------------------------------
    def _validate_sections(self):
        names = [n for n, _ in self.sections]
        if len(set(names)) != len(names):
            raise ValidationError("section names must be unique")
        xl, xu, yl, yu = self.bounds
        for n, (x0, x1, y0, y1) in self.sections:
            if not (x0 < x1 and y0 < y1):
                raise ValidationError(f"section {n} has an empty rectangle")
            if x0 < xl - _TOL or x1 > xu + _TOL or y0 < yl - _TOL or y1 > yu + _TOL:
                raise ValidationError(f"section {n} is not contained in the bounds")
        for i, (na, a) in enumerate(self.sections):
            for nb, b in self.sections[i + 1:]:
                if a[0] < b[1] and b[0] < a[1] and a[2] < b[3] and b[2] < a[3]:
                    raise ValidationError(f"sections {na} and {nb} overlap")

    def _build_solid(self) -> np.ndarray:
        xl, xu, yl, yu = self.bounds
        solid = [(xl, yl, xu, yl), (xu, yl, xu, yu), (xu, yu, xl, yu), (xl, yu, xl, yl)]
        used = [False] * len(self.doorways)
        for w in self.walls:
            ax, ay, bx, by = w
            ex, ey = bx - ax, by - ay
            length2 = ex * ex + ey * ey
            if length2 == 0:
                continue
            cuts = []
            for j, (cx, cy, dx, dy) in enumerate(self.doorways):
                t0 = ((cx - ax) * ex + (cy - ay) * ey) / length2
                t1 = ((dx - ax) * ex + (dy - ay) * ey) / length2
                off0 = abs((cx - ax) * ey - (cy - ay) * ex) / np.sqrt(length2)
                off1 = abs((dx - ax) * ey - (dy - ay) * ex) / np.sqrt(length2)
                if off0 > 1e-6 or off1 > 1e-6:
                    continue
                lo, hi = min(t0, t1), max(t0, t1)
                if lo < -_TOL or hi > 1 + _TOL:
                    continue
                cuts.append((max(lo, 0.0), min(hi, 1.0)))
                used[j] = True
            cuts.sort()
            t = 0.0
            for lo, hi in cuts:
                if lo > t:
                    solid.append((ax + t * ex, ay + t * ey, ax + lo * ex, ay + lo * ey))
                t = max(t, hi)
            if t < 1.0:
                solid.append((ax + t * ex, ay + t * ey, bx, by))
        for j, ok in enumerate(used):
            if not ok:
                raise ValidationError(f"doorway {self.doorways[j]!r} does not lie on any wall")
        arr = np.array(solid, dtype=float).reshape(-1, 4)
        arr.setflags(write=False)
        return arr

    # -- queries --------------------------------------------------------
    @property
    def solid_segments(self) -> np.ndarray:
        """Wall pieces agents cannot cross, shape (S, 4): x0, y0, x1, y1."""
        return self._solid

    @property
    def section_names(self) -> list[str]:
        return [n for n, _ in self.sections]

    @property
    def section_rects(self) -> np.ndarray:
        return np.array([r for _, r in self.sections], dtype=float).reshape(-1, 4)

    def contains(self, x: float, y: float) -> bool:
        xl, xu, yl, yu = self.bounds
        return xl <= x <= xu and yl <= y <= yu

    def section_of(self, x: float, y: float) -> str | None:
        for n, (x0, x1, y0, y1) in self.sections:
            if x0 <= x < x1 and y0 <= y < y1:
                return n
        return None

    def section_index(self, xs, ys) -> np.ndarray:
        """Index of the containing section per point, -1 outside all sections."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        out = np.full(xs.shape, -1, dtype=int)
        for i, (_, (x0, x1, y0, y1)) in enumerate(self.sections):
            hit = (xs >= x0) & (xs < x1) & (ys >= y0) & (ys < y1) & (out < 0)
            out[hit] = i
        return out

    def section_distances(self, start: str) -> dict[str, int]:
        """Breadth-first hop count between sections through non-solid shared borders."""
        names = self.section_names
        if start not in names:
            raise ValidationError(f"unknown section {start!r}")
        rects = self.section_rects
        adj = {n: set() for n in names}
        for i in range(len(names)):
            for j in range(i + 1, len(names)):
                if self._open_border(rects[i], rects[j]):
                    adj[names[i]].add(names[j])
                    adj[names[j]].add(names[i])
        dist = {start: 0}
        queue = deque([start])
        while queue:
            cur = queue.popleft()
            for nxt in adj[cur]:
                if nxt not in dist:
                    dist[nxt] = dist[cur] + 1
                    queue.append(nxt)
        return dist

    def _open_border(self, a, b) -> bool:
        # shared horizontal or vertical edge sampled finely; open if a probe is off-wall
        probes = []
        if abs(a[3] - b[2]) < _TOL or abs(b[3] - a[2]) < _TOL:
            y = a[3] if abs(a[3] - b[2]) < _TOL else a[2]
            lo, hi = max(a[0], b[0]), min(a[1], b[1])
            if hi > lo:
                probes = [(x, y) for x in np.linspace(lo, hi, 401)[1:-1]]
        elif abs(a[1] - b[0]) < _TOL or abs(b[1] - a[0]) < _TOL:
            x = a[1] if abs(a[1] - b[0]) < _TOL else a[0]
            lo, hi = max(a[2], b[2]), min(a[3], b[3])
            if hi > lo:
                probes = [(x, y) for y in np.linspace(lo, hi, 401)[1:-1]]
        for px, py in probes:
            if not _on_any_segment(px, py, self._solid):
                return True
        return False

    # -- serialisation --------------------------------------------------
    def to_dict(self) -> dict:
        d = {
            "bounds": list(self.bounds),
            "walls": [list(w) for w in self.walls],
            "doorways": [list(d) for d in self.doorways],
            "sections": [{"name": n, "rect": list(r)} for n, r in self.sections],
        }
        if self.exit is not None:
            d["exit"] = list(self.exit)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NestGeometry":
        try:
            secs = d.get("sections", [])
            if isinstance(secs, dict):
                secs = [{"name": k, "rect": v} for k, v in secs.items()]
            return cls(
                bounds=d["bounds"],
                walls=d.get("walls", []),
                doorways=d.get("doorways", []),
                sections=[(s["name"], s["rect"]) for s in secs],
                exit=d.get("exit"),
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed geometry: {exc!r}") from None

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "NestGeometry":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"geometry is not valid JSON: {exc.msg}", exc.lineno) from None
        return cls.from_dict(d)


def _on_any_segment(px, py, segs, tol=1e-9) -> bool:
    for ax, ay, bx, by in segs:
        ex, ey = bx - ax, by - ay
        l2 = ex * ex + ey * ey
        t = ((px - ax) * ex + (py - ay) * ey) / l2
        if -tol <= t <= 1 + tol and abs((px - ax) * ey - (py - ay) * ex) / np.sqrt(l2) < tol:
            return True
    return False


def four_chamber_nest(width=65.0, chamber_height=40.0, door=6.0, passage=12.0) -> NestGeometry:
    """Four stacked chambers (I at the top, IV at the bottom), each split in half.

    Chamber boundaries carry a ``door``-wide doorway and each internal barrier a
    ``passage``-wide gap. Openings alternate sides so that consecutive sections
    form a single chain; the exit sits in the bottom-left corner of IVb.
    """
    h = chamber_height
    walls, doors, sections = [], [], []
    names = ["IV", "III", "II", "I"]
    for c in range(4):
        y0 = c * h
        mid = y0 + h / 2
        # internal barrier, gap on the right
        walls.append((0.0, mid, width, mid))
        doors.append((width - passage, mid, width, mid))
        if c < 3:
            top = y0 + h
            walls.append((0.0, top, width, top))
            doors.append((0.0, top, door, top))
        sections.append((names[c] + "b", (0.0, width, y0, mid)))
        sections.append((names[c] + "a", (0.0, width, mid, y0 + h)))
    sections.reverse()
    return NestGeometry(bounds=(0.0, width, 0.0, 4 * h), walls=walls, doorways=doors,
                        sections=sections, exit=(3.0, 3.0))


def quadrant_sections(extent: float = 10.0) -> NestGeometry:
    """Open square split into quadrants I-IV; used to tag speeds of simulated data."""
    e = float(extent)
    return NestGeometry(
        bounds=(-e, e, -e, e),
        sections=[("I", (0.0, e, 0.0, e)), ("II", (-e, 0.0, 0.0, e)),
                  ("III", (-e, 0.0, -e, 0.0)), ("IV", (0.0, e, -e, 0.0))],
    )
