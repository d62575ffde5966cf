"""Trajectory ingestion: parsing, duplicates, exits, gap filling and export."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ParseError, ValidationError
from .geometry import NestGeometry

__all__ = ["Segment", "Individual", "TrajectorySet", "IngestReport", "load_trajectories",
           "save_trajectories", "fill_gaps", "split_exit_segments", "empirical_speeds",
           "write_speeds", "from_simulation"]

REQUIRED = ("id", "t", "x", "y")


@dataclass
class Segment:
    """Uniformly spaced observations with unit-stride integer time indices."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray | None = None
    vy: np.ndarray | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.int64)
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if not (self.t.shape == self.x.shape == self.y.shape):
            raise ValidationError("segment arrays must have equal length")

    def __len__(self):
        return self.t.size

    def validate(self) -> None:
        if self.t.size > 1 and np.any(np.diff(self.t) != 1):
            raise ValidationError("segment time index is not unit-stride")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValidationError("segment has non-finite coordinates")


@dataclass
class Individual:
    id: str
    segments: list


@dataclass
class IngestReport:
    rows: int = 0
    duplicates: int = 0
    interpolated: int = 0
    clamped: int = 0
    outside: int = 0
    short_segment_rows: int = 0
    segments: int = 0
    output_rows: int = 0

    @property
    def dropped(self) -> int:
        return self.outside + self.short_segment_rows

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dropped"] = self.dropped
        return d

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


@dataclass
class TrajectorySet:
    individuals: list
    delta: float = 1.0
    report: IngestReport | None = field(default=None, compare=False)

    def segments(self):
        for ind in self.individuals:
            for seg in ind.segments:
                yield ind.id, seg

    @property
    def n_observations(self) -> int:
        return sum(len(s) for _, s in self.segments())

    def validate(self) -> None:
        for _, seg in self.segments():
            seg.validate()

    def subset(self, ids) -> "TrajectorySet":
        keep = set(ids)
        return TrajectorySet([i for i in self.individuals if i.id in keep], self.delta)


# ---------------------------------------------------------------------------
# segment transforms
# ---------------------------------------------------------------------------

def fill_gaps(segment: Segment, max_gap: int = 5) -> list[Segment]:
    """Linearly interpolate runs of at most ``max_gap`` missing time indices.

    Longer runs split the segment instead. Returns the resulting segments.
    """
    t, x, y = segment.t, segment.x, segment.y
    if t.size == 0:
        return []
    pieces = []
    cur_t, cur_x, cur_y = [t[:1]], [x[:1]], [y[:1]]
    for i in range(1, t.size):
        missing = int(t[i] - t[i - 1]) - 1
        if missing < 0:
            raise ValidationError("time indices must be strictly increasing")
        if missing > max_gap:
            pieces.append((cur_t, cur_x, cur_y))
            cur_t, cur_x, cur_y = [], [], []
        elif missing > 0:
            frac = np.arange(1, missing + 1) / (missing + 1)
            cur_t.append(t[i - 1] + np.arange(1, missing + 1))
            cur_x.append(x[i - 1] + frac * (x[i] - x[i - 1]))
            cur_y.append(y[i - 1] + frac * (y[i] - y[i - 1]))
        cur_t.append(t[i:i + 1])
        cur_x.append(x[i:i + 1])
        cur_y.append(y[i:i + 1])
    pieces.append((cur_t, cur_x, cur_y))
    return [Segment(np.concatenate(a), np.concatenate(b), np.concatenate(c)) for a, b, c in pieces]


def split_exit_segments(t, x, y, geometry: NestGeometry | None = None, max_gap: int = 5,
                        min_length: int = 3, clamp_tol: float = 1.0):
    """Split one individual's records at nest exits.

    An exit is a record outside the bounds by more than ``clamp_tol`` (the
    record is discarded) or an absence span longer than ``max_gap`` time steps.
    Records within ``clamp_tol`` of the bounds are clamped onto them. Segments
    with fewer than ``min_length`` observations are dropped.

    Returns ``(segments, counts)`` where ``counts`` has keys ``outside``,
    ``clamped`` and ``short_segment_rows``.
    """
    t = np.asarray(t, dtype=np.int64)
    x = np.asarray(x, dtype=float).copy()
    y = np.asarray(y, dtype=float).copy()
    counts = {"outside": 0, "clamped": 0, "short_segment_rows": 0}
    inside = np.isfinite(x) & np.isfinite(y)
    if geometry is not None:
        xl, xu, yl, yu = geometry.bounds
        far = ((x < xl - clamp_tol) | (x > xu + clamp_tol)
               | (y < yl - clamp_tol) | (y > yu + clamp_tol))
        inside &= ~far
        near = inside & ((x < xl) | (x > xu) | (y < yl) | (y > yu))
        counts["clamped"] = int(near.sum())
        x[inside] = np.clip(x[inside], xl, xu)
        y[inside] = np.clip(y[inside], yl, yu)
    counts["outside"] = int((~inside).sum())
    segments = []
    start = None
    for i in range(t.size + 1):
        if i < t.size and inside[i]:
            if start is None:
                start = i
            elif t[i] - t[i - 1] - 1 > max_gap:
                segments.append(slice(start, i))
                start = i
        elif start is not None:
            segments.append(slice(start, i))
            start = None
    out = []
    for s in segments:
        seg = Segment(t[s], x[s], y[s])
        if len(seg) < min_length:
            counts["short_segment_rows"] += len(seg)
            continue
        out.append(seg)
    return out, counts


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

def _parse_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", 1) from None
        missing = [c for c in REQUIRED if c not in header]
        if missing:
            raise ParseError(f"header lacks column(s) {missing}", 1)
        col = {c: header.index(c) for c in REQUIRED}
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise ParseError(f"expected {len(header)} fields, found {len(row)}", lineno)
            try:
                ident = row[col["id"]].strip()
                tv = float(row[col["t"]])
                xv = float(row[col["x"]]) if row[col["x"]].strip() else np.nan
                yv = float(row[col["y"]]) if row[col["y"]].strip() else np.nan
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if not ident:
                raise ParseError("empty id", lineno)
            if tv != int(tv):
                raise ParseError(f"time index {tv!r} is not an integer", lineno)
            rows.append((ident, int(tv), xv, yv))
    return rows


def load_trajectories(path, geometry: NestGeometry | None = None, delta: float = 1.0,
                      max_gap: int = 5, min_length: int = 3,
                      clamp_tol: float = 1.0) -> TrajectorySet:
    """Read ``id,t,x,y`` records into validated, gap-filled segments.

    Duplicate ``(id, t)`` rows keep the first occurrence. The counts of every
    policy action are attached as ``result.report``.
    """
    rows = _parse_rows(path)
    report = IngestReport(rows=len(rows))
    by_id: dict[str, dict[int, tuple[float, float]]] = {}
    for ident, t, x, y in rows:
        recs = by_id.setdefault(ident, {})
        if t in recs:
            report.duplicates += 1
            continue
        recs[t] = (x, y)
    individuals = []
    for ident, recs in by_id.items():
        ts = np.array(sorted(recs), dtype=np.int64)
        xs = np.array([recs[t][0] for t in ts])
        ys = np.array([recs[t][1] for t in ts])
        segs, counts = split_exit_segments(ts, xs, ys, geometry, max_gap, min_length, clamp_tol)
        report.outside += counts["outside"]
        report.clamped += counts["clamped"]
        report.short_segment_rows += counts["short_segment_rows"]
        filled = []
        for seg in segs:
            for piece in fill_gaps(seg, max_gap):
                report.interpolated += len(piece)
                filled.append(piece)
        for seg in segs:
            report.interpolated -= len(seg)
        for seg in filled:
            seg.validate()
        if filled:
            individuals.append(Individual(ident, filled))
    report.segments = sum(len(i.segments) for i in individuals)
    report.output_rows = sum(len(s) for i in individuals for s in i.segments)
    return TrajectorySet(individuals, float(delta), report)


def save_trajectories(path, data: TrajectorySet, with_velocity: bool = False) -> None:
    """Write ``id,t,x,y[,vx,vy]`` with round-trip float formatting."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "t", "x", "y", "vx", "vy"] if with_velocity else list(REQUIRED))
        for ident, seg in data.segments():
            for i in range(len(seg)):
                row = [ident, int(seg.t[i]), repr(float(seg.x[i])), repr(float(seg.y[i]))]
                if with_velocity:
                    row += [repr(float(seg.vx[i])), repr(float(seg.vy[i]))]
                w.writerow(row)


def from_simulation(paths, delta: float, thin: int = 1) -> TrajectorySet:
    """Wrap simulated ``(id, SimResult)`` pairs, keeping every ``thin``-th state."""
    inds = []
    for ident, res in paths:
        sl = slice(None, None, thin)
        n = res.x[sl].size
        seg = Segment(np.arange(1, n + 1), res.x[sl], res.y[sl], res.vx[sl], res.vy[sl])
        inds.append(Individual(str(ident), [seg]))
    return TrajectorySet(inds, float(delta) * thin)


# ---------------------------------------------------------------------------
# exploratory summaries
# ---------------------------------------------------------------------------

def empirical_speeds(data: TrajectorySet, geometry: NestGeometry) -> dict[str, np.ndarray]:
    """Per-step speeds ``|dx| / delta`` grouped by the section of each step's origin."""
    names = geometry.section_names
    buckets = {n: [] for n in names}
    for _, seg in data.segments():
        if len(seg) < 2:
            continue
        sp = np.hypot(np.diff(seg.x), np.diff(seg.y)) / data.delta
        idx = geometry.section_index(seg.x[:-1], seg.y[:-1])
        for j, n in enumerate(names):
            buckets[n].append(sp[idx == j])
    return {n: (np.concatenate(v) if v else np.zeros(0)) for n, v in buckets.items()}


def write_speeds(path, speeds: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["section", "speed"])
        for n, arr in speeds.items():
            for s in arr:
                w.writerow([n, repr(float(s))])
