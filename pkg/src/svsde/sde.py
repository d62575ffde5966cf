"""Euler-Maruyama simulation of the velocity/location system.

One step from ``(x, y, vx, vy)``::

    vx' = vx + beta * (-dH/dx(x, y) - vx) * dt + sigma * sqrt(dt) * z1
    vy' = vy + beta * (-dH/dy(x, y) - vy) * dt + sigma * sqrt(dt) * z2
    x'  = x + M(x, y) * vx * dt + kappa * sqrt(dt) * z3
    y'  = y + M(x, y) * vy * dt + kappa * sqrt(dt) * z4

The location update uses the pre-step velocity. ``H`` includes the optional
wall repulsion. All noise is drawn with numpy before entering a kernel so the
compiled and interpreted paths consume identical random streams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._jit import njit
from .errors import ArgumentError, NumericError
from .geometry import NestGeometry
from .params import ModelParams
from .surfaces import AnalyticField, TensorSurface, WallField, _field_point, _wall_point, pack_wall

TRUNCATION_EPS = 1e-6

__all__ = ["SimState", "SimConfig", "SimResult", "em_step", "simulate", "simulate_individuals",
           "truncate_to_walls", "first_passage", "FirstPassageResult", "TRUNCATION_EPS"]


@dataclass(frozen=True)
class SimState:
    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0

    def as_array(self):
        return np.array([self.x, self.y, self.vx, self.vy], dtype=float)


@dataclass(frozen=True)
class SimConfig:
    delta: float
    n_steps: int
    initial: SimState = SimState(0.0, 0.0)
    seed: int = 0
    potential: TensorSurface | AnalyticField = field(default_factory=AnalyticField.zero)
    motility: TensorSurface | AnalyticField = field(default_factory=lambda: AnalyticField.constant(1.0))
    wall: WallField | None = None
    truncate_walls: bool = False
    geometry: NestGeometry | None = None

    def __post_init__(self):
        if not self.delta > 0:
            raise ArgumentError(f"delta must be positive, got {self.delta!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise ArgumentError(f"n_steps must be a nonnegative integer, got {self.n_steps!r}")
        if self.truncate_walls and self.geometry is None:
            raise ArgumentError("wall truncation needs a geometry")

    def replace(self, **kw) -> "SimConfig":
        return replace(self, **kw)


@dataclass
class SimResult:
    """One simulated path; row ``i`` is the state at time ``i * delta``."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    delta: float

    def __len__(self):
        return self.x.size


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@njit
def _first_hit(px, py, qx, qy, solid):
    """Smallest move fraction in [0, 1] at which p->q meets a solid segment, else 2."""
    dx = qx - px
    dy = qy - py
    tmin = 2.0
    for s in range(solid.shape[0]):
        ax = solid[s, 0]
        ay = solid[s, 1]
        ex = solid[s, 2] - ax
        ey = solid[s, 3] - ay
        den = dx * ey - dy * ex
        if den == 0.0:
            continue
        wx = ax - px
        wy = ay - py
        t = (wx * ey - wy * ex) / den
        u = (wx * dy - wy * dx) / den
        if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0 and t < tmin:
            tmin = t
    return tmin


@njit
def _truncate(px, py, qx, qy, solid, eps):
    t = _first_hit(px, py, qx, qy, solid)
    if t > 1.0:
        return qx, qy
    dx = qx - px
    dy = qy - py
    length = math.sqrt(dx * dx + dy * dy)
    back = t * length - eps
    if back <= 0.0:
        return px, py
    f = back / length
    return px + f * dx, py + f * dy


@njit
def _em_run(state, beta, sigma, kappa, delta,
            hk, hp, hkx, hky, ho, hc,
            mk, mp, mkx, mky, mo, mc,
            w_on, w_bounds, w_r1,
            noise, out, solid, truncate, eps):
    """Advance ``state`` through ``noise.shape[0]`` steps, writing rows of ``out``.

    Returns -1 on success or the index of the first step with a non-finite result.
    """
    x = state[0]
    y = state[1]
    vx = state[2]
    vy = state[3]
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = vx
    out[0, 3] = vy
    sd = math.sqrt(delta)
    for i in range(noise.shape[0]):
        _, gx, gy = _field_point(hk, hp, hkx, hky, ho, hc, x, y)
        _, wx, wy = _wall_point(w_on, w_bounds, w_r1, x, y)
        m, _, _ = _field_point(mk, mp, mkx, mky, mo, mc, x, y)
        gx += wx
        gy += wy
        nvx = vx + beta * (-gx - vx) * delta + sigma * sd * noise[i, 0]
        nvy = vy + beta * (-gy - vy) * delta + sigma * sd * noise[i, 1]
        nx = x + m * vx * delta + kappa * sd * noise[i, 2]
        ny = y + m * vy * delta + kappa * sd * noise[i, 3]
        if truncate:
            nx, ny = _truncate(x, y, nx, ny, solid, eps)
        if not (math.isfinite(nx) and math.isfinite(ny) and math.isfinite(nvx)
                and math.isfinite(nvy)):
            return i
        x = nx
        y = ny
        vx = nvx
        vy = nvy
        out[i + 1, 0] = x
        out[i + 1, 1] = y
        out[i + 1, 2] = vx
        out[i + 1, 3] = vy
    return -1


@njit
def _first_passage_run(state, beta, sigma, kappa, delta,
                       hk, hp, hkx, hky, ho, hc,
                       mk, mp, mkx, mky, mo, mc,
                       w_on, w_bounds, w_r1,
                       noise, solid, truncate, eps, rects, entry, path):
    """Simulate one agent, recording the first step index inside each rectangle.

    ``entry`` must be prefilled with -1. Stops early once every section has been
    entered. When ``path`` has rows, positions are written to it. Returns the
    number of steps taken, or ``-(i + 1)`` when step ``i`` is non-finite.
    """
    x = state[0]
    y = state[1]
    vx = state[2]
    vy = state[3]
    nsec = rects.shape[0]
    record = path.shape[0] > 0
    remaining = nsec
    for r in range(nsec):
        if rects[r, 0] <= x < rects[r, 1] and rects[r, 2] <= y < rects[r, 3]:
            entry[r] = 0
            remaining -= 1
    if record:
        path[0, 0] = x
        path[0, 1] = y
    sd = math.sqrt(delta)
    steps = noise.shape[0]
    for i in range(steps):
        if remaining == 0:
            return i
        _, gx, gy = _field_point(hk, hp, hkx, hky, ho, hc, x, y)
        _, wx, wy = _wall_point(w_on, w_bounds, w_r1, x, y)
        m, _, _ = _field_point(mk, mp, mkx, mky, mo, mc, x, y)
        gx += wx
        gy += wy
        nvx = vx + beta * (-gx - vx) * delta + sigma * sd * noise[i, 0]
        nvy = vy + beta * (-gy - vy) * delta + sigma * sd * noise[i, 1]
        nx = x + m * vx * delta + kappa * sd * noise[i, 2]
        ny = y + m * vy * delta + kappa * sd * noise[i, 3]
        if truncate:
            nx, ny = _truncate(x, y, nx, ny, solid, eps)
        if not (math.isfinite(nx) and math.isfinite(ny) and math.isfinite(nvx)
                and math.isfinite(nvy)):
            return -(i + 1)
        x = nx
        y = ny
        vx = nvx
        vy = nvy
        if record:
            path[i + 1, 0] = x
            path[i + 1, 1] = y
        for r in range(nsec):
            if entry[r] < 0 and rects[r, 0] <= x < rects[r, 1] and rects[r, 2] <= y < rects[r, 3]:
                entry[r] = i + 1
                remaining -= 1
    return steps


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def _kernel_args(params: ModelParams, h, m, w, delta):
    if params.sigma2 < 0 or params.kappa2 < 0:
        raise ArgumentError("noise variances must be nonnegative")
    return ((math.sqrt(params.sigma2), math.sqrt(params.kappa2), float(delta))
            + tuple(h.packed()) + tuple(m.packed()) + pack_wall(w))


def _solid(geometry):
    if geometry is None:
        return np.zeros((0, 4))
    return np.ascontiguousarray(geometry.solid_segments)


def em_step(s: SimState, p: ModelParams, h, m, w: WallField | None, delta: float, rng,
            geometry: NestGeometry | None = None, step: int = 0) -> SimState:
    """One Euler-Maruyama step. Draws four standard normals from ``rng``."""
    if not delta > 0:
        raise ArgumentError(f"delta must be positive, got {delta!r}")
    state = s.as_array()
    if not np.all(np.isfinite(state)):
        raise NumericError("non-finite state", step)
    noise = rng.standard_normal((1, 4))
    out = np.empty((2, 4))
    sig, kap, dt, *fields_ = _kernel_args(p, h, m, w, delta)
    bad = _em_run(state, p.beta, sig, kap, dt, *fields_, noise, out, _solid(geometry),
                  geometry is not None, TRUNCATION_EPS)
    if bad >= 0:
        raise NumericError("non-finite state after Euler-Maruyama step", step)
    return SimState(*(float(v) for v in out[1]))


def _simulate_with_noise(config: SimConfig, params: ModelParams, noise, initial=None):
    state = (config.initial if initial is None else initial).as_array()
    if not np.all(np.isfinite(state)):
        raise NumericError("non-finite initial state", 0)
    out = np.empty((noise.shape[0] + 1, 4))
    sig, kap, dt, *fields_ = _kernel_args(params, config.potential, config.motility,
                                          config.wall, config.delta)
    bad = _em_run(state, params.beta, sig, kap, dt, *fields_, noise, out,
                  _solid(config.geometry), config.truncate_walls, TRUNCATION_EPS)
    if bad >= 0:
        raise NumericError("non-finite state during simulation", bad)
    t = np.arange(out.shape[0]) * config.delta
    return SimResult(t, out[:, 0].copy(), out[:, 1].copy(), out[:, 2].copy(),
                     out[:, 3].copy(), config.delta)


def simulate(config: SimConfig, params: ModelParams, rng=None) -> SimResult:
    """``config.n_steps`` Euler-Maruyama steps from ``config.initial``.

    Deterministic given ``config.seed`` (or the supplied ``rng``).
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    noise = rng.standard_normal((int(config.n_steps), 4))
    return _simulate_with_noise(config, params, noise)


def agent_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for agent ``index`` under master ``seed``."""
    return np.random.default_rng([int(seed), int(index)])


def simulate_individuals(config: SimConfig, params: ModelParams, n_individuals: int,
                         ids=None) -> list[tuple[str, SimResult]]:
    """Independent paths, one RNG stream per individual."""
    if ids is None:
        ids = [str(j + 1) for j in range(n_individuals)]
    out = []
    for j, ident in enumerate(ids):
        rng = agent_rng(config.seed, j)
        out.append((ident, simulate(config, params, rng=rng)))
    return out


def truncate_to_walls(from_state: SimState, proposed: SimState, geometry: NestGeometry,
                      eps: float = TRUNCATION_EPS) -> SimState:
    """Stop a move just short of the first solid wall it would cross.

    The returned location is pulled back by ``eps`` along the movement
    direction; velocities are taken from ``proposed`` unchanged.
    """
    if not geometry.contains(from_state.x, from_state.y):
        raise ArgumentError(f"start point ({from_state.x}, {from_state.y}) is outside the geometry")
    x, y = _truncate(from_state.x, from_state.y, proposed.x, proposed.y,
                     _solid(geometry), eps)
    return SimState(x, y, proposed.vx, proposed.vy)


@dataclass
class FirstPassageResult:
    """First-entry times (simulation time units), ``inf`` when never entered."""

    sections: list
    times: np.ndarray  # (n_agents, n_sections)
    steps_taken: np.ndarray
    paths: list = field(default_factory=list)

    def medians(self) -> dict:
        return {n: float(np.median(self.times[:, j])) for j, n in enumerate(self.sections)}

    def rows(self):
        for a in range(self.times.shape[0]):
            for j, n in enumerate(self.sections):
                yield a, n, self.times[a, j]


def first_passage(geometry: NestGeometry, config: SimConfig, params: ModelParams,
                  n_agents: int, start=None, record_paths: int = 0) -> FirstPassageResult:
    """Wall-truncated spread simulation from ``start`` (defaults to the nest exit).

    Each agent draws its initial velocity from N(0, tau_v1) and uses its own
    RNG stream derived from ``(config.seed, agent)``. ``record_paths`` keeps the
    full paths of the first that many agents.
    """
    if start is None:
        if geometry.exit is None:
            raise ArgumentError("no start point given and geometry has no exit")
        start = geometry.exit
    sx, sy = float(start[0]), float(start[1])
    if not geometry.contains(sx, sy):
        raise ArgumentError(f"start point ({sx}, {sy}) is outside the geometry")
    if not geometry.sections:
        raise ArgumentError("geometry has no sections")
    rects = np.ascontiguousarray(geometry.section_rects)
    solid = _solid(geometry)
    sig, kap, dt, *fields_ = _kernel_args(params, config.potential, config.motility,
                                          config.wall, config.delta)
    n_steps = int(config.n_steps)
    times = np.full((n_agents, rects.shape[0]), np.inf)
    taken = np.zeros(n_agents, dtype=int)
    paths = []
    sd_v = math.sqrt(params.priors.tau_v1)
    for a in range(n_agents):
        rng = agent_rng(config.seed, a)
        v0 = rng.standard_normal(2) * sd_v
        noise = rng.standard_normal((n_steps, 4))
        entry = np.full(rects.shape[0], -1, dtype=np.int64)
        path = np.full((n_steps + 1, 2) if a < record_paths else (0, 2), np.nan)
        state = np.array([sx, sy, v0[0], v0[1]])
        n = _first_passage_run(state, params.beta, sig, kap, dt, *fields_, noise, solid,
                               True, TRUNCATION_EPS, rects, entry, path)
        if n < 0:
            raise NumericError(f"non-finite state for agent {a}", -n - 1)
        taken[a] = n
        hit = entry >= 0
        times[a, hit] = entry[hit] * config.delta
        if a < record_paths:
            paths.append(path[:n + 1].copy())
    return FirstPassageResult(geometry.section_names, times, taken, paths)
