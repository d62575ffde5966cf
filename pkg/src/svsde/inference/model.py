"""Discretized likelihood, priors and the sampler state."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ..car import CarStructure, build_car
from ..data_io import TrajectorySet
from ..errors import ArgumentError, NumericError
from ..params import ModelParams
from ..surfaces import SplineBasis, TensorSurface, WallField, _design_rows
from . import _kernels as K

LOG_2PI = math.log(2.0 * math.pi)

VARIANTS = {"full": "full", "h0": "h0", "H0": "h0", "H≡0": "h0", "m1": "m1", "M1": "m1",
            "M≡1": "m1"}


def normalize_variant(variant: str) -> str:
    try:
        return VARIANTS[variant]
    except KeyError:
        raise ArgumentError(f"unknown model variant {variant!r}; use full, h0 or m1") from None


def data_domain(data: TrajectorySet, margin: float = 0.05) -> tuple[float, float, float, float]:
    """Bounding box of all observations padded by ``margin`` of its extent."""
    xs = np.concatenate([s.x for _, s in data.segments()])
    ys = np.concatenate([s.y for _, s in data.segments()])
    x0, x1, y0, y1 = xs.min(), xs.max(), ys.min(), ys.max()
    px = max((x1 - x0) * margin, 1e-6)
    py = max((y1 - y0) * margin, 1e-6)
    return (float(x0 - px), float(x1 + px), float(y0 - py), float(y1 + py))


class Model:
    """Observed locations with precomputed spline designs and CAR structure.

    Observation ``i`` has a transition to ``i + 1`` when both lie in the same
    segment. Locations are clamped to the spline box for basis evaluation; the
    wall term uses the raw location.
    """

    def __init__(self, data: TrajectorySet, basis_x: SplineBasis, basis_y: SplineBasis,
                 wall: WallField | None = None, variant: str = "full"):
        if data.delta <= 0:
            raise ArgumentError("data delta must be positive")
        self.data = data
        self.delta = float(data.delta)
        self.basis_x = basis_x
        self.basis_y = basis_y
        self.wall = wall
        self.variant = normalize_variant(variant)
        self.gamma_free = self.variant != "h0"
        self.alpha_free = self.variant != "m1"
        segs = [s for _, s in data.segments()]
        if not segs:
            raise ArgumentError("no trajectory segments")
        lens = np.array([len(s) for s in segs], dtype=np.int64)
        if np.any(lens < 1):
            raise ArgumentError("empty segment")
        self.seg_len = lens
        self.seg_start = np.concatenate([[0], np.cumsum(lens)[:-1]]).astype(np.int64)
        self.x = np.concatenate([s.x for s in segs])
        self.y = np.concatenate([s.y for s in segs])
        n = self.x.size
        self.n_obs = n
        self.is_first = np.zeros(n, dtype=bool)
        self.is_first[self.seg_start] = True
        self.has_next = np.ones(n, dtype=bool)
        self.has_next[self.seg_start + lens - 1] = False
        self.has_prev = ~self.is_first
        self.tr = np.flatnonzero(self.has_next)
        self.dx = np.zeros(n)
        self.dy = np.zeros(n)
        self.dx[self.tr] = self.x[self.tr + 1] - self.x[self.tr]
        self.dy[self.tr] = self.y[self.tr + 1] - self.y[self.tr]
        self.n_trans = self.tr.size

        order = basis_x.order
        kk = order * order
        self.idx = np.empty((n, kk), dtype=np.int64)
        self.B = np.empty((n, kk))
        self.Bx = np.empty((n, kk))
        self.By = np.empty((n, kk))
        _design_rows(basis_x.knots, basis_y.knots, order, self.x, self.y, self.idx,
                     self.B, self.Bx, self.By, basis_x.count, basis_y.count)
        self.n_coef = basis_x.count * basis_y.count
        self.car = build_car(basis_x.count, basis_y.count)
        mask = self.has_next.astype(float)
        gx = np.empty((self.n_coef, self.n_coef))
        gy = np.empty((self.n_coef, self.n_coef))
        K.sparse_gram(self.idx, self.Bx, mask, gx)
        K.sparse_gram(self.idx, self.By, mask, gy)
        self.gram_grad = gx + gy
        self._wall_cache = (None, None)

    # -- surfaces at the data -------------------------------------------
    def spline_grad(self, gamma):
        gx = np.empty(self.n_obs)
        gy = np.empty(self.n_obs)
        coef = np.ascontiguousarray(gamma, dtype=float).ravel()
        K.sparse_matvec(self.idx, self.Bx, coef, gx)
        K.sparse_matvec(self.idx, self.By, coef, gy)
        return gx, gy

    def wall_grad(self, r1):
        """Wall gradient at the data for decay ``r1`` (cached for the last value)."""
        if self.wall is None:
            return 0.0, 0.0
        key, val = self._wall_cache
        if key != r1:
            w = self.wall.with_decay(r1).evaluate_many(self.x, self.y)
            val = (w[:, 1].copy(), w[:, 2].copy())
            self._wall_cache = (r1, val)
        return val

    def potential_grad(self, state):
        gx, gy = self.spline_grad(state.gamma)
        wx, wy = self.wall_grad(state.params.r1)
        return gx + wx, gy + wy

    def motility(self, alpha):
        out = np.empty(self.n_obs)
        K.sparse_matvec(self.idx, self.B, np.ascontiguousarray(alpha, dtype=float).ravel(), out)
        return out

    def surface(self, coef, constrained=False) -> TensorSurface:
        return TensorSurface(self.basis_x, self.basis_y,
                             np.asarray(coef).reshape(self.basis_x.count, self.basis_y.count),
                             constrained)

    # -- densities ------------------------------------------------------
    def log_likelihood(self, state) -> float:
        """Gaussian transition densities plus the initial-velocity prior."""
        p = state.params
        d = self.delta
        if not p.sigma2 > 0 or not p.kappa2 > 0:
            return -math.inf
        gx, gy = self.potential_grad(state)
        m = self.motility(state.alpha)
        tr = self.tr
        nx = tr + 1
        vx, vy = state.vx, state.vy
        s2d = p.sigma2 * d
        k2d = p.kappa2 * d
        rvx = vx[nx] - vx[tr] - p.beta * (-gx[tr] - vx[tr]) * d
        rvy = vy[nx] - vy[tr] - p.beta * (-gy[tr] - vy[tr]) * d
        ex = self.dx[tr] - m[tr] * vx[tr] * d
        ey = self.dy[tr] - m[tr] * vy[tr] * d
        nt = tr.size
        ll = -0.5 * (np.dot(rvx, rvx) + np.dot(rvy, rvy)) / s2d - nt * (LOG_2PI + math.log(s2d))
        ll += -0.5 * (np.dot(ex, ex) + np.dot(ey, ey)) / k2d - nt * (LOG_2PI + math.log(k2d))
        tv = p.priors.tau_v1
        f = self.is_first
        ll += (-0.5 * (np.dot(vx[f], vx[f]) + np.dot(vy[f], vy[f])) / tv
               - f.sum() * (LOG_2PI + math.log(tv)))
        return float(ll)

    def log_prior(self, state) -> float:
        p = state.params
        pr = p.priors
        lp = 0.0
        # beta: normal truncated to (0, inf)
        if not p.beta > 0:
            return -math.inf
        lp += (-0.5 * (p.beta - pr.mu_beta) ** 2 / pr.tau_beta - 0.5 * (LOG_2PI + math.log(pr.tau_beta))
               - special.log_ndtr(pr.mu_beta / math.sqrt(pr.tau_beta)))
        # kappa2: inverse gamma
        if not p.kappa2 > 0:
            return -math.inf
        a, b = pr.a_kappa, pr.b_kappa
        lp += a * math.log(b) - special.gammaln(a) - (a + 1) * math.log(p.kappa2) - b / p.kappa2
        # mu_alpha: normal
        lp += (-0.5 * (p.mu_alpha - pr.mu_mu_alpha) ** 2 / pr.var_mu_alpha
               - 0.5 * (LOG_2PI + math.log(pr.var_mu_alpha)))
        n = self.n_coef
        log_rho = -math.log(pr.rho_hi - pr.rho_lo)
        if self.gamma_free:
            if not (pr.rho_lo < p.rho_gamma < pr.rho_hi) or not p.tau_gamma > 0:
                return -math.inf
            q = self.car.quad(state.gamma, p.rho_gamma)
            lp += (0.5 * (n * math.log(p.tau_gamma) + self.car.logdet(p.rho_gamma))
                   - 0.5 * n * LOG_2PI - 0.5 * p.tau_gamma * q)
            rate = p.mu_alpha ** 2
            if not rate > 0:
                return -math.inf
            lp += math.log(rate) - rate * p.tau_gamma
            lp += log_rho
        if self.alpha_free:
            if not (pr.rho_lo < p.rho_alpha < pr.rho_hi) or p.mu_alpha == 0:
                return -math.inf
            prec = p.tau_alpha / p.mu_alpha ** 2
            q = self.car.quad(np.asarray(state.alpha).ravel() - p.mu_alpha, p.rho_alpha)
            lp += (0.5 * (n * math.log(prec) + self.car.logdet(p.rho_alpha))
                   - 0.5 * n * LOG_2PI - 0.5 * prec * q)
            lp += log_rho
        if self.wall is not None:
            if not p.r1 > 0:
                return -math.inf
            lr = math.log(p.r1)
            lp += (-0.5 * (lr - pr.r1_meanlog) ** 2 / pr.r1_sdlog ** 2
                   - 0.5 * LOG_2PI - math.log(pr.r1_sdlog) - lr)
        return float(lp)

    def log_joint(self, state) -> float:
        lp = self.log_prior(state)
        if lp == -math.inf:
            return lp
        val = lp + self.log_likelihood(state)
        if math.isnan(val):
            raise NumericError("log joint density is NaN")
        return val

    # -- predictions ----------------------------------------------------
    def prediction_error(self, state) -> float:
        """Mean distance between observed next locations and their conditional means."""
        m = self.motility(state.alpha)
        tr = self.tr
        ex = self.dx[tr] - m[tr] * state.vx[tr] * self.delta
        ey = self.dy[tr] - m[tr] * state.vy[tr] * self.delta
        return float(np.mean(np.hypot(ex, ey))) if tr.size else 0.0


@dataclass
class ChainState:
    """Full sampler state: scalar parameters, latent velocities and coefficients."""

    params: ModelParams
    vx: np.ndarray
    vy: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    log_joint: float | None = field(default=None, compare=False)

    def copy(self) -> "ChainState":
        return ChainState(self.params, self.vx.copy(), self.vy.copy(), self.gamma.copy(),
                          self.alpha.copy(), self.log_joint)

    def with_params(self, **kw) -> "ChainState":
        s = self.copy()
        s.params = self.params.replace(**kw)
        s.log_joint = None
        return s


def log_joint(state: ChainState, model: Model) -> float:
    return model.log_joint(state)


def initial_state(model: Model, params: ModelParams | None = None) -> ChainState:
    """Warm start: finite-difference velocities, flat surfaces, beta = 1."""
    d = model.delta
    vx = np.zeros(model.n_obs)
    vy = np.zeros(model.n_obs)
    tr = model.tr
    vx[tr] = model.dx[tr] / d
    vy[tr] = model.dy[tr] / d
    last = np.flatnonzero(~model.has_next & model.has_prev)
    vx[last] = vx[last - 1]
    vy[last] = vy[last - 1]
    if params is None:
        disp = np.concatenate([model.dx[tr], model.dy[tr]])
        k2 = float(np.var(disp)) * 0.01 if disp.size > 1 else 0.01
        params = ModelParams(beta=1.0, sigma2=1.0, kappa2=max(k2, 1e-12), mu_alpha=1.0,
                             r1=1.0 if model.wall is None else model.wall.decay)
    gamma = np.zeros(model.n_coef)
    alpha = np.full(model.n_coef, params.mu_alpha if model.alpha_free else 1.0)
    return ChainState(params, vx, vy, gamma, alpha)
