"""Closed-form full conditionals and their samplers.

Every ``*_conditional`` returns the parameters of a full conditional; the
matching ``log_*`` helper evaluates its log density (possibly unnormalized in
a way that cancels in ratios). The samplers draw from those same parameters,
so the ratio tests against :meth:`Model.log_joint` cover both.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import linalg, special

from ..car import sample_gaussian_canonical
from ..errors import NumericError
from ..surfaces import constrain_with
from . import _kernels as K
from .model import ChainState, Model


# ---------------------------------------------------------------------------
# beta
# ---------------------------------------------------------------------------

def beta_conditional(model: Model, state: ChainState) -> tuple[float, float]:
    """Mean and variance of the untruncated normal whose positive part is the conditional."""
    p = state.params
    pr = p.priors
    tr = model.tr
    a_prec = 1.0 / pr.tau_beta
    b_lin = pr.mu_beta / pr.tau_beta
    if tr.size:
        gx, gy = model.potential_grad(state)
        vx, vy = state.vx, state.vy
        ux = -gx[tr] - vx[tr]
        uy = -gy[tr] - vy[tr]
        dvx = vx[tr + 1] - vx[tr]
        dvy = vy[tr + 1] - vy[tr]
        a_prec += model.delta * (ux @ ux + uy @ uy) / p.sigma2
        b_lin += (ux @ dvx + uy @ dvy) / p.sigma2
    if not a_prec > 0:
        raise NumericError(f"beta conditional precision {a_prec!r} is not positive")
    return b_lin / a_prec, 1.0 / a_prec


def sample_positive_normal(mean: float, var: float, rng) -> float:
    """Inverse-CDF draw from N(mean, var) truncated to (0, inf)."""
    sd = math.sqrt(var)
    a = -mean / sd
    # upper tail beyond a: z = -Phi^-1(U Phi(-a)), done in log space for stability
    log_p = special.log_ndtr(-a) + math.log(rng.uniform())
    z = -float(special.ndtri_exp(log_p))
    z = max(z, a)
    val = mean + sd * z
    return val if val > 0 else np.nextafter(0.0, 1.0)


def log_beta_conditional(model, state, beta) -> float:
    m, v = beta_conditional(model, state)
    if not beta > 0:
        return -math.inf
    return -0.5 * (beta - m) ** 2 / v


def sample_beta(model: Model, state: ChainState, rng) -> float:
    m, v = beta_conditional(model, state)
    return sample_positive_normal(m, v, rng)


# ---------------------------------------------------------------------------
# kappa2
# ---------------------------------------------------------------------------

def kappa2_conditional(model: Model, state: ChainState) -> tuple[float, float]:
    """Inverse-gamma (shape, rate)."""
    pr = state.params.priors
    tr = model.tr
    shape = pr.a_kappa + tr.size
    rate = pr.b_kappa
    if tr.size:
        m = model.motility(state.alpha)
        d = model.delta
        ex = model.dx[tr] - m[tr] * state.vx[tr] * d
        ey = model.dy[tr] - m[tr] * state.vy[tr] * d
        rate += (ex @ ex + ey @ ey) / (2.0 * d)
    if not (shape > 0 and rate > 0):
        raise NumericError(f"kappa2 conditional IG({shape!r}, {rate!r}) is invalid")
    return shape, rate


def log_kappa2_conditional(model, state, kappa2) -> float:
    a, b = kappa2_conditional(model, state)
    if not kappa2 > 0:
        return -math.inf
    return -(a + 1) * math.log(kappa2) - b / kappa2


def sample_kappa2(model: Model, state: ChainState, rng) -> float:
    a, b = kappa2_conditional(model, state)
    return float(b / rng.gamma(a))


# ---------------------------------------------------------------------------
# velocities
# ---------------------------------------------------------------------------

def velocity_system(model: Model, state: ChainState):
    """Tridiagonal precision pieces for the x and y velocity chains.

    Returns ``(diag_x, diag_y, off, lin_x, lin_y)``; ``off[i]`` couples i and i+1
    and is shared by both components.
    """
    p = state.params
    d = model.delta
    c = 1.0 - p.beta * d
    s2d = p.sigma2 * d
    nxt = model.has_next
    prv = model.has_prev
    m = model.motility(state.alpha)
    gx, gy = model.potential_grad(state)
    gx = np.broadcast_to(gx, (model.n_obs,))
    gy = np.broadcast_to(gy, (model.n_obs,))
    base = model.is_first / p.priors.tau_v1 + prv / s2d + nxt * (c * c / s2d)
    mm = nxt * (m * m * d / p.kappa2)
    diag_x = base + mm
    diag_y = diag_x
    off = np.where(nxt, -c / s2d, 0.0)
    bd = p.beta * d
    lin_x = nxt * (m * model.dx / p.kappa2 + c * bd * gx / s2d)
    lin_y = nxt * (m * model.dy / p.kappa2 + c * bd * gy / s2d)
    lin_x[1:] -= prv[1:] * bd * gx[:-1] / s2d
    lin_y[1:] -= prv[1:] * bd * gy[:-1] / s2d
    return diag_x, diag_y, off, lin_x, lin_y


def _tridiag_quad(diag, off, lin, v):
    return -0.5 * (diag @ (v * v)) - off[:-1] @ (v[:-1] * v[1:]) + lin @ v


def log_velocity_conditional(model, state, vx, vy) -> float:
    """Unnormalized joint log conditional of all latent velocities."""
    dx_, dy_, off, lx, ly = velocity_system(model, state)
    return float(_tridiag_quad(dx_, off, lx, vx) + _tridiag_quad(dy_, off, ly, vy))


def velocity_site_conditional(model: Model, state: ChainState, i: int, axis: str = "x"):
    """Mean and variance of one velocity component given everything else."""
    dx_, dy_, off, lx, ly = velocity_system(model, state)
    diag, lin, v = (dx_, lx, state.vx) if axis == "x" else (dy_, ly, state.vy)
    b = lin[i]
    if i > 0:
        b -= off[i - 1] * v[i - 1]
    if i + 1 < v.size:
        b -= off[i] * v[i + 1]
    return b / diag[i], 1.0 / diag[i]


def sample_velocities(model: Model, state: ChainState, rng, mode: str = "block"):
    """Draw both velocity components; ``mode`` is ``"block"`` or ``"site"``."""
    dx_, dy_, off, lx, ly = velocity_system(model, state)
    n = model.n_obs
    z = rng.standard_normal((2, n))
    out = []
    for comp, (diag, lin, cur) in enumerate(((dx_, lx, state.vx), (dy_, ly, state.vy))):
        if mode == "block":
            v = np.empty(n)
            bad = K.tridiag_sample(model.seg_start, model.seg_len, diag, off, lin, z[comp], v)
        elif mode == "site":
            v = cur.copy()
            bad = K.tridiag_site_sweep(model.seg_start, model.seg_len, diag, off, lin, z[comp], v)
        else:
            raise ValueError(f"unknown velocity update mode {mode!r}")
        if bad >= 0:
            raise NumericError(f"velocity conditional precision is not positive at index {bad}")
        out.append(v)
    return out[0], out[1]


# ---------------------------------------------------------------------------
# gamma (potential coefficients)
# ---------------------------------------------------------------------------

def gamma_conditional(model: Model, state: ChainState):
    """Precision matrix and linear term of the unconstrained gamma conditional."""
    p = state.params
    d = model.delta
    prec = (p.beta ** 2 * d / p.sigma2) * model.gram_grad
    prec = prec + p.tau_gamma * (model.car.D - p.rho_gamma * model.car.Q)
    tr = model.tr
    c = 1.0 - p.beta * d
    wx, wy = model.wall_grad(p.r1)
    wx = np.broadcast_to(wx, (model.n_obs,))
    wy = np.broadcast_to(wy, (model.n_obs,))
    cx = np.zeros(model.n_obs)
    cy = np.zeros(model.n_obs)
    cx[tr] = state.vx[tr + 1] - c * state.vx[tr] + p.beta * d * wx[tr]
    cy[tr] = state.vy[tr + 1] - c * state.vy[tr] + p.beta * d * wy[tr]
    lx = np.empty(model.n_coef)
    ly = np.empty(model.n_coef)
    K.sparse_rmatvec(model.idx, model.Bx, cx, lx)
    K.sparse_rmatvec(model.idx, model.By, cy, ly)
    return prec, -(p.beta / p.sigma2) * (lx + ly)


def _log_canonical(prec, lin, v) -> float:
    return float(-0.5 * v @ (prec @ v) + lin @ v)


def log_gamma_conditional(model, state, gamma) -> float:
    prec, lin = gamma_conditional(model, state)
    return _log_canonical(prec, lin, np.asarray(gamma, dtype=float).ravel())


def sample_gamma(model: Model, state: ChainState, rng, constrain: bool = True) -> np.ndarray:
    """Block draw of the potential coefficients, conditioned on a zero sum."""
    prec, lin = gamma_conditional(model, state)
    draw, _, chol = sample_gaussian_canonical(prec, lin, rng)
    if not constrain:
        return draw
    cov_ones = linalg.cho_solve((chol, True), np.ones(draw.size))
    return constrain_with(draw, cov_ones)


# ---------------------------------------------------------------------------
# alpha (motility coefficients)
# ---------------------------------------------------------------------------

def alpha_conditional(model: Model, state: ChainState):
    p = state.params
    tr = model.tr
    w = np.zeros(model.n_obs)
    r = np.zeros(model.n_obs)
    vx, vy = state.vx, state.vy
    w[tr] = model.delta * (vx[tr] ** 2 + vy[tr] ** 2) / p.kappa2
    r[tr] = (vx[tr] * model.dx[tr] + vy[tr] * model.dy[tr]) / p.kappa2
    gram = np.empty((model.n_coef, model.n_coef))
    K.sparse_gram(model.idx, model.B, w, gram)
    lin = np.empty(model.n_coef)
    K.sparse_rmatvec(model.idx, model.B, r, lin)
    P = model.car.D - p.rho_alpha * model.car.Q
    prec = gram + (p.tau_alpha / p.mu_alpha ** 2) * P
    lin = lin + (p.tau_alpha / p.mu_alpha) * P.sum(axis=1)
    return prec, lin


def log_alpha_conditional(model, state, alpha) -> float:
    prec, lin = alpha_conditional(model, state)
    return _log_canonical(prec, lin, np.asarray(alpha, dtype=float).ravel())


def sample_alpha(model: Model, state: ChainState, rng) -> np.ndarray:
    prec, lin = alpha_conditional(model, state)
    draw, _, _ = sample_gaussian_canonical(prec, lin, rng)
    return draw


# ---------------------------------------------------------------------------
# tau_gamma
# ---------------------------------------------------------------------------

def tau_gamma_conditional(model: Model, state: ChainState) -> tuple[float, float]:
    """Gamma (shape, rate) implied by the exponential prior with rate mu_alpha^2."""
    p = state.params
    shape = model.n_coef / 2.0 + 1.0
    rate = 0.5 * model.car.quad(state.gamma, p.rho_gamma) + p.mu_alpha ** 2
    if not rate > 0:
        raise NumericError(f"tau_gamma conditional rate {rate!r} is not positive")
    return shape, rate


def log_tau_gamma_conditional(model, state, tau) -> float:
    a, b = tau_gamma_conditional(model, state)
    if not tau > 0:
        return -math.inf
    return (a - 1) * math.log(tau) - b * tau


def sample_tau_gamma(model: Model, state: ChainState, rng) -> float:
    a, b = tau_gamma_conditional(model, state)
    return float(rng.gamma(a) / b)
