"""Posterior summaries: surface bands, one-step prediction error and the thinning study."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .data_io import TrajectorySet, from_simulation
from .errors import ArgumentError
from .inference.chain import ChainConfig, PosteriorChain, run_chain
from .inference.model import normalize_variant
from .params import ModelParams
from .sde import SimConfig, simulate_individuals
from .surfaces import SplineBasis, _design_rows

__all__ = ["SurfaceSummary", "posterior_surfaces", "prediction_error", "one_step_error",
           "thinning_study", "write_summary", "write_table"]


def _dense_design(bx: SplineBasis, by: SplineBasis, xs, ys):
    """Dense value/derivative design rows; points must lie inside both domains."""
    xs = np.ascontiguousarray(xs, dtype=float).ravel()
    ys = np.ascontiguousarray(ys, dtype=float).ravel()
    for b, u, name in ((bx, xs, "x"), (by, ys, "y")):
        lo, hi = b.domain
        if u.size and (u.min() < lo or u.max() > hi):
            bad = u[(u < lo) | (u > hi)][0]
            b.check(float(bad), name)
    n = xs.size
    k = bx.order * bx.order
    idx = np.empty((n, k), dtype=np.int64)
    v, dvx, dvy = (np.empty((n, k)) for _ in range(3))
    _design_rows(bx.knots, by.knots, bx.order, xs, ys, idx, v, dvx, dvy, bx.count, by.count)
    ncoef = bx.count * by.count
    out = []
    for vals in (v, dvx, dvy):
        dense = np.zeros((n, ncoef))
        np.add.at(dense, (np.repeat(np.arange(n), k), idx.ravel()), vals.ravel())
        out.append(dense)
    return out


@dataclass
class SurfaceSummary:
    """Pointwise posterior summaries on a flattened grid."""

    x: np.ndarray
    y: np.ndarray
    h_mean: np.ndarray
    h_lower: np.ndarray
    h_upper: np.ndarray
    m_mean: np.ndarray
    m_lower: np.ndarray
    m_upper: np.ndarray
    gx: np.ndarray
    gy: np.ndarray

    def write_csv(self, path, which: str = "potential", with_grad: bool = True) -> None:
        """``x,y,mean,lower,upper[,gx,gy]`` for ``potential`` or ``motility``."""
        if which not in ("potential", "motility"):
            raise ArgumentError(f"unknown surface {which!r}")
        cols = ((self.h_mean, self.h_lower, self.h_upper) if which == "potential"
                else (self.m_mean, self.m_lower, self.m_upper))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "mean", "lower", "upper"] + (["gx", "gy"] if with_grad else []))
            for i in range(self.x.size):
                row = [self.x[i], self.y[i], *(c[i] for c in cols)]
                if with_grad:
                    row += [self.gx[i], self.gy[i]]
                w.writerow([repr(float(v)) for v in row])


def posterior_surfaces(chain: PosteriorChain, xs, ys, level: float = 0.95,
                       chunk: int = 512) -> SurfaceSummary:
    """Mean surfaces and pointwise credible bands on the grid ``xs`` x ``ys``.

    The gradient field is ``-(grad H_mean + grad R) * M_mean`` where ``H_mean``
    uses the posterior-mean coefficients and ``R`` the wall at the mean decay.
    """
    if len(chain) == 0:
        raise ArgumentError("posterior chain has no retained draws")
    gxs, gys = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
    px, py = gxs.ravel(), gys.ravel()
    design, dx, dy = _dense_design(chain.basis_x, chain.basis_y, px, py)
    q = (1 - level) / 2
    res = {}
    for name, draws in (("h", chain.gamma), ("m", chain.alpha)):
        mean_coef = draws.mean(axis=0)
        lo = np.empty(px.size)
        hi = np.empty(px.size)
        for a in range(0, px.size, chunk):
            vals = draws @ design[a:a + chunk].T
            lo[a:a + chunk], hi[a:a + chunk] = np.quantile(vals, [q, 1 - q], axis=0)
        res[name] = (design @ mean_coef, lo, hi, mean_coef)
    gam = res["h"][3]
    hx = dx @ gam
    hy = dy @ gam
    if chain.wall is not None:
        r1 = float(np.mean(chain.scalars["r1"]))
        w = chain.wall.with_decay(r1).evaluate_many(px, py)
        hx = hx + w[:, 1]
        hy = hy + w[:, 2]
    m_mean = res["m"][0]
    return SurfaceSummary(px, py, *res["h"][:3], *res["m"][:3], -hx * m_mean, -hy * m_mean)


def prediction_error(observed, predicted) -> float:
    """Mean Euclidean distance between ``(n, 2)`` observed and predicted locations."""
    observed = np.asarray(observed, dtype=float).reshape(-1, 2)
    predicted = np.asarray(predicted, dtype=float).reshape(-1, 2)
    if observed.shape != predicted.shape:
        raise ArgumentError("observed and predicted shapes differ")
    if observed.shape[0] == 0:
        raise ArgumentError("no transitions to score")
    d = observed - predicted
    return float(np.mean(np.hypot(d[:, 0], d[:, 1])))


def one_step_error(chain: PosteriorChain, data: TrajectorySet | None = None,
                   variant: str | None = None) -> float:
    """Draw-averaged mean one-step error, recorded while the chain ran.

    Each retained draw predicts ``x_i + M(x_i) v_i delta`` with its own
    coefficients and latent velocities.
    """
    if variant is not None and normalize_variant(variant) != chain.variant:
        raise ArgumentError(f"chain was fitted as {chain.variant!r}, not {variant!r}")
    if data is not None:
        n_tr = sum(max(len(seg) - 1, 0) for _, seg in data.segments())
        if data.delta != chain.delta or n_tr != chain.n_transitions:
            raise ArgumentError("data do not match the data the chain was fitted to")
    if len(chain) == 0:
        raise ArgumentError("posterior chain has no retained draws")
    return float(np.mean(chain.pred_error))


# ---------------------------------------------------------------------------
# thinning study
# ---------------------------------------------------------------------------

def thinning_study(sim: SimConfig, params: ModelParams, n_individuals: int, factors,
                   fit: ChainConfig, n_obs: int | None = None) -> list[dict]:
    """Fit coarsened copies of one simulation at each thinning factor.

    For factor ``k`` each individual is simulated for ``n_obs * k`` steps with the
    same RNG streams (so the fine path is a prefix of every longer one) and every
    ``k``-th state is kept, giving ``n_obs`` observations at spacing ``k * delta``.
    """
    if n_obs is None:
        n_obs = int(sim.n_steps) + 1
    rows = []
    for k in factors:
        k = int(k)
        if k < 1:
            raise ArgumentError(f"thinning factor must be >= 1, got {k}")
        cfg = sim.replace(n_steps=n_obs * k - 1)
        paths = simulate_individuals(cfg, params, n_individuals)
        data = from_simulation(paths, sim.delta, thin=k)
        chain = run_chain(data, fit)
        d = data.delta
        b = chain.scalars["beta"]
        k2 = chain.scalars["kappa2"]
        row = {"factor": k, "delta": d}
        for name, arr in (("beta_delta", b * d), ("kappa2", k2), ("kappa2_delta", k2 * d)):
            row[name] = float(arr.mean())
            row[name + "_lo"] = float(np.quantile(arr, 0.025))
            row[name + "_hi"] = float(np.quantile(arr, 0.975))
        rows.append(row)
    return rows


def write_table(path, rows: list[dict]) -> None:
    if not rows:
        raise ArgumentError("empty table")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow(r)


def write_summary(path, chain: PosteriorChain, level: float = 0.95) -> list[dict]:
    """JSON list of ``{parameter, mean, lo, hi, mcse}`` rows."""
    rows = chain.summary(level)
    with open(path, "w") as fh:
        json.dump(rows, fh, indent=2)
    return rows
