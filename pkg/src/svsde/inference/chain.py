"""Block Gibbs / Metropolis driver and posterior chain container."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from ..data_io import TrajectorySet
from ..errors import ArgumentError, NumericError
from ..params import ModelParams, Priors
from ..surfaces import SplineBasis, TensorSurface, WallField
from . import conditionals as C
from .diagnostics import batch_means_mcse
from .mh import AdaptiveStep, mh_update
from .model import ChainState, Model, data_domain, initial_state, normalize_variant

SCALAR_COLUMNS = ("beta", "kappa2", "r1", "mu_alpha", "tau_gamma", "rho_gamma", "rho_alpha")


@dataclass
class ChainConfig:
    """Sampler settings.

    ``domain`` is ``(xl, xu, yl, yu)`` for the spline bases; ``None`` uses the
    data bounding box with a 5% margin. ``wall`` is ``None`` or a mapping with
    ``bounds`` and ``decay``.
    """

    iterations: int = 1000
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    basis: tuple = (8, 8)
    order: int = 4
    domain: tuple | None = None
    variant: str = "full"
    wall: dict | None = None
    sample_r1: bool = True
    velocity_update: str = "block"
    adapt_batch: int = 50
    mh_scale: float = 0.5
    priors: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.iterations < 0 or self.burn_in < 0:
            raise ArgumentError("iterations and burn_in must be nonnegative")
        if self.thin < 1:
            raise ArgumentError("thin must be >= 1")
        if self.velocity_update not in ("block", "site"):
            raise ArgumentError(f"velocity_update must be block or site, got {self.velocity_update!r}")
        self.variant = normalize_variant(self.variant)
        self.basis = tuple(int(b) for b in self.basis)
        if self.domain is not None:
            self.domain = tuple(float(v) for v in self.domain)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ChainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ArgumentError(f"unknown fit option(s): {sorted(unknown)}")
        return cls(**d)

    def build_model(self, data: TrajectorySet) -> Model:
        dom = self.domain if self.domain is not None else data_domain(data)
        bx = SplineBasis.uniform(dom[0], dom[1], self.basis[0], self.order)
        by = SplineBasis.uniform(dom[2], dom[3], self.basis[1], self.order)
        wall = None
        if self.wall is not None:
            wall = WallField(tuple(self.wall["bounds"]), float(self.wall.get("decay", 1.0)))
        return Model(data, bx, by, wall, self.variant)


@dataclass
class PosteriorChain:
    """Retained draws after burn-in and thinning."""

    config: ChainConfig
    basis_x: SplineBasis
    basis_y: SplineBasis
    wall: WallField | None
    scalars: dict
    gamma: np.ndarray
    alpha: np.ndarray
    log_joint: np.ndarray
    pred_error: np.ndarray
    acceptance: dict
    final_state: ChainState | None = None
    delta: float = float("nan")
    n_transitions: int = 0

    @property
    def variant(self) -> str:
        return self.config.variant

    def __len__(self):
        return self.log_joint.size

    def surface(self, which: str, i: int) -> TensorSurface:
        coef = self.gamma[i] if which == "gamma" else self.alpha[i]
        return TensorSurface(self.basis_x, self.basis_y,
                             coef.reshape(self.basis_x.count, self.basis_y.count),
                             constrained=which == "gamma")

    def summary(self, level: float = 0.95) -> list[dict]:
        """Posterior mean, equal-tailed interval and MCSE per scalar parameter."""
        q = (1 - level) / 2
        out = []
        for name in SCALAR_COLUMNS:
            x = self.scalars[name]
            if x.size == 0:
                continue
            row = {"parameter": name, "mean": float(x.mean()),
                   "lo": float(np.quantile(x, q)), "hi": float(np.quantile(x, 1 - q))}
            row["mcse"] = batch_means_mcse(x) if x.size >= 4 else float("nan")
            out.append(row)
        return out

    # -- persistence ----------------------------------------------------
    def save(self, outdir) -> None:
        """Write ``scalars.csv``, ``gamma.csv``, ``alpha.csv`` and ``chain.json``."""
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "scalars.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["draw", *SCALAR_COLUMNS, "log_joint", "pred_error"])
            for i in range(len(self)):
                w.writerow([i, *(repr(float(self.scalars[n][i])) for n in SCALAR_COLUMNS),
                            repr(float(self.log_joint[i])), repr(float(self.pred_error[i]))])
        for name, arr in (("gamma", self.gamma), ("alpha", self.alpha)):
            with open(os.path.join(outdir, f"{name}.csv"), "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["draw", *(f"c{j}" for j in range(arr.shape[1]))])
                for i, row in enumerate(arr):
                    w.writerow([i, *(repr(float(v)) for v in row)])
        meta = {
            "config": self.config.to_dict(),
            "basis_x": {"order": self.basis_x.order, "knots": self.basis_x.knots.tolist()},
            "basis_y": {"order": self.basis_y.order, "knots": self.basis_y.knots.tolist()},
            "wall": None if self.wall is None else {"bounds": list(self.wall.bounds),
                                                    "decay": self.wall.decay},
            "acceptance": self.acceptance,
            "retained": len(self),
            "delta": self.delta,
            "n_transitions": self.n_transitions,
        }
        with open(os.path.join(outdir, "chain.json"), "w") as fh:
            json.dump(meta, fh, indent=2)

    @classmethod
    def load(cls, outdir) -> "PosteriorChain":
        with open(os.path.join(outdir, "chain.json")) as fh:
            meta = json.load(fh)
        cfg = ChainConfig.from_dict(meta["config"])
        bx = SplineBasis(meta["basis_x"]["order"], np.array(meta["basis_x"]["knots"]))
        by = SplineBasis(meta["basis_y"]["order"], np.array(meta["basis_y"]["knots"]))
        wall = None if meta["wall"] is None else WallField(tuple(meta["wall"]["bounds"]),
                                                           meta["wall"]["decay"])
        n_coef = bx.count * by.count
        sc = _read_matrix(os.path.join(outdir, "scalars.csv"), len(SCALAR_COLUMNS) + 2)
        scalars = {n: sc[:, j] for j, n in enumerate(SCALAR_COLUMNS)}
        gamma = _read_matrix(os.path.join(outdir, "gamma.csv"), n_coef)
        alpha = _read_matrix(os.path.join(outdir, "alpha.csv"), n_coef)
        return cls(cfg, bx, by, wall, scalars, gamma, alpha, sc[:, -2], sc[:, -1],
                   meta["acceptance"], None, meta.get("delta", float("nan")),
                   meta.get("n_transitions", 0))


def _read_matrix(path, ncol) -> np.ndarray:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if arr.size == 0:
        return np.zeros((0, ncol))
    return arr[:, 1:]


def _mh_targets(model: Model, cfg: ChainConfig) -> list[str]:
    t = []
    if model.gamma_free:
        t.append("rho_gamma")
    if model.alpha_free:
        t.append("rho_alpha")
    t.append("mu_alpha")
    if model.wall is not None and cfg.sample_r1:
        t.append("r1")
    return t


def make_initial_state(model: Model, cfg: ChainConfig) -> ChainState:
    state = initial_state(model)
    pri = Priors(**cfg.priors) if cfg.priors else state.params.priors
    kw = dict(cfg.initial)
    state.params = state.params.replace(priors=pri, **kw)
    state.alpha = np.full(model.n_coef, state.params.mu_alpha if model.alpha_free else 1.0)
    return state


def gibbs_sweep(model: Model, state: ChainState, rng, steps: dict, velocity_update="block"):
    """One full sweep; returns the updated state (a fresh object)."""
    s = state.copy()
    s.vx, s.vy = C.sample_velocities(model, s, rng, velocity_update)
    s.params = s.params.replace(beta=C.sample_beta(model, s, rng))
    s.params = s.params.replace(kappa2=C.sample_kappa2(model, s, rng))
    if model.gamma_free:
        s.gamma = C.sample_gamma(model, s, rng)
    if model.alpha_free:
        s.alpha = C.sample_alpha(model, s, rng)
    if model.gamma_free:
        s.params = s.params.replace(tau_gamma=C.sample_tau_gamma(model, s, rng))
    for target, step in steps.items():
        s, _ = mh_update(target, model, s, rng, step)
    s.log_joint = None
    return s


def run_chain(data: TrajectorySet, config: ChainConfig, model: Model | None = None,
              state: ChainState | None = None, callback=None) -> PosteriorChain:
    """Run the sampler and retain every ``thin``-th post-burn-in state.

    ``callback(it, state)`` is invoked after each sweep when given.
    """
    model = model if model is not None else config.build_model(data)
    rng = np.random.default_rng(config.seed)
    state = state if state is not None else make_initial_state(model, config)
    steps = {t: AdaptiveStep(scale=config.mh_scale, batch=config.adapt_batch)
             for t in _mh_targets(model, config)}
    n_keep = max(config.iterations - config.burn_in, 0) // config.thin
    scal = {n: np.empty(n_keep) for n in SCALAR_COLUMNS}
    gam = np.empty((n_keep, model.n_coef))
    alp = np.empty((n_keep, model.n_coef))
    lj = np.empty(n_keep)
    perr = np.empty(n_keep)
    k = 0
    for it in range(config.iterations):
        if it == config.burn_in:
            for st in steps.values():
                st.freeze()
        try:
            state = gibbs_sweep(model, state, rng, steps, config.velocity_update)
        except NumericError as exc:
            raise NumericError(str(exc), step=it) from None
        if callback is not None:
            callback(it, state)
        if it >= config.burn_in and (it - config.burn_in) % config.thin == config.thin - 1:
            if k < n_keep:
                for n in SCALAR_COLUMNS:
                    scal[n][k] = getattr(state.params, n)
                gam[k] = state.gamma
                alp[k] = state.alpha
                try:
                    val = model.log_joint(state)
                except NumericError as exc:
                    raise NumericError(str(exc), step=it) from None
                if not math.isfinite(val):
                    raise NumericError("non-finite log joint", step=it)
                lj[k] = val
                perr[k] = model.prediction_error(state)
                k += 1
    acc = {t: {"rate": st.rate, "scale": st.scale} for t, st in steps.items()}
    if config.iterations <= config.burn_in:
        acc = {t: {"rate": float("nan"), "scale": st.scale} for t, st in steps.items()}
    return PosteriorChain(config, model.basis_x, model.basis_y, model.wall, scal, gam, alp,
                          lj, perr, acc, final_state=state, delta=model.delta,
                          n_transitions=model.n_trans)
