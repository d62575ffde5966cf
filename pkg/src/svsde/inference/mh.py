"""Random-walk Metropolis for parameters without closed-form conditionals."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError

MH_TARGETS = ("rho_gamma", "rho_alpha", "mu_alpha", "r1")

# parameters whose value does not enter the likelihood
_PRIOR_ONLY = {"rho_gamma", "rho_alpha", "mu_alpha"}


def _logit_transform(lo, hi):
    width = hi - lo

    def to_u(theta):
        p = (theta - lo) / width
        return math.log(p) - math.log1p(-p)

    def from_u(u):
        return lo + width * _expit(u)

    def log_jac(u):
        # log d theta / d u
        return math.log(width) - _softplus(-u) - _softplus(u)

    return to_u, from_u, log_jac


def _expit(u):
    if u >= 0:
        return 1.0 / (1.0 + math.exp(-u))
    e = math.exp(u)
    return e / (1.0 + e)


def _softplus(u):
    return max(u, 0.0) + math.log1p(math.exp(-abs(u)))


def transform_for(target: str, priors):
    """(to_u, from_u, log_jac) mapping the parameter to the real line."""
    if target in ("rho_gamma", "rho_alpha"):
        return _logit_transform(priors.rho_lo, priors.rho_hi)
    if target == "r1":
        return (lambda t: math.log(t) if t > 0 else -math.inf, math.exp, lambda u: u)
    if target == "mu_alpha":
        return (lambda t: t, lambda u: u, lambda u: 0.0)
    raise ArgumentError(f"unknown Metropolis target {target!r}")


@dataclass
class AdaptiveStep:
    """Proposal scale tuned in batches toward the 20-40% acceptance band."""

    scale: float = 0.5
    batch: int = 50
    lo: float = 0.2
    hi: float = 0.4
    frozen: bool = False
    accepted: int = 0
    proposed: int = 0
    _batch_acc: int = 0
    _batch_n: int = 0
    _n_batches: int = 0

    def record(self, accepted: bool) -> None:
        self.proposed += 1
        self.accepted += int(accepted)
        if self.frozen:
            return
        self._batch_n += 1
        self._batch_acc += int(accepted)
        if self._batch_n >= self.batch:
            rate = self._batch_acc / self._batch_n
            self._n_batches += 1
            step = min(1.0, 3.0 / math.sqrt(self._n_batches))
            if rate < self.lo:
                self.scale *= math.exp(-step)
            elif rate > self.hi:
                self.scale *= math.exp(step)
            self._batch_acc = self._batch_n = 0

    def freeze(self) -> None:
        self.frozen = True
        self.accepted = self.proposed = 0

    @property
    def rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")


def mh_update(target: str, model, state, rng, step: AdaptiveStep, log_target=None):
    """One random-walk Metropolis step on ``target``.

    ``log_target(state) -> float`` replaces the model density when given.
    Returns ``(state, accepted)``; the state is a new object on acceptance.
    """
    if target not in MH_TARGETS:
        raise ArgumentError(f"unknown Metropolis target {target!r}")
    p = state.params
    to_u, from_u, log_jac = transform_for(target, p.priors)
    if log_target is None:
        log_target = model.log_prior if target in _PRIOR_ONLY else model.log_joint
    u0 = to_u(getattr(p, target))
    u1 = u0 + step.scale * rng.standard_normal()
    theta1 = from_u(u1)
    log_u = math.log(rng.uniform())
    ok = math.isfinite(theta1)
    if ok:
        try:
            prop = state.with_params(**{target: theta1})
        except ArgumentError:
            ok = False
    if ok:
        lt1 = log_target(prop)
        ok = math.isfinite(lt1)
    if ok:
        lt0 = log_target(state)
        log_r = lt1 + log_jac(u1) - lt0 - log_jac(u0)
        ok = log_u < log_r
    step.record(ok)
    return (prop, True) if ok else (state, False)
