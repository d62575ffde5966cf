"""Scalar model parameters and prior hyperparameters."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace, asdict

from .errors import ArgumentError


@dataclass(frozen=True)
class Priors:
    """Prior hyperparameters.

    beta ~ N(mu_beta, tau_beta) truncated to beta > 0 (``tau_beta`` is a variance);
    kappa2 ~ InvGamma(a_kappa, b_kappa); initial velocities ~ N(0, tau_v1);
    mu_alpha ~ N(mu_mu_alpha, var_mu_alpha); log r1 ~ N(r1_meanlog, r1_sdlog**2);
    rho ~ Uniform(rho_lo, rho_hi).
    """

    mu_beta: float = 1.0
    tau_beta: float = 10000.0
    a_kappa: float = 0.001
    b_kappa: float = 0.001
    tau_v1: float = 1000.0
    mu_mu_alpha: float = 1.0
    var_mu_alpha: float = 1.0
    r1_meanlog: float = 10.0
    r1_sdlog: float = 1.0
    rho_lo: float = 0.01
    rho_hi: float = 0.99

    def __post_init__(self):
        for name in ("tau_beta", "a_kappa", "b_kappa", "tau_v1", "var_mu_alpha", "r1_sdlog"):
            if not getattr(self, name) > 0:
                raise ArgumentError(f"prior hyperparameter {name} must be positive")
        if not 0.0 <= self.rho_lo < self.rho_hi <= 1.0:
            raise ArgumentError("rho prior bounds must satisfy 0 <= lo < hi <= 1")


@dataclass(frozen=True)
class ModelParams:
    beta: float = 1.0
    sigma2: float = 1.0
    kappa2: float = 0.01
    r1: float = 1.0
    mu_alpha: float = 1.0
    tau_gamma: float = 1.0
    tau_alpha: float = 9.0
    rho_gamma: float = 0.5
    rho_alpha: float = 0.5
    priors: Priors = field(default_factory=Priors)

    def __post_init__(self):
        for name in ("r1", "tau_gamma", "tau_alpha"):
            if not getattr(self, name) > 0:
                raise ArgumentError(f"{name} must be positive, got {getattr(self, name)!r}")
        # zero noise is allowed for deterministic simulation
        for name in ("sigma2", "kappa2"):
            if not getattr(self, name) >= 0:
                raise ArgumentError(f"{name} must be nonnegative, got {getattr(self, name)!r}")

    SCALARS = ("beta", "sigma2", "kappa2", "r1", "mu_alpha", "tau_gamma", "tau_alpha",
               "rho_gamma", "rho_alpha")

    def replace(self, **kw) -> "ModelParams":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        d = dict(d)
        pri = d.pop("priors", None)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ArgumentError(f"unknown parameter(s): {sorted(unknown)}")
        if pri is not None and not isinstance(pri, Priors):
            pri = Priors(**pri)
        return cls(**d, **({"priors": pri} if pri is not None else {}))
