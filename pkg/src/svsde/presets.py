"""Named simulation setups used by the CLI, the tests and the benchmarks."""
from __future__ import annotations

import inspect
from dataclasses import dataclass

from .errors import ArgumentError
from .geometry import four_chamber_nest
from .params import ModelParams
from .sde import SimConfig, SimState
from .surfaces import AnalyticField, WallField


@dataclass(frozen=True)
class Preset:
    config: SimConfig
    params: ModelParams
    n_individuals: int
    description: str


def recovery_preset(seed: int = 2024, n_obs: int = 6000, n_individuals: int = 5) -> Preset:
    """Quadratic well with slow movement in quadrant I."""
    cfg = SimConfig(delta=0.1, n_steps=n_obs - 1, initial=SimState(0.0, 0.0), seed=seed,
                    potential=AnalyticField.quadratic(1.0, 1.0),
                    motility=AnalyticField.quadrant(0.25, 1.0))
    params = ModelParams(beta=1.5, sigma2=1.0, kappa2=0.01)
    return Preset(cfg, params, n_individuals,
                  "beta=1.5, sigma2=1, kappa2=0.01, H=x^2+y^2, M=0.25 in quadrant I else 1")


def thinning_preset(seed: int = 7, n_obs: int = 5000, n_individuals: int = 10) -> Preset:
    """Shallow quadratic well with a diamond-shaped motility peak at the origin."""
    cfg = SimConfig(delta=0.1, n_steps=n_obs - 1, initial=SimState(0.0, 0.0), seed=seed,
                    potential=AnalyticField.quadratic(0.05, 0.05),
                    motility=AnalyticField.diamond(1.0, 0.25))
    params = ModelParams(beta=0.8, sigma2=1.0, kappa2=1e-4)
    return Preset(cfg, params, n_individuals,
                  "beta=0.8, sigma2=1, kappa2=1e-4, H=0.05(x^2+y^2), M=[1-0.25(|x|+|y|)]+")


def spread_preset(seed: int = 11, n_steps: int = 20000) -> Preset:
    """Desk-scale spread through the four-chamber nest (mm, seconds)."""
    geo = four_chamber_nest()
    xl, xu, yl, yu = geo.bounds
    cfg = SimConfig(delta=1.0, n_steps=n_steps, initial=SimState(*geo.exit), seed=seed,
                    potential=AnalyticField.zero(), motility=AnalyticField.constant(1.0),
                    wall=WallField((xl, xu, yl, yu), 1.0), truncate_walls=True, geometry=geo)
    params = ModelParams(beta=0.5, sigma2=9.0, kappa2=0.25)
    return Preset(cfg, params, 100, "four-chamber nest, flat potential, unit motility")


PRESETS = {"recovery": recovery_preset, "A5": recovery_preset,
           "thinning": thinning_preset, "A4": thinning_preset,
           "spread": spread_preset, "A6": spread_preset}


def get_preset(name: str, **kw) -> Preset:
    """Build a named preset; keyword options the preset does not take are ignored."""
    try:
        fn = PRESETS[name]
    except KeyError:
        raise ArgumentError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    accepted = inspect.signature(fn).parameters
    return fn(**{k: v for k, v in kw.items() if k in accepted})
