"""Posterior sampling for the spatially varying SDE model."""
from .chain import ChainConfig, PosteriorChain, gibbs_sweep, make_initial_state, run_chain
from .conditionals import (sample_alpha, sample_beta, sample_gamma, sample_kappa2,
                           sample_tau_gamma, sample_velocities, velocity_site_conditional)
from .diagnostics import batch_means_mcse
from .mh import MH_TARGETS, AdaptiveStep, mh_update
from .model import ChainState, Model, data_domain, initial_state, log_joint

__all__ = [
    "ChainConfig", "PosteriorChain", "gibbs_sweep", "make_initial_state", "run_chain",
    "sample_alpha", "sample_beta", "sample_gamma", "sample_kappa2", "sample_tau_gamma",
    "sample_velocities", "velocity_site_conditional", "batch_means_mcse", "MH_TARGETS",
    "AdaptiveStep", "mh_update", "ChainState", "Model", "data_domain", "initial_state",
    "log_joint",
]
