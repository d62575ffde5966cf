import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from conftest import random_state
from svsde.errors import ArgumentError
from svsde.inference import AdaptiveStep, initial_state, mh_update
from svsde.inference.mh import transform_for
from svsde.params import Priors


@pytest.mark.parametrize("target", ["rho_gamma", "rho_alpha", "mu_alpha", "r1"])
@given(u=st.floats(-30, 30))
def test_transforms_round_trip(target, u):
    to_u, from_u, log_jac = transform_for(target, Priors())
    theta = from_u(u)
    if target.startswith("rho"):
        assert 0.01 <= theta <= 0.99
        if 0.0101 < theta < 0.9899:
            assert to_u(theta) == pytest.approx(u, abs=1e-6)
    elif target == "r1":
        assert theta > 0 and to_u(theta) == pytest.approx(u)
    assert math.isfinite(log_jac(u))


@pytest.mark.parametrize("target", ["rho_gamma", "r1"])
def test_log_jacobian_matches_numeric_derivative(target):
    _, from_u, log_jac = transform_for(target, Priors())
    for u in (-3.0, -0.2, 0.0, 1.5):
        h = 1e-6
        num = (from_u(u + h) - from_u(u - h)) / (2 * h)
        assert log_jac(u) == pytest.approx(math.log(num), abs=1e-6)


def test_unknown_target(tiny):
    with pytest.raises(ArgumentError):
        mh_update("beta", tiny, initial_state(tiny), np.random.default_rng(0), AdaptiveStep())


def test_adaptive_step_batches():
    st_ = AdaptiveStep(scale=1.0, batch=10)
    for _ in range(10):
        st_.record(False)
    assert st_.scale < 1.0
    low = st_.scale
    for _ in range(10):
        st_.record(True)
    assert st_.scale > low
    st_.freeze()
    assert st_.proposed == 0 and math.isnan(st_.rate)
    frozen = st_.scale
    for _ in range(100):
        st_.record(False)
    assert st_.scale == frozen and st_.rate == 0.0


def test_controlled_gaussian_target(tiny):
    rng = np.random.default_rng(3)
    s = initial_state(tiny)

    def target(state):
        return -0.5 * (state.params.mu_alpha - 2.0) ** 2 / 0.3 ** 2

    step = AdaptiveStep(scale=5.0)
    for _ in range(3000):
        s, _ = mh_update("mu_alpha", tiny, s, rng, step, log_target=target)
    step.freeze()
    draws = []
    for _ in range(5000):
        s, _ = mh_update("mu_alpha", tiny, s, rng, step, log_target=target)
        draws.append(s.params.mu_alpha)
    assert 0.2 < step.rate < 0.5
    assert abs(np.mean(draws) - 2.0) < 0.05


def test_outside_support_is_rejected(tiny):
    rng = np.random.default_rng(4)
    s = initial_state(tiny).with_params(mu_alpha=-1.0)

    def target(state):
        return -math.inf if state.params.mu_alpha > -0.5 else 0.0

    step = AdaptiveStep(scale=2.0)
    for _ in range(500):
        s, _ = mh_update("mu_alpha", tiny, s, rng, step, log_target=target)
        assert s.params.mu_alpha <= -0.5


def test_rejection_keeps_state_object(tiny):
    rng = np.random.default_rng(5)
    s = initial_state(tiny)
    out, acc = mh_update("mu_alpha", tiny, s, rng, AdaptiveStep(),
                         log_target=lambda st_: 0.0 if st_ is s else -math.inf)
    assert out is s and acc is False


def test_r1_stays_positive(tiny_walled):
    rng = np.random.default_rng(6)
    s = random_state(tiny_walled, rng, r1=2.0)
    step = AdaptiveStep(scale=1.0)
    for _ in range(300):
        s, _ = mh_update("r1", tiny_walled, s, rng, step)
        assert s.params.r1 > 0


@pytest.mark.slow
def test_mu_alpha_marginal_matches_quadrature(tiny):
    rng = np.random.default_rng(7)
    s = random_state(tiny, rng)
    grid = np.linspace(0.05, 4.0, 4000)
    lp = np.array([tiny.log_prior(s.with_params(mu_alpha=m)) for m in grid])
    dens = np.exp(lp - lp.max())
    cdf = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
    cdf /= cdf[-1]
    step = AdaptiveStep(scale=0.5)
    cur = s
    for _ in range(2000):
        cur, _ = mh_update("mu_alpha", tiny, cur, rng, step)
    step.freeze()
    draws = []
    for i in range(100_000):
        cur, _ = mh_update("mu_alpha", tiny, cur, rng, step)
        if i % 10 == 9:
            draws.append(cur.params.mu_alpha)
    ks = stats.kstest(draws, lambda x: np.interp(x, grid, cdf)).statistic
    assert ks < 0.05
