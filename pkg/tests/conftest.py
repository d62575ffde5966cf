import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from svsde.data_io import from_simulation
from svsde.inference import ChainConfig, Model, initial_state
from svsde.params import ModelParams
from svsde.sde import SimConfig, SimState, simulate_individuals
from svsde.surfaces import AnalyticField, SplineBasis

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def tiny_data(n_individuals=2, n_steps=50, seed=3, delta=0.1):
    """Short paths from a quadratic well with a motility step; used by the oracle tests."""
    cfg = SimConfig(delta=delta, n_steps=n_steps, initial=SimState(0.1, -0.2, 0.5, 0.3),
                    seed=seed, potential=AnalyticField.quadratic(1.0, 1.0),
                    motility=AnalyticField.quadrant(0.5, 1.0))
    params = ModelParams(beta=1.5, sigma2=1.0, kappa2=0.01)
    return from_simulation(simulate_individuals(cfg, params, n_individuals), delta)


def tiny_model(data=None, variant="full", wall=None, count=3, order=3):
    data = tiny_data() if data is None else data
    cfg = ChainConfig(basis=(count, count), order=order, variant=variant, wall=wall)
    return cfg.build_model(data)


def random_state(model, rng, **params):
    """A valid sampler state with nonzero surfaces, for density checks."""
    s = initial_state(model)
    n = model.n_coef
    kw = dict(beta=rng.uniform(0.5, 2.5), kappa2=rng.uniform(0.005, 0.05),
              tau_gamma=rng.uniform(0.5, 3.0), mu_alpha=rng.uniform(0.6, 1.4),
              rho_gamma=rng.uniform(0.1, 0.9), rho_alpha=rng.uniform(0.1, 0.9))
    kw.update(params)
    s.params = s.params.replace(**kw)
    s.vx = s.vx + rng.normal(0, 0.2, s.vx.size)
    s.vy = s.vy + rng.normal(0, 0.2, s.vy.size)
    if model.gamma_free:
        g = rng.normal(0, 0.5, n)
        s.gamma = g - g.mean()
    if model.alpha_free:
        s.alpha = rng.uniform(0.6, 1.4, n)
    return s


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def tiny():
    return tiny_model()


@pytest.fixture(scope="session")
def tiny_walled():
    return tiny_model(wall={"bounds": [-1.5, 1.5, -1.5, 1.5], "decay": 2.0})


@pytest.fixture(scope="session")
def basis8():
    return SplineBasis.uniform(0.0, 1.0, 8, 4)


# -- acceptance gate reporting ---------------------------------------------

GATE_LINES: dict[int, str] = {}


@pytest.fixture
def gate():
    """``gate(n, ok, detail)`` records the PASS/FAIL line for criterion ``n``."""
    def record(n, ok, detail):
        GATE_LINES[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(GATE_LINES[n])
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if GATE_LINES:
        terminalreporter.section("acceptance gate")
        for n in sorted(GATE_LINES):
            terminalreporter.write_line(GATE_LINES[n])
