import math

import numpy as np
import pytest
from scipy import stats
from scipy.interpolate import BSpline

from conftest import random_state, tiny_data, tiny_model
from svsde.data_io import Individual, Segment, TrajectorySet
from svsde.errors import ArgumentError, NumericError
from svsde.inference import ChainConfig, Model, initial_state, log_joint
from svsde.inference.model import data_domain, normalize_variant
from svsde.surfaces import SplineBasis, TensorSurface, WallField


def scripted_log_joint(x, y, vx, vy, delta, bx, by, wall, p, gamma, alpha):
    """Density written out term by term with scipy distributions."""
    k = bx.order - 1
    nb = bx.count
    total = 0.0
    for i in range(len(x) - 1):
        phi = BSpline.design_matrix([x[i]], bx.knots, k).toarray()[0]
        psi = BSpline.design_matrix([y[i]], by.knots, k).toarray()[0]
        dphi = np.array([BSpline(bx.knots, np.eye(nb)[j], k).derivative()(x[i]) for j in range(nb)])
        dpsi = np.array([BSpline(by.knots, np.eye(nb)[j], k).derivative()(y[i]) for j in range(nb)])
        G = gamma.reshape(nb, nb)
        A = alpha.reshape(nb, nb)
        hx = dphi @ G @ psi
        hy = phi @ G @ dpsi
        if wall is not None:
            xl, xu, yl, yu = wall.bounds
            r = wall.decay
            hx += -r * math.exp(-r * (x[i] - xl)) + r * math.exp(r * (x[i] - xu))
            hy += -r * math.exp(-r * (y[i] - yl)) + r * math.exp(r * (y[i] - yu))
        m = phi @ A @ psi
        sd_v = math.sqrt(p.sigma2 * delta)
        sd_x = math.sqrt(p.kappa2 * delta)
        total += stats.norm.logpdf(vx[i + 1], vx[i] + p.beta * (-hx - vx[i]) * delta, sd_v)
        total += stats.norm.logpdf(vy[i + 1], vy[i] + p.beta * (-hy - vy[i]) * delta, sd_v)
        total += stats.norm.logpdf(x[i + 1], x[i] + m * vx[i] * delta, sd_x)
        total += stats.norm.logpdf(y[i + 1], y[i] + m * vy[i] * delta, sd_x)
    pr = p.priors
    sd_v1 = math.sqrt(pr.tau_v1)
    total += stats.norm.logpdf(vx[0], 0, sd_v1) + stats.norm.logpdf(vy[0], 0, sd_v1)
    sd_b = math.sqrt(pr.tau_beta)
    total += stats.truncnorm.logpdf(p.beta, -pr.mu_beta / sd_b, np.inf, pr.mu_beta, sd_b)
    total += stats.invgamma.logpdf(p.kappa2, pr.a_kappa, scale=pr.b_kappa)
    total += stats.norm.logpdf(p.mu_alpha, pr.mu_mu_alpha, math.sqrt(pr.var_mu_alpha))
    n = nb * nb
    Q = np.zeros((n, n))
    for a in range(nb):
        for b in range(nb):
            for c, d in ((a + 1, b), (a, b + 1)):
                if c < nb and d < nb:
                    Q[a * nb + b, c * nb + d] = Q[c * nb + d, a * nb + b] = 1
    D = np.diag(Q.sum(axis=1))
    cov_g = np.linalg.inv(p.tau_gamma * (D - p.rho_gamma * Q))
    total += stats.multivariate_normal.logpdf(gamma, np.zeros(n), cov_g)
    cov_a = np.linalg.inv(p.tau_alpha / p.mu_alpha ** 2 * (D - p.rho_alpha * Q))
    total += stats.multivariate_normal.logpdf(alpha, np.full(n, p.mu_alpha), cov_a)
    total += stats.expon.logpdf(p.tau_gamma, scale=1 / p.mu_alpha ** 2)
    total += 2 * stats.uniform.logpdf(p.rho_gamma, pr.rho_lo, pr.rho_hi - pr.rho_lo)
    if wall is not None:
        total += stats.lognorm.logpdf(wall.decay, pr.r1_sdlog, scale=math.exp(pr.r1_meanlog))
    return total


@pytest.mark.parametrize("with_wall", [False, True])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_log_joint_matches_scripted_density(with_wall, seed):
    rng = np.random.default_rng(seed)
    data = tiny_data(n_individuals=1, n_steps=5, seed=seed)
    wall = {"bounds": [-1.0, 1.0, -1.0, 1.0], "decay": 1.5} if with_wall else None
    model = tiny_model(data, wall=wall)
    s = random_state(model, rng, r1=1.5)
    seg = data.individuals[0].segments[0]
    w = None if model.wall is None else model.wall.with_decay(1.5)
    ref = scripted_log_joint(seg.x, seg.y, s.vx, s.vy, data.delta, model.basis_x,
                             model.basis_y, w, s.params, s.gamma, s.alpha)
    assert log_joint(s, model) == pytest.approx(ref, abs=1e-10, rel=1e-12)


def test_log_joint_additive_over_individuals(rng):
    data = tiny_data(n_individuals=2)
    dom = data_domain(data)
    cfg = ChainConfig(basis=(3, 3), order=3, domain=dom)
    both = cfg.build_model(data)
    s = random_state(both, rng)
    n1 = len(data.individuals[0].segments[0])
    parts = []
    for j, sl in ((0, slice(0, n1)), (1, slice(n1, None))):
        sub = cfg.build_model(TrajectorySet([data.individuals[j]], data.delta))
        sj = s.copy()
        sj.vx, sj.vy = s.vx[sl].copy(), s.vy[sl].copy()
        parts.append(sub.log_likelihood(sj))
    total = both.log_joint(s)
    assert total == pytest.approx(parts[0] + parts[1] + both.log_prior(s), abs=1e-9)


def test_constant_shift_changes_only_gamma_prior(tiny, rng):
    s = random_state(tiny, rng)
    t = s.copy()
    t.gamma = s.gamma + 0.7
    assert tiny.log_likelihood(t) == pytest.approx(tiny.log_likelihood(s), abs=1e-9)
    p = s.params
    dq = tiny.car.quad(t.gamma, p.rho_gamma) - tiny.car.quad(s.gamma, p.rho_gamma)
    assert tiny.log_joint(t) - tiny.log_joint(s) == pytest.approx(-0.5 * p.tau_gamma * dq,
                                                                   abs=1e-9)


def test_support_violations_give_minus_inf(tiny, rng):
    s = random_state(tiny, rng)
    for kw in (dict(beta=-0.1), dict(kappa2=0.0), dict(rho_gamma=0.995), dict(rho_alpha=0.005)):
        assert tiny.log_joint(s.with_params(**kw)) == -math.inf


def test_log_joint_nan_raises(tiny, rng):
    s = random_state(tiny, rng)
    s.vx[3] = np.nan
    with pytest.raises(NumericError):
        tiny.log_joint(s)


def test_variants_drop_fixed_surface_priors(rng):
    data = tiny_data()
    full = tiny_model(data)
    h0 = tiny_model(data, variant="h0")
    m1 = tiny_model(data, variant="M1")
    assert (h0.gamma_free, h0.alpha_free) == (False, True)
    assert (m1.gamma_free, m1.alpha_free) == (True, False)
    s = random_state(h0, rng)
    assert np.all(s.gamma == 0)
    # h0 ignores the gamma hyperparameters entirely
    assert h0.log_joint(s.with_params(rho_gamma=5.0)) == h0.log_joint(s)
    sm = random_state(m1, rng)
    assert np.all(sm.alpha == 1.0)
    assert m1.log_joint(sm.with_params(rho_alpha=5.0)) == m1.log_joint(sm)
    assert full.n_coef == 9


def test_normalize_variant():
    assert [normalize_variant(v) for v in ("full", "H0", "M≡1")] == ["full", "h0", "m1"]
    with pytest.raises(ArgumentError):
        normalize_variant("both")


def test_model_layout(tiny):
    assert tiny.n_obs == 102 and tiny.n_trans == 100
    assert tiny.is_first.sum() == 2
    assert not tiny.has_next[50] and tiny.is_first[51]
    np.testing.assert_allclose(tiny.B.sum(axis=1), 1.0, atol=1e-12)


def test_model_designs_match_surface(tiny, rng):
    g = rng.normal(size=9)
    a = rng.uniform(0.5, 1.5, 9)
    gx, gy = tiny.spline_grad(g)
    m = tiny.motility(a)
    hs = TensorSurface(tiny.basis_x, tiny.basis_y, g.reshape(3, 3))
    ms = TensorSurface(tiny.basis_x, tiny.basis_y, a.reshape(3, 3))
    for i in range(0, tiny.n_obs, 17):
        np.testing.assert_allclose((gx[i], gy[i]), hs.gradient(tiny.x[i], tiny.y[i]), atol=1e-12)
        assert m[i] == pytest.approx(ms.evaluate(tiny.x[i], tiny.y[i]), abs=1e-12)


def test_wall_gradient_cache(tiny_walled):
    a = tiny_walled.wall_grad(2.0)
    b = tiny_walled.wall_grad(3.0)
    w = WallField(tiny_walled.wall.bounds, 3.0).evaluate_many(tiny_walled.x, tiny_walled.y)
    np.testing.assert_array_equal(b[0], w[:, 1])
    assert not np.array_equal(a[0], b[0])


def test_initial_state_defaults(tiny):
    s = initial_state(tiny)
    p = s.params
    assert p.beta == 1.0 and p.mu_alpha == 1.0 and p.sigma2 == 1.0
    disp = np.concatenate([tiny.dx[tiny.tr], tiny.dy[tiny.tr]])
    assert p.kappa2 == pytest.approx(np.var(disp) * 0.01)
    np.testing.assert_allclose(s.vx[tiny.tr], tiny.dx[tiny.tr] / tiny.delta)
    assert np.all(s.gamma == 0) and np.all(s.alpha == 1.0)
    assert math.isfinite(tiny.log_joint(s))


def test_model_rejects_empty_data():
    with pytest.raises(ArgumentError):
        b = SplineBasis.uniform(0, 1, 3, 3)
        Model(TrajectorySet([], 1.0), b, b)


def test_prediction_error_definition(tiny, rng):
    s = random_state(tiny, rng)
    m = tiny.motility(s.alpha)
    tr = tiny.tr
    px = tiny.x[tr] + m[tr] * s.vx[tr] * tiny.delta
    py = tiny.y[tr] + m[tr] * s.vy[tr] * tiny.delta
    ref = np.mean(np.hypot(tiny.x[tr + 1] - px, tiny.y[tr + 1] - py))
    assert tiny.prediction_error(s) == pytest.approx(ref, rel=1e-12)


def test_single_point_segments_have_no_transitions():
    inds = [Individual("a", [Segment([1], [0.2], [0.3]), Segment([5], [0.6], [0.1])])]
    b = SplineBasis.uniform(0, 1, 3, 3)
    m = Model(TrajectorySet(inds, 1.0), b, b)
    assert m.n_trans == 0 and m.is_first.all()
