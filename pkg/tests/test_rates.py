from __future__ import annotations

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ldhit.errors import DualSolveFailed, NoInteriorMinimum, NotInCramerRange
from ldhit.rates import RateEvaluator

from oracles import (
    G,
    LAM_STAR,
    MU,
    SIGMA,
    fd_grad,
    fd_hess,
    gauss_D,
    gauss_Lambda,
    gauss_t,
    legendre_bruteforce,
    second_rate_bruteforce,
)

D_REF = 2.22939


@pytest.mark.parametrize("alpha, lam, tol", [
    (MU, [0.0, 0.0], 1e-12),
    ([0.2874500, 0.4594125], LAM_STAR, 1e-6),
    ([0.3354102, 0.4472136], [0.596727, 0.667138], 5e-5),
])
def test_lambda_of_alpha(ev, alpha, lam, tol):
    assert np.allclose(ev.lambda_of_alpha(alpha), lam, atol=tol)


def test_lambda_of_alpha_residual(ev):
    alpha = np.array([2.0, -1.0])
    lam = ev.lambda_of_alpha(alpha)
    assert np.linalg.norm(ev.model.cgf_grad(lam) - alpha) <= 1e-10 * (1 + np.linalg.norm(alpha))


def test_not_in_cramer_range(sa_model):
    # with unit premiums xi_1 - xi_2 = 0.2 X >= 0, so every tilted mean has alpha_1 > alpha_2
    ev = RateEvaluator(sa_model)
    with pytest.raises(NotInCramerRange):
        ev.lambda_of_alpha([-1.0, 1.0])


@pytest.mark.parametrize("alpha", [MU, G, [0.3354102, 0.4472136], [-2.0, 1.0]])
def test_rate_Lambda_closed_form(ev, alpha):
    assert ev.rate_Lambda(alpha) == pytest.approx(gauss_Lambda(alpha), abs=1e-12)


def test_rate_Lambda_at_alpha_star(ev):
    r = gauss_t(G)
    assert ev.rate_Lambda(r * G) == pytest.approx(r * gauss_D(G), rel=1e-10)
    assert ev.rate_Lambda([0.3354102, 0.4472136]) == pytest.approx(0.498515, abs=2e-5)


def test_rate_hess_is_inverse_sigma(ev):
    for alpha in ([0.0, 0.0], G, [-3.0, 5.0]):
        assert np.allclose(ev.rate_hess(alpha), np.linalg.inv(SIGMA), atol=1e-12)
        assert ev.sigma2(alpha) == pytest.approx(0.672, rel=1e-12)


@pytest.mark.parametrize("alpha", [[-0.35, -0.55], [-0.2, -0.4], [-0.3, -0.6]])
def test_sparre_andersen_rate_hess(sa_model, alpha):
    ev = RateEvaluator(sa_model)
    alpha = np.array(alpha)
    hess = ev.rate_hess(alpha)
    assert np.allclose(hess @ sa_model.cgf_hess(ev.lambda_of_alpha(alpha)), np.eye(2), atol=1e-8)
    assert np.allclose(hess, fd_hess(ev.rate_Lambda, alpha), rtol=1e-4, atol=1e-4)


@pytest.mark.parametrize("alpha", [[-0.35, -0.55], [-0.1, -0.2], [0.4, 0.1]])
def test_gradient_identity(sa_model, alpha):
    ev = RateEvaluator(sa_model)
    lam = ev.lambda_of_alpha(alpha)
    assert np.allclose(lam, fd_grad(ev.rate_Lambda, np.array(alpha)), rtol=1e-5, atol=1e-7)


def test_legendre_grid_oracle(ev):
    worst = 0.0
    for a1 in np.linspace(-2.0, 2.0, 21):
        for a2 in np.linspace(-2.0, 2.0, 21):
            alpha = np.array([a1, a2])
            worst = max(worst, abs(ev.rate_Lambda(alpha) - legendre_bruteforce(ev.model.cgf, alpha, box=8.0)))
    assert worst <= 1e-3


def test_legendre_oracle_sparre_andersen(sa_model):
    ev = RateEvaluator(sa_model)
    for alpha in ([-0.4, -0.6], [-0.1, -0.5], [0.5, 0.2], [-0.8, -0.9]):
        assert ev.rate_Lambda(alpha) == pytest.approx(legendre_bruteforce(sa_model.cgf, alpha, box=3.0), abs=1e-3)


def test_second_rate_reference_value(ev):
    res = ev.second_rate_D(G)
    assert res.D == pytest.approx(D_REF, abs=1e-4)
    assert res.D == pytest.approx(gauss_D(G), rel=1e-12)
    assert res.t == pytest.approx(0.2236069, abs=2e-7)
    assert res.u == pytest.approx(1 / res.t)


def test_second_rate_at_mean(ev):
    res = ev.second_rate_D(MU)
    assert res.D == pytest.approx(0.0, abs=1e-12)
    assert res.t == pytest.approx(1.0, abs=1e-6)


def test_second_rate_homogeneous(ev):
    one, two = ev.second_rate_D(G), ev.second_rate_D(2 * G)
    assert two.D == pytest.approx(4.45874, abs=1e-4)
    assert two.D == pytest.approx(2 * one.D, rel=1e-9)
    assert two.t == pytest.approx(one.t / 2, rel=1e-9)


def test_second_rate_first_order_condition(ev):
    res = ev.second_rate_D(G)
    phi = lambda t: ev.rate_Lambda(t * G) / t
    h = 1e-5
    assert abs(phi(res.t + h) - phi(res.t - h)) / (2 * h) <= 1e-8


def test_second_rate_zero_vector(ev):
    with pytest.raises(NoInteriorMinimum):
        ev.second_rate_D([0.0, 0.0])


def test_second_rate_sparre_andersen_bruteforce(sa_model):
    # xi_2 < 2 xi_1 / 3 almost surely, so only directions below that line are admissible
    ev = RateEvaluator(sa_model)
    for v in ([2.0, 0.5], [1.0, 0.1], [3.0, 1.5]):
        res = ev.second_rate_D(v)
        D_ref, t_ref = second_rate_bruteforce(ev.rate_Lambda, v)
        assert res.D == pytest.approx(D_ref, rel=1e-8)
        assert res.t == pytest.approx(t_ref, rel=1e-4)


def test_dual_reference_value(ev):
    res = ev.second_rate_D_dual(G)
    assert np.allclose(res.lambda_opt, [0.596727, 0.667138], atol=5e-5)
    assert res.D == pytest.approx(2.229367, abs=5e-5)
    assert res.D == pytest.approx(D_REF, abs=1e-4)
    assert res.D == pytest.approx(ev.second_rate_D(G).D, rel=1e-10)
    assert ev.model.psi(res.lambda_opt) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("c", [0.5, 2.0, 7.0])
def test_dual_scaling(ev, c):
    base, scaled = ev.second_rate_D_dual(G), ev.second_rate_D_dual(c * G)
    assert np.allclose(base.lambda_opt, scaled.lambda_opt, atol=1e-10)
    assert scaled.D == pytest.approx(c * base.D, rel=1e-10)


@pytest.mark.parametrize("v", [[-1.0, 1.0], [1.0, 1.0], [0.3, 3.0]])
def test_directions_outside_cramer_range(sa_model, v):
    ev = RateEvaluator(sa_model)
    with pytest.raises(DualSolveFailed):
        ev.second_rate_D_dual(v)
    with pytest.raises(NoInteriorMinimum):
        ev.second_rate_D(v)


def test_primal_dual_agree_on_random_directions(ev):
    rng = np.random.default_rng(3)
    angles = rng.uniform(0, 2 * np.pi, 20)
    for a in angles:
        v = 3.0 * np.array([np.cos(a), np.sin(a)])
        primal, dual = ev.second_rate_D(v), ev.second_rate_D_dual(v)
        assert abs(primal.D - dual.D) <= 1e-6 * (1 + primal.D)
        assert primal.D == pytest.approx(gauss_D(v), rel=1e-9)


def test_primal_dual_agree_sparre_andersen(sa_model):
    ev = RateEvaluator(sa_model)
    rng = np.random.default_rng(4)
    for v1, ratio in rng.uniform([0.5, 0.0], [3.0, 0.6], size=(10, 2)):
        v = np.array([v1, ratio * v1])
        primal, dual = ev.second_rate_D(v), ev.second_rate_D_dual(v)
        assert abs(primal.D - dual.D) <= 1e-6 * (1 + primal.D)


_vec = st.tuples(st.floats(-3, 3), st.floats(-3, 3)).map(np.array)


@settings(max_examples=40, deadline=None)
@given(v=_vec, c=st.sampled_from([0.5, 2.0, 7.0]))
def test_D_homogeneity(v, c):
    assume(np.linalg.norm(v) > 0.1)
    ev = RateEvaluator(_model())
    assert ev.second_rate_D(c * v).D == pytest.approx(c * ev.second_rate_D(v).D, rel=1e-9, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(v1=_vec, v2=_vec, a=st.floats(0.05, 0.95))
def test_D_convexity(v1, v2, a):
    mid = a * v1 + (1 - a) * v2
    assume(min(np.linalg.norm(v1), np.linalg.norm(v2), np.linalg.norm(mid)) > 0.1)
    ev = RateEvaluator(_model())
    lhs = ev.second_rate_D(mid).D
    assert lhs <= a * ev.second_rate_D(v1).D + (1 - a) * ev.second_rate_D(v2).D + 1e-9


@settings(max_examples=40, deadline=None)
@given(v1=_vec, v2=_vec, u1=st.floats(0.3, 5.0), u2=st.floats(0.3, 5.0), a=st.floats(0.05, 0.95))
def test_D_u_joint_convexity(v1, v2, u1, u2, a):
    ev = RateEvaluator(_model())
    lhs = ev.D_u(a * v1 + (1 - a) * v2, a * u1 + (1 - a) * u2)
    assert lhs <= a * ev.D_u(v1, u1) + (1 - a) * ev.D_u(v2, u2) + 1e-9


def test_D_u_values(ev):
    res = ev.second_rate_D(G)
    assert ev.D_u(G, res.u) == pytest.approx(D_REF, abs=1e-4)
    assert ev.D_u(MU, 1.0) == pytest.approx(0.0, abs=1e-14)
    for du in (-0.5, 0.5):
        assert ev.D_u(G, res.u + du) > res.D


def test_cache_does_not_change_results():
    cached, fresh = RateEvaluator(_model()), RateEvaluator(_model(), cache=False)
    for alpha in ([1.0, 2.0], [-1.0, 0.5], [3.0, -2.0]):
        assert np.allclose(cached.lambda_of_alpha(alpha), fresh.lambda_of_alpha(alpha), atol=1e-12)


def _model():
    from ldhit.jump_models import GaussianJumpModel

    return GaussianJumpModel(MU, SIGMA)
