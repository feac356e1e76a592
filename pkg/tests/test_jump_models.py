from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldhit.errors import ConfigError, DomainError, UnsupportedTilt
from ldhit.jump_models import (
    AnalyticJumpModel,
    Degenerate,
    Exponential,
    Gamma,
    GaussianJumpModel,
    IndependentClaims,
    ProportionalClaims,
    build_sparre_andersen,
    cumulant_grad,
    cumulant_hess,
    psi,
    sample_tilted,
)

from oracles import LAM_STAR, MU, SIGMA, fd_grad, fd_hess, mc_mgf


def test_psi_at_zero_is_one(gauss):
    assert psi(gauss, [0.0, 0.0]) == 1.0


def test_psi_at_reference_tilt(gauss):
    assert psi(gauss, LAM_STAR) - 1.0 == pytest.approx(2.6e-8, abs=5e-9)


def test_psi_at_dual_optimiser(gauss):
    assert psi(gauss, [0.596727, 0.667138]) == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize("lam, expected", [
    ([0.0, 0.0], MU),
    (LAM_STAR, [0.2874500, 0.4594125]),
])
def test_cumulant_grad_values(gauss, lam, expected):
    assert np.allclose(cumulant_grad(gauss, lam), expected, atol=1e-6)


@pytest.mark.parametrize("lam", [[0.0, 0.0], LAM_STAR, [-3.0, 2.0]])
def test_gaussian_hessian_is_sigma(gauss, lam):
    assert np.array_equal(cumulant_hess(gauss, lam), SIGMA)


def test_domain_error(sa_model):
    # interarrival MGF blows up once -<lam, c> reaches the rate
    with pytest.raises(DomainError):
        psi(sa_model, [-0.6, -0.6])
    with pytest.raises(DomainError):
        cumulant_grad(sa_model, [2.0, 2.0])  # claim MGF diverges at <split, lam> >= 1


def test_gaussian_rejects_bad_sigma():
    with pytest.raises(ConfigError):
        GaussianJumpModel([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ConfigError):
        GaussianJumpModel([0.0, 0.0], [[1.0, 0.1], [0.0, 1.0]])


def _models():
    return {
        "gauss": GaussianJumpModel(MU, SIGMA),
        "sa_prop": build_sparre_andersen([1.0, 1.0], ProportionalClaims([0.6, 0.4], Exponential(1.0)),
                                         Exponential(1.0)),
        "sa_indep": build_sparre_andersen([1.5, 0.8], IndependentClaims([Gamma(2.0, 3.0), Exponential(2.0)]),
                                          Gamma(3.0, 2.0)),
    }


@pytest.mark.parametrize("name", ["gauss", "sa_prop", "sa_indep"])
@pytest.mark.parametrize("lam", [[0.0, 0.0], [0.1, 0.1], [0.2, -0.15], [-0.1, 0.25]])
def test_gradient_matches_finite_differences(name, lam):
    model = _models()[name]
    lam = np.array(lam)
    grad = cumulant_grad(model, lam)
    assert np.linalg.norm(grad - fd_grad(model.cgf, lam)) <= 1e-6 * (1 + np.linalg.norm(grad))


@pytest.mark.parametrize("name", ["sa_prop", "sa_indep"])
@pytest.mark.parametrize("lam", [[0.0, 0.0], [0.05, -0.02], [0.1, 0.1]])
def test_hessian_matches_finite_differences(name, lam):
    model = _models()[name]
    hess = cumulant_hess(model, lam)
    assert np.allclose(hess, fd_hess(model.cgf, np.array(lam)), atol=1e-5, rtol=1e-5)
    assert np.all(np.linalg.eigvalsh(hess) > 0)


_lam = st.lists(st.floats(-0.3, 0.3), min_size=2, max_size=2).map(np.array)


@settings(max_examples=60, deadline=None)
@given(l1=_lam, l2=_lam, a=st.floats(0.01, 0.99))
def test_cumulant_is_convex(l1, l2, a):
    for model in _models().values():
        mid = model.cgf(a * l1 + (1 - a) * l2)
        assert mid <= a * model.cgf(l1) + (1 - a) * model.cgf(l2) + 1e-12


@pytest.mark.parametrize("name", ["gauss", "sa_prop", "sa_indep"])
def test_tilted_moments(name):
    model = _models()[name]
    lam = np.array([0.15, 0.1])
    rng = np.random.default_rng(7)
    x = sample_tilted(model, lam, rng, 100_000)
    mean, cov = model.cgf_grad(lam), model.cgf_hess(lam)
    se = np.sqrt(np.diag(cov) / x.shape[0])
    assert np.all(np.abs(x.mean(axis=0) - mean) <= 4 * se)
    # the variance of a sample covariance entry is estimated from the fourth moments
    c = x - x.mean(axis=0)
    for i in range(2):
        for j in range(2):
            prod = c[:, i] * c[:, j]
            assert abs(prod.mean() - cov[i, j]) <= 4 * prod.std() / math.sqrt(x.shape[0])


def test_untilted_sample_mean(gauss, rng):
    x = gauss.sample(rng, 100_000)
    se = np.sqrt(np.diag(SIGMA) / 1e5)
    assert np.all(np.abs(x.mean(axis=0) - MU) <= 3 * se)


def test_reference_tilted_sample_mean(gauss, rng):
    x = sample_tilted(gauss, LAM_STAR, rng, 100_000)
    se = np.sqrt(np.diag(SIGMA) / 1e5)
    assert np.all(np.abs(x.mean(axis=0) - [0.2874500, 0.4594125]) <= 3 * se)


@pytest.mark.parametrize("c, claims, tau, mean", [
    ([1.0, 1.0], IndependentClaims([Degenerate(1e-300), Degenerate(1e-300)]), Degenerate(1.0), [-1.0, -1.0]),
    ([2.0, 1.0], IndependentClaims([Exponential(1.0), Exponential(2.0)]), Exponential(1.0), [-1.0, -0.5]),
])
def test_sparre_andersen_mean(c, claims, tau, mean):
    assert np.allclose(build_sparre_andersen(c, claims, tau).mean, mean)


@pytest.mark.parametrize("lam", [[0.1, 0.1], [0.3, -0.2]])
def test_sparre_andersen_mgf_against_mc(sa_model, lam):
    rng = np.random.default_rng(2718)
    claims, tau = sa_model.sample_pairs(rng, 1_000_000)
    xi = claims - tau[:, None] * sa_model.premium
    est, se = mc_mgf(xi, lam)
    assert abs(psi(sa_model, lam) - est) <= 3 * se


def test_sparre_andersen_product_form(sa_model):
    lam = np.array([0.2, 0.1])
    theta = -float(lam @ sa_model.premium)
    expected = sa_model.claims.psi(lam) * math.exp(sa_model.interarrival.cgf(theta))
    assert psi(sa_model, lam) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("c", [[1.0], [1.0, -1.0], [0.0, 1.0]])
def test_build_sparre_andersen_rejects(c):
    with pytest.raises(ConfigError):
        build_sparre_andersen(c, ProportionalClaims([0.5, 0.5], Exponential(1.0)), Exponential(1.0))


def test_build_sparre_andersen_requires_independence():
    with pytest.raises(ConfigError):
        build_sparre_andersen([1.0, 1.0], ProportionalClaims([0.5, 0.5], Exponential(1.0)), Exponential(1.0),
                              independent=False)


def test_analytic_model_falls_back_to_finite_differences():
    model = AnalyticJumpModel(2, cgf=lambda lam: np.asarray(lam) @ MU + 0.5 * np.einsum(
        "...i,ij,...j->...", lam, SIGMA, lam))
    lam = np.array([0.3, -0.1])
    assert np.allclose(model.cgf_grad(lam), MU + SIGMA @ lam, atol=1e-8)
    assert np.allclose(model.cgf_hess(lam), SIGMA, atol=1e-5)
    with pytest.raises(UnsupportedTilt):
        model.sample_tilted(lam, np.random.default_rng(0), 3)
