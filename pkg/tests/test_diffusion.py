import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy import integrate

from oracles import mp_w, mp_w_moment, reflected_ou_kernel
from qbd.diffusion import (
    DiffusionParams,
    convergence_probe,
    h_beta0,
    h_general,
    h_integer_ratio,
    laplace_rtilde,
    moments_by_quadrature,
    quadrature_domain,
    ray_density,
    reflected_ou_density,
    scaling_map,
    stationary_cdf,
    stationary_density,
    stationary_moments,
)
from qbd.errors import DomainError, Unsupported
from qbd.model import invariant_phase_distribution, preset_matrix

MOMENT_POINTS = [(-1.0, 0.0), (-1.0, 2.0), (0.0, 1.0), (0.0, 0.0), (1.5, 1.0), (1.5, 2.0)]


def _dp(beta=0.0, xi=0.0, alpha=1.0, sigma2=1.0):
    return DiffusionParams(alpha=alpha, beta=beta, sigma2=sigma2, xi=xi)


def _integral(f, X):
    return integrate.quad(f, 0, X, limit=400, epsabs=1e-13, epsrel=1e-12, points=[X / 8, X / 4, X / 2])[0]


def test_params_validation():
    with pytest.raises(DomainError):
        _dp(alpha=0.0)
    with pytest.raises(DomainError):
        _dp(sigma2=-1.0)
    with pytest.raises(DomainError):
        _dp(xi=-1.0)
    assert _dp(sigma2=4.0).sigma == 2.0
    assert _dp().replace(xi=3.0).xi == 3.0


def test_scaling_map():
    lam, mu, dp = scaling_map(1.0, 1.0, 0.1, 100)
    assert (lam, mu) == pytest.approx((0.55, 0.45))
    assert dp.nu == pytest.approx(1.0) and dp.sigma2 == pytest.approx(1.0) and dp.beta == pytest.approx(1.0)
    lam, mu, dp = scaling_map(2.0, 0.0, 0.3, 7)
    assert lam == mu == 1.0 and dp.beta == 0.0
    with pytest.raises(DomainError):
        scaling_map(1.0, 20.0, 0.1, 100)


@given(st.floats(0.01, 10), st.floats(-3, 3), st.floats(0.001, 0.2), st.integers(1, 10_000))
def test_scaling_map_rates_sum_to_alpha(alpha, gamma, eps, N):
    try:
        lam, mu, dp = scaling_map(alpha, gamma, eps, N)
    except DomainError:
        assert abs(gamma) * eps >= alpha
        return
    assert lam + mu == pytest.approx(alpha, rel=1e-15)
    assert dp.sigma2 == pytest.approx(alpha * dp.nu, rel=1e-15)
    assert dp.beta == pytest.approx(gamma * dp.nu / alpha, rel=1e-15, abs=1e-300)


def test_h_beta0_xi0_is_reflected_ou():
    dp = _dp(sigma2=2.0, alpha=0.7)
    xs = np.linspace(0, 4, 9)
    for t in (0.1, 1.0, 5.0):
        expected = [reflected_ou_kernel(x, t, 0.7, math.sqrt(2.0)) for x in xs]
        assert_allclose(h_beta0(dp, xs, t), expected, rtol=1e-14)
        assert_allclose(reflected_ou_density(dp, xs, t), expected, rtol=1e-14)


@pytest.mark.parametrize("xi", [0.0, 1.0, 3.0])
@pytest.mark.parametrize("sigma2", [1.0, 9.0])
def test_h_beta0_normalized(xi, sigma2):
    dp = _dp(xi=xi, sigma2=sigma2)
    assert _integral(lambda x: h_beta0(dp, x, 1.0), quadrature_domain(dp)) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("m,alpha", [(1, 1.0), (2, 0.5), (3, 1.5)])
def test_h_series_vs_integer_ratio(m, alpha):
    dp = _dp(xi=2 * m * alpha, alpha=alpha)
    xs = np.array([0.05, 0.3, 1.0, 2.0, 3.5])
    for t in (0.2, 1.0, 3.0):
        assert_allclose(h_beta0(dp, xs, t), h_integer_ratio(dp, xs, t), rtol=1e-10, atol=1e-12)


def test_h_integer_ratio_domain():
    with pytest.raises(DomainError):
        h_integer_ratio(_dp(xi=1.0), 1.0, 1.0)
    with pytest.raises(DomainError):
        h_integer_ratio(_dp(xi=2.0), 0.0, 1.0)


@settings(max_examples=15)
@given(xi=st.floats(0, 4), alpha=st.floats(0.3, 3), t=st.floats(0.05, 5), x=st.floats(0, 4))
def test_h_series_vs_time_integral(xi, alpha, t, x):
    dp = _dp(xi=xi, alpha=alpha)
    assert h_beta0(dp, x, t) == pytest.approx(h_general(dp, x, t), rel=1e-8, abs=1e-10)


def test_h_general_xi0_and_beta_guard():
    dp = _dp(sigma2=2.0)
    assert h_general(dp, 0.7, 1.3) == reflected_ou_density(dp, 0.7, 1.3)
    with pytest.raises(Unsupported):
        h_general(_dp(beta=1.0, xi=1.0), 0.5, 1.0)
    with pytest.raises(Unsupported):
        h_beta0(_dp(beta=1.0), 0.5, 1.0)
    # the extension hook accepts an explicit kernel
    k = lambda x, tau: reflected_ou_kernel(x, tau, 1.0, 1.0)
    v = h_general(_dp(beta=1.0, xi=1.0), 0.5, 1.0, rtilde=k, allow_beta_nonzero=True)
    assert v == pytest.approx(h_beta0(_dp(xi=1.0), 0.5, 1.0), rel=1e-9)


@pytest.mark.parametrize("beta,xi", [(0.0, 1.0), (0.0, 0.0)])
def test_h_long_time_approaches_w(beta, xi):
    dp = _dp(beta=beta, xi=xi)
    xs = np.linspace(0, 3, 7)
    assert_allclose(h_beta0(dp, xs, 50.0), stationary_density(dp, xs), atol=1e-6)


@pytest.mark.parametrize("beta", [-1.0, 0.0, 1.5])
@pytest.mark.parametrize("xi", [0.0, 1.0, 2.0])
def test_w_normalized_and_vs_mpmath(beta, xi):
    dp = _dp(beta=beta, xi=xi)
    X = quadrature_domain(dp)
    assert moments_by_quadrature(dp)[0] == pytest.approx(1.0, abs=1e-8)
    for x in (0.0, 0.4, 1.3, X / 2):
        assert stationary_density(dp, x) == pytest.approx(float(mp_w(x, 1.0, beta, 1.0, xi)), rel=1e-10)


def test_w_xi0_truncated_gaussian():
    for beta in (-1.0, 0.0, 1.5):
        dp = _dp(beta=beta, sigma2=2.0, alpha=0.5)
        s = math.sqrt(dp.sigma2 / (2 * dp.alpha))
        xs = np.linspace(0, 5, 11)
        gauss = np.exp(-(xs - beta) ** 2 / (2 * s * s)) / (s * math.sqrt(2 * math.pi))
        norm = 0.5 * math.erfc(-beta / (s * math.sqrt(2)))
        assert_allclose(stationary_density(dp, xs), gauss / norm, rtol=1e-12)


def test_w0_increases_in_xi():
    for beta in (-1.0, 1.5):
        w0 = [stationary_density(_dp(beta=beta, xi=x), 0.0) for x in (0.0, 1.0, 2.0)]
        assert np.all(np.diff(w0) > 0)


def test_laplace_rtilde():
    for beta, xi in ((0.0, 1.5), (0.0, 0.3)):
        dp = _dp(beta=beta, xi=xi)
        xs = np.linspace(0, 3, 13)
        assert_allclose(xi * laplace_rtilde(dp, xi, xs), stationary_density(dp, xs), rtol=1e-10)
    dp = _dp(beta=1.5)
    p = 0.8
    assert p * _integral(lambda x: laplace_rtilde(dp, p, x), quadrature_domain(dp) + 4) == pytest.approx(1.0, abs=1e-7)
    with pytest.raises(DomainError):
        laplace_rtilde(dp, 0.0, 1.0)


def test_laplace_rtilde_consistency_general_beta():
    # w = xi * rtilde_xi pointwise for any beta
    for beta in (-1.0, 1.5):
        dp = _dp(beta=beta, xi=2.0)
        xs = np.linspace(0, 4, 9)
        assert_allclose(2.0 * laplace_rtilde(dp, 2.0, xs), stationary_density(dp, xs), rtol=1e-10)


def test_laplace_rtilde_large_p_slope():
    # p**-1/2 at the starting point x = beta = 0
    dp = _dp()
    ps = np.logspace(3, 5, 5)
    vals = [laplace_rtilde(dp, p, 0.0) for p in ps]
    slope = np.polyfit(np.log(ps), np.log(vals), 1)[0]
    assert slope == pytest.approx(-0.5, rel=0.1)


def test_laplace_rtilde_away_from_start_vs_mpmath():
    # at x = beta > 0 the transform decays like exp(-c sqrt(p)) instead
    dp = _dp(beta=1.5)
    for p in (10.0, 100.0, 1000.0):
        assert laplace_rtilde(dp, p, 1.5) == pytest.approx(float(mp_w(1.5, 1.0, 1.5, 1.0, p)) / p, rel=1e-9)


@pytest.mark.parametrize("beta,xi", MOMENT_POINTS)
def test_moments_vs_quadrature(beta, xi):
    dp = _dp(beta=beta, xi=xi)
    m = stationary_moments(dp)
    _, q1, q2 = moments_by_quadrature(dp)
    assert m.ez == pytest.approx(q1, abs=1e-8)
    assert m.ez2 == pytest.approx(q2, abs=1e-8)
    if xi == 0:
        assert m.ez_xi0 == pytest.approx(m.ez, abs=1e-10)
        assert m.ez2_xi0 == pytest.approx(m.ez2, abs=1e-10)
    if beta == 0:
        assert m.ez_beta0 == pytest.approx(m.ez, abs=1e-10)
        assert m.ez2_beta0 == pytest.approx(m.ez2, abs=1e-10)


@pytest.mark.parametrize("beta,xi", [(1.5, 2.0), (-1.0, 0.5)])
def test_moments_vs_mpmath(beta, xi):
    m = stationary_moments(_dp(beta=beta, xi=xi, sigma2=1.0))
    assert m.ez == pytest.approx(float(mp_w_moment(1, 1.0, beta, 1.0, xi)), rel=1e-10)
    assert m.ez2 == pytest.approx(float(mp_w_moment(2, 1.0, beta, 1.0, xi)), rel=1e-10)


def test_moment_forms_agree():
    for beta in (-1.0, 1.5, 1e-2):
        dp = _dp(beta=beta, xi=1.0)
        a = stationary_moments(dp, form="printed")
        b = stationary_moments(dp, form="contiguous")
        assert a.ez2 == pytest.approx(b.ez2, rel=1e-12)
    with pytest.raises(DomainError):
        stationary_moments(_dp(), form="printed")
    with pytest.raises(DomainError):
        stationary_moments(_dp(), form="other")


def test_moments_half_normal():
    m = stationary_moments(_dp())
    assert m.ez == pytest.approx(1 / math.sqrt(math.pi), rel=1e-14)


def test_variance_shape_in_beta():
    betas = np.linspace(0, 3, 13)
    for xi in (1.0, 2.0):
        v = [stationary_moments(_dp(beta=b, xi=xi)).variance for b in betas]
        assert np.all(np.diff(v) > 0)
    v = stationary_moments(_dp(beta=6.0, alpha=2.0)).variance
    assert v == pytest.approx(1 / (2 * 2.0), rel=1e-9)


def test_ray_density():
    dp = _dp(beta=0.5, xi=1.0)
    C = np.array([[0.1, 0.6, 0.3], [0.5, 0.2, 0.3], [0.3, 0.3, 0.4]])
    pi = invariant_phase_distribution(C)
    x = 0.8
    rays = [ray_density(dp, pi, x, j) for j in (1, 2, 3)]
    assert sum(rays) == pytest.approx(stationary_density(dp, x), rel=1e-14)
    w0 = np.array([ray_density(dp, pi, 0.0, j) for j in (1, 2, 3)])
    assert_allclose(w0 @ C, w0, atol=1e-10)
    half = invariant_phase_distribution(preset_matrix("uniform", 2))
    assert ray_density(dp, half, x, 2) == pytest.approx(stationary_density(dp, x) / 2)
    with pytest.raises(DomainError):
        ray_density(dp, pi, x, 4)


def test_stationary_cdf():
    dp = _dp(beta=1.5, xi=1.0)
    X = quadrature_domain(dp)
    F = stationary_cdf(dp, np.linspace(0, X, 40))
    assert F[0] == 0 and np.all(np.diff(F) >= 0)
    assert F[-1] == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(DomainError):
        stationary_cdf(dp, [0.5, 1.0])


def test_probe_xi0_target():
    rep = convergence_probe(1.0, 0.0, 1.0, [0.2, 0.1], xi=0.0)
    assert rep.decreasing and rep.final < 0.05
    assert [r["N"] for r in rep.to_records()] == [25, 100]


def test_probe_nu_rescaling():
    # halving nu at fixed eps halves N and sigma2; the step law and target move together
    a = convergence_probe(1.0, 0.0, 1.0, [0.1], xi=1.0).rows[0]
    b = convergence_probe(1.0, 0.0, 0.5, [0.1], xi=1.0).rows[0]
    assert b.N == 50 and a.N == 100
    assert b.sup_distance < 0.1 and a.sup_distance < 0.1


def test_probe_transient():
    rep = convergence_probe(1.0, 0.0, 1.0, [0.2, 0.1], t_or_stationary=1.0, xi=1.0)
    assert rep.target == "t=1.0" and rep.decreasing
    with pytest.raises(DomainError):
        convergence_probe(1.0, 0.0, 1.0, [], xi=1.0)
