import math

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from qbd import _kernels
from qbd.diffusion import quadrature_domain, scaling_map, stationary_cdf, stationary_moments
from qbd.errors import DomainError
from qbd.model import ModelParams, build_generator, invariant_phase_distribution, preset_matrix
from qbd.simulator import (
    CHUNK,
    Event,
    SimConfig,
    check_path,
    default_burn_in,
    estimate_stationary,
    estimate_transient,
    scaled_sample,
    simulate_path,
)
from qbd.stationary import stationary_numeric
from qbd.transient import TransientPath

C3 = np.array([[0.2, 0.5, 0.3], [0.6, 0.1, 0.3], [0.25, 0.25, 0.5]])


def test_config_validation():
    with pytest.raises(DomainError):
        SimConfig(replications=0, horizon=1.0)
    with pytest.raises(DomainError):
        SimConfig(replications=1, horizon=0.0)
    with pytest.raises(DomainError):
        SimConfig(replications=1, horizon=1.0, burn_in=1.0)
    with pytest.raises(DomainError):
        SimConfig(replications=1, horizon=1.0, times=(2.0,))
    with pytest.raises(DomainError):
        SimConfig(replications=1, horizon=1.0, seed=-1)
    assert SimConfig(replications=3, horizon=2.0, times=[1, 2]).times == (1.0, 2.0)


def test_default_burn_in():
    assert default_burn_in(ModelParams(N=2, lam=1.0, mu=2.0, xi=0.5)) == 20.0
    assert default_burn_in(ModelParams(N=2, lam=1.0, mu=2.0, xi=0.0)) == 10.0


def test_paths_are_legal():
    p = ModelParams(N=4, lam=1.0, mu=0.8, xi=0.6, C=C3, l0=2)
    for rep in range(50):
        path = simulate_path(p, 30.0, seed=7, rep=rep)
        assert path[0] == Event(0.0, 0, 2)
        check_path(p, path)
        assert all(0 <= e.k <= 4 for e in path)


def test_check_path_rejects_illegal():
    p = ModelParams(N=3, lam=1.0, mu=1.0, xi=0.5, C=preset_matrix("cyclic", 2))
    with pytest.raises(AssertionError):
        check_path(p, [Event(0, 0, 1), Event(1, 1, 1)])  # cyclic C forbids 1 -> 1
    with pytest.raises(AssertionError):
        check_path(p, [Event(0, 0, 1), Event(1, 1, 2), Event(2, 2, 1)])
    with pytest.raises(AssertionError):
        check_path(p, [Event(0, 0, 1), Event(1, 1, 2), Event(2, 3, 2)])


def test_single_phase_without_catastrophes():
    p = ModelParams(N=3, lam=1.0, mu=1.0)
    path = simulate_path(p, 200.0, seed=1)
    assert {e.j for e in path} == {1}
    moves = {b.k - a.k for a, b in zip(path, path[1:])}
    assert moves <= {1, -1}


def test_holding_time_law():
    p = ModelParams(N=4, lam=1.0, mu=0.5, xi=0.7)
    hold = {k: [] for k in range(1, 4)}
    rep = 0
    while min(len(v) for v in hold.values()) < 10_000:
        path = simulate_path(p, 200.0, seed=11, rep=rep)
        rep += 1
        for a, b in zip(path, path[1:]):
            if 1 <= a.k <= 3:
                hold[a.k].append(b.time - a.time)
    for k, h in hold.items():
        h = np.asarray(h)
        rate = 1.0 * (4 - k) + 0.5 * (4 + k) + 0.7
        assert abs(h.mean() - 1 / rate) < 3 * h.std(ddof=1) / math.sqrt(h.size)


def test_python_walk_matches_kernel():
    p = ModelParams(N=3, lam=1.2, mu=0.7, xi=0.4, C=C3)
    ccum = np.ascontiguousarray(np.cumsum(p.C.c, axis=1))
    times = np.array([0.5, 1.0, 3.0])
    states = _kernels.gillespie_transient(p.N, p.d, p.lam, p.mu, p.xi, ccum, p.l0, times,
                                          np.uint64(99), 0, 40)
    for rep in range(40):
        path = simulate_path(p, 3.5, seed=99, rep=rep)
        for i, t in enumerate(times):
            e = [ev for ev in path if ev.time <= t][-1]
            assert states[rep, i] == e.k * p.d + e.j - 1


def test_transient_estimates_vs_uniformization():
    p = ModelParams(N=3, lam=1.0, mu=1.0, xi=1.0)
    est = estimate_transient(p, SimConfig(100_000, 1.0, seed=2024), times=[1.0])
    exact = TransientPath.from_params(p).marginals([1.0])[0]
    for k in range(4):
        assert est.get(0, k, 1).within(exact[k], 4)
    assert est.point.sum() == pytest.approx(1.0, abs=1e-12)


def test_transient_t0_point_mass():
    p = ModelParams(N=3, lam=1.0, mu=1.0, xi=1.0, C=C3, l0=3)
    est = estimate_transient(p, SimConfig(1000, 1.0, seed=5), times=[0.0, 0.5])
    expected = np.zeros(p.n_states)
    expected[2] = 1.0
    assert_array_equal(est.point[0], expected)
    assert_array_equal(est.stderr[0], 0.0)
    assert est.point[1].sum() == pytest.approx(1.0, abs=1e-12)


def test_transient_unsorted_times():
    p = ModelParams(N=2, lam=1.0, mu=1.0, xi=0.5)
    a = estimate_transient(p, SimConfig(2000, 3.0, seed=9), times=[3.0, 0.5, 1.0])
    b = estimate_transient(p, SimConfig(2000, 3.0, seed=9), times=[0.5, 1.0, 3.0])
    assert_array_equal(a.point[[1, 2, 0]], b.point)
    with pytest.raises(DomainError):
        estimate_transient(p, SimConfig(10, 3.0), times=[4.0])


def test_coverage_calibration():
    # 100 independent comparisons (distinct seeds); at least 95 within 4 stderr
    p = ModelParams(N=3, lam=1.0, mu=1.0, xi=1.0)
    exact = TransientPath.from_params(p).marginals([1.0])[0]
    hits = 0
    for seed in range(100):
        est = estimate_transient(p, SimConfig(5000, 1.0, seed=1000 + seed), times=[1.0])
        k = seed % 4
        hits += est.level(0, k).within(exact[k], 4)
    assert hits >= 95


def test_stationary_estimate():
    p = ModelParams(N=4, lam=1.0, mu=1.0, xi=0.5, C=preset_matrix("cyclic", 2))
    est = estimate_stationary(p, SimConfig(1000, 200.0, seed=3))
    exact = stationary_numeric(build_generator(p)).rho_joint
    for k in range(5):
        for j in (1, 2):
            assert est.get(k, j).within(exact[k, j - 1], 4)
    lvl, lvl_se = est.level()
    assert lvl.sum() == pytest.approx(1.0, abs=1e-12)


def test_stationary_phase_marginal():
    p = ModelParams(N=3, lam=1.0, mu=1.0, xi=0.5, C=C3)
    est = estimate_stationary(p, SimConfig(1000, 200.0, seed=4))
    ph, se = est.phase()
    pi = invariant_phase_distribution(C3)
    assert np.all(np.abs(ph - pi) <= 4 * se)


def test_stationary_huge_xi():
    p = ModelParams(N=3, lam=1.0, mu=1.0, xi=1e4)
    est = estimate_stationary(p, SimConfig(50, 5.0, seed=1, burn_in=1.0))
    assert est.level()[0][0] > 0.99


def test_worker_count_determinism(monkeypatch):
    p = ModelParams(N=3, lam=1.0, mu=0.8, xi=0.5, C=C3)
    cfg = SimConfig(2 * CHUNK + 17, 2.0, seed=77)
    out = []
    for threads in ("1", "3"):
        monkeypatch.setenv("QBD_THREADS", threads)
        out.append(estimate_transient(p, cfg, times=[0.5, 2.0]).point)
        out.append(estimate_stationary(p, SimConfig(2 * CHUNK + 17, 5.0, seed=77, burn_in=1.0)).point)
    assert_array_equal(out[0], out[2])
    assert_array_equal(out[1], out[3])


def test_scaled_sample_mean():
    # the chain's own O(eps) bias is below 4 stderr at eps = 0.025 with 1000 draws
    s = scaled_sample(1.0, 0.0, 1.0, 0.025, SimConfig(1000, 10.0, seed=8), xi=1.0)
    assert s.N == 1600
    _, _, dp = scaling_map(1.0, 0.0, 0.025, 1600, xi=1.0)
    assert abs(s.mean - stationary_moments(dp).ez) < 4 * s.stderr
    assert s.values.min() >= 0 and s.values.max() <= s.N * s.epsilon


def test_scaled_sample_distance_decreases():
    dist = []
    for eps in (0.2, 0.1, 0.05):
        s = scaled_sample(1.0, 0.0, 1.0, eps, SimConfig(5000, 10.0, seed=21), xi=1.0)
        _, _, dp = scaling_map(1.0, 0.0, eps, s.N, xi=1.0)
        xs = np.linspace(0.0, quadrature_domain(dp), 241)
        F = stationary_cdf(dp, xs)
        dist.append(s.sup_distance(lambda v: np.interp(v, xs, F)))
    assert dist[0] > dist[1] > dist[2]


def test_scaled_sample_cdf():
    s = scaled_sample(1.0, 0.0, 1.0, 0.2, SimConfig(500, 5.0, seed=1), xi=1.0)
    assert s.cdf(-1.0) == 0.0 and s.cdf(s.N * s.epsilon) == 1.0
    assert np.all(np.diff(s.cdf(np.linspace(0, 5, 20))) >= 0)
