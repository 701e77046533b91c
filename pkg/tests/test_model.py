import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from oracles import dense_generator
from qbd.errors import ValidationError
from qbd.model import (
    ModelParams,
    PhaseSwitchMatrix,
    build_generator,
    invariant_phase_distribution,
    params_from_config,
    preset_matrix,
    random_walk_pi_printed,
    state_index,
    validate,
)


def _params(N=3, lam=1.0, mu=1.0, xi=0.5, C=None, l0=1):
    C = np.ones((1, 1)) if C is None else C
    return ModelParams(N=N, lam=lam, mu=mu, xi=xi, C=C, l0=l0)


def test_uniform_d3_accepted():
    validate(_params(C=preset_matrix("uniform", 3).c))


@pytest.mark.parametrize(
    "kw,invariant",
    [
        (dict(lam=-1.0), "lambda"),
        (dict(mu=0.0), "mu"),
        (dict(xi=-0.1), "xi"),
        (dict(xi=float("nan")), "xi"),
        (dict(N=0), "N"),
        (dict(N=2.5), "N"),
        (dict(C=[[0.5, 0.4], [0.5, 0.5]]), "row-sum"),
        (dict(C=np.eye(2)), "irreducibility"),
        (dict(C=[[1.2, -0.2], [0.5, 0.5]]), "nonnegativity"),
        (dict(C=[[0.5, 0.5], [0.5, 0.5]], l0=3), "l0"),
    ],
)
def test_validate_names_invariant(kw, invariant):
    with pytest.raises(ValidationError) as exc:
        validate(_params(**kw))
    assert exc.value.invariant == invariant


def test_row_sum_message_names_row():
    with pytest.raises(ValidationError, match="row 1"):
        validate(_params(C=[[0.5, 0.4], [0.5, 0.5]]))


def test_non_square_C():
    with pytest.raises(ValidationError):
        PhaseSwitchMatrix(np.ones((2, 3)) / 3)


def test_two_state_generator():
    g = build_generator(_params(N=1, xi=0.0))
    assert g.dense().tolist() == [[-1.0, 1.0], [2.0, -2.0]]


def test_generator_figure1_edges():
    # N=2, d=3 uniform: 3x3 departures from level 0, then per phase 1->2, 2->1, 1->0, 2->0
    g = build_generator(_params(N=2, xi=0.5, C=preset_matrix("uniform", 3).c))
    assert g.n_states == 9
    Q = g.dense()
    off = Q - np.diag(np.diag(Q))
    assert np.count_nonzero(off) == 9 + 4 * 3
    assert_allclose(g.block(0, 1), np.full((3, 3), 2.0 / 3))
    assert_allclose(g.block(1, 0), np.eye(3) * (1.0 * 3 + 0.5))
    assert_allclose(g.block(2, 0), np.eye(3) * 0.5)
    assert_allclose(g.block(2, 1), np.eye(3) * 4.0)


@given(
    N=st.integers(1, 8),
    lam=st.floats(0.01, 10),
    mu=st.floats(0.01, 10),
    xi=st.floats(0, 5),
    d=st.integers(1, 4),
    preset=st.sampled_from(["uniform", "cyclic"]),
)
def test_generator_matches_dense_oracle(N, lam, mu, xi, d, preset):
    C = preset_matrix(preset, d).c
    Q = build_generator(_params(N=N, lam=lam, mu=mu, xi=xi, C=C)).dense()
    assert_allclose(Q.sum(axis=1), 0.0, atol=1e-12 * max(lam, mu, xi, 1) * N)
    assert_allclose(Q, dense_generator(N, lam, mu, xi, C), rtol=1e-14, atol=1e-14)


def test_state_index_layout():
    assert state_index(0, 1, 3) == 0
    assert state_index(2, 3, 3) == 8


@pytest.mark.parametrize("name,d", [("uniform", 4), ("cyclic", 5)])
def test_invariant_uniform(name, d):
    assert_allclose(invariant_phase_distribution(preset_matrix(name, d)), np.full(d, 1 / d), atol=1e-15)


def test_random_walk_printed_pi_matches_at_d4():
    for p in (0.2, 0.5, 0.9):
        C = preset_matrix("random_walk", 4, p)
        assert_allclose(invariant_phase_distribution(C), random_walk_pi_printed(4, p), atol=1e-14)


@pytest.mark.parametrize("d", [3, 5, 6])
def test_random_walk_printed_pi_differs_elsewhere(d):
    # the printed closed form is normalized but not invariant for these d
    C = preset_matrix("random_walk", d, 0.3)
    pi = random_walk_pi_printed(d, 0.3)
    assert pi.sum() == pytest.approx(1.0)
    assert np.abs(pi @ C.c - pi).max() > 1e-3
    exact = invariant_phase_distribution(C)
    assert_allclose(exact @ C.c, exact, atol=1e-14)


@given(st.integers(1, 6), st.data())
def test_invariant_distribution_random(d, data):
    rows = data.draw(st.lists(st.lists(st.floats(0.05, 1.0), min_size=d, max_size=d), min_size=d, max_size=d))
    c = np.asarray(rows)
    c /= c.sum(axis=1, keepdims=True)
    pi = invariant_phase_distribution(c)
    assert np.all(pi > 0)
    assert_allclose(pi.sum(), 1.0, rtol=1e-14)
    assert_allclose(pi @ c, pi, atol=1e-13)


def test_params_from_config():
    p = params_from_config({"N": 4, "lambda": 1, "mu": 1, "xi": 0.5, "d": 3, "C": {"preset": "cyclic"}})
    assert p.d == 3 and p.N == 4
    assert p.to_dict()["C"] == np.roll(np.eye(3), 1, axis=1).tolist()
    assert params_from_config({"N": 2.0, "lambda": 1, "mu": 2}).N == 2
    with pytest.raises(ValidationError, match="lambda"):
        params_from_config({"N": 2, "mu": 1})
    with pytest.raises(ValidationError):
        params_from_config({"N": 2, "lambda": "x", "mu": 1})
    with pytest.raises(ValidationError):
        params_from_config({"N": 2, "lambda": 1, "mu": 1, "d": 3, "C": [[1.0]]})


def test_replace_roundtrip():
    p = _params()
    assert p.replace(xi=2.0).xi == 2.0 and p.replace(xi=2.0).N == p.N
