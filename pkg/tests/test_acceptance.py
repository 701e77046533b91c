"""Acceptance criteria 1-12, one PASS/FAIL line each.

Run under pytest, or directly with ``python3 tests/test_acceptance.py``.
Thresholds are the stated ones; nothing here is loosened to pass.
"""
import math
import os
import sys
import time

import numpy as np
import pytest
from scipy import integrate

sys.path.insert(0, os.path.dirname(__file__))

from oracles import reflected_ou_kernel  # noqa: E402
from qbd.cli import TABLE_G_PRINTED, table_g_rows  # noqa: E402
from qbd.diffusion import (  # noqa: E402
    DiffusionParams,
    convergence_probe,
    h_beta0,
    h_integer_ratio,
    moments_by_quadrature,
    quadrature_domain,
    stationary_moments,
)
from qbd.model import ModelParams, build_generator, preset_matrix  # noqa: E402
from qbd.simulator import SimConfig, estimate_transient  # noqa: E402
from qbd.stationary import (  # noqa: E402
    decoupling,
    limit_variance,
    mean_var_closed,
    rho0_monotonicity_scan,
    rho_closed,
    stationary_numeric,
)
from qbd.transient import (  # noqa: E402
    TransientPath,
    catastrophe_transform_prob,
    laplace_p0,
    moments_closed,
    p0_closed,
    pk_closed,
    spectral_data,
)

TABLE_TOL = {100: 1e-3, 1000: 1e-6, 5000: 1e-8}


def _table_check(lam):
    t0 = time.perf_counter()
    rows = table_g_rows(lam, 2.0)
    worst, good = [], 0
    for r in rows:
        ge, ga = TABLE_G_PRINTED[(r["N"], r["xi"])]
        tol = TABLE_TOL[r["N"]]
        row_ok = True
        for name, val, cell in (("g", r["g_exact"], ge), ("g~", r["g_approx"], ga)):
            if abs(val - float(cell)) > tol:
                row_ok = False
                worst.append(f"N={r['N']} xi={r['xi']:g} {name}={val:.9f} vs {cell}")
        good += row_ok
    dt = time.perf_counter() - t0
    ok = not worst and dt < 5
    detail = f"{good}/{len(rows)} rows match, {dt:.2f}s"
    if worst:
        detail += "; first mismatch " + worst[0]
    return ok, detail


def criterion_1():
    """Printed g grid at the stated lambda = 0.1, mu = 2."""
    return _table_check(0.1)


def criterion_1_companion():
    """Same cells at lambda = 1.2, where the printed numbers are reproduced."""
    return _table_check(1.2)


def criterion_2():
    t0 = time.perf_counter()
    worst = 0.0
    for N in (2, 5, 10):
        for lam, mu in ((1.0, 1.0), (1.0, 3.0), (3.0, 1.0)):
            for xi in (0.5, 2.0):
                p = ModelParams(N=N, lam=lam, mu=mu, xi=xi)
                rho = stationary_numeric(build_generator(p)).rho
                closed = np.array([rho_closed(p, r) for r in range(N + 1)])
                worst = max(worst, float(np.max(np.abs(closed - rho))))
    dt = time.perf_counter() - t0
    return worst < 1e-8 and dt < 10, f"max |closed - solve| = {worst:.2e} over 18 points, {dt:.2f}s"


def criterion_3():
    t0 = time.perf_counter()
    xis = (0.0, 0.5, 1.0, 2.0)
    ts = (0.25, 0.5, 1.0, 2.0, 5.0)
    spec = spectral_data(1.0, 3)
    err = 0.0
    P, M, V = [], [], []
    for xi in xis:
        U = TransientPath.from_params(ModelParams(N=3, lam=1.0, mu=1.0, xi=xi)).marginals(ts)
        P.append(U)
        ms, vs = [], []
        for i, t in enumerate(ts):
            c = [p0_closed(1.0, xi, 3, t, spec)] + [pk_closed(1.0, xi, 3, r, t, spec) for r in (1, 2, 3)]
            err = max(err, float(np.max(np.abs(np.array(c) - U[i]))))
            m1, m2 = moments_closed(1.0, xi, 3, t, spec)
            k = np.arange(4)
            err = max(err, abs(m1 - U[i] @ k), abs(m2 - U[i] @ k**2))
            ms.append(m1)
            vs.append(m2 - m1 * m1)
        M.append(ms)
        V.append(vs)
    P, M, V = np.array(P), np.array(M), np.array(V)
    order = (np.all(np.diff(P[:, :, 0], axis=0) > 0) and np.all(np.diff(P[:, :, 1:], axis=0) < 0)
             and np.all(np.diff(M, axis=0) < 0) and np.all(np.diff(V, axis=0) < 0))
    dt = time.perf_counter() - t0
    return err < 1e-7 and order and dt < 10, f"max err {err:.2e}, orderings {'hold' if order else 'BROKEN'}, {dt:.2f}s"


def criterion_4():
    free = TransientPath.from_params(ModelParams(N=3, lam=1.0, mu=1.0, xi=0.0))
    direct = TransientPath.from_params(ModelParams(N=3, lam=1.0, mu=1.0, xi=0.5))
    err = 0.0
    for t in (0.5, 1.0, 2.0):
        comp = catastrophe_transform_prob(lambda u: free.marginals([u])[0], 0.5, t)
        err = max(err, float(np.max(np.abs(comp - direct.marginals([t])[0]))))
    return err < 1e-8, f"max |composed - direct| = {err:.2e}"


def criterion_5():
    worst = 0.0
    for name, arg in (("uniform", None), ("cyclic", None), ("random_walk", 0.5)):
        C = preset_matrix(name, 3, arg)
        p = ModelParams(N=4, lam=1.0, mu=1.0, xi=0.5, C=C)
        res = stationary_numeric(build_generator(p))
        _, _, product = decoupling(p)
        worst = max(worst, float(np.max(np.abs(res.rho_joint - product))))
    return worst < 1e-8, f"max ||rho_joint - rho x pi|| = {worst:.2e} over 3 presets"


def criterion_6():
    p = ModelParams(N=3, lam=1.2, mu=0.7, xi=0.5)
    rho0 = stationary_numeric(build_generator(p)).rho[0]
    e1 = abs(1e-6 * laplace_p0(p, 1e-6) - rho0)
    path = TransientPath.from_params(p)
    q = integrate.quad(lambda t: math.exp(-t) * path.marginals([t])[0, 0], 0, 60, limit=200, epsabs=1e-12)[0]
    e2 = abs(laplace_p0(p, 1.0) - q)
    return e1 < 1e-6 and e2 < 1e-4, f"Tauberian {e1:.2e}, transform vs quadrature {e2:.2e}"


def criterion_7():
    p = ModelParams(N=5000, lam=0.1, mu=2.0, xi=1.0)
    mv = mean_var_closed(p)
    em = abs(mv.mean - 1 / 19)
    lv = limit_variance(p)
    ev = abs(mv.variance - lv) / lv
    return em < 1e-3 and ev < 0.01, (f"|mean - 1/19| = {em:.2e}; variance {mv.variance:.6f} vs limit "
                                     f"{lv:.6f}, rel {ev:.2%}")


DIFFUSION_POINTS = [(-1.0, 0.0), (-1.0, 2.0), (0.0, 1.0), (0.0, 0.0), (1.5, 1.0), (1.5, 2.0)]


def criterion_8():
    norm = mom = red = 0.0
    for beta, xi in DIFFUSION_POINTS:
        dp = DiffusionParams(alpha=1.0, beta=beta, sigma2=1.0, xi=xi)
        q0, q1, q2 = moments_by_quadrature(dp)
        m = stationary_moments(dp)
        norm = max(norm, abs(q0 - 1))
        mom = max(mom, abs(m.ez - q1), abs(m.ez2 - q2))
        if m.ez_xi0 is not None:
            red = max(red, abs(m.ez_xi0 - m.ez), abs(m.ez2_xi0 - m.ez2))
        if m.ez_beta0 is not None:
            red = max(red, abs(m.ez_beta0 - m.ez), abs(m.ez2_beta0 - m.ez2))
    ok = norm < 1e-8 and mom < 1e-8 and red < 1e-10
    return ok, f"|int w - 1| {norm:.1e}, moments {mom:.1e}, reductions {red:.1e} (6 points)"


def criterion_9():
    xs = np.array([0.05, 0.25, 0.5, 1.0, 1.5, 2.5, 3.5])
    ts = (0.1, 0.5, 1.0, 3.0)
    cons = 0.0
    for t in ts:
        for alpha in (0.5, 1.0):
            dp = DiffusionParams(alpha=alpha, beta=0.0, sigma2=1.0, xi=2 * alpha)
            a, b = h_beta0(dp, xs, t), h_integer_ratio(dp, xs, t)
            cons = max(cons, float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)))))
            dp0 = dp.replace(xi=0.0)
            k = np.array([reflected_ou_kernel(x, t, alpha, 1.0) for x in xs])
            cons = max(cons, float(np.max(np.abs(h_beta0(dp0, xs, t) - k) / np.maximum(1.0, k))))
    norm = 0.0
    for xi in (0.0, 1.0, 2.0, 3.0):
        dp = DiffusionParams(alpha=1.0, beta=0.0, sigma2=1.0, xi=xi)
        X = quadrature_domain(dp)
        for t in ts:
            v = integrate.quad(lambda x: h_beta0(dp, x, t), 0, X, limit=400, epsabs=1e-13, epsrel=1e-12,
                               points=[X / 16, X / 8, X / 4, X / 2])[0]
            norm = max(norm, abs(v - 1))
    return cons < 1e-10 and norm < 1e-8, f"series/integer-ratio/kernel {cons:.1e}, |int h - 1| {norm:.1e}"


def criterion_10():
    t0 = time.perf_counter()
    rep = convergence_probe(1.0, 0.0, 1.0, [0.2, 0.1, 0.05], xi=1.0)
    dt = time.perf_counter() - t0
    d = ", ".join(f"N={r.N}: {r.sup_distance:.4f}" for r in rep.rows)
    return rep.decreasing and rep.final < 0.05 and dt < 60, f"{d}; {dt:.1f}s"


def criterion_11():
    t0 = time.perf_counter()
    p = ModelParams(N=3, lam=1.0, mu=1.0, xi=1.0)
    est = estimate_transient(p, SimConfig(100_000, 1.0, seed=20240601), times=[1.0])
    exact = TransientPath.from_params(p).solve([1.0])[0]
    inside = np.abs(est.point[0] - exact) <= 4 * est.stderr[0]
    frac = float(inside.mean())
    dt = time.perf_counter() - t0
    return frac >= 0.95 and dt < 120, f"{int(inside.sum())}/{inside.size} within 4 stderr at 100000 reps, {dt:.2f}s"


def criterion_12():
    reports = [
        rho0_monotonicity_scan([1.0], [0.1, 0.25, 0.5, 1, 2, 3, 4, 5], range(1, 21)),
        rho0_monotonicity_scan([1.0], [1.0], range(1, 51)),
        rho0_monotonicity_scan([0.5, 1, 1.5, 2, 3, 4, 5], [1.0], [10]),
    ]
    n = sum(r.n_checks for r in reports)
    bad = sum(len(r.violations) for r in reports)
    return bad == 0, f"{bad} violations in {n} comparisons"


CRITERIA = [
    ("1", criterion_1),
    ("1 companion (lambda=1.2)", criterion_1_companion),
    ("2", criterion_2),
    ("3", criterion_3),
    ("4", criterion_4),
    ("5", criterion_5),
    ("6", criterion_6),
    ("7", criterion_7),
    ("8", criterion_8),
    ("9", criterion_9),
    ("10", criterion_10),
    ("11", criterion_11),
    ("12", criterion_12),
]


def _line(label, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail}"


@pytest.mark.parametrize("label,fn", CRITERIA, ids=[lab.replace(" ", "-") for lab, _ in CRITERIA])
def test_criterion(label, fn, capsys):
    ok, detail = fn()
    with capsys.disabled():
        print("\n" + _line(label, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    status = 0
    for label, fn in CRITERIA:
        ok, detail = fn()
        print(_line(label, ok, detail), flush=True)
        status |= not ok
    sys.exit(status)
