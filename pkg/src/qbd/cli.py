"""Command-line front end.

``qbd validate|transient|stationary|diffusion|simulate|compare|table-g``.
Every subcommand writes its outputs and a ``manifest.json`` into ``--out``
and prints a JSON summary. Exit status: 0 success, 1 failed check,
2 invalid input.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, _kernels
from .diffusion import (
    DiffusionParams,
    convergence_probe,
    h_beta0,
    stationary_density,
    stationary_moments,
)
from .errors import DomainError, QBDError, Unsupported, ValidationError
from .model import ModelParams, build_generator, invariant_phase_distribution, params_from_config
from .simulator import SimConfig, estimate_stationary, estimate_transient
from .stationary import (
    g_approx,
    g_exact,
    limit_mean,
    limit_variance,
    mean_var_closed,
    rho_closed,
    stationary_numeric,
)
from .transient import (
    TransientPath,
    catastrophe_transform_prob,
    moments_closed,
    p0_closed,
    pk_closed,
    spectral_data,
)

EXIT_OK, EXIT_CHECK, EXIT_INPUT = 0, 1, 2

DEFAULT_MODEL = {"N": 4, "d": 2, "lambda": 1.0, "mu": 1.0, "xi": 0.5}

# reference g grid (lambda=0.1, mu=2) and its printed cells: (N, xi) -> (g, g~)
TABLE_G_LAM, TABLE_G_MU = 0.1, 2.0
TABLE_G_PRINTED = {
    (100, 0.0): ("0.420", "0.422"),
    (100, 0.2): ("0.422", "0.424"),
    (100, 0.5): ("0.423", "0.426"),
    (1000, 0.0): ("0.402359", "0.402360"),
    (1000, 0.2): ("0.402505", "0.402506"),
    (1000, 0.5): ("0.402724", "0.402725"),
    (5000, 0.0): ("0.40047833", "0.40047834"),
    (5000, 0.2): ("0.40050816", "0.40050817"),
    (5000, 0.5): ("0.40055290", "0.40055291"),
}


def printed_tolerance(cell: str) -> float:
    """One unit in the last printed digit."""
    return 10.0 ** -len(cell.split(".")[1])


# --- manifest and writers ---------------------------------------------------------

def _sha256_bytes(b: bytes) -> str:
    return hashlib.sha256(b).hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """What a run read and wrote; outputs carry content hashes."""

    command: str
    argv: list
    config_path: str | None
    config_sha256: str | None
    params: dict
    version: str
    seed: int | None
    started: str
    finished: str | None = None
    outputs: list = field(default_factory=list)
    backend: str = _kernels.BACKEND
    status: int | None = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


class Run:
    """Output directory, manifest bookkeeping and the exit status of one command."""

    def __init__(self, args, command: str, config: dict | None, config_bytes: bytes | None):
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(
            command=command,
            argv=list(getattr(args, "_argv", [])),
            config_path=str(args.config) if args.config else None,
            config_sha256=_sha256_bytes(config_bytes) if config_bytes is not None else None,
            params=config or {},
            version=__version__,
            seed=args.seed,
            started=_now(),
        )

    def write_csv(self, name: str, header: Sequence[str], rows) -> Path:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self._record(path)
        return path

    def write_json(self, name: str, obj) -> Path:
        path = self.out / name
        path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
        self._record(path)
        return path

    def _record(self, path: Path):
        self.manifest.outputs.append({"path": path.name, "sha256": _sha256_bytes(path.read_bytes())})

    def finish(self, status: int, summary: dict) -> int:
        self.manifest.finished = _now()
        self.manifest.status = status
        (self.out / "manifest.json").write_text(
            json.dumps(self.manifest.to_dict(), indent=2, sort_keys=True, default=_json_default) + "\n")
        print(json.dumps(summary, sort_keys=True, default=_json_default))
        return status


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def _load_config(path) -> tuple[dict | None, bytes | None]:
    if not path:
        return None, None
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}") from None
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InputError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    return cfg, raw


class InputError(QBDError):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None


def _grid(text: str) -> np.ndarray:
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise InputError(f"grid must be x0:x1:n, got {text!r}") from None
    if n < 2 or not b > a:
        raise InputError("grid needs x1 > x0 and n >= 2")
    return np.linspace(a, b, n)


def _model(cfg: dict | None) -> ModelParams:
    return params_from_config(cfg if cfg is not None else DEFAULT_MODEL)


# --- validate ------------------------------------------------------------------------

def cmd_validate(args, cfg, raw) -> int:
    run = Run(args, "validate", cfg, raw)
    if cfg is None:
        raise InputError("validate needs --config")
    try:
        p = params_from_config(cfg)
        run.manifest.params = p.to_dict()
    except ValidationError as exc:
        report = {"ok": False, "invariant": exc.invariant, "message": str(exc)}
        run.write_json("validate.json", report)
        print(f"invalid: {exc}", file=sys.stderr)
        return run.finish(EXIT_INPUT, report)
    pi = invariant_phase_distribution(p.C)
    report = {
        "ok": True,
        "checked": ["N", "lambda", "mu", "xi", "nonnegativity", "row-sum", "irreducibility", "l0"],
        "d": p.d,
        "n_states": p.n_states,
        "pi": pi,
    }
    run.write_json("validate.json", report)
    return run.finish(EXIT_OK, report)


# --- transient -------------------------------------------------------------------

FIG2_XI = (0.0, 0.5, 1.0, 2.0)


def _fig_times():
    return np.round(np.linspace(0.0, 5.0, 101), 10)


def cmd_transient(args, cfg, raw) -> int:
    run = Run(args, "transient", cfg, raw)
    if args.figure2 or args.moments:
        return _transient_presets(args, run)
    p = _model(cfg)
    run.manifest.params = p.to_dict()
    times = _floats(args.times)
    if any(t < 0 for t in times):
        raise InputError("times must be nonnegative")
    path = TransientPath.from_params(p)
    P = path.marginals(times)
    eq = p.lam == p.mu
    spec = spectral_data(p.mu, p.N) if eq else None
    rows, max_diff = [], 0.0
    for i, t in enumerate(times):
        for k in range(p.N + 1):
            row = [t, k, P[i, k], "", ""]
            if eq:
                if t == 0:
                    c = 1.0 if k == 0 else 0.0
                else:
                    c = pk_closed(p.mu, p.xi, p.N, k, t, spec) if k else p0_closed(p.mu, p.xi, p.N, t, spec)
                row[3:] = [c, abs(c - P[i, k])]
                max_diff = max(max_diff, abs(c - P[i, k]))
            rows.append(row)
    run.write_csv("transient.csv", ["t", "k", "p_numeric", "p_closed", "abs_diff"], rows)
    ks = np.arange(p.N + 1)
    mrows = []
    for i, t in enumerate(times):
        m = float(ks @ P[i])
        v = float(ks**2 @ P[i]) - m * m
        row = [t, m, v]
        if eq:
            M, M2 = moments_closed(p.mu, p.xi, p.N, t, spec) if t > 0 else (0.0, 0.0)
            row += [M, M2 - M * M]
            max_diff = max(max_diff, abs(M - m), abs(M2 - M * M - v))
        mrows.append(row)
    run.write_csv("moments.csv", ["t", "mean", "variance"] + (["mean_closed", "variance_closed"] if eq else []), mrows)
    summary = {"closed_form": eq, "max_abs_diff": max_diff if eq else None}
    if eq:
        print(f"closed vs numeric max |diff| = {max_diff:.3e}", file=sys.stderr)
    return run.finish(EXIT_OK, summary)


def _transient_presets(args, run) -> int:
    ts = _fig_times()
    summary = {}
    if args.figure2:
        cols = []
        for xi in FIG2_XI:
            p = ModelParams(N=3, lam=1.0, mu=1.0, xi=xi)
            cols.append(TransientPath.from_params(p).marginals(ts))
        for k in range(4):
            run.write_csv(f"figure2_k{k}.csv", ["t"] + [f"xi={x:g}" for x in FIG2_XI],
                          [[t] + [c[i, k] for c in cols] for i, t in enumerate(ts)])
        summary["figure2"] = [f"figure2_k{k}.csv" for k in range(4)]
    if args.moments:
        for N in (2, 3):
            series = []
            for xi in FIG2_XI:
                P = TransientPath.from_params(ModelParams(N=N, lam=1.0, mu=1.0, xi=xi)).marginals(ts)
                ks = np.arange(N + 1)
                m = P @ ks
                series.append((m, P @ ks**2 - m * m))
            header = ["t"] + [f"M xi={x:g}" for x in FIG2_XI] + [f"Var xi={x:g}" for x in FIG2_XI]
            run.write_csv(f"moments_N{N}.csv", header,
                          [[t] + [s[0][i] for s in series] + [s[1][i] for s in series] for i, t in enumerate(ts)])
        summary["moments"] = ["moments_N2.csv", "moments_N3.csv"]
    return run.finish(EXIT_OK, summary)


# --- stationary and table-g ---------------------------------------------------------

FIG7_PANELS = ((1.0, 3.0), (1.0, 1.0), (3.0, 1.0))


def table_g_rows(lam: float = TABLE_G_LAM, mu: float = TABLE_G_MU):
    """Exact and approximate ``g`` on the reference grid next to the printed cells."""
    rows = []
    for (N, xi), (pg, pga) in TABLE_G_PRINTED.items():
        p = ModelParams(N=N, lam=lam, mu=mu, xi=xi)
        g, ga = g_exact(p), g_approx(p)
        tg, tga = printed_tolerance(pg), printed_tolerance(pga)
        rows.append({
            "N": N, "xi": xi, "g_exact": g, "g_approx": ga,
            "printed_g": pg, "printed_g_approx": pga,
            "ok_g": abs(g - float(pg)) <= tg, "ok_g_approx": abs(ga - float(pga)) <= tga,
            "tol_g": tg, "tol_g_approx": tga,
        })
    return rows


def _table_g(run, lam, mu) -> tuple[int, dict]:
    rows = table_g_rows(lam, mu)
    keys = ["N", "xi", "g_exact", "g_approx", "printed_g", "printed_g_approx", "tol_g", "tol_g_approx",
            "ok_g", "ok_g_approx"]
    run.write_csv("table_g_check.csv", keys, [[r[k] for k in keys] for r in rows])
    xis = sorted({r["xi"] for r in rows})
    by = {(r["N"], r["xi"]): r for r in rows}
    header = ["N"] + [f"{name} xi={x:g}" for x in xis for name in ("g", "g_approx")]
    run.write_csv("table_g.csv", header,
                  [[N] + [by[N, x][k] for x in xis for k in ("g_exact", "g_approx")]
                   for N in sorted({r["N"] for r in rows})])
    bad = [(r["N"], r["xi"]) for r in rows if not (r["ok_g"] and r["ok_g_approx"])]
    return (EXIT_CHECK if bad else EXIT_OK), {"lambda": lam, "mu": mu, "mismatched_cells": bad}


def cmd_table_g(args, cfg, raw) -> int:
    run = Run(args, "table-g", cfg, raw)
    status, summary = _table_g(run, args.lam, args.mu)
    return run.finish(status, summary)


def cmd_stationary(args, cfg, raw) -> int:
    run = Run(args, "stationary", cfg, raw)
    if args.table_g:
        status, summary = _table_g(run, args.lam if args.lam is not None else TABLE_G_LAM, TABLE_G_MU)
        return run.finish(status, summary)
    if args.figure7:
        for lam, mu in FIG7_PANELS:
            p = ModelParams(N=10, lam=lam, mu=mu, xi=2.0)
            rho = stationary_numeric(build_generator(p)).rho
            run.write_csv(f"figure7_lam{lam:g}_mu{mu:g}.csv", ["k", "rho"], list(enumerate(rho)))
        return run.finish(EXIT_OK, {"figure7": [f"lam={a:g},mu={b:g}" for a, b in FIG7_PANELS]})
    if args.figure8:
        rows = []
        for xi in (0.0, 2.0):
            for lam, mu in FIG7_PANELS:
                for N in range(1, 21):
                    r = stationary_numeric(build_generator(ModelParams(N=N, lam=lam, mu=mu, xi=xi)))
                    rows.append([xi, lam, mu, N, r.mean, r.variance])
        run.write_csv("mean_variance_vs_N.csv", ["xi", "lambda", "mu", "N", "mean", "variance"], rows)
        return run.finish(EXIT_OK, {"rows": len(rows)})
    p = _model(cfg)
    run.manifest.params = p.to_dict()
    if args.limits and not p.lam < p.mu:
        raise InputError(f"large-N limits need lambda < mu (got lambda={p.lam}, mu={p.mu})")
    res = stationary_numeric(build_generator(p))
    g = g_exact(p)
    closed = [rho_closed(p, r, g) for r in range(p.N + 1)]
    run.write_csv("stationary.csv", ["k", "rho_numeric", "rho_closed", "abs_diff"],
                  [[k, res.rho[k], c, abs(c - res.rho[k])] for k, c in enumerate(closed)])
    run.write_csv("joint.csv", ["k", "j", "rho"],
                  [[k, j + 1, res.rho_joint[k, j]] for k in range(p.N + 1) for j in range(p.d)])
    mv = mean_var_closed(p)
    summary = {
        "pi": res.pi, "mean": res.mean, "variance": res.variance, "rho0": res.rho[0],
        "mean_closed": mv.printed_mean, "variance_closed": mv.printed_variance,
        "g_exact": g, "max_abs_diff": float(np.max(np.abs(np.array(closed) - res.rho))),
    }
    if p.lam < p.mu:
        summary["g_approx"] = g_approx(p)
    if args.limits:
        summary.update(limit_mean=limit_mean(p), limit_variance=limit_variance(p))
    run.write_json("summary.json", summary)
    return run.finish(EXIT_OK, summary)


# --- diffusion -------------------------------------------------------------------------

def _dparams(args, cfg) -> DiffusionParams:
    src = dict(cfg or {})
    for k in ("alpha", "beta", "sigma2", "xi"):
        v = getattr(args, k)
        if v is not None:
            src[k] = v
    try:
        return DiffusionParams(alpha=float(src.get("alpha", 1.0)), beta=float(src.get("beta", 0.0)),
                               sigma2=float(src.get("sigma2", 1.0)), xi=float(src.get("xi", 0.0)))
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from None


def cmd_diffusion(args, cfg, raw) -> int:
    run = Run(args, "diffusion", cfg, raw)
    summary: dict[str, Any] = {}
    status = EXIT_OK
    if args.figure10:
        for sg in (1.0, 3.0):
            xs = np.linspace(0.0, 4 * sg, 201)
            cols = [h_beta0(DiffusionParams(1.0, 0.0, sg * sg, xi), xs, 1.0) for xi in (0.0, 1.0, 3.0)]
            run.write_csv(f"figure10_sigma{sg:g}.csv", ["x", "h xi=0", "h xi=1", "h xi=3"],
                          [[x] + [c[i] for c in cols] for i, x in enumerate(xs)])
        summary["figure10"] = True
    if args.figure11:
        for beta in (-1.0, 1.5):
            xs = np.linspace(0.0, max(beta, 0.0) + 4.0, 201)
            cols = [stationary_density(DiffusionParams(1.0, beta, 1.0, xi), xs) for xi in (0.0, 1.0, 2.0)]
            run.write_csv(f"figure11_beta{beta:g}.csv", ["x", "w xi=0", "w xi=1", "w xi=2"],
                          [[x] + [c[i] for c in cols] for i, x in enumerate(xs)])
        summary["figure11"] = True
    if args.figure13:
        rows = []
        for beta in np.round(np.linspace(-3.0, 3.0, 61), 10):
            row = [beta]
            for xi in (0.0, 1.0, 2.0):
                m = stationary_moments(DiffusionParams(1.0, float(beta), 1.0, xi))
                row += [m.ez, m.variance]
            rows.append(row)
        run.write_csv("figure13_moments.csv",
                      ["beta", "mean xi=0", "var xi=0", "mean xi=1", "var xi=1", "mean xi=2", "var xi=2"], rows)
        summary["figure13"] = True
    if args.probe:
        eps = _floats(args.eps)
        target = "stationary" if args.t is None else args.t
        rep = convergence_probe(args.probe_alpha, args.gamma, args.nu, eps, target, xi=args.probe_xi)
        run.write_json("probe.json", rep.to_records())
        summary["probe"] = {"rows": rep.to_records(), "decreasing": rep.decreasing}
        if not rep.decreasing:
            status = EXIT_CHECK
    if args.grid or not summary:
        dp = _dparams(args, cfg)
        run.manifest.params = dp.to_dict()
        xs = _grid(args.grid or "0:5:101")
        if args.t is not None:
            if dp.beta != 0:
                raise InputError("transient densities are available only for beta = 0")
            run.write_csv("density.csv", ["x", "h"], zip(xs, h_beta0(dp, xs, args.t)))
        else:
            run.write_csv("density.csv", ["x", "w"], zip(xs, stationary_density(dp, xs)))
        m = stationary_moments(dp)
        summary.update(params=dp.to_dict(), mean=m.ez, second_moment=m.ez2, variance=m.variance)
    return run.finish(status, summary)


# --- simulate ----------------------------------------------------------------------------

def cmd_simulate(args, cfg, raw) -> int:
    run = Run(args, "simulate", cfg, raw)
    p = _model(cfg)
    run.manifest.params = p.to_dict()
    seed = args.seed if args.seed is not None else 0
    if args.stationary:
        sc = SimConfig(replications=args.reps, horizon=args.horizon, seed=seed, burn_in=args.burn_in)
        est = estimate_stationary(p, sc)
        rows = [["stationary", k, j + 1, est.point[k * p.d + j], est.stderr[k * p.d + j]]
                for k in range(p.N + 1) for j in range(p.d)]
        summary = {"replications": est.n, "burn_in": est.burn_in}
    else:
        times = _floats(args.times)
        horizon = max(args.horizon, max(times))
        sc = SimConfig(replications=args.reps, horizon=horizon, seed=seed, times=tuple(times))
        est = estimate_transient(p, sc)
        rows = [[t, k, j + 1, est.point[i, k * p.d + j], est.stderr[i, k * p.d + j]]
                for i, t in enumerate(est.times) for k in range(p.N + 1) for j in range(p.d)]
        summary = {"replications": est.n, "times": times}
    run.write_csv("simulate.csv", ["t", "k", "j", "estimate", "stderr"], rows)
    return run.finish(EXIT_OK, summary)


# --- compare --------------------------------------------------------------------------

def _perturbed(p: ModelParams, spec: str | None) -> ModelParams:
    if not spec:
        return p
    try:
        name, factor = spec.split(":")
        factor = float(factor)
    except ValueError:
        raise InputError(f"--perturb expects name:factor, got {spec!r}") from None
    attr = {"lambda": "lam", "mu": "mu", "xi": "xi"}.get(name)
    if attr is None:
        raise InputError("--perturb name must be lambda, mu or xi")
    return p.replace(**{attr: getattr(p, attr) * factor})


def compare_checks(p: ModelParams, numeric: ModelParams, seed: int = 0, reps: int = 20000,
                   times: Sequence[float] = (0.5, 1.0, 2.0)) -> list[dict]:
    """Closed forms vs linear algebra vs Monte Carlo at one parameter point.

    ``numeric`` feeds the linear-algebra and simulation sides; pass a
    perturbed copy of ``p`` to confirm the checks can fail.
    """
    checks = []

    def add(name, value, tol, ok=None, note=None):
        ok = bool(value <= tol) if ok is None else ok
        checks.append({"check": name, "value": value, "tolerance": tol, "pass": ok, "note": note})

    res = stationary_numeric(build_generator(numeric))
    g = g_exact(p)
    closed = np.array([rho_closed(p, r, g) for r in range(p.N + 1)])
    add("stationary closed vs linear solve", float(np.max(np.abs(closed - res.rho))), 1e-8)
    pi = invariant_phase_distribution(p.C)
    add("product form rho(k,j) = rho(k) pi_j", float(np.max(np.abs(res.rho_joint - np.outer(closed, pi)))), 1e-8)
    mv = mean_var_closed(p)
    add("stationary mean closed vs linear solve", abs(mv.mean - res.mean), 1e-7)

    path = TransientPath.from_params(numeric)
    P = path.marginals(times)
    if p.lam == p.mu:
        spec = spectral_data(p.mu, p.N)
        err = 0.0
        for i, t in enumerate(times):
            c = [p0_closed(p.mu, p.xi, p.N, t, spec)] + [pk_closed(p.mu, p.xi, p.N, k, t, spec) for k in range(1, p.N + 1)]
            err = max(err, float(np.max(np.abs(np.array(c) - P[i]))))
        add("transient closed vs uniformization", err, 1e-7)
    else:
        add("transient closed vs uniformization", 0.0, 1e-7, True, "skipped: closed forms need lambda == mu")

    if p.xi == 0:
        add("catastrophe transform", 0.0, 1e-8, True, "identity at xi=0")
    else:
        free = TransientPath.from_params(p.replace(xi=0.0))
        err = 0.0
        for i, t in enumerate(times):
            comp = catastrophe_transform_prob(lambda u: free.marginals([u])[0], p.xi, t)
            err = max(err, float(np.max(np.abs(comp - P[i]))))
        add("catastrophe transform vs direct solve", err, 1e-8)

    exact = TransientPath.from_params(p).marginals(times)
    est = estimate_transient(numeric, SimConfig(replications=reps, horizon=max(times), seed=seed, times=tuple(times)))
    lp, ls = est.level_point(), est.level_stderr()
    inside = np.abs(lp - exact) <= 4 * np.maximum(ls, 1e-12)
    frac = float(inside.mean())
    add("Monte Carlo transient within 4 stderr (fraction)", 1.0 - frac, 0.05, frac >= 0.95)
    return checks


def cmd_compare(args, cfg, raw) -> int:
    run = Run(args, "compare", cfg, raw)
    p = _model(cfg)
    run.manifest.params = p.to_dict()
    numeric = _perturbed(p, args.perturb)
    checks = compare_checks(p, numeric, seed=args.seed if args.seed is not None else 0, reps=args.reps)
    failed = [c["check"] for c in checks if not c["pass"]]
    report = {"params": p.to_dict(), "perturb": args.perturb, "checks": checks, "failed": failed}
    run.write_json("compare.json", report)
    for c in checks:
        print(f"{'PASS' if c['pass'] else 'FAIL'}  {c['check']}: {c['value']:.3e} (tol {c['tolerance']:g})"
              + (f"  [{c['note']}]" if c["note"] else ""), file=sys.stderr)
    return run.finish(EXIT_CHECK if failed else EXIT_OK, {"failed": failed})


# --- parser ---------------------------------------------------------------------------

def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON parameter file")
    common.add_argument("--out", default="qbd-out", help="output directory (default: qbd-out)")
    common.add_argument("--seed", type=_u64, default=None, help="64-bit seed for Monte Carlo parts")

    ap = argparse.ArgumentParser(prog="qbd", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"qbd {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check a parameter file")

    t = sub.add_parser("transient", parents=[common], help="time-dependent level law")
    t.add_argument("--times", default="0.25,0.5,1,2,5")
    t.add_argument("--figure2", action="store_true", help="N=3, lambda=mu=1, xi in {0,0.5,1,2} curves")
    t.add_argument("--moments", action="store_true", help="mean and variance curves for N=2 and N=3")

    s = sub.add_parser("stationary", parents=[common], help="long-run law and moments")
    s.add_argument("--table-g", action="store_true")
    s.add_argument("--lam", type=float, default=None, help="lambda for --table-g (default 0.1)")
    s.add_argument("--figure7", action="store_true")
    s.add_argument("--figure8", action="store_true", help="mean and variance against N (two figures)")
    s.add_argument("--limits", action="store_true", help="large-N limits (needs lambda < mu)")

    d = sub.add_parser("diffusion", parents=[common], help="diffusion densities, moments, probe")
    d.add_argument("--alpha", type=float)
    d.add_argument("--beta", type=float)
    d.add_argument("--sigma2", type=float)
    d.add_argument("--xi", type=float)
    d.add_argument("--grid", help="x0:x1:n")
    d.add_argument("--t", type=float, default=None, help="time for h(x,t); omit for w(x)")
    d.add_argument("--figure10", action="store_true")
    d.add_argument("--figure11", action="store_true")
    d.add_argument("--figure13", action="store_true")
    d.add_argument("--probe", action="store_true")
    d.add_argument("--eps", default="0.2,0.1,0.05")
    d.add_argument("--nu", type=float, default=1.0)
    d.add_argument("--gamma", type=float, default=0.0)
    d.add_argument("--probe-alpha", type=float, default=1.0)
    d.add_argument("--probe-xi", type=float, default=1.0)

    m = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimates")
    m.add_argument("--reps", type=int, default=10000)
    m.add_argument("--horizon", type=float, default=1.0)
    m.add_argument("--times", default="1")
    m.add_argument("--stationary", action="store_true", help="time-average occupancy instead")
    m.add_argument("--burn-in", type=float, default=None)

    c = sub.add_parser("compare", parents=[common], help="closed form vs linear algebra vs Monte Carlo")
    c.add_argument("--reps", type=int, default=20000)
    c.add_argument("--perturb", default=None, help="test hook, e.g. lambda:1.01 on the numeric side")

    g = sub.add_parser("table-g", parents=[common], help="exact and approximate g on the reference grid")
    g.add_argument("--lam", type=float, default=TABLE_G_LAM)
    g.add_argument("--mu", type=float, default=TABLE_G_MU)
    return ap


COMMANDS = {
    "validate": cmd_validate,
    "transient": cmd_transient,
    "stationary": cmd_stationary,
    "diffusion": cmd_diffusion,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "table-g": cmd_table_g,
}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    args._argv = argv
    try:
        cfg, raw = _load_config(args.config)
        return COMMANDS[args.command](args, cfg, raw)
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, DomainError, Unsupported) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
