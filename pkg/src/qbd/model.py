"""Model parameters, phase-switch matrices and the sparse generator."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
import scipy.sparse as sp

from .errors import SingularSystem, ValidationError

__all__ = [
    "PhaseSwitchMatrix",
    "ModelParams",
    "GeneratorMatrix",
    "validate",
    "build_generator",
    "invariant_phase_distribution",
    "preset_matrix",
    "random_walk_pi_printed",
    "params_from_config",
    "state_index",
]

ROW_SUM_TOL = 1e-12
POSITIVE_TOL = 1e-15


def state_index(k: int, j: int, d: int) -> int:
    """Flattened id of level ``k`` and 1-based phase ``j``."""
    return k * d + (j - 1)


@dataclass(frozen=True)
class PhaseSwitchMatrix:
    """Stochastic matrix for the destination phase of departures from level 0.

    ``c[l, j]`` is the probability of entering phase ``j`` (0-based columns)
    when leaving the origin from phase ``l``.
    """

    c: np.ndarray

    def __post_init__(self):
        arr = np.array(self.c, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValidationError("shape", f"C must be square, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "c", arr)

    @property
    def d(self) -> int:
        return self.c.shape[0]

    def check(self) -> None:
        c = self.c
        if not np.all(np.isfinite(c)):
            raise ValidationError("finite", "C has non-finite entries")
        neg = np.argwhere(c < 0)
        if len(neg):
            l, j = neg[0]
            raise ValidationError("nonnegativity", f"C[{l + 1},{j + 1}] = {c[l, j]} < 0")
        sums = c.sum(axis=1)
        for l, s in enumerate(sums):
            if abs(s - 1.0) > ROW_SUM_TOL:
                raise ValidationError("row-sum", f"row {l + 1} of C sums to {float(s)!r}, expected 1")
        if not _strongly_connected(c > POSITIVE_TOL):
            raise ValidationError("irreducibility", "C is reducible (positive-entry digraph not strongly connected)")


def _reach(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adj[u]):
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return seen


def _strongly_connected(adj: np.ndarray) -> bool:
    return bool(_reach(adj, 0).all() and _reach(adj.T, 0).all())


@dataclass(frozen=True)
class ModelParams:
    """Full parameterization of the QBD with catastrophes.

    Parameters
    ----------
    N : int
        Maximum level.
    lam, mu : float
        Birth and death rate scales. From level ``k`` the up rate is
        ``lam*(N-k)`` and the down rate is ``mu*(N+k)``.
    xi : float
        Catastrophe rate; ``xi = 0`` is the catastrophe-free model.
    C : PhaseSwitchMatrix
        Phase switching at the origin.
    l0 : int
        Initial phase, 1-based.
    """

    N: int
    lam: float
    mu: float
    xi: float = 0.0
    C: PhaseSwitchMatrix = field(default_factory=lambda: PhaseSwitchMatrix(np.ones((1, 1))))
    l0: int = 1

    def __post_init__(self):
        if not isinstance(self.C, PhaseSwitchMatrix):
            object.__setattr__(self, "C", PhaseSwitchMatrix(self.C))

    @property
    def d(self) -> int:
        return self.C.d

    @property
    def n_states(self) -> int:
        return self.d * (self.N + 1)

    def replace(self, **kw) -> "ModelParams":
        data = dict(N=self.N, lam=self.lam, mu=self.mu, xi=self.xi, C=self.C, l0=self.l0)
        data.update(kw)
        return ModelParams(**data)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "d": self.d,
            "lambda": self.lam,
            "mu": self.mu,
            "xi": self.xi,
            "l0": self.l0,
            "C": self.C.c.tolist(),
        }


def validate(params: ModelParams) -> ModelParams:
    """Check every parameter invariant and return ``params`` unchanged.

    Raises
    ------
    ValidationError
        Names the violated invariant.
    """
    N = params.N
    if isinstance(N, bool) or int(N) != N or N < 1:
        raise ValidationError("N", f"N must be a positive integer, got {N!r}")
    for name, v in (("lambda", params.lam), ("mu", params.mu)):
        if not (isinstance(v, (int, float, np.floating)) and math.isfinite(v) and v > 0):
            raise ValidationError(name, f"{name} must be a finite positive rate, got {v!r}")
    xi = params.xi
    if not (math.isfinite(xi) and xi >= 0):
        raise ValidationError("xi", f"xi must be finite and >= 0, got {xi!r}")
    params.C.check()
    if not (1 <= params.l0 <= params.d) or int(params.l0) != params.l0:
        raise ValidationError("l0", f"l0 must lie in 1..{params.d}, got {params.l0!r}")
    return params


@dataclass(frozen=True)
class GeneratorMatrix:
    """Sparse generator over ``d(N+1)`` states, level-major layout."""

    Q: sp.csr_matrix
    N: int
    d: int

    @property
    def n_states(self) -> int:
        return self.Q.shape[0]

    def block(self, k: int, k2: int) -> np.ndarray:
        """Dense ``d x d`` block of rates from level ``k`` to level ``k2``."""
        d = self.d
        return self.Q[k * d:(k + 1) * d, k2 * d:(k2 + 1) * d].toarray()

    def dense(self) -> np.ndarray:
        return self.Q.toarray()


def build_generator(params: ModelParams) -> GeneratorMatrix:
    """Assemble the rate matrix from the three transition rules.

    From ``(0,l)`` the level rises to ``(1,j)`` at rate ``c[l,j]*lam*N``.
    From ``(k,j)`` with ``k >= 1``: up at ``lam*(N-k)``, down at
    ``mu*(N+k)``, and a catastrophe to ``(0,j)`` at ``xi``.

    Examples
    --------
    >>> g = build_generator(ModelParams(N=1, lam=1.0, mu=1.0))
    >>> g.dense().tolist()
    [[-1.0, 1.0], [2.0, -2.0]]
    """
    validate(params)
    N, d = params.N, params.d
    lam, mu, xi = float(params.lam), float(params.mu), float(params.xi)
    C = params.C.c
    rows, cols, vals = [], [], []

    def add(r, c, v):
        if v != 0.0:
            rows.append(r)
            cols.append(c)
            vals.append(v)

    for l in range(d):
        out = 0.0
        for j in range(d):
            rate = C[l, j] * lam * N
            add(l, d + j, rate)
            out += rate
        add(l, l, -out)
    for k in range(1, N + 1):
        up = lam * (N - k) if k < N else 0.0
        down = mu * (N + k)
        for j in range(d):
            s = k * d + j
            add(s, s + d, up)
            if k == 1:
                add(s, j, down + xi)
            else:
                add(s, s - d, down)
                add(s, j, xi)
            add(s, s, -(up + down + xi))
    n = d * (N + 1)
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    Q.sum_duplicates()
    return GeneratorMatrix(Q=Q, N=N, d=d)


def invariant_phase_distribution(C: PhaseSwitchMatrix | np.ndarray) -> np.ndarray:
    """Unique probability vector with ``pi C = pi``.

    Solves ``(C^T - I) pi = 0`` with one equation replaced by ``sum(pi) = 1``.
    """
    c = C.c if isinstance(C, PhaseSwitchMatrix) else np.asarray(C, dtype=float)
    d = c.shape[0]
    A = c.T - np.eye(d)
    A[-1, :] = 1.0
    b = np.zeros(d)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("invariant distribution of C is not unique") from exc
    if not np.all(np.isfinite(pi)) or np.abs(pi @ c - pi).max() > 1e-9:
        raise SingularSystem("invariant distribution of C is not unique")
    return pi


def preset_matrix(name: str, d: int, p: float | None = None) -> PhaseSwitchMatrix:
    """Phase-switch presets: ``uniform``, ``cyclic`` and ``random_walk``.

    ``random_walk`` moves from phase 1 to 2, from an interior phase ``l``
    to ``l+1`` with probability ``p`` and to ``l-1`` otherwise, and from
    phase ``d`` back to 1.
    """
    if d < 1:
        raise ValidationError("d", "d must be >= 1")
    if name == "uniform":
        c = np.full((d, d), 1.0 / d)
    elif name == "cyclic":
        c = np.roll(np.eye(d), 1, axis=1)
    elif name == "random_walk":
        if p is None or not 0 <= p <= 1:
            raise ValidationError("p", "random_walk preset needs 0 <= p <= 1")
        if d == 1:
            c = np.ones((1, 1))
        else:
            c = np.zeros((d, d))
            c[0, 1] = 1.0
            for l in range(1, d - 1):
                c[l, l - 1] = 1.0 - p
                c[l, l + 1] = p
            c[d - 1, 0] = 1.0
    else:
        raise ValidationError("C", f"unknown preset {name!r}")
    return PhaseSwitchMatrix(c)


def random_walk_pi_printed(d: int, p: float) -> np.ndarray:
    """Closed-form invariant law printed for the random-walk preset.

    Kept for comparison only: it solves ``pi C = pi`` for ``d = 4`` but not
    in general, so :func:`invariant_phase_distribution` is authoritative.
    """
    pi = np.empty(d)
    den = 2.0 * (1.0 + p * p)
    pi[0] = 1.0 - (1.0 - p ** (d - 1)) / ((1.0 - p) * den) if p != 1 else 1.0 - (d - 1) / den
    for j in range(2, d + 1):
        pi[j - 1] = p ** (j - 2) / den
    return pi


def params_from_config(cfg: Mapping[str, Any]) -> ModelParams:
    """Build and validate :class:`ModelParams` from a JSON-style mapping.

    ``C`` is either a row-major matrix or ``{"preset": name, "p": value}``.
    A missing ``C`` means a single phase.
    """
    try:
        N = cfg["N"]
        lam = cfg["lambda"]
        mu = cfg["mu"]
    except KeyError as exc:
        raise ValidationError(str(exc.args[0]), f"missing key {exc.args[0]!r}") from None
    xi = cfg.get("xi", 0.0)
    for name, v in (("N", N), ("lambda", lam), ("mu", mu), ("xi", xi)):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValidationError(name, f"{name} must be a number, got {v!r}")
    Cspec = cfg.get("C")
    d = cfg.get("d")
    if Cspec is None:
        C = preset_matrix("uniform", int(d) if d is not None else 1)
    elif isinstance(Cspec, Mapping):
        if d is None:
            raise ValidationError("d", "preset C needs an explicit d")
        C = preset_matrix(str(Cspec.get("preset")), int(d), Cspec.get("p"))
    else:
        C = PhaseSwitchMatrix(np.asarray(Cspec, dtype=float))
        if d is not None and C.d != d:
            raise ValidationError("d", f"d={d} but C is {C.d}x{C.d}")
    l0 = cfg.get("l0", 1)
    if isinstance(N, float) and N.is_integer():
        N = int(N)
    params = ModelParams(N=N, lam=float(lam), mu=float(mu), xi=float(xi), C=C, l0=l0)
    return validate(params)
