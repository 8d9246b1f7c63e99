"""Monte Carlo estimation of kinetic coefficients from sampled paths.

Paths ``S(t)`` are simulated from simple increment models, their joint
cumulants are computed at every time node, and the coefficients are
``D^alpha = slope_t(cumulant_alpha) / |alpha|!`` with the slope taken by least
squares over the whole time grid. Standard errors come from the leave-one-out
jackknife over samples.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import ContractViolation, UnsupportedOrderError
from .kinetic import LITERAL, STANDARD, CoefficientSet, multi_indices, term_sign

log = logging.getLogger(__name__)

__all__ = [
    "IncrementModel",
    "gaussian",
    "poisson",
    "user_table",
    "PathEnsemble",
    "CumulantTable",
    "ConnectionCoefficients",
    "BCoefficients",
    "sample_paths",
    "moments_to_cumulants",
    "estimate_D",
    "estimate_B",
    "set_partitions",
]

MAX_ORDER = 4


@dataclass
class IncrementModel:
    """Independent increments over a step ``dt``.

    * ``gaussian``: ``N(mu dt, cov dt)``.
    * ``poisson``: ``jump * Poisson(lam dt)``.
    * ``user-table``: one row of ``values`` per step, drawn with ``probs``
      (the table is taken per step, whatever the step length).
    """

    kind: str
    params: dict

    def __post_init__(self):
        p = self.params
        if self.kind == "gaussian":
            mu = np.atleast_1d(np.asarray(p["mu"], float))
            cov = np.asarray(p["cov"], float)
            if cov.ndim < 2:
                cov = np.diag(np.broadcast_to(np.atleast_1d(cov), mu.shape))
            if cov.shape != (mu.size, mu.size):
                raise ContractViolation("gaussian covariance must be n x n")
            if not np.allclose(cov, cov.T) or np.linalg.eigvalsh(cov).min() < -1e-14:
                raise ContractViolation("gaussian covariance must be symmetric positive semi-definite")
            if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(cov))):
                raise ContractViolation("gaussian parameters must be finite")
            p["mu"], p["cov"] = mu, cov
            w, V = np.linalg.eigh(cov)
            p["_root"] = V * np.sqrt(np.clip(w, 0.0, None))
        elif self.kind == "poisson":
            lam = float(p["lam"])
            if not (np.isfinite(lam) and lam >= 0):
                raise ContractViolation("poisson rate must be finite and non-negative")
            jump = np.atleast_1d(np.asarray(p.get("jump", 1.0), float))
            p["lam"], p["jump"] = lam, jump
        elif self.kind == "user-table":
            values = np.asarray(p["values"], float)
            if values.ndim == 1:
                values = values[:, None]
            probs = np.asarray(p["probs"], float)
            if probs.shape != (values.shape[0],) or np.any(probs < 0) or not np.isclose(probs.sum(), 1.0):
                raise ContractViolation("user-table probabilities must be non-negative, one per row, summing to 1")
            p["values"], p["probs"] = values, probs / probs.sum()
        else:
            raise ContractViolation(f"unknown increment model {self.kind!r}")

    @property
    def n(self) -> int:
        p = self.params
        if self.kind == "gaussian":
            return p["mu"].size
        if self.kind == "poisson":
            return p["jump"].size
        return p["values"].shape[1]

    def describe(self) -> str:
        p = self.params
        if self.kind == "gaussian":
            return f"gaussian(mu={p['mu'].tolist()}, cov={p['cov'].tolist()})"
        if self.kind == "poisson":
            return f"poisson(lam={p['lam']}, jump={p['jump'].tolist()})"
        return f"user-table({p['values'].tolist()}, {p['probs'].tolist()})"

    def draw(self, rng: np.random.Generator, dts: np.ndarray) -> np.ndarray:
        p = self.params
        J = dts.size
        if self.kind == "gaussian":
            z = rng.standard_normal((J, self.n))
            return p["mu"] * dts[:, None] + (z @ p["_root"].T) * np.sqrt(dts)[:, None]
        if self.kind == "poisson":
            k = rng.poisson(p["lam"] * dts)
            return k[:, None] * p["jump"]
        idx = rng.choice(p["values"].shape[0], size=J, p=p["probs"])
        return p["values"][idx]


def gaussian(mu, sigma2=None, cov=None) -> IncrementModel:
    if cov is None:
        cov = sigma2
    return IncrementModel("gaussian", {"mu": mu, "cov": cov})


def poisson(lam, jump=1.0) -> IncrementModel:
    return IncrementModel("poisson", {"lam": lam, "jump": jump})


def user_table(values, probs) -> IncrementModel:
    return IncrementModel("user-table", {"values": values, "probs": probs})


@dataclass
class PathEnsemble:
    """``samples[i, j, mu]`` is ``S^mu`` of sample ``i`` at time ``t[j]``."""

    samples: np.ndarray
    t: np.ndarray
    seed: int = 0
    model: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        if self.samples.ndim == 2:
            self.samples = self.samples[:, :, None]
        if self.samples.ndim != 3 or self.samples.shape[1] != self.t.size:
            raise ContractViolation("samples must have shape (N, len(t), n)")
        if self.samples.shape[0] < 2:
            raise ContractViolation("an ensemble needs at least two samples")

    @property
    def N(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.samples.shape[2]


def _stream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def sample_paths(model: IncrementModel, N: int, t, seed: int = 0, workers: int = 1, S0=None) -> PathEnsemble:
    """Simulate ``N`` paths on the grid ``t``.

    Sample ``i`` draws from its own counter-based stream keyed by
    ``(seed, i)``, so the ensemble does not depend on ``workers``.
    """
    if N < 2:
        raise ContractViolation("need N >= 2")
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise ContractViolation("time grid must be strictly increasing with at least two points")
    if not 0 <= int(seed) < 2**64:
        raise ContractViolation("seed must be an unsigned 64-bit integer")
    dts = np.diff(t)
    n = model.n
    out = np.zeros((N, t.size, n))
    if S0 is not None:
        out[:, 0, :] = np.asarray(S0, float)

    def fill(lo, hi):
        for i in range(lo, hi):
            inc = model.draw(_stream(seed, i), dts)
            out[i, 1:, :] = out[i, 0, :] + np.cumsum(inc, axis=0)

    workers = max(1, int(workers))
    if workers == 1:
        fill(0, N)
    else:
        bounds = np.linspace(0, N, workers + 1).astype(int)
        with ThreadPoolExecutor(workers) as ex:
            list(ex.map(lambda b: fill(*b), zip(bounds[:-1], bounds[1:])))
    return PathEnsemble(out, t, int(seed), model.describe())


def set_partitions(items: List[int]):
    """All partitions of ``items`` into non-empty blocks."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1 :]
        yield [[first]] + part


def _cumulant_from_moments(alpha, moment):
    """Joint cumulant of ``alpha`` given ``moment(block) -> array``."""
    total = 0.0
    for part in set_partitions(list(range(len(alpha)))):
        b = len(part)
        term = (-1) ** (b - 1) * math.factorial(b - 1)
        for block in part:
            term = term * moment(tuple(sorted(alpha[i] for i in block)))
        total = total + term
    return total


@dataclass
class CumulantTable:
    """Joint cumulants per time node, keyed by sorted multi-index."""

    t: np.ndarray
    indices: List[Tuple[int, ...]]
    values: np.ndarray
    se: np.ndarray
    N: int
    replicates: Optional[np.ndarray] = field(default=None, repr=False)

    def column(self, alpha) -> int:
        return self.indices.index(tuple(sorted(alpha)))

    def __getitem__(self, alpha) -> np.ndarray:
        return self.values[:, self.column(alpha)]

    def stderr(self, alpha) -> np.ndarray:
        return self.se[:, self.column(alpha)]

    @property
    def max_order(self) -> int:
        return max(len(a) for a in self.indices)


def moments_to_cumulants(E: PathEnsemble, maxOrder: int = 4, keep_replicates: bool = True) -> CumulantTable:
    """Joint cumulants up to ``maxOrder`` with leave-one-out jackknife errors.

    Moments are taken about the full-sample mean, which keeps the partition
    sums well conditioned; leave-one-out moments follow in closed form.
    """
    if maxOrder > MAX_ORDER:
        raise UnsupportedOrderError(f"cumulant order {maxOrder} exceeds {MAX_ORDER}")
    if maxOrder < 1:
        raise ContractViolation("maxOrder must be at least 1")
    N, J, n = E.samples.shape
    if N < 10 * 2**maxOrder:
        warnings.warn(f"N={N} is small for order-{maxOrder} error bars", RuntimeWarning, stacklevel=2)
    indices = multi_indices(n, maxOrder)
    values = np.zeros((J, len(indices)))
    se = np.zeros_like(values)
    reps = np.zeros((N, J, len(indices))) if keep_replicates else None
    for j in range(J):
        X = E.samples[:, j, :]
        c = X.mean(axis=0)
        Xc = X - c
        full, loo = {}, {}

        def moment_full(block):
            if block not in full:
                full[block] = float(np.mean(np.prod(Xc[:, list(block)], axis=1)))
            return full[block]

        def moment_loo(block):
            if block not in loo:
                prods = np.prod(Xc[:, list(block)], axis=1)
                loo[block] = (N * moment_full(block) - prods) / (N - 1)
            return loo[block]

        for a, alpha in enumerate(indices):
            shift = c[alpha[0]] if len(alpha) == 1 else 0.0
            values[j, a] = _cumulant_from_moments(alpha, moment_full) + shift
            r = _cumulant_from_moments(alpha, moment_loo) + shift
            se[j, a] = math.sqrt((N - 1) / N * float(np.sum((r - r.mean()) ** 2)))
            if keep_replicates:
                reps[:, j, a] = r
    return CumulantTable(E.t.copy(), indices, values, se, N, reps)


def _slope_weights(t):
    tc = t - t.mean()
    return tc / np.dot(tc, tc)


def estimate_D(T: CumulantTable, normalization: str = STANDARD) -> CoefficientSet:
    """``D^alpha = slope(cumulant_alpha) / |alpha|!`` by least squares in time.

    The same numbers are produced for either normalisation; the tag tells the
    generator how to combine them. Jackknife errors of the slope are attached.
    """
    if normalization not in (STANDARD, LITERAL):
        raise ValueError(f"unknown normalization {normalization!r}")
    if T.t.size < 3:
        raise ContractViolation("need at least three time points")
    if np.any(np.diff(T.t) <= 0):
        raise ContractViolation("time grid must be strictly increasing")
    w = _slope_weights(T.t)
    entries, se = {}, {}
    for a, alpha in enumerate(T.indices):
        k = len(alpha)
        entries[alpha] = float(np.dot(w, T.values[:, a])) / math.factorial(k)
        if T.replicates is not None:
            r = T.replicates[:, :, a] @ w / math.factorial(k)
            N = r.size
            se[alpha] = math.sqrt((N - 1) / N * float(np.sum((r - r.mean()) ** 2)))
    return CoefficientSet(entries, normalization, se)


@dataclass
class ConnectionCoefficients:
    """``A[i, mu, nu]``; all zero is the flat case."""

    A: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        n = self.A.shape[0] if self.A.ndim else 0
        if self.A.shape != (n, n, n):
            raise ContractViolation(f"connection coefficients must have shape (n, n, n), got {self.A.shape}")
        if not np.all(np.isfinite(self.A)):
            raise ContractViolation("connection coefficients must be finite")

    @classmethod
    def flat(cls, n: int) -> "ConnectionCoefficients":
        return cls(np.zeros((n, n, n)))

    @property
    def is_flat(self) -> bool:
        return not np.any(self.A)


@dataclass
class BCoefficients:
    """``entries[(alpha, i)] = B_i^alpha`` plus the velocity they were built for.

    ``C`` is an additive constant in the contraction ``wp_i ydot^i``; it is
    zero for dissipative systems.
    """

    entries: Dict[Tuple[Tuple[int, ...], int], float]
    ydot: np.ndarray
    C: float = 0.0
    se: Dict[Tuple[Tuple[int, ...], int], float] = field(default_factory=dict)

    def __getitem__(self, key) -> float:
        alpha, i = key
        return self.entries.get((tuple(sorted(alpha)), int(i)), 0.0)


def _transform(E: PathEnsemble, A: ConnectionCoefficients) -> PathEnsemble:
    """Increments mapped through ``L^i_mu = delta + A^i_{mu nu} S^nu`` (trapezoid in time)."""
    S = E.samples
    dS = np.diff(S, axis=1)
    L = np.eye(E.n)[None, None] + np.einsum("imn,sjn->sjim", A.A, S)
    Lbar = 0.5 * (L[:, 1:] + L[:, :-1])
    dS2 = np.einsum("sjim,sjm->sji", Lbar, dS)
    out = np.concatenate([S[:, :1], S[:, :1] + np.cumsum(dS2, axis=1)], axis=1)
    return PathEnsemble(out, E.t, E.seed, E.model)


def estimate_B(
    E: PathEnsemble,
    A: Optional[ConnectionCoefficients] = None,
    maxOrder: int = 2,
    normalization: str = STANDARD,
    C: float = 0.0,
) -> BCoefficients:
    """Flux coefficients ``B_i^alpha`` whose contraction with the drift velocity
    reproduces the generator term by term::

        B_i^alpha ydot^i = s_k D^alpha,    ydot = D^{(mu)}.

    The minimum-norm solution ``B_i^alpha = s_k D^alpha ydot_i / |ydot|^2`` is
    returned; when the drift vanishes every ``B`` is zero.
    """
    if A is None:
        A = ConnectionCoefficients.flat(E.n)
    if A.A.shape[0] != E.n:
        raise ContractViolation(f"connection coefficients are for n={A.A.shape[0]}, ensemble has n={E.n}")
    if not A.is_flat:
        E = _transform(E, A)
    D = estimate_D(moments_to_cumulants(E, maxOrder), normalization)
    ydot = np.array([D[(mu,)] for mu in range(E.n)])
    norm2 = float(np.dot(ydot, ydot))
    entries, se = {}, {}
    for alpha, d in D.entries.items():
        s = term_sign(len(alpha), normalization)
        for i in range(E.n):
            if norm2 > 0:
                entries[(alpha, i)] = s * d * ydot[i] / norm2
                if alpha in D.se:
                    se[(alpha, i)] = abs(s * D.se[alpha] * ydot[i] / norm2)
            else:
                entries[(alpha, i)] = 0.0
                se[(alpha, i)] = 0.0
    return BCoefficients(entries, ydot, float(C), se)
