"""Truncated kinetic equation ``dP/dt = L P`` on regular grids in one or two dimensions.

The generator is

    L = sum_k s_k sum_alpha D^alpha d_alpha,     1 <= |alpha| <= K <= 4,

with ``s_k = (-1)^k`` for net ("standard") coefficients and
``s_k = (-1)^k / k!`` for the "literal" composition in which the coefficients
already carry a ``1/k!``. The sum over ``alpha`` runs over all ordered index
tuples, so a sorted multi-index such as ``(0, 1)`` counts with its number of
distinct orderings.

Spatial derivatives use second-order central stencils. Every term is written
as the divergence of a face flux along one axis, which makes the scheme
conservative: with ``reflecting`` boundaries the boundary flux is zero and the
mass is preserved to round-off, with ``periodic`` boundaries the sum
telescopes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CFLViolation, ContractViolation, UnsupportedOrderError

log = logging.getLogger(__name__)

__all__ = [
    "GridDensity",
    "JetStack",
    "CoefficientSet",
    "MAX_ORDER",
    "multi_indices",
    "multiplicity",
    "term_sign",
    "gaussian_density",
    "apply_generator",
    "generator_matrix",
    "cfl_limit",
    "evolve",
    "stationary_second_order",
    "jet_prolong",
    "connection_flux",
]

MAX_ORDER = 4
PERIODIC, REFLECTING = "periodic", "reflecting"
STANDARD, LITERAL = "standard", "literal"


def multi_indices(dim: int, max_order: int, min_order: int = 1):
    """Sorted multi-indices over ``dim`` axes with ``min_order <= |alpha| <= max_order``."""
    out = []
    for k in range(min_order, max_order + 1):
        out.extend(combinations_with_replacement(range(dim), k))
    return out


def multiplicity(alpha) -> int:
    """Number of distinct orderings of ``alpha``."""
    counts = np.bincount(alpha) if len(alpha) else np.array([], dtype=int)
    m = math.factorial(len(alpha))
    for c in counts:
        m //= math.factorial(int(c))
    return m


def term_sign(k: int, normalization: str = STANDARD) -> float:
    if normalization == STANDARD:
        return float((-1) ** k)
    if normalization == LITERAL:
        return (-1) ** k / math.factorial(k)
    raise ValueError(f"unknown normalization {normalization!r}")


def _canon(alpha) -> Tuple[int, ...]:
    return tuple(sorted(int(a) for a in alpha))


@dataclass
class GridDensity:
    """A density sampled on a regular grid.

    Periodic grids exclude the right end point; reflecting grids are cell
    centred. In both cases ``dx = (max - min) / m`` and the mass is
    ``sum(values) * prod(dx)``.
    """

    extents: Sequence[Tuple[float, float]]
    m: int
    values: np.ndarray
    bc: str = PERIODIC
    audit: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.extents = [tuple(map(float, e)) for e in self.extents]
        if not 1 <= len(self.extents) <= 2:
            raise ContractViolation("grids support one or two dimensions")
        if self.bc not in (PERIODIC, REFLECTING):
            raise ContractViolation(f"unknown boundary condition {self.bc!r}")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.m,) * self.dim:
            raise ContractViolation(f"values shape {self.values.shape} does not match m={self.m}, dim={self.dim}")

    @classmethod
    def from_function(cls, f, extents, m, bc=PERIODIC, normalize=True):
        g = cls(extents, m, np.zeros((m,) * len(extents)), bc)
        g.values = np.asarray(f(*g.mesh()), dtype=float)
        if normalize:
            g.values = g.values / g.mass()
        return g

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def dx(self) -> np.ndarray:
        return np.array([(b - a) / self.m for a, b in self.extents])

    def axes(self):
        out = []
        for (a, b), h in zip(self.extents, self.dx):
            off = 0.0 if self.bc == PERIODIC else 0.5
            out.append(a + (np.arange(self.m) + off) * h)
        return out

    def mesh(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    def mass(self) -> float:
        return float(np.sum(self.values) * np.prod(self.dx))

    def mean(self) -> np.ndarray:
        w = self.values * np.prod(self.dx)
        return np.array([np.sum(w * Y) for Y in self.mesh()]) / np.sum(w)

    def variance(self) -> np.ndarray:
        w = self.values * np.prod(self.dx)
        mu = self.mean()
        return np.array([np.sum(w * (Y - c) ** 2) for Y, c in zip(self.mesh(), mu)]) / np.sum(w)

    def with_values(self, values) -> "GridDensity":
        return GridDensity(self.extents, self.m, values, self.bc, dict(self.audit))


def gaussian_density(mean, var, extents, m, bc=PERIODIC) -> GridDensity:
    mean = np.atleast_1d(np.asarray(mean, float))
    var = np.atleast_1d(np.asarray(var, float))

    def f(*Y):
        out = 1.0
        for y, mu, v in zip(Y, mean, var):
            out = out * np.exp(-((y - mu) ** 2) / (2 * v))
        return out

    return GridDensity.from_function(f, extents, m, bc)


@dataclass
class CoefficientSet:
    """Constant coefficients ``D^alpha`` keyed by sorted multi-index."""

    entries: Dict[Tuple[int, ...], float]
    normalization: str = STANDARD
    se: Dict[Tuple[int, ...], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.normalization not in (STANDARD, LITERAL):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        clean: Dict[Tuple[int, ...], float] = {}
        for a, v in self.entries.items():
            key = _canon(a)
            if len(key) < 1:
                raise ContractViolation("coefficients start at order one")
            if key in clean and clean[key] != float(v):
                raise ContractViolation(f"conflicting values for permutations of {key}")
            clean[key] = float(v)
        self.entries = clean
        self.se = {_canon(a): float(v) for a, v in self.se.items()}

    def __getitem__(self, alpha) -> float:
        return self.entries.get(_canon(alpha), 0.0)

    @property
    def order(self) -> int:
        return max((len(a) for a in self.entries), default=0)

    @property
    def dim(self) -> int:
        return 1 + max((max(a) for a in self.entries), default=0)


# -- one-dimensional stencils -------------------------------------------------

_CENTRAL = {
    1: (np.array([-0.5, 0.0, 0.5]), 1),
    2: (np.array([1.0, -2.0, 1.0]), 1),
    3: (np.array([-0.5, 1.0, 0.0, -1.0, 0.5]), 2),
    4: (np.array([1.0, -4.0, 6.0, -4.0, 1.0]), 2),
}


def _pad(f, axis, width, bc):
    pad = [(0, 0)] * f.ndim
    pad[axis] = (width, width)
    return np.pad(f, pad, mode="wrap" if bc == PERIODIC else "symmetric")


def _shift(fp, axis, start, length):
    sl = [slice(None)] * fp.ndim
    sl[axis] = slice(start, start + length)
    return fp[tuple(sl)]


def _central(f, order, axis, h, bc):
    """Centred ``d^order f`` along ``axis``; reflecting ends use mirrored ghosts."""
    if order == 0:
        return f
    w, half = _CENTRAL[order]
    m = f.shape[axis]
    fp = _pad(f, axis, half, bc)
    out = np.zeros_like(f)
    for j, c in enumerate(w):
        if c != 0.0:
            out = out + c * _shift(fp, axis, j, m)
    return out / h**order


def _conservative(f, order, axis, h, bc):
    """``d^order f`` as a face-flux divergence along ``axis``.

    Interior values coincide with :func:`_central`; with reflecting
    boundaries the two outer face fluxes are zero.
    """
    m = f.shape[axis]
    if order % 2 == 1:
        inner = _central(f, order - 1, axis, h, bc)
        fp = _pad(inner, axis, 1, bc)
        face = 0.5 * (_shift(fp, axis, 0, m + 1) + _shift(fp, axis, 1, m + 1))
    else:
        inner = _central(f, order - 2, axis, h, bc)
        fp = _pad(inner, axis, 1, bc)
        face = (_shift(fp, axis, 1, m + 1) - _shift(fp, axis, 0, m + 1)) / h
    if bc == REFLECTING:
        sl = [slice(None)] * f.ndim
        sl[axis] = 0
        face[tuple(sl)] = 0.0
        sl[axis] = m
        face[tuple(sl)] = 0.0
    return (_shift(face, axis, 1, m) - _shift(face, axis, 0, m)) / h


def _counts(alpha, dim):
    return [alpha.count(a) for a in range(dim)]


def _flux_split(alpha, dim):
    """Split the orderings of ``alpha`` by their first (outermost) axis."""
    c = _counts(alpha, dim)
    out = []
    for a in range(dim):
        if c[a]:
            rest = list(c)
            rest[a] -= 1
            w = math.factorial(sum(rest))
            for r in rest:
                w //= math.factorial(r)
            out.append((a, w))
    return out


def _check_grid(P: GridDensity, K: int):
    if K > MAX_ORDER:
        raise UnsupportedOrderError(f"order {K} exceeds the supported maximum {MAX_ORDER}")
    if P.m < 4 * K:
        raise ContractViolation(f"grid with m={P.m} is too coarse for order {K} (need m >= {4 * K})")


def _terms(D: CoefficientSet, dim: int):
    """Expand ``D`` into ``(weight, outer_axis, counts)`` terms.

    Each term is ``weight * d_outer^{c_outer} prod_b d_b^{c_b}`` with the outer
    axis taken in flux form.
    """
    out = []
    for alpha, d in D.entries.items():
        if d == 0.0:
            continue
        if max(alpha) >= dim:
            raise ContractViolation(f"coefficient {alpha} refers to an axis the grid does not have")
        s = term_sign(len(alpha), D.normalization)
        c = _counts(alpha, dim)
        for axis, w in _flux_split(alpha, dim):
            out.append((s * d * w, axis, c))
    return out


def _apply(D: CoefficientSet, values, P: GridDensity):
    out = np.zeros_like(values)
    h = P.dx
    for weight, axis, c in _terms(D, P.dim):
        f = values
        for b in range(P.dim):
            if b != axis and c[b]:
                f = _central(f, c[b], b, h[b], P.bc)
        out = out + weight * _conservative(f, c[axis], axis, h[axis], P.bc)
    return out


def apply_generator(D: CoefficientSet, P: GridDensity) -> np.ndarray:
    """``L P`` on the grid of ``P``."""
    _check_grid(P, D.order)
    return _apply(D, P.values, P)


def generator_matrix(D: CoefficientSet, P: GridDensity) -> sp.csr_matrix:
    """Sparse matrix of :func:`apply_generator` acting on ``P.values.ravel()``."""
    _check_grid(P, D.order)
    m, h = P.m, P.dx
    eye = np.eye(m)
    cache = {}

    def op(kind, order, b):
        key = (kind, order, b)
        if key not in cache:
            if order == 0:
                M = eye
            elif kind == "c":
                M = _central(eye, order, 0, h[b], P.bc)
            else:
                M = _conservative(eye, order, 0, h[b], P.bc)
            cache[key] = sp.csr_matrix(M)
        return cache[key]

    N = m**P.dim
    A = sp.csr_matrix((N, N))
    for weight, axis, c in _terms(D, P.dim):
        T = None
        for b in range(P.dim):
            M = op("f" if b == axis else "c", c[b], b)
            T = M if T is None else sp.kron(T, M, format="csr")
        A = A + weight * T
    return A.tocsr()


def cfl_limit(D: CoefficientSet, P: GridDensity, c: float = 0.25) -> float:
    """Largest explicit step ``c / rho`` with ``rho = sum |s_k D^alpha| mult / dx^k``.

    For a pure second-order term this is ``c dx^2 / D``.
    """
    hmin = float(np.min(P.dx))
    rho = 0.0
    for alpha, d in D.entries.items():
        k = len(alpha)
        rho += abs(term_sign(k, D.normalization) * d) * multiplicity(alpha) / hmin**k
    return math.inf if rho == 0.0 else c / rho


def evolve(D: CoefficientSet, P0: GridDensity, dt: float, steps: int, c: float = 0.25) -> GridDensity:
    """Explicit RK4 steps of ``dP/dt = L P``.

    Negative values produced by the scheme are clipped; the clipped mass is
    accumulated in ``audit["clip_mass"]`` and the density is renormalised to
    its mass before the step.
    """
    _check_grid(P0, D.order)
    limit = cfl_limit(D, P0, c)
    if dt > limit:
        raise CFLViolation(f"dt={dt:g} exceeds the stability bound {limit:g}", limit)
    if steps < 0:
        raise ContractViolation("steps must be non-negative")
    P = P0.values.copy()
    clip_mass = 0.0
    clips = 0
    cell = float(np.prod(P0.dx))
    for _ in range(steps):
        k1 = _apply(D, P, P0)
        k2 = _apply(D, P + 0.5 * dt * k1, P0)
        k3 = _apply(D, P + 0.5 * dt * k2, P0)
        k4 = _apply(D, P + dt * k3, P0)
        new = P + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        neg = new < 0
        if neg.any():
            before = np.sum(P)
            clip_mass += float(-np.sum(new[neg]) * cell)
            clips += 1
            new[neg] = 0.0
            new *= before / np.sum(new)
        P = new
    if clips:
        log.info("clipped negative density in %d of %d steps, mass %.3e", clips, steps, clip_mass)
    out = P0.with_values(P)
    out.audit["clip_mass"] = out.audit.get("clip_mass", 0.0) + clip_mass
    out.audit["clip_steps"] = out.audit.get("clip_steps", 0) + clips
    return out


def stationary_second_order(
    D1,
    D2,
    extents,
    m: int,
    normalization: str = STANDARD,
    bc: str = REFLECTING,
    method: Optional[str] = None,
) -> GridDensity:
    """Stationary density of the second-order generator with zero boundary flux.

    One dimension uses the closed form ``P_j ~ r^j`` with
    ``r = (1 + a dx / 2D) / (1 - a dx / 2D)``, which zeroes every face flux of
    the discrete operator and approximates ``exp(a y / D)`` to ``O(dx^2)``;
    two dimensions, or ``method="linear"``, solve the discrete equation
    ``L P = 0`` together with a normalisation row.
    """
    D1 = np.atleast_1d(np.asarray(D1, dtype=float))
    D2 = np.atleast_2d(np.asarray(D2, dtype=float))
    n = D1.size
    if D2.shape != (n, n):
        raise ContractViolation(f"D2 must be {n}x{n}")
    if not np.allclose(D2, D2.T):
        raise ContractViolation("D2 must be symmetric")
    if np.linalg.eigvalsh(D2).min() <= 0:
        raise ContractViolation("D2 must be positive definite")
    if len(extents) != n:
        raise ContractViolation("extents must match the dimension of D1")
    s2 = term_sign(2, normalization)
    net_a, net_D = D1, s2 * D2
    if method is None:
        method = "closed" if n == 1 and bc == REFLECTING else "linear"
    if method == "closed":
        if n != 1 or bc != REFLECTING:
            raise ContractViolation("the closed form covers one dimension with reflecting walls")
        # zero face flux cell by cell gives a geometric profile, the discrete
        # counterpart of exp(a y / D) with matching O(dx^2) accuracy
        q = net_a[0] * (extents[0][1] - extents[0][0]) / m / (2 * net_D[0, 0])
        if abs(q) >= 1:
            raise ContractViolation(f"grid too coarse for this drift (cell Peclet number {2 * abs(q):g} >= 2)")
        logr = np.log1p(q) - np.log1p(-q)
        return GridDensity.from_function(lambda y: np.exp(logr * np.arange(m)), extents, m, bc)
    entries = {}
    for i in range(n):
        entries[(i,)] = D1[i]
        for j in range(i, n):
            entries[(i, j)] = D2[i, j]
    D = CoefficientSet(entries, normalization)
    P = GridDensity(extents, m, np.zeros((m,) * n), bc)
    A = generator_matrix(D, P).tolil()
    N = A.shape[0]
    cell = float(np.prod(P.dx))
    # the generator has a one-dimensional kernel; swap one equation for the mass
    A[0, :] = cell
    rhs = np.zeros(N)
    rhs[0] = 1.0
    x = spla.spsolve(A.tocsc(), rhs)
    return P.with_values(x.reshape((m,) * n))


@dataclass
class JetStack:
    """Derivative grids of a density up to order ``K``, keyed by sorted multi-index."""

    order: int
    derivatives: Dict[Tuple[int, ...], np.ndarray]

    def __getitem__(self, alpha) -> np.ndarray:
        return self.derivatives[_canon(alpha)]


def jet_prolong(P: GridDensity, K: int) -> JetStack:
    if K < 0:
        raise ContractViolation("order must be non-negative")
    _check_grid(P, K)
    h = P.dx
    ders = {(): P.values.copy()}
    for alpha in multi_indices(P.dim, K):
        f = P.values
        for b, cb in enumerate(_counts(alpha, P.dim)):
            if cb:
                f = _central(f, cb, b, h[b], P.bc)
        ders[alpha] = f
    return JetStack(K, ders)


def connection_flux(B, J: JetStack) -> np.ndarray:
    """``wp_i = sum_alpha B_i^alpha d_alpha P`` on the grid, shape ``(n, *grid)``.

    Each sorted multi-index is counted once. ``B`` is a
    :class:`~stochcontact.cumulants.BCoefficients` or a plain mapping from
    ``(alpha, i)`` to values.
    """
    entries = getattr(B, "entries", B)
    shape = J.derivatives[()].shape
    n = len(shape)
    out = np.zeros((n,) + shape)
    for (alpha, i), b in entries.items():
        alpha = _canon(alpha)
        if len(alpha) > J.order:
            raise ContractViolation(f"B entry of order {len(alpha)} exceeds jet order {J.order}")
        if len(alpha) < 1:
            raise ContractViolation("B entries start at order one")
        out[i] += b * J[alpha]
    C = getattr(B, "C", 0.0)
    ydot = getattr(B, "ydot", None)
    if C and ydot is not None and np.dot(ydot, ydot) > 0:
        out += (C * np.asarray(ydot) / np.dot(ydot, ydot)).reshape((n,) + (1,) * n)
    return out
