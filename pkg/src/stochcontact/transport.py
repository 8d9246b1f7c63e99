"""Transport of a density along base paths through a flux covector field.

Along a path ``y(s)`` the density changes by the line integral of the flux
covector ``wp_i(y) dy^i``. Closed loops measure the failure of that covector
to be exact, which for planar loops equals the surface integral of its curl.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ContractViolation, EvaluationError

__all__ = [
    "BasePath",
    "FluxField",
    "TransportResult",
    "straight_path",
    "polyline",
    "transport",
    "loop_holonomy",
    "path_dependence_experiment",
    "horizontal_residual",
    "curl",
    "surface_integral",
    "grid_flux",
]


@dataclass
class BasePath:
    nodes: np.ndarray
    s: Optional[np.ndarray] = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        if nodes.ndim != 2 or nodes.shape[0] < 2:
            raise ContractViolation("a path needs at least two nodes")
        if not np.all(np.isfinite(nodes)):
            raise ContractViolation("path nodes must be finite")
        if np.any(np.all(np.diff(nodes, axis=0) == 0.0, axis=1)):
            raise ContractViolation("consecutive path nodes must be distinct")
        self.nodes = nodes
        if self.s is None:
            self.s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(nodes, axis=0), axis=1))])
        self.s = np.asarray(self.s, dtype=float)
        if self.s.shape != (nodes.shape[0],) or np.any(np.diff(self.s) <= 0):
            raise ContractViolation("path parameter must be strictly increasing with one value per node")

    @property
    def n(self) -> int:
        return self.nodes.shape[1]

    @property
    def closed(self) -> bool:
        return bool(np.array_equal(self.nodes[0], self.nodes[-1]))

    def reversed(self) -> "BasePath":
        return BasePath(self.nodes[::-1].copy(), self.s[-1] + self.s[0] - self.s[::-1])

    def __add__(self, other: "BasePath") -> "BasePath":
        if not np.array_equal(self.nodes[-1], other.nodes[0]):
            raise ContractViolation("paths must share the junction node")
        s2 = other.s[1:] - other.s[0] + self.s[-1]
        return BasePath(np.vstack([self.nodes, other.nodes[1:]]), np.concatenate([self.s, s2]))


def straight_path(a, b, segments: int) -> BasePath:
    a, b = np.atleast_1d(np.asarray(a, float)), np.atleast_1d(np.asarray(b, float))
    u = np.linspace(0.0, 1.0, segments + 1)
    nodes = a + u[:, None] * (b - a)
    nodes[-1] = b  # exact, so legs join bit-for-bit
    return BasePath(nodes)


def polyline(points, segments_per_leg: int) -> BasePath:
    points = [np.atleast_1d(np.asarray(p, float)) for p in points]
    path = straight_path(points[0], points[1], segments_per_leg)
    for a, b in zip(points[1:-1], points[2:]):
        path = path + straight_path(a, b, segments_per_leg)
    return path


@dataclass
class FluxField:
    """A covector field ``y -> wp(y)``.

    ``wp`` maps an ``(M, n)`` array of points to an ``(M, n)`` array. With
    ``vectorized=False`` it is called once per point instead.
    """

    wp: Callable
    n: int
    vectorized: bool = True
    exact: Optional[bool] = None
    name: str = ""

    def __call__(self, Y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if Y.shape[1] != self.n:
            raise ContractViolation(f"points have dimension {Y.shape[1]}, field expects {self.n}")
        if self.vectorized:
            out = np.asarray(self.wp(Y), dtype=float).reshape(Y.shape)
        else:
            out = np.array([np.asarray(self.wp(y), dtype=float).reshape(self.n) for y in Y])
        if not np.all(np.isfinite(out)):
            bad = int(np.argmax(~np.all(np.isfinite(out), axis=1)))
            raise EvaluationError(f"flux field is not finite at point index {bad}")
        return out

    @classmethod
    def gradient_of(cls, F, dF, n, name=""):
        """Exact field ``dF`` given its vectorized gradient ``dF``."""
        return cls(dF, n, True, True, name)

    @classmethod
    def constant(cls, c, name=""):
        c = np.atleast_1d(np.asarray(c, float))
        return cls(lambda Y: np.broadcast_to(c, Y.shape), c.size, True, True, name)


@dataclass
class TransportResult:
    deltaP: float
    increments: np.ndarray
    quadrature: str = "midpoint"
    cumulative: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.cumulative is None:
            self.cumulative = np.concatenate([[0.0], np.cumsum(self.increments)])


def _increments(wp: FluxField, path: BasePath) -> np.ndarray:
    mid = 0.5 * (path.nodes[1:] + path.nodes[:-1])
    try:
        w = wp(mid)
    except EvaluationError as exc:
        raise EvaluationError(f"flux evaluation failed on a segment midpoint: {exc}") from exc
    return np.sum(w * np.diff(path.nodes, axis=0), axis=1)


def transport(wp: FluxField, path: BasePath) -> TransportResult:
    """``deltaP = int wp_i dy^i`` by the midpoint rule on every segment."""
    inc = _increments(wp, path)
    return TransportResult(float(np.sum(inc)), inc)


def loop_holonomy(wp: FluxField, loop: BasePath) -> float:
    if not loop.closed:
        raise ContractViolation("loop holonomy needs a closed path")
    return transport(wp, loop).deltaP


def path_dependence_experiment(wp: FluxField, A, B, Bp, C, segments_per_leg: int = 1000) -> dict:
    """Transport along ``A -> B -> C`` and ``A -> B' -> C`` and compare.

    The difference equals the holonomy of the loop ``A -> B -> C -> B' -> A``.
    """
    p1 = polyline([A, B, C], segments_per_leg)
    p2 = polyline([A, Bp, C], segments_per_leg)
    r1, r2 = transport(wp, p1), transport(wp, p2)
    loop = p1 + p2.reversed()
    return {
        "deltaP_via_B": r1.deltaP,
        "deltaP_via_Bprime": r2.deltaP,
        "difference": r1.deltaP - r2.deltaP,
        "loop_holonomy": loop_holonomy(wp, loop),
        "paths": (p1, p2),
    }


def horizontal_residual(wp: FluxField, path: BasePath, Pseries) -> float:
    """Largest ``|P_{k+1} - P_k - wp(mid) . dy_k|`` over segments."""
    Pseries = np.asarray(Pseries, dtype=float)
    if Pseries.shape != (path.nodes.shape[0],):
        raise ContractViolation(f"need one density value per node ({path.nodes.shape[0]}), got {Pseries.shape}")
    return float(np.max(np.abs(np.diff(Pseries) - _increments(wp, path))))


def curl(wp: FluxField, Y, step: float = 1e-5) -> np.ndarray:
    """``d wp_2 / dy_1 - d wp_1 / dy_2`` by central differences (planar fields)."""
    if wp.n != 2:
        raise ContractViolation("curl is defined here for planar fields only")
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    e1, e2 = np.array([step, 0.0]), np.array([0.0, step])
    d2d1 = (wp(Y + e1)[:, 1] - wp(Y - e1)[:, 1]) / (2 * step)
    d1d2 = (wp(Y + e2)[:, 0] - wp(Y - e2)[:, 0]) / (2 * step)
    return d2d1 - d1d2


# degree-5 seven-point rule on the reference triangle (barycentric, weights sum to 1)
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
_TRI_BARY = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [_A1, _B1, _B1],
        [_B1, _A1, _B1],
        [_B1, _B1, _A1],
        [_A2, _B2, _B2],
        [_B2, _A2, _B2],
        [_B2, _B2, _A2],
    ]
)
_TRI_W = np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3)


def surface_integral(wp: FluxField, polygon, step: float = 1e-5) -> float:
    """Integral of the curl over a convex polygon, by fan triangulation.

    The sign follows the polygon orientation (positive for counter-clockwise).
    """
    P = np.asarray(polygon, dtype=float)
    if np.array_equal(P[0], P[-1]):
        P = P[:-1]
    total = 0.0
    for a, b in zip(P[1:-1], P[2:]):
        tri = np.array([P[0], a, b])
        area = 0.5 * ((a[0] - P[0][0]) * (b[1] - P[0][1]) - (a[1] - P[0][1]) * (b[0] - P[0][0]))
        pts = _TRI_BARY @ tri
        total += area * float(np.dot(_TRI_W, curl(wp, pts, step)))
    return total


def grid_flux(values: np.ndarray, axes: Sequence[np.ndarray], name: str = "") -> FluxField:
    """Linear interpolation of a gridded covector field of shape ``(n, *grid)``."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    interps = [RegularGridInterpolator(tuple(axes), values[i], bounds_error=True) for i in range(n)]

    def wp(Y):
        return np.stack([f(Y) for f in interps], axis=1)

    return FluxField(wp, n, True, None, name)
