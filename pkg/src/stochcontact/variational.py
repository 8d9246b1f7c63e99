"""Discrete constraint action and its stationary paths.

For nodes ``z_k = (t_k, y_k, wp_k)`` the action is the midpoint sum

    S = sum_k  wpbar_k . (y_{k+1} - y_k) - H(zbar_k) (t_{k+1} - t_k),

which is minus the line integral of the contact form along the polygon. Its
gradient with respect to interior nodes vanishes to ``O(h^3)`` per node along
solutions of the contact flow. The reported residuals are the negated
gradient, so that they read as discrete versions of ``d wp + H_y dt``,
``-dy + H_wp dt`` and ``-dH + H_t dt``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dynamics import Trajectory
from .errors import ContractViolation, EvaluationError
from .phase import Hamiltonian, PhasePoint, pack

log = logging.getLogger(__name__)

__all__ = [
    "DiscretePath",
    "ActionReport",
    "DescentResult",
    "action",
    "action_gradient",
    "action_hessian",
    "first_variation",
    "finite_difference_gradient",
    "gradient_disagreement",
    "descend",
]


@dataclass
class DiscretePath:
    t: np.ndarray
    y: np.ndarray
    wp: np.ndarray
    fixed_endpoints: bool = True
    free_time: bool = False

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).copy()
        self.y = np.asarray(self.y, dtype=float).copy()
        self.wp = np.asarray(self.wp, dtype=float).copy()
        if self.y.ndim == 1:
            self.y = self.y[:, None]
        if self.wp.ndim == 1:
            self.wp = self.wp[:, None]
        K = self.t.size
        if self.y.shape != self.wp.shape or self.y.shape[0] != K:
            raise ContractViolation("t, y and wp must describe the same number of nodes")
        if K < 2:
            raise ContractViolation("a path needs at least two nodes")
        if np.any(np.diff(self.t) <= 0):
            raise ContractViolation("node times must be strictly increasing")
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.wp))):
            raise ContractViolation("path nodes must be finite")

    @classmethod
    def from_trajectory(cls, tr: Trajectory, **kw) -> "DiscretePath":
        return cls(tr.t, tr.y, tr.wp, **kw)

    @classmethod
    def from_points(cls, points: List[PhasePoint], **kw) -> "DiscretePath":
        return cls([p.t for p in points], [p.y for p in points], [p.wp for p in points], **kw)

    @property
    def n(self) -> int:
        return self.y.shape[1]

    def __len__(self):
        return self.t.size

    @property
    def nodes(self) -> List[PhasePoint]:
        return [PhasePoint(self.t[k], self.y[k], self.wp[k]) for k in range(len(self))]

    def vectors(self) -> np.ndarray:
        return pack(self.t, self.y, self.wp)

    def with_vectors(self, Z) -> "DiscretePath":
        n = self.n
        return DiscretePath(Z[:, 0], Z[:, 1 : n + 1], Z[:, n + 1 :], self.fixed_endpoints, self.free_time)

    def free_mask(self) -> np.ndarray:
        """Boolean mask over ``vectors()`` marking the optimisable entries."""
        mask = np.ones((len(self), 2 * self.n + 1), dtype=bool)
        if not self.free_time:
            mask[:, 0] = False
        if self.fixed_endpoints:
            mask[0] = mask[-1] = False
        return mask

    def norm(self) -> float:
        return float(np.linalg.norm(self.vectors()[:, 1:]))


def _segments(path: DiscretePath):
    Z = path.vectors()
    return Z, 0.5 * (Z[1:] + Z[:-1]), np.diff(Z, axis=0)


def _values(H: Hamiltonian, M):
    try:
        return H.values(M)
    except EvaluationError as exc:
        raise EvaluationError(f"Hamiltonian failed on a segment midpoint: {exc}") from exc


def action(H: Hamiltonian, path: DiscretePath) -> float:
    n = path.n
    _, M, dZ = _segments(path)
    return float(np.sum(np.sum(M[:, n + 1 :] * dZ[:, 1 : n + 1], axis=1) - _values(H, M) * dZ[:, 0]))


def action_gradient(H: Hamiltonian, path: DiscretePath) -> np.ndarray:
    """Gradient of :func:`action` with respect to every node entry, shape ``(K, 2n+1)``."""
    n = path.n
    Z, M, dZ = _segments(path)
    Hv = _values(H, M)
    G = H.gradients(M)
    dt = dZ[:, :1]
    # derivative of one segment with respect to its left (a) and right (b) node
    ga = -0.5 * dt * G
    gb = -0.5 * dt * G
    ga[:, 0] += Hv
    gb[:, 0] -= Hv
    ga[:, 1 : n + 1] -= M[:, n + 1 :]
    gb[:, 1 : n + 1] += M[:, n + 1 :]
    ga[:, n + 1 :] += 0.5 * dZ[:, 1 : n + 1]
    gb[:, n + 1 :] += 0.5 * dZ[:, 1 : n + 1]
    out = np.zeros_like(Z)
    out[:-1] += ga
    out[1:] += gb
    return out


def action_hessian(H: Hamiltonian, path: DiscretePath) -> sp.csr_matrix:
    """Sparse Hessian of :func:`action` over the flattened node vector."""
    n = path.n
    d = 2 * n + 1
    K = len(path)
    _, M, dZ = _segments(path)
    G = H.gradients(M)
    Hzz = H.hessians(M)
    I = np.eye(d)
    Mid = 0.5 * np.hstack([I, I])
    Dif = np.hstack([-I, I])
    Py = I[1 : n + 1]
    Pw = I[n + 1 :]
    et = I[0]
    bil = Mid.T @ Pw.T @ Py @ Dif
    bil = bil + bil.T
    et_D = et @ Dif
    rows, cols, vals = [], [], []
    base = np.arange(2 * d)
    for k in range(K - 1):
        gM = Mid.T @ G[k]
        local = bil - dZ[k, 0] * (Mid.T @ Hzz[k] @ Mid) - np.outer(gM, et_D) - np.outer(et_D, gM)
        idx = k * d + base
        rows.append(np.repeat(idx, 2 * d))
        cols.append(np.tile(idx, 2 * d))
        vals.append(local.ravel())
    N = K * d
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))


@dataclass
class ActionReport:
    S: float
    gradNorm: float
    residuals: np.ndarray

    def to_dict(self):
        return {"S": self.S, "gradNorm": self.gradNorm, "residuals": self.residuals.tolist()}


def first_variation(H: Hamiltonian, path: DiscretePath) -> ActionReport:
    """Action, residuals on the free entries (zero elsewhere) and their norm."""
    if len(path) < 3:
        raise ContractViolation("first variation needs at least three nodes")
    if not path.fixed_endpoints:
        raise ContractViolation("first variation is taken with fixed endpoints")
    mask = path.free_mask()
    res = np.where(mask, -action_gradient(H, path), 0.0)
    return ActionReport(action(H, path), float(np.linalg.norm(res)), res)


def finite_difference_gradient(H: Hamiltonian, path: DiscretePath, step: float = 1e-6) -> np.ndarray:
    """Central differences of :func:`action` on every free entry."""
    Z = path.vectors()
    mask = path.free_mask()
    out = np.zeros_like(Z)
    for k, j in zip(*np.nonzero(mask)):
        Zp, Zm = Z.copy(), Z.copy()
        Zp[k, j] += step
        Zm[k, j] -= step
        out[k, j] = (action(H, path.with_vectors(Zp)) - action(H, path.with_vectors(Zm))) / (2 * step)
    return out


def gradient_disagreement(H: Hamiltonian, path: DiscretePath, step: float = 1e-6) -> float:
    """``|g_analytic - g_fd| / |g_analytic|`` over the free entries."""
    mask = path.free_mask()
    ga = action_gradient(H, path)[mask]
    gf = finite_difference_gradient(H, path, step)[mask]
    scale = max(np.linalg.norm(ga), np.finfo(float).tiny)
    return float(np.linalg.norm(ga - gf) / scale)


@dataclass
class DescentResult:
    path: DiscretePath
    accepted: int
    iterations: int
    gradNorm: float
    converged: bool
    diverged: bool = False
    history: List[float] = field(default_factory=list)


def _solve(A, b):
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            x = spla.spsolve(A.tocsc(), b)
            if np.all(np.isfinite(x)):
                return x
        except (spla.MatrixRankWarning, RuntimeError):
            pass
    log.info("singular stationarity Jacobian, using least squares")
    return spla.lsqr(A, b, atol=1e-14, btol=1e-14)[0]


def descend(
    H: Hamiltonian,
    init: DiscretePath,
    iters: int = 500,
    rate: float = 1.0,
    tol: float = 1e-5,
    method: str = "newton",
    max_backtracks: int = 40,
) -> DescentResult:
    """Drive the stationarity objective ``|grad S|^2 / 2`` down.

    ``method="newton"`` steps along ``-Hess^{-1} grad S`` (Gauss-Newton for
    the objective); ``method="gradient"`` uses the plain objective gradient
    ``-Hess grad S``. Each step backtracks from ``rate`` until the objective
    strictly decreases, so accepted objectives are monotone.
    """
    if not rate > 0:
        raise ContractViolation("rate must be positive")
    if not init.fixed_endpoints:
        raise ContractViolation("descent keeps the endpoints fixed")
    if method not in ("newton", "gradient"):
        raise ContractViolation(f"unknown descent method {method!r}")
    path = init
    mask = path.free_mask().ravel()
    free = np.nonzero(mask)[0]

    def grad(p):
        return action_gradient(H, p).ravel()[free]

    g = grad(path)
    f = 0.5 * float(g @ g)
    history = [float(np.sqrt(2 * f))]
    accepted = 0
    it = 0
    diverged = False
    while it < iters and history[-1] > tol:
        it += 1
        J = action_hessian(H, path)[free][:, free]
        direction = -_solve(J, g) if method == "newton" else -(J.T @ g)
        step = rate
        Z = path.vectors()
        ok = False
        for _ in range(max_backtracks):
            Zn = Z.ravel().copy()
            Zn[free] += step * direction
            Zn = Zn.reshape(Z.shape)
            try:
                cand = path.with_vectors(Zn)
                gn = grad(cand)
            except (ContractViolation, EvaluationError):
                step *= 0.5
                continue
            fn = 0.5 * float(gn @ gn)
            if np.isfinite(fn) and fn < f:
                ok = True
                break
            step *= 0.5
        if not ok:
            diverged = True
            log.warning("descent stalled after %d accepted steps", accepted)
            break
        path, g, f = cand, gn, fn
        accepted += 1
        history.append(float(np.sqrt(2 * f)))
    return DescentResult(path, accepted, it, history[-1], history[-1] <= tol, diverged, history)
