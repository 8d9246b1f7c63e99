"""Contact dynamics: Poisson brackets, the contact vector field and its flow.

The flow of a Hamiltonian ``H(t, y, wp)`` is

    dy/dt = dH/dwp,    dwp/dt = -dH/dy,

with time advancing at unit rate. The constraint ``eps = wp . dH/dwp - H``
is tracked along trajectories; for Hamiltonians linear in ``wp`` such as
``wp . v(y) - 1`` it is constant.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import ContractViolation, EvaluationError
from .phase import (
    Hamiltonian,
    PhasePoint,
    coordinate_function,
    free_particle,
    linear_flux,
    pack,
    polynomial,
    reeb,
    reeb_linear,
)

log = logging.getLogger(__name__)

__all__ = [
    "PhasePoint",
    "Hamiltonian",
    "Trajectory",
    "ConstraintSeries",
    "coordinate_function",
    "free_particle",
    "linear_flux",
    "polynomial",
    "reeb",
    "reeb_linear",
    "poisson_bracket",
    "bracket_values",
    "bracket_function",
    "constraint_function",
    "contact_vector_field",
    "integrate",
    "constraint_series",
    "conservation_check",
]


def _split_grad(g, n):
    return g[..., 0], g[..., 1 : n + 1], g[..., n + 1 :]


def poisson_bracket(F: Hamiltonian, G: Hamiltonian, p: PhasePoint) -> float:
    """``{F, G} = dF/dy . dG/dwp - dF/dwp . dG/dy`` at ``p``."""
    n = p.n
    _, Fy, Fw = _split_grad(F.gradient(p), n)
    _, Gy, Gw = _split_grad(G.gradient(p), n)
    return float(np.dot(Fy, Gw) - np.dot(Fw, Gy))


def bracket_values(F, G, Z):
    """``{F, G}`` at every row of the phase-vector batch ``Z``."""
    n = (Z.shape[-1] - 1) // 2
    _, Fy, Fw = _split_grad(F.gradients(Z), n)
    _, Gy, Gw = _split_grad(G.gradients(Z), n)
    return np.sum(Fy * Gw, axis=-1) - np.sum(Fw * Gy, axis=-1)


def bracket_function(F: Hamiltonian, G: Hamiltonian, fd_step: float = 1e-4) -> Hamiltonian:
    """``{F, G}`` as a phase-space function; its gradient is by finite differences."""

    def value(t, y, wp):
        Z = np.atleast_2d(pack(t, y, wp))
        out = bracket_values(F, G, Z)
        return out if np.ndim(t) else out[0]

    return Hamiltonian(value, fd_step=fd_step, vectorized=True, name=f"{{{F.name},{G.name}}}")


def constraint_function(H: Hamiltonian, fd_step: float = 1e-3) -> Hamiltonian:
    """``eps = wp . dH/dwp - H`` as a phase-space function.

    The outer finite-difference step is wider than ``H.fd_step`` so nested
    differencing does not amplify round-off.
    """

    def value(t, y, wp):
        Z = np.atleast_2d(pack(t, y, wp))
        n = (Z.shape[-1] - 1) // 2
        _, _, Hw = _split_grad(H.gradients(Z), n)
        out = np.sum(Z[:, n + 1 :] * Hw, axis=-1) - H.values(Z)
        return out if np.ndim(t) else out[0]

    return Hamiltonian(value, fd_step=fd_step, vectorized=True, name=f"eps[{H.name}]")


def contact_vector_field(H: Hamiltonian, p: PhasePoint) -> np.ndarray:
    """Components ``(1, dH/dwp, -dH/dy)`` of the contact vector field at ``p``."""
    n = p.n
    _, Hy, Hw = _split_grad(H.gradient(p), n)
    return np.concatenate([[1.0], Hw, -Hy])


@dataclass
class Trajectory:
    """Nodes of a numerically integrated contact flow."""

    t: np.ndarray
    y: np.ndarray
    wp: np.ndarray
    step: float
    meta: str = ""
    diverged: bool = False

    def __len__(self):
        return self.t.size

    @property
    def n(self) -> int:
        return self.y.shape[1]

    @property
    def nodes(self) -> List[PhasePoint]:
        return [PhasePoint(self.t[k], self.y[k], self.wp[k]) for k in range(len(self))]

    def phase_vectors(self) -> np.ndarray:
        return pack(self.t, self.y, self.wp)


@dataclass
class ConstraintSeries:
    values: np.ndarray
    drift: float = field(init=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.drift = float(np.max(np.abs(self.values - self.values[0]))) if self.values.size else 0.0


def _rhs(H, t, y, wp):
    n = y.size
    g = H.gradients(pack(t, y, wp)[None, :])[0]
    _, Hy, Hw = _split_grad(g, n)
    return Hw, -Hy


def integrate(H: Hamiltonian, p0: PhasePoint, h: float, steps: int, meta: str = "") -> Trajectory:
    """Classical fourth-order Runge-Kutta for the contact equations.

    Node times are ``t0 + k h``. If the state stops being finite the
    trajectory is truncated at the last good node and flagged ``diverged``.
    """
    if not h > 0:
        raise ContractViolation("step h must be positive")
    if steps < 1:
        raise ContractViolation("need at least one step")
    n = p0.n
    t0 = p0.t
    ts = t0 + h * np.arange(steps + 1)
    Y = np.empty((steps + 1, n))
    W = np.empty((steps + 1, n))
    Y[0], W[0] = p0.y, p0.wp
    diverged = False
    last = steps
    # overflow is detected below, so numpy's warnings would only be noise
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            t, y, w = ts[k], Y[k], W[k]
            try:
                k1y, k1w = _rhs(H, t, y, w)
                k2y, k2w = _rhs(H, t + h / 2, y + h / 2 * k1y, w + h / 2 * k1w)
                k3y, k3w = _rhs(H, t + h / 2, y + h / 2 * k2y, w + h / 2 * k2w)
                k4y, k4w = _rhs(H, t + h, y + h * k3y, w + h * k3w)
            except EvaluationError:
                diverged, last = True, k
                break
            Y[k + 1] = y + h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y)
            W[k + 1] = w + h / 6 * (k1w + 2 * k2w + 2 * k3w + k4w)
            if not (np.all(np.isfinite(Y[k + 1])) and np.all(np.isfinite(W[k + 1]))):
                diverged, last = True, k
                break
    if diverged:
        log.warning("integration of %s diverged after %d steps", H.name, last)
    return Trajectory(ts[: last + 1], Y[: last + 1], W[: last + 1], float(h), meta, diverged)


def constraint_series(H: Hamiltonian, tr: Trajectory) -> ConstraintSeries:
    """``eps_k = wp_k . dH/dwp(z_k) - H(z_k)`` with the on-shell velocity."""
    Z = tr.phase_vectors()
    n = tr.n
    _, _, Hw = _split_grad(H.gradients(Z), n)
    eps = np.sum(tr.wp * Hw, axis=-1) - H.values(Z)
    return ConstraintSeries(eps)


def conservation_check(F: Hamiltonian, H: Hamiltonian, tr: Trajectory) -> float:
    """Largest mismatch between ``dF/dt`` along ``tr`` and ``dF/dt|_explicit + {F, H}``.

    The left side uses centred differences of ``F`` over the nodes, so the
    residual is ``O(h^2)`` for a transported quantity.
    """
    if len(tr) < 3:
        raise ContractViolation("conservation check needs at least three nodes")
    Z = tr.phase_vectors()
    Fv = F.values(Z)
    dFdt = (Fv[2:] - Fv[:-2]) / (tr.t[2:] - tr.t[:-2])
    inner = Z[1:-1]
    Ft = F.gradients(inner)[:, 0]
    rhs = Ft + bracket_values(F, H, inner)
    return float(np.max(np.abs(dFdt - rhs)))
