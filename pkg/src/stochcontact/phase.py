"""Points of the extended phase space and Hamiltonian functions on it.

Coordinates are ordered ``(t, y_1..y_n, wp_1..wp_n)``, so a phase point of a
problem with ``n`` state variables is a vector of length ``2n + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import EvaluationError, GradientMismatchError

__all__ = [
    "PhasePoint",
    "Hamiltonian",
    "pack",
    "unpack",
    "coordinate_function",
    "linear_flux",
    "reeb",
    "reeb_linear",
    "free_particle",
    "polynomial",
]


@dataclass(frozen=True)
class PhasePoint:
    """A point ``(t, y, wp)`` of the extended phase space."""

    t: float
    y: np.ndarray
    wp: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=float).reshape(-1)
        wp = np.array(self.wp, dtype=float).reshape(-1)
        if y.shape != wp.shape:
            raise ValueError(f"y has {y.size} components but wp has {wp.size}")
        if y.size < 1:
            raise ValueError("phase points need n >= 1")
        t = float(self.t)
        if not (np.isfinite(t) and np.all(np.isfinite(y)) and np.all(np.isfinite(wp))):
            raise ValueError("phase point coordinates must be finite")
        y.flags.writeable = False
        wp.flags.writeable = False
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "wp", wp)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def dimension(self) -> int:
        return 2 * self.n + 1

    def as_vector(self) -> np.ndarray:
        return pack(self.t, self.y, self.wp)

    @classmethod
    def from_vector(cls, z) -> "PhasePoint":
        t, y, wp = unpack(np.asarray(z, dtype=float))
        return cls(t, y, wp)


def pack(t, y, wp) -> np.ndarray:
    """Stack ``(t, y, wp)`` into phase vectors; works for single points and batches."""
    y = np.asarray(y, dtype=float)
    wp = np.asarray(wp, dtype=float)
    t = np.asarray(t, dtype=float)
    return np.concatenate([t[..., None], y, wp], axis=-1)


def unpack(z):
    z = np.asarray(z, dtype=float)
    n = (z.shape[-1] - 1) // 2
    return z[..., 0], z[..., 1 : n + 1], z[..., n + 1 :]


class Hamiltonian:
    """A scalar function on the extended phase space.

    ``value(t, y, wp)`` returns a float. With ``vectorized=True`` it must also
    accept a batch (``t`` of shape ``(M,)``, ``y`` and ``wp`` of shape
    ``(M, n)``) and return shape ``(M,)``. ``grad`` has the same calling
    convention and returns the ``(2n + 1)`` partial derivatives in coordinate
    order. Without ``grad`` the gradient is taken by central differences with
    step ``fd_step``. When both are available the analytic gradient is used,
    after a one-time comparison against finite differences.
    """

    def __init__(
        self,
        value: Callable,
        grad: Optional[Callable] = None,
        fd_step: float = 1e-5,
        vectorized: bool = False,
        name: str = "",
        grad_rtol: float = 1e-4,
    ):
        if fd_step <= 0:
            raise ValueError("fd_step must be positive")
        self.value = value
        self.grad = grad
        self.fd_step = float(fd_step)
        self.vectorized = vectorized
        self.name = name or getattr(value, "__name__", "H")
        self.grad_rtol = grad_rtol
        self._grad_checked = grad is None

    def __repr__(self):
        return f"Hamiltonian({self.name!r})"

    def __call__(self, p: PhasePoint) -> float:
        return self.evaluate(p.t, p.y, p.wp)

    def evaluate(self, t, y, wp) -> float:
        try:
            out = float(self.value(float(t), np.asarray(y, float), np.asarray(wp, float)))
        except (ArithmeticError, ValueError, TypeError) as exc:
            raise EvaluationError(f"{self.name} failed at t={t}: {exc}") from exc
        if not np.isfinite(out):
            raise EvaluationError(f"{self.name} is not finite at t={t}, y={y}, wp={wp}")
        return out

    # -- batched evaluation -------------------------------------------------

    def values(self, Z) -> np.ndarray:
        """Evaluate on phase vectors ``Z`` of shape ``(M, 2n+1)``."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        t, y, wp = unpack(Z)
        if self.vectorized:
            out = np.asarray(self.value(t, y, wp), dtype=float).reshape(Z.shape[0])
        else:
            out = np.array([self.evaluate(t[i], y[i], wp[i]) for i in range(Z.shape[0])])
        if not np.all(np.isfinite(out)):
            bad = int(np.flatnonzero(~np.isfinite(out))[0])
            raise EvaluationError(f"{self.name} is not finite at phase point {Z[bad]}")
        return out

    def _fd_gradients(self, Z, step):
        M, d = Z.shape
        G = np.empty((M, d))
        for j in range(d):
            Zp = Z.copy()
            Zm = Z.copy()
            Zp[:, j] += step
            Zm[:, j] -= step
            try:
                G[:, j] = (self.values(Zp) - self.values(Zm)) / (2 * step)
            except EvaluationError as exc:
                raise EvaluationError(f"gradient of {self.name} failed in coordinate {j}: {exc}") from exc
        return G

    def _analytic_gradients(self, Z):
        t, y, wp = unpack(Z)
        if self.vectorized:
            G = np.asarray(self.grad(t, y, wp), dtype=float).reshape(Z.shape)
        else:
            G = np.array([np.asarray(self.grad(t[i], y[i], wp[i]), float) for i in range(Z.shape[0])])
        if not np.all(np.isfinite(G)):
            raise EvaluationError(f"analytic gradient of {self.name} is not finite")
        return G

    def gradients(self, Z) -> np.ndarray:
        """Gradients at phase vectors ``Z`` (shape ``(M, 2n+1)``)."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if self.grad is None:
            return self._fd_gradients(Z, self.fd_step)
        G = self._analytic_gradients(Z)
        if not self._grad_checked:
            self.check_gradient(Z[:1], G[:1])
        return G

    def check_gradient(self, Z, G=None):
        """Compare the analytic gradient with central differences at ``Z``."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if G is None:
            G = self._analytic_gradients(Z)
        F = self._fd_gradients(Z, self.fd_step)
        scale = np.maximum(1.0, np.max(np.abs(F), axis=1, keepdims=True))
        err = np.max(np.abs(G - F) / scale)
        self._grad_checked = True
        if err > self.grad_rtol:
            raise GradientMismatchError(
                f"analytic gradient of {self.name} differs from finite differences by {err:.3g}"
            )
        return err

    def gradient(self, p: PhasePoint) -> np.ndarray:
        return self.gradients(p.as_vector()[None, :])[0]

    def hessians(self, Z) -> np.ndarray:
        """Second derivatives at ``Z``, shape ``(M, d, d)``, by central differences."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        M, d = Z.shape
        Hs = np.empty((M, d, d))
        if self.grad is not None:
            h = self.fd_step
            for j in range(d):
                Zp = Z.copy()
                Zm = Z.copy()
                Zp[:, j] += h
                Zm[:, j] -= h
                Hs[:, :, j] = (self.gradients(Zp) - self.gradients(Zm)) / (2 * h)
        else:
            # gradients are already finite differences; a wider step keeps round-off down
            h = max(self.fd_step, 1e-4)
            for j in range(d):
                Zp = Z.copy()
                Zm = Z.copy()
                Zp[:, j] += h
                Zm[:, j] -= h
                Hs[:, :, j] = (self._fd_gradients(Zp, h) - self._fd_gradients(Zm, h)) / (2 * h)
        return 0.5 * (Hs + np.swapaxes(Hs, 1, 2))


# -- common Hamiltonians ------------------------------------------------------


def coordinate_function(index: int, n: int) -> Hamiltonian:
    """The coordinate function ``z_index`` on a phase space with ``n`` states."""
    d = 2 * n + 1
    if not 0 <= index < d:
        raise ValueError(f"coordinate index {index} outside [0, {d})")
    e = np.zeros(d)
    e[index] = 1.0

    def value(t, y, wp):
        return pack(t, y, wp)[..., index]

    def grad(t, y, wp):
        return np.broadcast_to(e, pack(t, y, wp).shape).copy()

    return Hamiltonian(value, grad, vectorized=True, name=f"z{index}")


def linear_flux(c) -> Hamiltonian:
    """``H = wp . c``: constant velocity ``c`` and constant flux."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    n = c.size

    def value(t, y, wp):
        return np.asarray(wp) @ c

    def grad(t, y, wp):
        z = pack(t, y, wp)
        g = np.zeros_like(z)
        g[..., n + 1 :] = c
        return g

    return Hamiltonian(value, grad, vectorized=True, name="linear_flux")


def reeb(v: Callable, jac: Optional[Callable] = None, fd_step: float = 1e-5) -> Hamiltonian:
    """``H = wp . v(y) - 1``, the Hamiltonian whose constraint is identically one.

    ``v`` maps ``y`` (shape ``(..., n)``) to velocities of the same shape and
    ``jac`` to the Jacobian ``dv_i/dy_j`` (shape ``(..., n, n)``).
    """

    def value(t, y, wp):
        return np.sum(np.asarray(wp) * v(np.asarray(y)), axis=-1) - 1.0

    grad = None
    if jac is not None:

        def grad(t, y, wp):
            y = np.asarray(y)
            wp = np.asarray(wp)
            z = pack(t, y, wp)
            g = np.zeros_like(z)
            n = y.shape[-1]
            g[..., 1 : n + 1] = np.einsum("...i,...ij->...j", wp, jac(y))
            g[..., n + 1 :] = v(y)
            return g

    return Hamiltonian(value, grad, fd_step=fd_step, vectorized=True, name="reeb")


def reeb_linear(k, analytic: bool = True) -> Hamiltonian:
    """Reeb Hamiltonian with linear velocity field ``v(y) = k * y``.

    ``k`` is a scalar or a per-component array. The divergence of ``v`` is
    ``sum(k)``, so the flux decays as ``wp(t) = wp(0) exp(-sum(k) t)``.
    """
    k = np.asarray(k, dtype=float)

    def v(y):
        return k * y

    def jac(y):
        n = y.shape[-1]
        return np.broadcast_to(np.eye(n) * k, y.shape + (n,))

    H = reeb(v, jac if analytic else None)
    H.name = "reeb_linear"
    return H


def free_particle() -> Hamiltonian:
    """``H = |wp|^2 / 2``."""

    def value(t, y, wp):
        return 0.5 * np.sum(np.asarray(wp) ** 2, axis=-1)

    def grad(t, y, wp):
        z = pack(t, y, wp)
        g = np.zeros_like(z)
        n = np.asarray(y).shape[-1]
        g[..., n + 1 :] = wp
        return g

    return Hamiltonian(value, grad, vectorized=True, name="free_particle")


def polynomial(terms, n: int) -> Hamiltonian:
    """Polynomial in the phase coordinates.

    ``terms`` maps exponent tuples of length ``2n + 1`` to coefficients.
    The gradient is exact.
    """
    d = 2 * n + 1
    exps = np.array([e for e in terms], dtype=int).reshape(-1, d)
    coefs = np.array([terms[e] for e in terms], dtype=float)

    def value(t, y, wp):
        z = pack(t, y, wp)
        return np.prod(z[..., None, :] ** exps, axis=-1) @ coefs

    def grad(t, y, wp):
        z = pack(t, y, wp)
        g = np.zeros_like(z)
        for j in range(d):
            e = exps.copy()
            mult = e[:, j].astype(float)
            e[:, j] = np.maximum(e[:, j] - 1, 0)
            g[..., j] = np.prod(z[..., None, :] ** e, axis=-1) @ (coefs * mult)
        return g

    return Hamiltonian(value, grad, vectorized=True, name="polynomial")
