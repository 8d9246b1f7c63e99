"""Sparse exterior algebra on the extended phase space and contact certification.

Forms are stored by their coefficients on strictly increasing index tuples,
with coordinate ``0`` the time, ``1..n`` the states ``y`` and ``n+1..2n`` the
fluxes ``wp``. All operations are pointwise; :class:`FormField` lifts a
pointwise evaluator to something :func:`exterior_derivative` can act on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable, Dict, List, Tuple

import numpy as np

from .errors import ContractViolation, EvaluationError
from .phase import Hamiltonian, PhasePoint

__all__ = [
    "Coordinate",
    "KForm",
    "FormField",
    "ContactReport",
    "coordinate",
    "dt",
    "dy",
    "dwp",
    "wedge",
    "interior_product",
    "exterior_derivative",
    "exterior_derivative_field",
    "contact_form_at",
    "contact_form_field",
    "contact_two_form_at",
    "volume_coefficient",
    "certify_contact",
]

TIME, BASE, FLUX = "time", "base", "flux"


@dataclass(frozen=True)
class Coordinate:
    index: int
    kind: str


def coordinate(index: int, n: int) -> Coordinate:
    if n < 1 or not 0 <= index <= 2 * n:
        raise ValueError(f"coordinate {index} does not exist for n={n}")
    if index == 0:
        return Coordinate(0, TIME)
    return Coordinate(index, BASE if index <= n else FLUX)


def _sort_with_sign(idx):
    """Sort ``idx`` and return ``(sign, sorted)``; sign 0 on a repeated index."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return 0, ()
    sign = 1
    # insertion sort keeps track of transpositions
    for i in range(1, len(idx)):
        j = i
        while j > 0 and idx[j - 1] > idx[j]:
            idx[j - 1], idx[j] = idx[j], idx[j - 1]
            sign = -sign
            j -= 1
    return sign, tuple(idx)


@dataclass(frozen=True)
class KForm:
    """A k-form at a point, stored sparsely on increasing index tuples."""

    degree: int
    dimension: int
    coeffs: Dict[Tuple[int, ...], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.degree < 0 or self.dimension < 1:
            raise ValueError("degree must be >= 0 and dimension >= 1")
        clean = {}
        for idx, c in self.coeffs.items():
            idx = tuple(int(i) for i in idx)
            if len(idx) != self.degree:
                raise ValueError(f"index {idx} does not match degree {self.degree}")
            if any(i < 0 or i >= self.dimension for i in idx):
                raise ValueError(f"index {idx} outside dimension {self.dimension}")
            if any(a >= b for a, b in zip(idx, idx[1:])):
                raise ValueError(f"index {idx} is not strictly increasing; use KForm.from_terms")
            clean[idx] = float(c)
        if self.degree > self.dimension:
            clean = {}
        if self.degree == 0:
            clean = {(): clean.get((), 0.0)}
        object.__setattr__(self, "coeffs", clean)

    @classmethod
    def from_terms(cls, degree: int, dimension: int, terms) -> "KForm":
        """Build from arbitrary index tuples, folding in permutation signs."""
        acc: Dict[Tuple[int, ...], float] = {}
        for idx, c in dict(terms).items():
            sign, key = _sort_with_sign(idx)
            if sign:
                acc[key] = acc.get(key, 0.0) + sign * float(c)
        return cls(degree, dimension, acc)

    @classmethod
    def scalar(cls, value: float, dimension: int) -> "KForm":
        return cls(0, dimension, {(): float(value)})

    @classmethod
    def zero(cls, degree: int, dimension: int) -> "KForm":
        return cls(degree, dimension, {})

    def __getitem__(self, idx) -> float:
        sign, key = _sort_with_sign(idx)
        return sign * self.coeffs.get(key, 0.0) if sign else 0.0

    def _check(self, other):
        if not isinstance(other, KForm):
            return NotImplemented
        if other.dimension != self.dimension or other.degree != self.degree:
            raise ContractViolation("forms must share degree and dimension")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0.0) + v
        return KForm(self.degree, self.dimension, out)

    def __neg__(self):
        return KForm(self.degree, self.dimension, {k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, s):
        s = float(s)
        return KForm(self.degree, self.dimension, {k: s * v for k, v in self.coeffs.items()})

    __rmul__ = __mul__

    def norm(self) -> float:
        """Largest absolute coefficient."""
        return max((abs(v) for v in self.coeffs.values()), default=0.0)

    def to_array(self) -> np.ndarray:
        """Dense fully antisymmetric coefficient tensor."""
        A = np.zeros((self.dimension,) * self.degree)
        if self.degree == 0:
            return np.array(self.coeffs[()])
        for idx, c in self.coeffs.items():
            for perm in _permutations_with_sign(idx):
                A[perm[1]] = perm[0] * c
        return A

    @classmethod
    def from_vector(cls, v) -> "KForm":
        """1-form with the given components."""
        v = np.asarray(v, dtype=float)
        return cls(1, v.size, {(i,): v[i] for i in range(v.size) if v[i] != 0.0})

    def as_vector(self) -> np.ndarray:
        if self.degree != 1:
            raise ContractViolation("only 1-forms convert to vectors")
        out = np.zeros(self.dimension)
        for (i,), c in self.coeffs.items():
            out[i] = c
        return out


def _permutations_with_sign(idx):
    for p in permutations(range(len(idx))):
        sign, _ = _sort_with_sign(p)
        yield sign, tuple(idx[i] for i in p)


def _basis(i: int, dimension: int) -> KForm:
    return KForm(1, dimension, {(i,): 1.0})


def dt(n: int) -> KForm:
    return _basis(0, 2 * n + 1)


def dy(i: int, n: int) -> KForm:
    """``dy`` of the ``i``-th state (zero based)."""
    return _basis(1 + i, 2 * n + 1)


def dwp(i: int, n: int) -> KForm:
    """``dwp`` of the ``i``-th flux (zero based)."""
    return _basis(1 + n + i, 2 * n + 1)


def wedge(a: KForm, b: KForm) -> KForm:
    if a.dimension != b.dimension:
        raise ContractViolation(f"dimension mismatch: {a.dimension} vs {b.dimension}")
    deg = a.degree + b.degree
    if deg > a.dimension:
        return KForm.zero(deg, a.dimension)
    acc: Dict[Tuple[int, ...], float] = {}
    for ia, ca in a.coeffs.items():
        for ib, cb in b.coeffs.items():
            sign, key = _sort_with_sign(ia + ib)
            if sign:
                acc[key] = acc.get(key, 0.0) + sign * ca * cb
    return KForm(deg, a.dimension, acc)


def interior_product(X, w: KForm) -> KForm:
    """Contract the vector ``X`` into the first slot of ``w``."""
    if w.degree < 1:
        raise ContractViolation("cannot contract a vector into a 0-form")
    X = np.asarray(X, dtype=float).reshape(-1)
    if X.size != w.dimension:
        raise ContractViolation(f"vector has {X.size} components, form lives in dimension {w.dimension}")
    acc: Dict[Tuple[int, ...], float] = {}
    for idx, c in w.coeffs.items():
        for pos, i in enumerate(idx):
            if X[i] == 0.0:
                continue
            key = idx[:pos] + idx[pos + 1 :]
            acc[key] = acc.get(key, 0.0) + (-1) ** pos * X[i] * c
    return KForm(w.degree - 1, w.dimension, acc)


@dataclass(frozen=True)
class FormField:
    """A k-form depending on the phase point."""

    degree: int
    dimension: int
    evaluator: Callable[[PhasePoint], KForm]
    fd_step: float = 1e-5

    def __call__(self, p: PhasePoint) -> KForm:
        try:
            w = self.evaluator(p)
        except (ArithmeticError, ValueError) as exc:
            raise EvaluationError(f"form evaluation failed at {p}: {exc}") from exc
        if w.degree != self.degree or w.dimension != self.dimension:
            raise ContractViolation(
                f"evaluator returned a {w.degree}-form in dimension {w.dimension}, "
                f"declared {self.degree}-form in dimension {self.dimension}"
            )
        if not all(np.isfinite(v) for v in w.coeffs.values()):
            raise EvaluationError(f"non-finite form coefficients at {p}")
        return w


def exterior_derivative(F: FormField, p: PhasePoint) -> KForm:
    """``dF`` at ``p`` from central differences of the coefficients."""
    if F.fd_step <= 0:
        raise ContractViolation("fd_step must be positive")
    if p.dimension != F.dimension:
        raise ContractViolation("phase point and form field dimensions differ")
    h = F.fd_step
    z = p.as_vector()
    acc: Dict[Tuple[int, ...], float] = {}
    for j in range(F.dimension):
        zp = z.copy()
        zm = z.copy()
        zp[j] += h
        zm[j] -= h
        wp_, wm_ = F(PhasePoint.from_vector(zp)), F(PhasePoint.from_vector(zm))
        for idx in set(wp_.coeffs) | set(wm_.coeffs):
            deriv = (wp_.coeffs.get(idx, 0.0) - wm_.coeffs.get(idx, 0.0)) / (2 * h)
            sign, key = _sort_with_sign((j,) + idx)
            if sign and deriv != 0.0:
                acc[key] = acc.get(key, 0.0) + sign * deriv
    return KForm(F.degree + 1, F.dimension, acc)


def exterior_derivative_field(F: FormField, fd_step=None) -> FormField:
    return FormField(
        F.degree + 1,
        F.dimension,
        lambda p: exterior_derivative(F, p),
        F.fd_step if fd_step is None else fd_step,
    )


def contact_form_at(H: Hamiltonian, p: PhasePoint) -> KForm:
    """``H dt - wp_i dy^i`` at ``p``."""
    n = p.n
    coeffs = {(0,): H(p)}
    for i in range(n):
        coeffs[(1 + i,)] = -p.wp[i]
    return KForm(1, 2 * n + 1, coeffs)


def contact_form_field(H: Hamiltonian, n: int, fd_step: float = 1e-5) -> FormField:
    return FormField(1, 2 * n + 1, lambda p: contact_form_at(H, p), fd_step)


def contact_two_form_at(H: Hamiltonian, p: PhasePoint) -> KForm:
    """``dH ^ dt - dwp_i ^ dy^i`` assembled from the gradient of ``H``."""
    n = p.n
    dim = 2 * n + 1
    dH = KForm.from_vector(H.gradient(p))
    out = wedge(dH, dt(n))
    for i in range(n):
        out = out - wedge(dwp(i, n), dy(i, n))
    return KForm(2, dim, out.coeffs)


def volume_coefficient(theta: KForm, dtheta: KForm) -> float:
    """Single coefficient of ``theta ^ dtheta^n`` on ``(0, 1, ..., 2n)``."""
    dim = theta.dimension
    n = (dim - 1) // 2
    vol = theta
    for _ in range(n):
        vol = wedge(vol, dtheta)
    return vol.coeffs.get(tuple(range(dim)), 0.0)


@dataclass
class ContactReport:
    volume: List[float]
    kernel_gain: List[float]
    failures: List[int]
    tau_vol: float
    tau_ker: float
    min_abs_volume: float
    min_kernel_gain: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "volume": self.volume,
            "kernel_gain": self.kernel_gain,
            "failures": self.failures,
            "tau_vol": self.tau_vol,
            "tau_ker": self.tau_ker,
            "min_abs_volume": self.min_abs_volume,
            "min_kernel_gain": self.min_kernel_gain,
            "passed": self.passed,
        }


def _kernel_gain(theta: KForm, dtheta: KForm, rng, probes: int) -> float:
    """Smallest ``|(i_X theta, i_X dtheta)| / |X|`` over random probes.

    A positive value means no probed direction lies in both kernels, i.e. the
    tangent space splits as a direct sum of the two kernels.
    """
    dim = theta.dimension
    a = theta.as_vector()
    W = dtheta.to_array()
    gains = []
    for _ in range(probes):
        X = rng.standard_normal(dim)
        # push the probe into ker(theta) first, which is where a common kernel would sit
        if a @ a > 0:
            X = X - (a @ X) / (a @ a) * a
        nrm = np.linalg.norm(X)
        if nrm == 0:
            continue
        X /= nrm
        gains.append(np.hypot(abs(a @ X), np.linalg.norm(X @ W)))
    return min(gains) if gains else 0.0


def certify_contact(
    H: Hamiltonian,
    samples,
    tau_vol: float = 1e-6,
    tau_ker: float = 1e-8,
    probes: int = 64,
    fd_step: float = 1e-5,
    seed: int = 0,
) -> ContactReport:
    """Check that ``H dt - wp dy`` is a contact form at every sample.

    ``dTheta`` is taken by finite differences of the form field. A sample
    passes when ``|Theta ^ dTheta^n| >= tau_vol`` and no random probe
    direction comes within ``tau_ker`` of the common kernel of ``Theta`` and
    ``dTheta``. The volume coefficient equals ``n!`` times a permutation sign
    for the normal form ``dt - wp dy``.
    """
    samples = list(samples)
    if not samples:
        raise ContractViolation("need at least one sample point")
    n = samples[0].n
    field_ = contact_form_field(H, n, fd_step)
    rng = np.random.default_rng(seed)
    volumes, gains, failures = [], [], []
    for k, p in enumerate(samples):
        try:
            theta = field_(p)
            dtheta = exterior_derivative(field_, p)
        except EvaluationError:
            volumes.append(float("nan"))
            gains.append(float("nan"))
            failures.append(k)
            continue
        vol = volume_coefficient(theta, dtheta)
        gain = _kernel_gain(theta, dtheta, rng, probes)
        volumes.append(vol)
        gains.append(gain)
        if not (abs(vol) >= tau_vol and gain >= tau_ker):
            failures.append(k)
    finite_v = [abs(v) for v in volumes if np.isfinite(v)]
    finite_g = [g for g in gains if np.isfinite(g)]
    return ContactReport(
        volume=volumes,
        kernel_gain=gains,
        failures=failures,
        tau_vol=tau_vol,
        tau_ker=tau_ker,
        min_abs_volume=min(finite_v) if finite_v else float("nan"),
        min_kernel_gain=min(finite_g) if finite_g else float("nan"),
        passed=not failures,
    )


def darboux_factor(n: int) -> float:
    """``n!``, the magnitude of the volume coefficient of the normal form."""
    return float(math.factorial(n))
