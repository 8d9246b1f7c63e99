import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochcontact.dynamics import (
    Hamiltonian,
    PhasePoint,
    bracket_function,
    bracket_values,
    conservation_check,
    constraint_function,
    constraint_series,
    contact_vector_field,
    coordinate_function,
    free_particle,
    integrate,
    linear_flux,
    poisson_bracket,
    polynomial,
    reeb,
    reeb_linear,
)
from stochcontact.errors import ContractViolation, GradientMismatchError
from stochcontact.forms import contact_form_at, contact_two_form_at, interior_product


def random_cubic(rng, n):
    d = 2 * n + 1
    terms = {}
    for _ in range(6):
        e = np.zeros(d, dtype=int)
        for j in rng.choice(d, size=rng.integers(1, 4)):
            e[j] += 1
        terms[tuple(e)] = rng.normal()
    return polynomial(terms, n)


# -- phase points and Hamiltonians --------------------------------------------


def test_phase_point_validation():
    with pytest.raises(ValueError):
        PhasePoint(0.0, [1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        PhasePoint(0.0, [np.nan], [1.0])
    p = PhasePoint(1.0, [2.0], [3.0])
    assert p.dimension == 3
    assert np.array_equal(PhasePoint.from_vector(p.as_vector()).as_vector(), [1.0, 2.0, 3.0])


def test_analytic_gradient_cross_check_catches_wrong_gradient():
    H = Hamiltonian(lambda t, y, wp: wp[0] ** 2, lambda t, y, wp: np.array([0.0, 0.0, 3 * wp[0]]), name="bad")
    with pytest.raises(GradientMismatchError):
        H.gradient(PhasePoint(0.0, [0.0], [1.0]))


def test_finite_difference_gradient_matches_analytic():
    rng = np.random.default_rng(0)
    H = random_cubic(rng, 2)
    Z = rng.normal(size=(10, 5))
    assert H.check_gradient(Z) < 1e-6


def test_unvectorized_hamiltonian_agrees_with_vectorized():
    rng = np.random.default_rng(1)
    Hv = reeb_linear(0.5, analytic=False)
    Hs = Hamiltonian(lambda t, y, wp: wp[0] * 0.5 * y[0] - 1.0)
    Z = rng.normal(size=(5, 3))
    assert np.allclose(Hv.values(Z), Hs.values(Z), atol=1e-14)
    assert np.allclose(Hv.gradients(Z), Hs.gradients(Z), atol=1e-8)


# -- brackets ----------------------------------------------------------------


def test_canonical_bracket_y_wp_is_one():
    rng = np.random.default_rng(2)
    y, w = coordinate_function(1, 1), coordinate_function(2, 1)
    for z in rng.normal(size=(20, 3)):
        assert poisson_bracket(y, w, PhasePoint.from_vector(z)) == 1.0


def test_polynomial_bracket_by_hand():
    F = polynomial({(0, 1, 1): 1.0}, 1)  # y wp
    G = polynomial({(0, 2, 0): 1.0}, 1)  # y^2
    assert poisson_bracket(F, G, PhasePoint(0.0, [1.0], [0.7])) == pytest.approx(-2.0, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_canonical_relations(n):
    rng = np.random.default_rng(n)
    Z = rng.uniform(-5, 5, size=(1000, 2 * n + 1))
    c = [coordinate_function(k, n) for k in range(2 * n + 1)]
    for i in range(n):
        for j in range(n):
            assert np.max(np.abs(bracket_values(c[1 + i], c[n + 1 + j], Z) - (i == j))) <= 1e-8
            assert np.max(np.abs(bracket_values(c[1 + i], c[1 + j], Z))) <= 1e-8
            assert np.max(np.abs(bracket_values(c[n + 1 + i], c[n + 1 + j], Z))) <= 1e-8


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 2))
def test_bracket_antisymmetric_and_bilinear(seed, n):
    rng = np.random.default_rng(seed)
    F, G, K = random_cubic(rng, n), random_cubic(rng, n), random_cubic(rng, n)
    Z = rng.uniform(-1, 1, size=(5, 2 * n + 1))
    assert np.array_equal(bracket_values(F, G, Z), -bracket_values(G, F, Z))
    a, b = rng.normal(size=2)
    combo = Hamiltonian(
        lambda t, y, wp: a * G.value(t, y, wp) + b * K.value(t, y, wp),
        lambda t, y, wp: a * G.grad(t, y, wp) + b * K.grad(t, y, wp),
        vectorized=True,
    )
    lhs = bracket_values(F, combo, Z)
    rhs = a * bracket_values(F, G, Z) + b * bracket_values(F, K, Z)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(rhs)))


def test_jacobi_identity_for_random_cubics():
    rng = np.random.default_rng(7)
    for n in (1, 2):
        F, G, H = random_cubic(rng, n), random_cubic(rng, n), random_cubic(rng, n)
        Z = rng.uniform(-1, 1, size=(10, 2 * n + 1))
        total = (
            bracket_values(F, bracket_function(G, H), Z)
            + bracket_values(G, bracket_function(H, F), Z)
            + bracket_values(H, bracket_function(F, G), Z)
        )
        assert np.max(np.abs(total)) <= 1e-5


# -- vector field ------------------------------------------------------------


def test_contact_vector_field_examples():
    p = PhasePoint(0.0, [0.3], [1.1])
    assert np.allclose(contact_vector_field(linear_flux([2.0]), p), [1.0, 2.0, 0.0])
    X = contact_vector_field(reeb_linear(0.5), PhasePoint(0.0, [2.0], [1.0]))
    assert np.allclose(X, [1.0, 1.0, -0.5], atol=1e-12)


def test_vector_field_annihilates_two_form_and_pairs_with_dt():
    rng = np.random.default_rng(8)
    for n in (1, 2):
        H = random_cubic(rng, n)
        for z in rng.uniform(-1, 1, size=(10, 2 * n + 1)):
            p = PhasePoint.from_vector(z)
            X = contact_vector_field(H, p)
            assert interior_product(X, contact_two_form_at(H, p)).norm() <= 1e-6
            assert X[0] == 1.0


def test_contraction_with_contact_form_is_minus_constraint():
    rng = np.random.default_rng(9)
    H = random_cubic(rng, 2)
    eps = constraint_function(H)
    for z in rng.uniform(-1, 1, size=(10, 5)):
        p = PhasePoint.from_vector(z)
        val = interior_product(contact_vector_field(H, p), contact_form_at(H, p)).coeffs[()]
        assert val == pytest.approx(-eps(p), abs=1e-8)


# -- integration -------------------------------------------------------------


def test_linear_flux_is_integrated_exactly():
    tr = integrate(linear_flux([1.0]), PhasePoint(0.0, [0.0], [0.4]), 1e-3, 1000)
    assert tr.y[-1, 0] == pytest.approx(1.0, abs=1e-12)
    assert np.all(tr.wp == 0.4)
    assert np.allclose(np.diff(tr.t), 1e-3, rtol=1e-12)


def test_reeb_closed_form():
    tr = integrate(reeb_linear(0.5), PhasePoint(0.0, [1.0], [2.0]), 1e-3, 1000)
    assert tr.wp[-1, 0] == pytest.approx(2 * np.exp(-0.5), abs=1e-9)
    assert tr.wp[-1, 0] == pytest.approx(1.213061, abs=1e-6)
    assert tr.y[-1, 0] == pytest.approx(np.exp(0.5), rel=1e-10)


def test_reeb_constraint_is_one():
    H = reeb_linear(0.5)
    tr = integrate(H, PhasePoint(0.0, [1.0], [2.0]), 1e-3, 1000)
    eps = constraint_series(H, tr)
    assert np.max(np.abs(eps.values - 1.0)) <= 1e-8
    assert eps.values.size == len(tr)


def test_free_particle_constraint_constant():
    H = free_particle()
    tr = integrate(H, PhasePoint(0.0, [0.0, 1.0], [0.3, -1.2]), 1e-2, 100)
    eps = constraint_series(H, tr)
    assert eps.drift <= 1e-8
    assert eps.values[0] == pytest.approx(0.5 * (0.09 + 1.44))


def test_divergence_free_reeb_keeps_flux():
    H = reeb(lambda y: np.full_like(y, 0.7), lambda y: np.zeros(y.shape + (y.shape[-1],)))
    tr = integrate(H, PhasePoint(0.0, [0.0], [1.5]), 1e-2, 100)
    assert np.allclose(tr.wp, 1.5)
    assert np.allclose(constraint_series(H, tr).values, 1.0, atol=1e-12)


def test_rk4_observed_order_on_oscillator():
    # H = (wp^2 + y^2) / 2 rotates the (y, wp) plane
    H = polynomial({(0, 0, 2): 0.5, (0, 2, 0): 0.5}, 1)
    errs = []
    for h in (0.1, 0.05, 0.025):
        tr = integrate(H, PhasePoint(0.0, [1.0], [0.0]), h, int(round(1 / h)))
        errs.append(abs(tr.y[-1, 0] - np.cos(1.0)) + abs(tr.wp[-1, 0] + np.sin(1.0)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 3.8)


def test_divergence_truncates_and_flags():
    H = polynomial({(0, 3, 1): 1.0}, 1)  # dy/dt = y^3 blows up in finite time
    tr = integrate(H, PhasePoint(0.0, [1.0], [1.0]), 0.1, 200)
    assert tr.diverged
    assert len(tr) < 201
    assert np.all(np.isfinite(tr.y))


def test_integrate_contract():
    with pytest.raises(ContractViolation):
        integrate(free_particle(), PhasePoint(0.0, [0.0], [0.0]), 0.0, 10)
    with pytest.raises(ContractViolation):
        integrate(free_particle(), PhasePoint(0.0, [0.0], [0.0]), 0.1, 0)


def test_integration_is_deterministic():
    H = reeb_linear(0.3, analytic=False)
    a = integrate(H, PhasePoint(0.0, [1.0], [2.0]), 1e-2, 50)
    b = integrate(H, PhasePoint(0.0, [1.0], [2.0]), 1e-2, 50)
    assert np.array_equal(a.y, b.y) and np.array_equal(a.wp, b.wp)


# -- conservation ------------------------------------------------------------


def test_conservation_of_constraint_on_reeb():
    H = reeb_linear(0.5)
    tr = integrate(H, PhasePoint(0.0, [1.0], [2.0]), 1e-3, 1000)
    assert conservation_check(constraint_function(H), H, tr) <= 1e-6


def test_conservation_of_coordinate_under_constant_velocity():
    H = linear_flux([1.3])
    tr = integrate(H, PhasePoint(0.0, [0.0], [1.0]), 1e-2, 100)
    assert conservation_check(coordinate_function(1, 1), H, tr) <= 1e-9


def test_conservation_with_explicit_time_dependence():
    H = linear_flux([1.3])
    F = polynomial({(1, 1, 0): 1.0}, 1)  # t * y
    tr = integrate(H, PhasePoint(0.0, [0.2], [1.0]), 1e-2, 100)
    assert conservation_check(F, H, tr) <= 1e-6


def test_conservation_needs_three_nodes():
    H = linear_flux([1.0])
    tr = integrate(H, PhasePoint(0.0, [0.0], [1.0]), 0.1, 1)
    with pytest.raises(ContractViolation):
        conservation_check(H, H, tr)
