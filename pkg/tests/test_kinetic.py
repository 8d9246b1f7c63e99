import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochcontact.errors import CFLViolation, ContractViolation, UnsupportedOrderError
from stochcontact.kinetic import (
    CoefficientSet,
    GridDensity,
    apply_generator,
    cfl_limit,
    connection_flux,
    evolve,
    gaussian_density,
    generator_matrix,
    jet_prolong,
    multiplicity,
    stationary_second_order,
)


def gaussian_on(m, mean=0.0, var=1.0, extents=((-10.0, 10.0),), bc="periodic"):
    return gaussian_density(mean, var, list(extents), m, bc)


def interior(a, frac=0.1):
    k = int(len(a) * frac)
    return slice(k, len(a) - k)


def heat_error(m):
    P0 = gaussian_on(m, var=0.01)
    D = CoefficientSet({(0, 0): 1.0})
    steps = int(np.ceil(1.0 / cfl_limit(D, P0)))
    P = evolve(D, P0, 1.0 / steps, steps)
    y = P.axes()[0]
    exact = np.exp(-(y**2) / (2 * 2.01)) / np.sqrt(2 * np.pi * 2.01)
    return P, np.max(np.abs(P.values - exact))


# -- types ---------------------------------------------------------------------


def test_grid_density_normalises_and_validates():
    P = gaussian_on(201, var=0.5)
    assert P.mass() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ContractViolation):
        GridDensity([(0, 1)], 10, np.zeros(9))
    with pytest.raises(ContractViolation):
        GridDensity([(0, 1)], 10, np.zeros(10), bc="open")


def test_coefficient_set_is_permutation_symmetric():
    D = CoefficientSet({(1, 0): 0.3, (0,): 1.0})
    assert D[(0, 1)] == D[(1, 0)] == 0.3
    with pytest.raises(ContractViolation):
        CoefficientSet({(1, 0): 0.3, (0, 1): 0.4})
    assert multiplicity((0, 0, 1)) == 3 and multiplicity((0, 1)) == 2 and multiplicity((0, 0)) == 1


# -- generator -----------------------------------------------------------------


def test_second_derivative_of_gaussian_literal_mode():
    # literal mode carries 1/2! on order two, so D = 2 gives the bare second derivative
    P = gaussian_on(401)
    y = P.axes()[0]
    exact = (y**2 - 1) * P.values
    out = apply_generator(CoefficientSet({(0,): 0.0, (0, 0): 2.0}, "literal"), P)
    assert np.max(np.abs(out - exact)) <= 1e-3 * np.max(np.abs(exact))
    out_std = apply_generator(CoefficientSet({(0, 0): 1.0}, "standard"), P)
    assert np.max(np.abs(out_std - out)) <= 1e-14


def test_uniform_density_is_annihilated():
    D = CoefficientSet({(0,): 1.2, (1,): -0.4, (0, 1): 0.3, (1, 1): 2.0, (0, 0, 1): 0.2, (0, 0, 0, 1): 0.1})
    P = GridDensity([(0, 1), (0, 2)], 20, np.full((20, 20), 0.5), "periodic")
    assert np.max(np.abs(apply_generator(D, P))) <= 1e-12
    # walls stop the drift flux, so only cells away from them stay flat
    R = apply_generator(D, GridDensity([(0, 1), (0, 2)], 20, P.values, "reflecting"))
    assert np.max(np.abs(R[4:-4, 4:-4])) <= 1e-12


def test_pure_drift_is_minus_first_derivative():
    P = gaussian_on(401)
    y = P.axes()[0]
    out = apply_generator(CoefficientSet({(0,): 1.0}), P)
    exact = y * P.values  # -dP/dy
    assert np.max(np.abs(out - exact)) <= 1e-3 * np.max(np.abs(exact))


@pytest.mark.parametrize("k", [3, 4])
def test_higher_orders_on_periodic_sine(k):
    m = 401
    P = GridDensity.from_function(lambda y: 2 + np.sin(2 * np.pi * y), [(0, 1)], m, normalize=False)
    y = P.axes()[0]
    w = 2 * np.pi
    deriv = {3: -(w**3) * np.cos(w * y), 4: w**4 * np.sin(w * y)}[k]
    out = apply_generator(CoefficientSet({(0,) * k: 1.0}), P)
    assert np.max(np.abs(out - (-1) ** k * deriv)) <= 1e-3 * w**k


def test_mixed_second_order_counts_both_orderings():
    m = 101
    P = GridDensity.from_function(
        lambda x, y: 2 + np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y), [(0, 1), (0, 1)], m, normalize=False
    )
    X, Y = P.mesh()
    w = 2 * np.pi
    dxy = w**2 * np.cos(w * X) * np.cos(w * Y)
    out = apply_generator(CoefficientSet({(0, 1): 0.5}), P)
    assert np.max(np.abs(out - 2 * 0.5 * dxy)) <= 2e-3 * w**2
    lit = apply_generator(CoefficientSet({(0, 1): 0.5}, "literal"), P)
    assert np.allclose(lit, 0.5 * out, atol=1e-12)


def test_generator_linear_in_density_and_coefficients():
    rng = np.random.default_rng(0)
    m = 40
    P1 = GridDensity([(0, 1), (0, 1)], m, rng.random((m, m)))
    P2 = GridDensity([(0, 1), (0, 1)], m, rng.random((m, m)))
    D1 = CoefficientSet({(0,): rng.normal(), (0, 1): rng.normal(), (1, 1, 1): rng.normal()})
    D2 = CoefficientSet({(1,): rng.normal(), (0, 1): rng.normal(), (0, 0, 1, 1): rng.normal()})
    a, b = 0.7, -1.3
    lhs = apply_generator(D1, P1.with_values(a * P1.values + b * P2.values))
    rhs = a * apply_generator(D1, P1) + b * apply_generator(D1, P2)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))
    D12 = CoefficientSet({k: a * D1[k] + b * D2[k] for k in set(D1.entries) | set(D2.entries)})
    lhs = apply_generator(D12, P1)
    rhs = a * apply_generator(D1, P1) + b * apply_generator(D2, P1)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))


@pytest.mark.parametrize("bc", ["periodic", "reflecting"])
def test_matrix_matches_apply(bc):
    rng = np.random.default_rng(1)
    D = CoefficientSet({(0,): 0.3, (1,): -0.2, (0, 1): 0.1, (0, 0): 1.0, (0, 1, 1): 0.05, (0, 0, 1, 1): 0.01})
    P = GridDensity([(0, 1), (-1, 1)], 17, rng.random((17, 17)), bc)
    A = generator_matrix(D, P)
    assert np.allclose(A @ P.values.ravel(), apply_generator(D, P).ravel(), atol=1e-9)
    D1 = CoefficientSet({(0,): 0.3, (0, 0, 0): 0.2, (0, 0, 0, 0): 0.1})
    P1 = GridDensity([(0, 1)], 23, rng.random(23), bc)
    assert np.allclose(generator_matrix(D1, P1) @ P1.values, apply_generator(D1, P1), atol=1e-9)


def test_reflecting_generator_conserves_mass_exactly():
    rng = np.random.default_rng(2)
    D = CoefficientSet({(0,): 0.5, (1,): -0.3, (0, 1): 0.2, (0, 0): 1.0, (1, 1, 1): 0.1, (0, 0, 0, 0): 0.05})
    P = GridDensity([(0, 1), (0, 1)], 30, rng.random((30, 30)), "reflecting")
    assert abs(np.sum(apply_generator(D, P))) <= 1e-9


def test_order_and_resolution_limits():
    P = gaussian_on(401)
    with pytest.raises(UnsupportedOrderError):
        apply_generator(CoefficientSet({(0,) * 5: 1.0}), P)
    with pytest.raises(ContractViolation):
        apply_generator(CoefficientSet({(0, 0, 0, 0): 1.0}), gaussian_on(15))


# -- time evolution ------------------------------------------------------------


def test_heat_kernel_variance():
    P, _ = heat_error(401)
    assert P.variance()[0] == pytest.approx(2.01, rel=0.01)


def test_heat_kernel_second_order_convergence():
    _, e1 = heat_error(201)
    _, e2 = heat_error(401)
    assert e1 / e2 >= 3.5


def test_advected_gaussian_mean_shift():
    P0 = gaussian_on(501, var=0.05, extents=((-2.0, 3.0),))
    D = CoefficientSet({(0,): 0.3, (0, 0): 0.02})
    steps = int(np.ceil(1.0 / cfl_limit(D, P0)))
    P = evolve(D, P0, 1.0 / steps, steps)
    assert P.mean()[0] - P0.mean()[0] == pytest.approx(0.3, abs=0.01)


@settings(max_examples=8, deadline=None)
@given(
    a=st.floats(-1, 1),
    d2=st.floats(0.01, 1),
    d3=st.floats(-0.05, 0.05),
    d4=st.floats(0, 0.01),
)
def test_periodic_mass_is_conserved(a, d2, d3, d4):
    P0 = gaussian_on(101, var=0.5, extents=((-5.0, 5.0),))
    D = CoefficientSet({(0,): a, (0, 0): d2, (0, 0, 0): d3, (0, 0, 0, 0): d4})
    dt = cfl_limit(D, P0)
    steps = 50
    P = evolve(D, P0, dt, steps)
    assert abs(P.mass() - 1.0) <= 1e-9 * max(steps * dt, 1.0)


def test_reflecting_mass_is_conserved():
    P0 = gaussian_density([0.3, 0.5], [0.02, 0.05], [(0, 1), (0, 1)], 40, "reflecting")
    D = CoefficientSet({(0,): 0.4, (1,): -0.2, (0, 0): 0.05, (0, 1): 0.01, (1, 1): 0.05})
    dt = cfl_limit(D, P0)
    steps = int(np.ceil(1.0 / dt))
    P = evolve(D, P0, 1.0 / steps, steps)
    assert abs(P.mass() - P0.mass()) <= 1e-8


def test_cfl_violation_suggests_step():
    P0 = gaussian_on(401)
    D = CoefficientSet({(0, 0): 1.0})
    limit = cfl_limit(D, P0)
    assert limit == pytest.approx(0.25 * P0.dx[0] ** 2)
    with pytest.raises(CFLViolation) as info:
        evolve(D, P0, 2 * limit, 1)
    assert info.value.suggested_dt == pytest.approx(limit)


def test_negative_undershoot_is_clipped_and_audited():
    # a sharp step under pure fourth-order smoothing rings below zero
    m = 64
    v = np.zeros(m)
    v[20:30] = 1.0
    P0 = GridDensity([(0, 1)], m, v / (v.sum() / m))
    D = CoefficientSet({(0, 0, 0, 0): 1e-6})
    P = evolve(D, P0, cfl_limit(D, P0), 20)
    assert P.values.min() >= 0.0
    assert P.audit["clip_mass"] > 0.0
    assert P.mass() == pytest.approx(1.0, abs=1e-12)


# -- stationary solutions ------------------------------------------------------


def test_stationary_unit_drift_closed_form():
    P = stationary_second_order([1.0], [[1.0]], [(0, 1)], 200)
    y = P.axes()[0]
    assert np.max(np.abs(P.values - np.exp(y) / (np.e - 1))) <= 1e-4
    assert P.mass() == pytest.approx(1.0, abs=1e-12)


def test_stationary_zero_drift_is_uniform():
    P = stationary_second_order([0.0], [[0.7]], [(0, 2)], 50)
    assert np.allclose(P.values, 0.5, atol=1e-12)
    P2 = stationary_second_order([0.0, 0.0], np.diag([1.0, 2.0]), [(0, 1), (0, 1)], 20)
    assert np.allclose(P2.values, 1.0, atol=1e-9)


def test_stationary_negative_drift_ratio():
    m = 400
    P = stationary_second_order([-2.0], [[1.0]], [(0, 1)], m)
    y = P.axes()[0]
    # end cells sit half a cell inside the walls
    assert P.values[-1] / P.values[0] == pytest.approx(np.exp(-2 * (y[-1] - y[0])), abs=1e-3)
    assert np.exp(-2 * (y[-1] - y[0])) == pytest.approx(np.exp(-2), abs=2e-2)


def test_stationary_closed_form_agrees_with_linear_solve():
    a = stationary_second_order([0.8], [[0.5]], [(0, 1)], 100)
    b = stationary_second_order([0.8], [[0.5]], [(0, 1)], 100, method="linear")
    assert np.max(np.abs(a.values - b.values)) <= 1e-9


def test_stationary_two_dimensional_residual():
    D1, D2 = [0.5, -0.3], [[1.0, 0.2], [0.2, 0.8]]
    P = stationary_second_order(D1, D2, [(0, 1), (0, 1)], 60)
    D = CoefficientSet({(0,): 0.5, (1,): -0.3, (0, 0): 1.0, (0, 1): 0.2, (1, 1): 0.8})
    assert np.max(np.abs(apply_generator(D, P))) <= 1e-6 * np.max(P.values)
    assert P.mass() == pytest.approx(1.0, abs=1e-12)


def test_stationary_literal_mode_halves_diffusion():
    a = stationary_second_order([1.0], [[2.0]], [(0, 1)], 100, normalization="literal")
    b = stationary_second_order([1.0], [[1.0]], [(0, 1)], 100)
    assert np.allclose(a.values, b.values, atol=1e-12)


def test_stationary_is_fixed_point_of_evolve():
    P = stationary_second_order([1.0], [[1.0]], [(0, 1)], 100)
    D = CoefficientSet({(0,): 1.0, (0, 0): 1.0})
    steps = int(np.ceil(1.0 / cfl_limit(D, P)))
    Q = evolve(D, P, 1.0 / steps, steps)
    assert np.max(np.abs(Q.values - P.values)) <= 1e-6


def test_stationary_rejects_bad_diffusion():
    with pytest.raises(ContractViolation):
        stationary_second_order([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]], [(0, 1), (0, 1)], 20)
    with pytest.raises(ContractViolation):
        stationary_second_order([0.0], [[0.0]], [(0, 1)], 20)
    with pytest.raises(ContractViolation):
        stationary_second_order([0.0, 0.0], [[1.0, 0.1], [0.0, 1.0]], [(0, 1), (0, 1)], 20)


# -- jets and flux ------------------------------------------------------------


def test_jet_of_sine():
    P = GridDensity.from_function(lambda y: np.sin(2 * np.pi * y), [(0, 1)], 401, normalize=False)
    J = jet_prolong(P, 2)
    assert np.max(np.abs(J[(0, 0)] + (2 * np.pi) ** 2 * P.values)) <= 1e-3 * (2 * np.pi) ** 2
    assert np.array_equal(J[()], P.values)


def test_jet_of_uniform_is_zero():
    P = GridDensity([(0, 1), (0, 1)], 20, np.ones((20, 20)), "reflecting")
    J = jet_prolong(P, 4)
    assert all(np.max(np.abs(v)) <= 1e-12 for k, v in J.derivatives.items() if k)


def test_jet_of_gaussian_first_derivative():
    P = gaussian_on(401, mean=0.5, var=1.0)
    y = P.axes()[0]
    J = jet_prolong(P, 1)
    assert np.max(np.abs(J[(0,)] + (y - 0.5) * P.values)) <= 1e-3


def test_jet_mixed_partials_symmetric():
    P = gaussian_density([0.1, -0.2], [0.3, 0.4], [(-2, 2), (-2, 2)], 41)
    J = jet_prolong(P, 3)
    assert np.array_equal(J[(1, 0)], J[(0, 1)])
    assert np.array_equal(J[(1, 0, 1)], J[(0, 1, 1)])


def test_jet_order_limits():
    with pytest.raises(ContractViolation):
        jet_prolong(gaussian_on(10), 3)
    with pytest.raises(UnsupportedOrderError):
        jet_prolong(gaussian_on(401), 5)


def test_connection_flux_combinations():
    P = gaussian_density([0.1, -0.2], [0.3, 0.4], [(-2, 2), (-2, 2)], 41)
    J = jet_prolong(P, 2)
    single = connection_flux({((0,), 0): 1.0}, J)
    assert np.array_equal(single[0], J[(0,)]) and not np.any(single[1])
    assert not np.any(connection_flux({}, J))
    two = connection_flux({((0,), 1): 0.7, ((1, 0), 1): -0.3}, J)
    assert np.max(np.abs(two[1] - (0.7 * J[(0,)] - 0.3 * J[(0, 1)]))) <= 1e-10
    with pytest.raises(ContractViolation):
        connection_flux({((0, 0, 0), 0): 1.0}, J)
