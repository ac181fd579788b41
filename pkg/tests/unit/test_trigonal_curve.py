import math

import numpy as np
import pytest

from src.exceptions import CombinationError, ConsistencyError, PathError, RealityViolationError
from src.models.curve import RHO, SymmetricCurve
from src.models.theta import PeriodMatrixTau, ThetaCharacteristic, symplectic_form
from src.services.reduction import TETRAHEDRAL_TAU
from src.services import trigonal_curve
from src.services.riemann_theta import theta
from src.services.trigonal_curve import (
    INVOLUTION_M,
    NORMALIZING_CYCLES,
    abel_infinities,
    branch_alpha,
    branch_integral,
    cycle_moments,
    equianharmonic_residuals,
    four_point_invariants,
    half_period_characteristic,
    half_period_completions,
    infinity_abel_images,
    involution_check,
    involution_data,
    j_invariant_of_cross_ratio,
    lattice_reduce,
    legendre_hypergeometric_residual,
    mobius_reality_check,
    period_matrix_from_x,
    periods_symmetric,
    quad_period,
    recover_branch_points,
    riemann_constant_characteristic,
    riemann_constants,
    riemann_vector_from_cycles,
    segment_moments,
    structure_residuals,
    vanishing_even_characteristics,
    zero_abel_images,
)
from tests.conftest import TETRAHEDRAL_CHI_CUBEROOT

TETRAHEDRAL_B = 5.0 * math.sqrt(2.0)


@pytest.mark.parametrize("b", [0.0, 1.0, TETRAHEDRAL_B, 10.0])
def test_structure_residuals_vanish(cfg, b):
    residuals = structure_residuals(periods_symmetric(b, cfg))
    for name, value in residuals.items():
        assert value < 1e-9, name


@pytest.mark.parametrize("b", [0.0, 2.5, -7.0, 1e4])
def test_branch_alpha_satisfies_quadratic(b):
    alpha = branch_alpha(b)
    cube = alpha ** 3
    assert alpha > 0
    assert cube * cube + b * cube - 1.0 == pytest.approx(0.0, abs=1e-12 * max(1.0, abs(b)))


def test_curve_branch_points_are_roots():
    curve = SymmetricCurve.from_b(1.7)
    z = curve.branch_points()
    np.testing.assert_allclose(z ** 6 + 1.7 * z ** 3 - 1.0, 0.0, atol=1e-12)
    assert curve.to_sextic().points.shape == (6,)


def test_tetrahedral_period_matrix(tetrahedral_periods):
    np.testing.assert_allclose(tetrahedral_periods.tau_b.entries, TETRAHEDRAL_TAU, atol=1e-8)


def test_period_matrices_are_inverse(tetrahedral_periods):
    product = tetrahedral_periods.tau_a @ tetrahedral_periods.tau_b.entries
    np.testing.assert_allclose(product, np.eye(4), atol=1e-10)


def test_period_matrix_from_x_is_projective(tetrahedral_periods):
    x = tetrahedral_periods.x
    scaled = 2.5 * np.exp(0.3j) * x
    np.testing.assert_allclose(
        period_matrix_from_x(scaled).entries, period_matrix_from_x(x).entries, atol=1e-12
    )


def test_period_matrix_from_x_rejects_wrong_signature():
    with pytest.raises(RealityViolationError):
        period_matrix_from_x([1.0, 0.0, 0.0, 0.0])


@pytest.mark.parametrize("b", [0.0, 1.0])
def test_legendre_relation_in_hypergeometric_form(cfg, b):
    assert legendre_hypergeometric_residual(b, cfg) < 1e-10


def test_quadrature_reproduces_closed_form_integrals(cfg, tetrahedral_periods):
    sextic = SymmetricCurve.from_b(TETRAHEDRAL_B).to_sextic()
    I = quad_period(sextic, 0j, 1, 1, cfg)
    J = quad_period(sextic, 0j, 4, 1, cfg)
    np.testing.assert_allclose(I, tetrahedral_periods.I, atol=1e-7)
    np.testing.assert_allclose(J, tetrahedral_periods.J, atol=1e-7)


def test_quadrature_sheets_differ_by_rho(cfg):
    sextic = SymmetricCurve.from_b(1.0).to_sextic()
    first = quad_period(sextic, 0j, 1, 1, cfg)
    second = quad_period(sextic, 0j, 1, 2, cfg)
    assert second[0] == pytest.approx(first[0] / RHO, rel=1e-10)
    assert second[1] == pytest.approx(first[1] / RHO ** 2, rel=1e-10)


def test_quadrature_path_through_branch_point(cfg):
    sextic = SymmetricCurve.from_b(1.0).to_sextic()
    alpha = sextic.points[0].real
    with pytest.raises(PathError):
        quad_period(sextic, 0j, 2 * alpha, 1, cfg)


def test_quadrature_rejects_bad_sheet(cfg):
    sextic = SymmetricCurve.from_b(1.0).to_sextic()
    with pytest.raises(PathError):
        quad_period(sextic, 0j, 1, 4, cfg)


def test_branch_integral_reversal(tetrahedral_periods):
    forward = branch_integral(1, 2, 2, tetrahedral_periods)
    np.testing.assert_allclose(branch_integral(2, 1, 2, tetrahedral_periods), -forward, atol=1e-14)


@pytest.mark.parametrize("i, j", [(2, 3), (1, 1)])
def test_branch_integral_unknown_pairs(tetrahedral_periods, i, j):
    with pytest.raises(CombinationError):
        branch_integral(i, j, 1, tetrahedral_periods)


def test_tetrahedral_riemann_constant(cfg, tetrahedral_periods):
    char = riemann_constant_characteristic(tetrahedral_periods, cfg)
    assert char == ThetaCharacteristic.from_halves((1, 1, 1, 1), (1, 1, 1, 1))


def test_lattice_reduce_recovers_integer_coordinates(tetrahedral_periods):
    tau = tetrahedral_periods.tau_b
    p, q = np.array([1, -2, 0, 3]), np.array([0, 1, -1, 2])
    offset = np.array([0.01, -0.02j, 0.005 + 0.003j, 0.0])
    coords, reduced, _ = lattice_reduce(p + tau.entries @ q + offset, tau)
    assert coords.tolist() == p.tolist() + q.tolist()
    np.testing.assert_allclose(reduced, offset, atol=1e-12)


def test_lattice_reduce_of_half_period(tetrahedral_periods):
    tau = tetrahedral_periods.tau_b.entries
    half = 0.5 * (np.array([1, 0, 1, 1]) + tau @ np.array([0, 1, 1, 0]))
    coords, reduced, residual = lattice_reduce(2 * half + np.array([3, -1, 0, 2]), tau)
    assert coords.tolist() == [4, -1, 1, 3, 0, 1, 1, 0]
    assert residual < 1e-12


def test_segment_moments_match_quadrature(cfg):
    sextic = SymmetricCurve.from_b(1.0).to_sextic()
    total, moment = segment_moments(sextic, (1, 2, 1), cfg)
    np.testing.assert_allclose(total, quad_period(sextic, 1, 2, 1, cfg), atol=1e-10)
    # integration by parts along an open path
    np.testing.assert_allclose(moment + moment.T, np.outer(total, total), atol=1e-10)


def test_segment_moments_reject_degenerate_segment(cfg):
    sextic = SymmetricCurve.from_b(1.0).to_sextic()
    with pytest.raises(PathError):
        segment_moments(sextic, (2, 2, 1), cfg)
    with pytest.raises(PathError):
        segment_moments(sextic, (1, 2, 0), cfg)


def test_cycle_moments_reproduce_b_periods(cfg, tetrahedral_periods):
    sextic = SymmetricCurve.from_b(tetrahedral_periods.b).to_sextic()
    for k, cycle in enumerate(NORMALIZING_CYCLES):
        period, moment = cycle_moments(sextic, cycle, cfg)
        np.testing.assert_allclose(period, tetrahedral_periods.B[k], atol=1e-8)
        np.testing.assert_allclose(moment + moment.T, np.outer(period, period), atol=1e-8)


def test_cycle_integrals_agree_with_branch_integrals(cfg, tetrahedral_periods):
    _, residuals = riemann_vector_from_cycles(tetrahedral_periods, cfg)
    assert residuals["cycle_periods"] < 1e-8
    assert residuals["branch_integrals"] < 1e-8


def test_tetrahedral_riemann_constant_vector(cfg, tetrahedral_periods):
    tau = tetrahedral_periods.tau_b
    K = riemann_constants(tetrahedral_periods, cfg)
    ones = np.ones(4)
    assert lattice_reduce(K - 0.5 * (ones + tau.entries @ ones), tau)[2] < 1e-9
    assert lattice_reduce(2 * K, tau)[2] < 1e-9
    scale = max(1.0, abs(theta(np.zeros(4), tau, cfg=cfg)))
    assert abs(theta(K, tau, cfg=cfg)) < 1e-9 * scale


def test_riemann_constant_is_the_vanishing_even_characteristic(cfg):
    periods = periods_symmetric(1.0, cfg)
    char = riemann_constant_characteristic(periods, cfg)
    assert vanishing_even_characteristics(periods, cfg) == [char]
    assert char == ThetaCharacteristic.from_halves((1, 1, 1, 1), (1, 1, 1, 1))


def test_riemann_constants_reject_other_half_period(cfg, tetrahedral_periods, monkeypatch):
    other = ThetaCharacteristic.from_halves((1, 1, 1, 1), (1, 1, 1, 0))
    monkeypatch.setattr(trigonal_curve, "SYMMETRIC_RIEMANN_CHAR", other)
    with pytest.raises(ConsistencyError):
        riemann_constants(tetrahedral_periods, cfg)


def test_riemann_constants_need_a_vanishing_theta_constant(cfg, tetrahedral_periods, monkeypatch):
    monkeypatch.setattr(trigonal_curve, "vanishing_even_characteristics", lambda *a, **kw: [])
    with pytest.raises(ConsistencyError):
        riemann_constants(tetrahedral_periods, cfg)


def _generic_tau(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-0.5, 0.5, (4, 4))
    R = rng.uniform(-0.1, 0.1, (4, 4))
    Y = np.diag([1.2, 1.5, 1.1, 1.3]) + R + R.T
    return PeriodMatrixTau(X + X.T + 1j * Y)


@pytest.mark.parametrize("seed", [3, 17])
def test_half_period_completion_undoes_corner_shifts(seed):
    tau = _generic_tau(seed)
    T = tau.entries
    char = ThetaCharacteristic.from_halves((1, 0, 1, 0), (0, 1, 1, 1))
    truth = T @ char.a_array() + char.b_array()
    corner_steps = np.array([[0, 1, 0, 0], [0, 0, 0, 0], [1, 0, 0, -1], [0, 0, 1, 0]])
    raw = truth + np.array([(T @ n)[j] for j, n in enumerate(corner_steps)])
    found = half_period_completions(raw, tau, reach=4)
    assert len(found) == 1
    assert lattice_reduce(found[0] - truth, tau)[2] < 1e-9
    assert half_period_characteristic(found[0], tau) == char


def test_half_period_characteristic_rejects_generic_vector():
    tau = _generic_tau(3)
    with pytest.raises(ConsistencyError):
        half_period_characteristic(np.array([0.1, 0.2j, 0.3, 0.05 + 0.1j]), tau)


def _pair_off(left, right, rel):
    remaining = list(right)
    for value in left:
        k = int(np.argmin([abs(value - r) for r in remaining]))
        assert abs(value - remaining[k]) <= rel * max(1.0, abs(value))
        remaining.pop(k)


def test_recover_branch_points_tetrahedral(cfg, tetrahedral_periods):
    lams = recover_branch_points(tetrahedral_periods.tau_b, cfg)
    branch = SymmetricCurve.from_b(tetrahedral_periods.b).branch_points()
    # send ∞ to a finite point so both sets are compared through finite cross ratios
    c = 0.31 + 0.47j
    normalized = [0.0] + [1.0 / (p - c) for p in (0.0, 1.0) + lams]
    actual = [1.0 / (p - c) for p in branch]
    _pair_off(four_point_invariants(normalized), four_point_invariants(actual), rel=1e-6)

    result = mobius_reality_check(*lams)
    assert result["equivalent"] is True
    assert result["case"] == "a"


def test_involution_on_tetrahedral_periods(tetrahedral_periods):
    J = symplectic_form(4)
    M = INVOLUTION_M
    assert np.array_equal(M @ M, np.eye(8, dtype=np.int64))
    assert np.array_equal(M @ J @ M.T, -J)
    inv = involution_data(TETRAHEDRAL_CHI_CUBEROOT)
    assert involution_check(tetrahedral_periods, inv) < 1e-8


def test_involution_check_flags_bad_cycle(tetrahedral_periods):
    inv = involution_data(TETRAHEDRAL_CHI_CUBEROOT)
    assert involution_check(tetrahedral_periods, inv, cycle=np.eye(8, dtype=np.int64)[0]) == float("inf")


def test_abel_images_of_infinities(tetrahedral_periods):
    d12, d13, d23 = abel_infinities(tetrahedral_periods)
    assert d12[0] == pytest.approx((RHO - 1) * tetrahedral_periods.J[0], rel=1e-12)
    np.testing.assert_allclose(d12 + d23, d13, atol=1e-12)
    phi = infinity_abel_images(tetrahedral_periods)
    np.testing.assert_allclose(phi[0], [
        tetrahedral_periods.J[0], -tetrahedral_periods.J[3], tetrahedral_periods.J[2], -tetrahedral_periods.J[1],
    ])


def test_abel_images_of_zeros_rotate_by_sheet(tetrahedral_periods):
    rows = zero_abel_images(tetrahedral_periods)
    I = tetrahedral_periods.I
    for k in range(3):
        assert rows[k, 0] == pytest.approx(-(RHO ** -k) * I[0], rel=1e-12)
        np.testing.assert_allclose(rows[k, 1:], -(RHO ** (-2 * k)) * I[1:], rtol=1e-12)


@pytest.mark.parametrize("lam", [0.3 + 0.7j, -2.0, 4.5 - 1.0j])
def test_j_invariant_is_constant_on_orbit(lam):
    j = j_invariant_of_cross_ratio(lam)
    for image in (1 - lam, 1 / lam, lam / (lam - 1), 1 / (1 - lam), (lam - 1) / lam):
        assert j_invariant_of_cross_ratio(image) == pytest.approx(j, rel=1e-12)


def test_four_point_invariants_are_mobius_invariant():
    points = [0.3, 1.1 + 0.4j, -0.7j, 2.0, -1.5 + 0.2j, 0.9 - 0.8j]
    mobius = [(2 * p + 1j) / (0.5 * p + 3) for p in points]
    before = four_point_invariants(points)
    after = four_point_invariants(mobius)
    assert len(before) == 15
    for x, y in zip(before, after):
        assert y == pytest.approx(x, rel=1e-9)


def test_mobius_reality_case_a():
    result = mobius_reality_check(-2.0, 1 + 1j, -1 - 1j)
    assert result["equivalent"] is True
    assert result["case"] == "a"


def test_mobius_reality_rejects_generic_points():
    result = mobius_reality_check(0.3 + 0.2j, 2 + 1j, -0.5 + 3j)
    assert result == {"equivalent": False, "case": None, "permutation": None}


@pytest.mark.parametrize("b", [0.5, TETRAHEDRAL_B])
def test_equianharmonic_reductions(b):
    residuals = equianharmonic_residuals(b)
    assert residuals["E1"] < 1e-10
    assert residuals["E2"] < 1e-10
    assert residuals["g2"] == 0.0
