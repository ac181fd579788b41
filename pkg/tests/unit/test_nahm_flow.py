import numpy as np
import pytest

from src.exceptions import DomainError, PoleError, StiffnessError
from src.models.nahm import Q0Grid
from src.services.nahm_flow import (
    _check_grid,
    _symmetric_abel_data,
    charge2_closed_form,
    charge2_nahm,
    charge2_q0,
    charge2_q0_derivative,
    charge2_q0_theta,
    charge2_spectral_data,
    default_grid,
    epsilon_matrix,
    expected_charge3_coefficients,
    interior_zeros,
    nu_differences_theta,
    prime_form_infinities,
    select_odd_characteristic,
    solve_gauge_flow,
    spectral_curve_coefficients,
    spectral_curve_drift,
    zero_scan,
)

INNER_GRID = np.linspace(-0.8, 0.8, 33)


def test_default_grid_respects_margin():
    grid = default_grid(nodes=11, margin=0.1)
    assert grid[0] == pytest.approx(-0.9)
    assert grid[-1] == pytest.approx(0.9)
    assert _check_grid(grid, margin=0.1).shape == (11,)


def test_grid_checks():
    with pytest.raises(PoleError):
        _check_grid([0.0, 1.0])
    with pytest.raises(DomainError):
        _check_grid([])
    with pytest.raises(DomainError):
        _check_grid(default_grid(nodes=5, margin=0.01), margin=0.05)


def test_epsilon_matrix():
    expected = np.array([[1, 1, -1], [1, 1, -1], [-1, -1, 1]])
    assert np.array_equal(epsilon_matrix([1, -1], 3), expected)
    assert np.array_equal(epsilon_matrix(None, 3), np.ones((3, 3)))


@pytest.mark.parametrize("eps", [[1], [2, 1]])
def test_epsilon_matrix_rejects_bad_signs(eps):
    with pytest.raises(DomainError):
        epsilon_matrix(eps, 3)


def test_charge2_theta_form_matches_elliptic_form(cfg, charge2_k):
    z = np.linspace(-0.9, 0.9, 13)
    np.testing.assert_allclose(charge2_q0_theta(charge2_k, z, cfg), charge2_q0(charge2_k, z), rtol=1e-10)


def test_charge2_q0_derivative_matches_difference(charge2_k):
    z, h = np.array([-0.6, 0.0, 0.45]), 1e-5
    fd = (charge2_q0(charge2_k, z + h) - charge2_q0(charge2_k, z - h)) / (2 * h)
    np.testing.assert_allclose(charge2_q0_derivative(charge2_k, z), fd, rtol=1e-7)


def test_charge2_q0_pole():
    with pytest.raises(PoleError):
        charge2_q0(0.5, [0.2, -1.0])
    with pytest.raises(DomainError):
        charge2_q0(1.0, 0.2)


def test_charge2_closed_form_satisfies_nahm(charge2_k):
    z, h = np.array([-0.3, 0.1, 0.5]), 1e-5
    sample = charge2_closed_form(charge2_k, z)
    plus, minus = charge2_closed_form(charge2_k, z + h), charge2_closed_form(charge2_k, z - h)
    dT1 = (plus.T1 - minus.T1) / (2 * h)
    comm = sample.T2 @ sample.T3 - sample.T3 @ sample.T2
    np.testing.assert_allclose(dT1, comm, atol=1e-6)


def test_charge2_flow_reproduces_closed_form(cfg, charge2_k):
    sample = charge2_nahm(charge2_k, INNER_GRID, cfg)
    assert sample.metadata["closed_form_deviation"] < 1e-7
    assert sample.max_residual < 1e-8
    assert float(np.max(sample.lax_residual)) < 1e-8


def test_charge2_nu_difference(cfg, charge2_k):
    spectral = charge2_spectral_data(charge2_k, cfg)
    frame = select_odd_characteristic(
        spectral.tau, spectral.phi_inf, spectral.inf_expansion, cfg, phi_zero=spectral.phi_zero
    )
    nu = nu_differences_theta(spectral, frame, cfg)
    assert nu[1, 0] == pytest.approx(0.5j * np.pi, abs=1e-8)
    np.testing.assert_allclose(nu, -nu.T, atol=1e-14)


def _constant_q0(matrix, rho):
    grid = np.linspace(-0.5, 0.5, 11)

    def evaluate(zs):
        return np.repeat(np.asarray(matrix, dtype=complex)[None], len(np.atleast_1d(zs)), axis=0)

    return Q0Grid(
        z_nodes=grid,
        values=evaluate(grid),
        rho=np.asarray(rho, dtype=complex),
        nu_diff=np.zeros((2, 2)),
        eps=np.ones((2, 2)),
        evaluate=evaluate,
        derivative=lambda zs: np.zeros((len(np.atleast_1d(zs)), 2, 2), dtype=complex),
    )


def test_gauge_flow_with_vanishing_q0(cfg):
    sample = solve_gauge_flow(_constant_q0(np.zeros((2, 2)), [0.5j, -0.5j]), cfg)
    assert sample.max_residual < 1e-14
    np.testing.assert_allclose(sample.A_plus[0], np.diag([0.5j, -0.5j]), atol=1e-15)


def test_gauge_flow_needs_evaluator(cfg):
    q0 = _constant_q0(np.zeros((2, 2)), [1.0, -1.0])
    q0.evaluate = None
    with pytest.raises(DomainError):
        solve_gauge_flow(q0, cfg)


def test_gauge_flow_stiffness(cfg):
    q0 = _constant_q0(np.diag([200.0, -200.0]), [1.0, -1.0])
    with pytest.raises(StiffnessError):
        solve_gauge_flow(q0, cfg)


def test_spectral_curve_coefficients_of_diagonal_data():
    zero = np.zeros((2, 2), dtype=complex)
    coeffs = spectral_curve_coefficients(zero, zero, np.diag([1.0, 2.0]).astype(complex))
    np.testing.assert_allclose(coeffs[0], [0, 0, -3, 0, 0], atol=1e-14)
    np.testing.assert_allclose(coeffs[1], [0, 0, 0, 0, 2], atol=1e-14)


def test_expected_charge3_coefficients_layout():
    coeffs = expected_charge3_coefficients(2.0, 3.0)
    assert coeffs.shape == (3, 7)
    assert coeffs[2].tolist() == [-2.0, 0, 0, 6.0, 0, 0, 2.0]
    assert not np.any(coeffs[:2])


def test_interior_zeros_filters_endpoints():
    zeros = [(0.0, 1e-12, 0.3), (0.6667, 1e-10, 0.2), (2.0 - 1e-7, 1e-12, 0.1)]
    assert interior_zeros(zeros) == [0.6667]


def test_zero_scan_finds_interior_zeros(cfg, es_2_1, periods_2_1):
    zeros = zero_scan(es_2_1, periods_2_1, nodes=401, cfg=cfg)
    interior = interior_zeros(zeros)
    assert interior == pytest.approx([2 / 3, 4 / 3], abs=1e-6)


def test_zero_scan_tetrahedral_has_only_endpoint_zeros(cfg, tetrahedral_es, tetrahedral_periods):
    zeros = zero_scan(tetrahedral_es, tetrahedral_periods, nodes=401, cfg=cfg)
    assert interior_zeros(zeros) == []
    locations = sorted(s for s, _, _ in zeros)
    assert locations[0] == pytest.approx(0.0, abs=1e-6)
    assert locations[-1] == pytest.approx(2.0, abs=1e-6)


def test_charge2_closed_form_is_isospectral(charge2_k):
    sample = charge2_closed_form(charge2_k, INNER_GRID)
    scale = max(1.0, float(np.max(np.abs(sample.A_zero))) ** 2)
    assert spectral_curve_drift(sample) < 1e-10 * scale


def test_spectral_curve_drift_detects_change():
    grid = np.array([-0.1, 0.0, 0.1])
    A_plus = np.zeros((3, 2, 2), dtype=complex)
    A_plus[:, 0, 0] = [1.0, 1.0, 1.5]
    A_plus[:, 1, 1] = -A_plus[:, 0, 0]
    zero = np.zeros((3, 2, 2), dtype=complex)
    sample = charge2_closed_form(0.5, grid)
    sample.A_minus, sample.A_zero, sample.A_plus = zero, zero, A_plus
    # det term −a² ζ⁴ moves from −1 to −2.25
    assert spectral_curve_drift(sample) == pytest.approx(1.25, abs=1e-12)


def test_prime_form_at_infinities_is_antisymmetric(cfg, tetrahedral_periods):
    data = _symmetric_abel_data(tetrahedral_periods, 1.0)
    frame = select_odd_characteristic(
        tetrahedral_periods.tau_b, data["phi_inf"], data["V"], cfg, phi_zero=data["phi_zero"]
    )
    E = prime_form_infinities(tetrahedral_periods, frame, cfg)
    assert E.shape == (3, 3)
    np.testing.assert_allclose(np.diag(E), 0.0)
    np.testing.assert_allclose(E + E.T, 0.0, atol=1e-9 * float(np.max(np.abs(E))))
    off_diagonal = E[~np.eye(3, dtype=bool)]
    assert np.min(np.abs(off_diagonal)) > 0.0
