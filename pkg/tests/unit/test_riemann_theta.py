from fractions import Fraction

import mpmath
import numpy as np
import pytest

from src.exceptions import ConditioningError, DomainError, ReductionShapeError
from src.models.theta import PeriodMatrixTau, SymplecticTransform, ThetaCharacteristic
from src.services.reduction import TETRAHEDRAL_TAU_PRIME
from src.services.riemann_theta import (
    Parity,
    char_parity,
    half_characteristics,
    jacobi_theta,
    modular_transform_char,
    theta,
    theta_batch,
    theta_gradient,
    theta_reduce,
)

TAU_1 = 0.2 + 1.1j
TAU_2 = np.array([[0.3 + 1.2j, 0.1 + 0.3j], [0.1 + 0.3j, -0.2 + 0.9j]])


def _mp_jtheta(n, z, tau):
    q = mpmath.exp(1j * mpmath.pi * tau)
    return complex(mpmath.jtheta(n, mpmath.pi * z, q))


def test_genus_one_matches_jtheta(cfg):
    z = 0.3 + 0.1j
    assert theta([z], [[TAU_1]], cfg=cfg) == pytest.approx(_mp_jtheta(3, z, TAU_1), abs=1e-13)


@pytest.mark.parametrize("i", [1, 2, 3, 4])
def test_jacobi_theta_conventions(cfg, i):
    z = 0.17 - 0.05j
    assert jacobi_theta(i, z, TAU_1, cfg) == pytest.approx(_mp_jtheta(i, z, TAU_1), abs=1e-13)


def test_jacobi_quartic_identity(cfg):
    th2, th3, th4 = (jacobi_theta(i, 0.0, TAU_1, cfg) for i in (2, 3, 4))
    assert th3 ** 4 == pytest.approx(th2 ** 4 + th4 ** 4, abs=1e-12)


def test_jacobi_theta_derivative_identity(cfg):
    # θ₁′(0) = π θ₂ θ₃ θ₄ since θᵢ(z) here is ϑᵢ(πz)
    d1 = jacobi_theta(1, 0.0, TAU_1, cfg, deriv=1)
    product = np.pi * np.prod([jacobi_theta(i, 0.0, TAU_1, cfg) for i in (2, 3, 4)])
    assert d1 == pytest.approx(product, rel=1e-12)


def test_jacobi_theta_rejects_bad_input(cfg):
    with pytest.raises(DomainError):
        jacobi_theta(5, 0.0, TAU_1, cfg)
    with pytest.raises(DomainError):
        jacobi_theta(3, 0.0, 0.5 - 0.1j, cfg)


@pytest.mark.parametrize("j", [0, 1])
def test_quasi_periodicity(cfg, j):
    z = np.array([0.21 + 0.05j, -0.33 + 0.12j])
    e = np.eye(2)[j]
    base = theta(z, TAU_2, cfg=cfg)
    assert theta(z + e, TAU_2, cfg=cfg) == pytest.approx(base, abs=1e-12)
    factor = np.exp(-1j * np.pi * TAU_2[j, j] - 2j * np.pi * z[j])
    assert theta(z + TAU_2 @ e, TAU_2, cfg=cfg) == pytest.approx(factor * base, rel=1e-11)


@pytest.mark.parametrize("char", half_characteristics(2))
def test_parity(cfg, char):
    z = np.array([0.13 + 0.02j, 0.27 - 0.06j])
    sign = 1 if char_parity(char) == Parity.EVEN else -1
    assert theta(-z, TAU_2, char, cfg=cfg) == pytest.approx(sign * theta(z, TAU_2, char, cfg=cfg), abs=1e-12)


def test_odd_characteristics_vanish_at_origin(cfg):
    for char in half_characteristics(2, Parity.ODD):
        assert abs(theta(np.zeros(2), TAU_2, char, cfg=cfg)) < 1e-13


def test_characteristic_shift(cfg):
    char = ThetaCharacteristic((Fraction(1, 3), Fraction(1, 2)), (Fraction(1, 6), Fraction(0)))
    p, q = np.array([1, -2]), np.array([3, 1])
    z = np.array([0.1 + 0.1j, -0.2 + 0.05j])
    shifted = theta(z, TAU_2, char.shifted(p, q), cfg=cfg)
    phase = np.exp(2j * np.pi * char.a_array() @ q)
    assert shifted == pytest.approx(phase * theta(z, TAU_2, char, cfg=cfg), rel=1e-11)


def test_half_characteristic_counts():
    assert len(half_characteristics(2)) == 16
    assert len(half_characteristics(2, Parity.ODD)) == 6
    assert len(half_characteristics(4, Parity.EVEN)) == 136
    assert len(half_characteristics(4, Parity.ODD)) == 120


def test_gradient_matches_finite_difference(cfg):
    z = np.array([0.1 + 0.03j, 0.2 - 0.04j])
    grad = theta_gradient(z, TAU_2, cfg=cfg)[0]
    h = 1e-5
    for r in range(2):
        e = np.eye(2)[r] * h
        fd = (theta(z + e, TAU_2, cfg=cfg) - theta(z - e, TAU_2, cfg=cfg)) / (2 * h)
        assert grad[r] == pytest.approx(fd, rel=1e-6, abs=1e-7)


def test_batch_matches_pointwise(cfg):
    Z = np.array([[0.1, 0.2], [0.3 + 0.1j, -0.1j], [0.0, 0.5]])
    batch = theta_batch(Z, TAU_2, cfg=cfg)
    for row, value in zip(Z, batch):
        assert value == pytest.approx(theta(row, TAU_2, cfg=cfg), abs=1e-14)


def test_dimension_mismatch(cfg):
    with pytest.raises(DomainError):
        theta(np.zeros(3), TAU_2, cfg=cfg)


def test_ill_conditioned_imaginary_part(cfg):
    tau = PeriodMatrixTau(np.array([[1j, 0.0], [0.0, 1e-10j]]))
    with pytest.raises(ConditioningError):
        theta(np.zeros(2), tau, cfg=cfg)


def test_identity_transform_keeps_characteristic():
    char = ThetaCharacteristic.from_halves((1, 0), (1, 1))
    new_char, phase = modular_transform_char(char, SymplecticTransform.identity(2))
    assert new_char == char
    assert phase == 0


def test_theta_reduce_matches_direct_sum(cfg):
    z = 0.11 + 0.07j
    w = np.array([0.05 - 0.02j, -0.13 + 0.04j, 0.08 + 0.01j])
    direct = theta(np.concatenate([[z], w]), TETRAHEDRAL_TAU_PRIME, cfg=cfg)
    split = theta_reduce(z, w, TETRAHEDRAL_TAU_PRIME, cfg)
    assert abs(split - direct) < 1e-9 * max(1.0, abs(direct))


def test_theta_reduce_rejects_irrational_block(cfg):
    tau = np.array([[1j, 1 / np.pi], [1 / np.pi, 1j]])
    with pytest.raises(ReductionShapeError):
        theta_reduce(0.1, [0.2], tau, cfg)


def _random_instance(rng, g):
    X = rng.uniform(-0.5, 0.5, (g, g))
    A = rng.uniform(-0.4, 0.4, (g, g))
    tau = PeriodMatrixTau(X + X.T + 1j * (A @ A.T + 0.8 * np.eye(g)))
    z = rng.uniform(-0.5, 0.5, g) + 1j * rng.uniform(-0.2, 0.2, g)
    return tau, z


def _random_instances(g, count=12):
    rng = np.random.default_rng(1000 + g)
    return [_random_instance(rng, g) for _ in range(count)]


@pytest.mark.parametrize("g", [1, 2, 3, 4])
def test_quasi_periodicity_random(cfg, g):
    for tau, z in _random_instances(g):
        T = tau.entries
        base = theta(z, tau, cfg=cfg)
        scale = max(1.0, abs(base))
        for j in range(g):
            e = np.eye(g)[j]
            assert abs(theta(z + e, tau, cfg=cfg) - base) < 1e-10 * scale
            factor = np.exp(-1j * np.pi * T[j, j] - 2j * np.pi * z[j])
            assert abs(theta(z + T @ e, tau, cfg=cfg) - factor * base) < 1e-10 * scale * max(1.0, abs(factor))


@pytest.mark.parametrize("g", [1, 2, 3, 4])
def test_parity_random(cfg, g):
    rng = np.random.default_rng(2000 + g)
    chars = half_characteristics(g)
    for tau, z in _random_instances(g):
        for idx in rng.choice(len(chars), size=min(6, len(chars)), replace=False):
            char = chars[idx]
            sign = 1 if char_parity(char) == Parity.EVEN else -1
            value = theta(z, tau, char, cfg=cfg)
            assert abs(theta(-z, tau, char, cfg=cfg) - sign * value) < 1e-10 * max(1.0, abs(value))


@pytest.mark.parametrize("g", [1, 2, 3, 4])
def test_characteristic_shift_random(cfg, g):
    rng = np.random.default_rng(3000 + g)
    for tau, z in _random_instances(g):
        a, b = ([int(v) for v in rng.integers(0, 6, g)] for _ in range(2))
        char = ThetaCharacteristic.from_sixths(a, b)
        p, q = rng.integers(-2, 3, g), rng.integers(-2, 3, g)
        value = theta(z, tau, char, cfg=cfg)
        phase = np.exp(2j * np.pi * char.a_array() @ q)
        shifted = theta(z, tau, char.shifted(p, q), cfg=cfg)
        assert abs(shifted - phase * value) < 1e-10 * max(1.0, abs(value))
