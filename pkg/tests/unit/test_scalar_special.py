import math

import mpmath
import numpy as np
import pytest

from src.exceptions import BranchAmbiguityError, DomainError, PoleError
from src.services.scalar_special import (
    complementary_modulus,
    elliptic_K,
    gamma,
    hyp2f1,
    hyp2f1_complement,
    hyp2f1_real,
    jacobi_sn_cn_dn,
    principal_cuberoot,
)

SQRT3 = math.sqrt(3.0)


def _mp_hyp2f1(a, b, c, z):
    with mpmath.workdps(30):
        return complex(mpmath.hyp2f1(a, b, c, z))


@pytest.mark.parametrize(
    "a, b, c, z",
    [
        (1 / 3, 2 / 3, 1, 0.3),
        (0.5, 0.5, 1, -0.7 + 0.2j),
        (1 / 3, 1 / 3, 1, -3.0),  # Pfaff region
        (2 / 3, 1, 4 / 3, -50.0),
        (0.5, 1 / 3, 1, 2.0 + 1.5j),  # connection formulas
        (1 / 3, 2 / 3, 1, 0.95),
    ],
)
def test_hyp2f1_matches_mpmath(cfg, a, b, c, z):
    expected = _mp_hyp2f1(a, b, c, z)
    assert abs(hyp2f1(a, b, c, z, cfg) - expected) <= 1e-11 * max(1.0, abs(expected))


def test_hyp2f1_at_zero_is_one(cfg):
    assert hyp2f1(0.3, 0.7, 1.2, 0.0, cfg) == 1.0


def test_hyp2f1_gauss_value_at_one(cfg):
    a, b, c = 1 / 3, 1 / 3, 1.0
    expected = math.gamma(c) * math.gamma(c - a - b) / (math.gamma(c - a) * math.gamma(c - b))
    assert hyp2f1(a, b, c, 1.0, cfg) == pytest.approx(expected, rel=1e-12)


def test_hyp2f1_diverges_at_one_when_excess_nonpositive(cfg):
    with pytest.raises(PoleError):
        hyp2f1(1.0, 1.0, 2.0, 1.0, cfg)


@pytest.mark.parametrize("c", [0, -2])
def test_hyp2f1_nonpositive_integer_c(cfg, c):
    with pytest.raises(PoleError):
        hyp2f1(0.5, 0.5, c, 0.1, cfg)


def test_hyp2f1_on_cut_needs_principal(cfg):
    with pytest.raises(BranchAmbiguityError):
        hyp2f1(0.5, 0.5, 1.0, 3.0, cfg)
    value = hyp2f1(0.5, 0.5, 1.0, 3.0, cfg, principal=True)
    expected = _mp_hyp2f1(0.5, 0.5, 1.0, mpmath.mpc(3, 1e-20))
    assert abs(value - expected) < 1e-10


def test_tetrahedral_hypergeometric_value(cfg):
    x = 0.5 - 5 * SQRT3 / 18
    expected = 3 * math.gamma(1 / 6) * math.gamma(1 / 3) / (8 * math.pi ** 1.5)
    assert hyp2f1_real(1 / 3, 2 / 3, 1, x, cfg) == pytest.approx(expected, rel=1e-11)


@pytest.mark.parametrize("s", [1e-12, 1e-3, 0.2, 0.7])
def test_hyp2f1_complement(cfg, s):
    with mpmath.workdps(40):
        expected = float(mpmath.hyp2f1(mpmath.mpf(1) / 3, mpmath.mpf(2) / 3, 1, 1 - mpmath.mpf(s)))
    assert hyp2f1_complement(1 / 3, 2 / 3, s, cfg) == pytest.approx(expected, rel=1e-11)


def test_hyp2f1_complement_domain(cfg):
    with pytest.raises(DomainError):
        hyp2f1_complement(1 / 3, 2 / 3, 0.0, cfg)


def test_gamma():
    assert gamma(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    assert gamma(1 + 1j) == pytest.approx(complex(mpmath.gamma(1 + 1j)), rel=1e-12)
    with pytest.raises(PoleError):
        gamma(-3)


@pytest.mark.parametrize("k", [0.0, 0.3, 0.6, 0.9, 0.999])
def test_elliptic_K_matches_mpmath(k):
    assert elliptic_K(k) == pytest.approx(float(mpmath.ellipk(k * k)), rel=1e-13)


def test_elliptic_K_rejects_unit_modulus():
    with pytest.raises(DomainError):
        elliptic_K(1.0)


@pytest.mark.parametrize("k", [float("nan"), float("inf"), -float("inf"), -0.1])
def test_elliptic_K_rejects_non_finite_modulus(k):
    with pytest.raises(DomainError):
        elliptic_K(k)
    with pytest.raises(DomainError):
        jacobi_sn_cn_dn(0.3, k)


def test_complementary_modulus():
    assert complementary_modulus(0.6) == pytest.approx(0.8, rel=1e-15)


@pytest.mark.parametrize("k", [0.3, 0.6, 0.9])
def test_jacobi_functions(k):
    u = np.linspace(-2.0, 2.0, 9)
    sn, cn, dn = jacobi_sn_cn_dn(u, k)
    assert sn.shape == u.shape
    np.testing.assert_allclose(sn ** 2 + cn ** 2, 1.0, atol=1e-14)
    np.testing.assert_allclose(dn ** 2 + k * k * sn ** 2, 1.0, atol=1e-14)
    for ui, si in zip(u, sn):
        assert si == pytest.approx(float(mpmath.ellipfun("sn", ui, m=k * k)), abs=1e-13)


def test_jacobi_scalar_returns_floats():
    sn, cn, dn = jacobi_sn_cn_dn(0.4, 0.5)
    assert isinstance(sn, float) and isinstance(cn, float) and isinstance(dn, float)


def test_principal_cuberoot():
    assert principal_cuberoot(-8) == pytest.approx(1 + 1j * SQRT3, rel=1e-14)
    assert principal_cuberoot(27) == pytest.approx(3.0, rel=1e-14)


@pytest.mark.parametrize("x", np.linspace(-4.9, 0.89, 12))
def test_pfaff_transformation_sweep(cfg, x):
    lhs = hyp2f1_real(1 / 3, 1 / 3, 1, x, cfg)
    rhs = (1 - x) ** (-1 / 3) * hyp2f1_real(1 / 3, 2 / 3, 1, x / (x - 1), cfg)
    assert lhs == pytest.approx(rhs, rel=1e-11)
