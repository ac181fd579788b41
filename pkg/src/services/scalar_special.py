"""Scalar special functions: Gauss ₂F₁, Gamma, complete elliptic K and Jacobi sn/cn/dn."""
import cmath
import math
from typing import Optional, Tuple, Union

import mpmath
import numpy as np
from scipy import special

from src.exceptions import BranchAmbiguityError, DivergenceError, DomainError, PoleError
from src.models.tolerance import ToleranceConfig
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

RHO = cmath.exp(2j * math.pi / 3)

# Below this modulus the power series is summed directly.
SERIES_RADIUS = 0.8

Number = Union[int, float, complex]


def _is_nonpositive_integer(c: Number) -> bool:
    c = complex(c)
    return c.imag == 0 and c.real <= 0 and float(c.real).is_integer()


def _series(a: complex, b: complex, c: complex, z: complex, cfg: ToleranceConfig) -> complex:
    total = 1.0 + 0j
    term = 1.0 + 0j
    for k in range(cfg.max_terms):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * z
        total += term
        if term == 0 or abs(term) <= 0.01 * cfg.rel_tol * abs(total):
            return total
    raise DivergenceError(
        "Hypergeometric series did not converge",
        {"a": str(a), "b": str(b), "c": str(c), "z": str(z), "max_terms": cfg.max_terms},
    )


def _connection(a: complex, b: complex, c: complex, z: complex, principal: bool) -> complex:
    # Outside both series discs: connection formulas, including the
    # logarithmic limits when c - a - b or a - b is an integer.
    with mpmath.workdps(30):
        if principal and z.imag == 0 and z.real > 1:
            arg = mpmath.mpc(z.real, mpmath.mpf(10) ** -25)
        else:
            arg = mpmath.mpc(z.real, z.imag)
        value = mpmath.hyp2f1(a, b, c, arg)
    return complex(value)


def hyp2f1(
    a: Number,
    b: Number,
    c: Number,
    z: Number,
    cfg: Optional[ToleranceConfig] = None,
    principal: bool = False,
) -> complex:
    """
    Gauss hypergeometric function ₂F₁(a, b; c; z), cut along [1, ∞).

    Direct series for |z| < 0.8, Pfaff transformation z → z/(z−1) when that
    lands inside the disc, connection formulas otherwise.

    Args:
        a, b, c: Parameters (c not a non-positive integer)
        z: Argument
        cfg: Tolerances (series stopping rule and term budget)
        principal: Accept z on the cut, returning the limit from Im z > 0

    Returns:
        Complex value of ₂F₁
    """
    cfg = cfg or ToleranceConfig()
    if _is_nonpositive_integer(c):
        raise PoleError("₂F₁ undefined for non-positive integer c", {"c": str(c)})

    a, b, c, z = complex(a), complex(b), complex(c), complex(z)

    if z == 0:
        return 1.0 + 0j
    if z.imag == 0 and z.real == 1.0:
        excess = c - a - b
        if excess.real <= 0:
            raise PoleError("₂F₁ diverges at z = 1", {"c-a-b": str(excess)})
        return complex(
            special.gamma(c) * special.gamma(excess) / (special.gamma(c - a) * special.gamma(c - b))
        )
    if z.imag == 0 and z.real > 1 and not principal:
        raise BranchAmbiguityError(
            "Argument lies on the branch cut [1, ∞)", {"z": z.real}
        )

    if abs(z) < SERIES_RADIUS:
        return _series(a, b, c, z, cfg)

    w = z / (z - 1)
    if abs(w) < SERIES_RADIUS:
        # Pfaff: F(a,b;c;z) = (1-z)^{-a} F(a, c-b; c; z/(z-1))
        return (1 - z) ** (-a) * _series(a, c - b, c, w, cfg)

    logger.debug(f"₂F₁ via connection formulas at z={z}")
    return _connection(a, b, c, z, principal)


def hyp2f1_real(a: float, b: float, c: float, x: float, cfg: Optional[ToleranceConfig] = None) -> float:
    """₂F₁ for real parameters and real x < 1, returned as a float."""
    return hyp2f1(a, b, c, x, cfg).real


def hyp2f1_complement(a: float, b: float, s: float, cfg: Optional[ToleranceConfig] = None) -> float:
    """
    ₂F₁(a, b; a+b; 1−s) for real 0 < s ≤ 1, accurate as s → 0.

    Sums the logarithmic connection series

        Γ(a+b)/(Γ(a)Γ(b)) Σₖ (a)ₖ(b)ₖ/(k!)² [2ψ(k+1) − ψ(a+k) − ψ(b+k) − ln s] sᵏ

    so the argument 1−s is never formed in floating point.
    """
    cfg = cfg or ToleranceConfig()
    if not 0 < s <= 1:
        raise DomainError("Complement argument must lie in (0, 1]", {"s": s})
    if s > 0.5:
        return hyp2f1_real(a, b, a + b, 1.0 - s, cfg)

    log_s = math.log(s)
    coeff = 1.0
    total = 0.0
    for k in range(cfg.max_terms):
        bracket = 2.0 * special.digamma(k + 1) - special.digamma(a + k) - special.digamma(b + k) - log_s
        term = coeff * bracket
        total += term
        if abs(term) <= 0.01 * cfg.rel_tol * abs(total):
            return float(special.gamma(a + b) / (special.gamma(a) * special.gamma(b)) * total)
        coeff *= (a + k) * (b + k) / ((k + 1) ** 2) * s
    raise DivergenceError(
        "Logarithmic connection series did not converge", {"a": a, "b": b, "s": s}
    )


def gamma(z: Number) -> complex:
    """Γ(z); raises PoleError at non-positive integers."""
    if _is_nonpositive_integer(z):
        raise PoleError("Gamma has a pole at non-positive integers", {"z": str(z)})
    z = complex(z)
    if z.imag == 0:
        return complex(special.gamma(z.real))
    return complex(special.gamma(z))


def complementary_modulus(k: float) -> float:
    """k′ = √(1 − k²)."""
    return math.sqrt((1.0 - k) * (1.0 + k))


def _check_modulus(k) -> None:
    k_arr = np.asarray(k, dtype=float)
    if not np.all(np.isfinite(k_arr)) or np.any(k_arr < 0) or np.any(k_arr >= 1):
        raise DomainError("Elliptic modulus must be finite with 0 <= k < 1", {"k": k_arr.tolist()})


def elliptic_K(k: float) -> float:
    """Complete elliptic integral of the first kind, K(k) = π / (2 AGM(1, k′))."""
    _check_modulus(k)
    a, b = 1.0, complementary_modulus(k)
    while abs(a - b) > 1e-16 * a:
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return math.pi / (2.0 * a)


def jacobi_sn_cn_dn(u, k) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Jacobi elliptic functions sn, cn, dn of modulus k (descending Landen).

    Accepts scalars or arrays for u; returns floats for scalar input.
    """
    _check_modulus(k)
    sn, cn, dn, _ = special.ellipj(u, k * k)
    if np.ndim(sn) == 0:
        return float(sn), float(cn), float(dn)
    return sn, cn, dn


def principal_cuberoot(z: Number) -> complex:
    """Principal branch z^{1/3} with the cut along the negative real axis."""
    return complex(z) ** (1.0 / 3.0)
