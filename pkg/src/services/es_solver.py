"""
Ercolani–Sinha constraints for the symmetric curve w³ = z⁶ + b z³ − 1.

A primitive winding pair (n1, m1) fixes the integer vectors (n, m); the curve
parameter follows from the signature-3 equation

    (2n1 − m1)/(m1 + n1) = F(⅓,⅔;1;t) / F(⅓,⅔;1;1−t),

and the scale χ^{1/3} from the a-period of du₁.
"""
import math
from fractions import Fraction
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import optimize

from src.exceptions import DivergenceError, InadmissibleError
from src.models.curve import H, RHO, PeriodData
from src.models.es import ESData
from src.models.tolerance import ToleranceConfig
from src.services.scalar_special import hyp2f1_complement, hyp2f1_real
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

TWO_PI_3SQRT3 = 2.0 * math.pi / (3.0 * math.sqrt(3.0))

# log s is bracketed in [LOG_S_MIN, log ½]; f(s) → 0 only logarithmically
LOG_S_MIN = -700.0

_CBRT2 = 2.0 ** (1.0 / 3.0)
_SQRT3 = math.sqrt(3.0)
_SQRT2 = math.sqrt(2.0)

# Closed forms of t keyed by the ratio (2n1 − m1)/(m1 + n1)
RAMANUJAN_TABLE: Dict[Fraction, float] = {
    Fraction(1, 2): 0.5 - 5.0 * _SQRT3 / 18.0,
    Fraction(1): 0.5,
    Fraction(2): 0.5 + 5.0 * _SQRT3 / 18.0,
    Fraction(3): (63.0 + 171.0 * _CBRT2 - 18.0 * _CBRT2 ** 2) / 250.0,
    Fraction(4): 0.5 + (153.0 * _SQRT3 - 99.0 * _SQRT2) / 250.0,
}


def admissible(n1: int, m1: int) -> bool:
    """Primitive pair with (m1 + n1)(m1 − 2n1) < 0."""
    return math.gcd(n1, m1) == 1 and (m1 + n1) * (m1 - 2 * n1) < 0


def _require_admissible(n1: int, m1: int) -> None:
    if not admissible(n1, m1):
        reason = "not coprime" if math.gcd(n1, m1) != 1 else "(m1+n1)(m1-2n1) >= 0"
        raise InadmissibleError(
            f"Winding pair ({n1}, {m1}) is inadmissible: {reason}",
            {"n1": n1, "m1": m1},
        )


def extend_vectors(n1: int, m1: int) -> Tuple[np.ndarray, np.ndarray]:
    """n = (n1, m1−n1, −m1, 2n1−m1), m = (m1, −n1, n1−m1, −3n1)."""
    _require_admissible(n1, m1)
    n = np.array([n1, m1 - n1, -m1, 2 * n1 - m1], dtype=np.int64)
    m = np.array([m1, -n1, n1 - m1, -3 * n1], dtype=np.int64)
    return n, m


def hopf_number(n1: int, m1: int) -> int:
    """d = 2(n1 + m1)(m1 − 2n1)."""
    return 2 * (n1 + m1) * (m1 - 2 * n1)


def hopf_identity(n: np.ndarray, m: np.ndarray) -> int:
    """nᵀHn − m·n + mᵀHm in exact integers."""
    n = [int(v) for v in n]
    m = [int(v) for v in m]
    h = (1, 1, 1, -1)
    return (
        sum(hi * ni * ni for hi, ni in zip(h, n))
        - sum(ni * mi for ni, mi in zip(n, m))
        + sum(hi * mi * mi for hi, mi in zip(h, m))
    )


def signature3_pair(t: float, s: float, cfg: Optional[ToleranceConfig] = None) -> Tuple[float, float]:
    """(F(⅓,⅔;1;t), F(⅓,⅔;1;s)) for complementary t + s = 1, each from its own small variable."""
    cfg = cfg or ToleranceConfig()
    if t <= s:
        return hyp2f1_real(1 / 3, 2 / 3, 1, t, cfg), hyp2f1_complement(1 / 3, 2 / 3, t, cfg)
    return hyp2f1_complement(1 / 3, 2 / 3, s, cfg), hyp2f1_real(1 / 3, 2 / 3, 1, s, cfg)


def signature3_ratio(t: float, cfg: Optional[ToleranceConfig] = None) -> float:
    """f(t) = F(⅓,⅔;1;t)/F(⅓,⅔;1;1−t), strictly increasing on (0, 1)."""
    ft, fs = signature3_pair(t, 1.0 - t, cfg)
    return ft / fs


def solve_signature3(target: float, cfg: Optional[ToleranceConfig] = None) -> Tuple[float, float]:
    """
    Root of f(t) = target as the complementary pair (t, 1−t).

    The smaller member is found by Brent's method on log s, so roots
    extremely close to 0 or 1 keep full relative precision.
    """
    cfg = cfg or ToleranceConfig()
    if not target > 0 or not math.isfinite(target):
        raise InadmissibleError("Signature-3 target must be positive and finite", {"target": target})

    small_target = target if target <= 1.0 else 1.0 / target

    def residual(log_s: float) -> float:
        s = math.exp(log_s)
        f_small, f_large = signature3_pair(s, 1.0 - s, cfg)
        return f_small - small_target * f_large

    lo, hi = LOG_S_MIN, math.log(0.5)
    if residual(lo) > 0:
        raise DivergenceError("Signature-3 root lies below the search bracket", {"target": target})
    log_s = optimize.brentq(residual, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    s = math.exp(log_s)
    if target <= 1.0:
        return s, 1.0 - s
    return 1.0 - s, s


def solve_t(n1: int, m1: int, cfg: Optional[ToleranceConfig] = None) -> float:
    """Unique t ∈ (0, 1) with (2n1 − m1)/(m1 + n1) = f(t)."""
    _require_admissible(n1, m1)
    t, _ = solve_signature3((2 * n1 - m1) / (m1 + n1), cfg)
    return t


def ramanujan_t(n1: int, m1: int) -> Optional[float]:
    """Closed-form t for the tabulated ratios 1/4 … 4, otherwise None."""
    if m1 + n1 == 0:
        return None
    ratio = Fraction(2 * n1 - m1, m1 + n1)
    if ratio in RAMANUJAN_TABLE:
        return RAMANUJAN_TABLE[ratio]
    if ratio > 0 and 1 / ratio in RAMANUJAN_TABLE:
        # f(1 − t) = 1/f(t)
        return 1.0 - RAMANUJAN_TABLE[1 / ratio]
    return None


def _curve_from_pair(n1: int, m1: int, t: float, s: float, cfg: ToleranceConfig) -> ESData:
    n, m = extend_vectors(n1, m1)
    b = (s - t) / math.sqrt(t * s)
    alpha6 = t / s
    alpha = alpha6 ** (1.0 / 6.0)
    f_t, _ = signature3_pair(t, s, cfg)
    # (1 + α⁶)^{−1/3} = s^{1/3}
    chi_cuberoot = -(n1 + m1) * TWO_PI_3SQRT3 * alpha * s ** (1.0 / 3.0) * f_t
    xi = 3.0 * chi_cuberoot / ((n1 + m1) * (m1 - 2 * n1))
    return ESData(
        n1=n1,
        m1=m1,
        n=n,
        m=m,
        d=hopf_number(n1, m1),
        t=t,
        b=b,
        alpha=alpha,
        chi=chi_cuberoot ** 3,
        chi_cuberoot=chi_cuberoot,
        xi=xi,
    )


def curve_from_t(n1: int, m1: int, t: float, cfg: Optional[ToleranceConfig] = None) -> ESData:
    """
    Curve data for a solved t.

    Args:
        n1, m1: Admissible winding pair
        t: Root of the signature-3 equation, in (0, 1)
        cfg: Tolerances

    Returns:
        ESData with b = (1−2t)/√(t(1−t)), α⁶ = t/(1−t), χ^{1/3} and ξ
    """
    cfg = cfg or ToleranceConfig()
    if not 0.0 < t < 1.0:
        raise InadmissibleError("t must lie strictly between 0 and 1", {"t": t})
    return _curve_from_pair(n1, m1, t, 1.0 - t, cfg)


def solve_es(n1: int, m1: int, cfg: Optional[ToleranceConfig] = None) -> ESData:
    """Full ES solve for (n1, m1): vectors, t, b, α, χ and ξ."""
    cfg = cfg or ToleranceConfig()
    _require_admissible(n1, m1)
    t, s = solve_signature3((2 * n1 - m1) / (m1 + n1), cfg)
    es = _curve_from_pair(n1, m1, t, s, cfg)
    logger.info(
        f"Solved ES pair ({n1}, {m1}): t={t:.15g} b={es.b:.12g} chi^(1/3)={es.chi_cuberoot:.12g}"
    )
    return es


def es_residuals(periods: PeriodData, es: ESData) -> Dict[str, float]:
    """Residuals of nᵀA + mᵀB = 6χ^{1/3}e₁ and x = ξ(Hn + ρ²m)."""
    target = np.zeros(4, dtype=complex)
    target[0] = 6.0 * es.chi_cuberoot
    periods_res = es.n @ periods.A + es.m @ periods.B - target
    x_res = periods.x - es.xi * (H @ es.n + RHO ** 2 * es.m)
    return {
        "es_periods": float(np.max(np.abs(periods_res))),
        "x_vector": float(np.max(np.abs(x_res))),
    }


def verify_es(periods: PeriodData, es: ESData) -> float:
    """Largest of the two ES residuals."""
    return max(es_residuals(periods, es).values())


def admissible_pairs(bound: int):
    """Admissible (n1, m1) with |n1|, |m1| ≤ bound, in lexicographic order."""
    return [
        (n1, m1)
        for n1 in range(-bound, bound + 1)
        for m1 in range(-bound, bound + 1)
        if admissible(n1, m1)
    ]
