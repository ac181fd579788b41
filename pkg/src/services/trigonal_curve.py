"""
Genus-4 trigonal curve w³ = ∏(z − λᵢ), with closed-form periods for the
symmetric family w³ = z⁶ + b z³ − 1.

Sheet k (k = 1, 2, 3) carries w = ρ^{k−1} w₁, where w₁ is negative real on
(β, α) and w₁(0) = −1. Integrals on the first sheet:
    Iᵢ = ∫₀^α duᵢ,  Jᵢ = ∫₀^β duᵢ,  (du₁..du₄) = (dz/w, dz/w², z dz/w², z² dz/w²).
"""
import itertools
import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import chebyshev
from numpy.polynomial.legendre import leggauss

from src.exceptions import (
    CombinationError,
    ConsistencyError,
    DegenerateError,
    DivergenceError,
    PathError,
    PoleError,
    RealityViolationError,
    SingularConfigurationError,
)
from src.models.curve import H, LAMBDA_PHASES, RHO, GeneralSextic, InvolutionData, PeriodData, SymmetricCurve
from src.models.theta import PeriodMatrixTau, ThetaCharacteristic, symplectic_form
from src.models.tolerance import ToleranceConfig
from src.services import riemann_theta
from src.services.riemann_theta import Parity
from src.services.scalar_special import gamma, hyp2f1_real, principal_cuberoot
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

SQRT3 = math.sqrt(3.0)
TWO_PI_3SQRT3 = 2.0 * math.pi / (3.0 * SQRT3)
LEGENDRE_CONSTANT = -2.0 * math.pi / SQRT3

# Action of the antiholomorphic involution on the cycles (a₁..a₄, b₁..b₄).
INVOLUTION_M = np.array([
    [0, 0, -1, 0, 0, -1, 0, -1],
    [0, 0, 1, 1, -1, 0, 1, 0],
    [-1, 1, 0, -1, 0, 1, 0, 1],
    [0, -1, 1, 2, -1, 0, 1, 0],
    [0, -1, 1, 1, 0, 0, 1, 0],
    [-1, 0, 0, -1, 0, 0, -1, 1],
    [1, 0, 0, 0, 1, -1, 0, -1],
    [1, -1, 0, 2, 0, -1, 1, -2],
], dtype=np.int64)

# Sheet labels s of the three points over ζ = ∞: w ≈ ρ^s z² there.
INFINITY_SHEETS = (0, 2, 1)

# Sixth characteristics {6a} of the branch-point recovery formulas.
_LAMBDA_CHARS = {
    "3335": (3, 3, 3, 5),
    "1133": (1, 1, 3, 3),
    "1533": (1, 5, 3, 3),
    "1155": (1, 1, 5, 5),
    "5111": (5, 1, 1, 1),
}

# Branch integrals as combinations (coefficients of a₁..a₄, b₁..b₄) / 3.
_PAIR_BLOCK = {(1, 2): 0, (3, 4): 1, (5, 6): 2}
_PAIR_SHEET_COEFFS = {1: (1, -1), 2: (-2, -1), 3: (1, 2)}
_ONE_SIX_SHEET1 = np.array([-1, 0, 2, 1, -2, 0, 1, 1])
_ONE_SIX_SHIFT = {
    1: np.zeros(8, dtype=int),
    2: np.array([0, 0, -1, -1, 1, 0, -1, 0]),
    3: np.array([1, 0, -1, 0, 1, 0, 0, -1]),
}
MODULO_LATTICE_PAIRS = {(4, 5)}


# ---------------------------------------------------------------------------
# Closed-form periods of the symmetric curve
# ---------------------------------------------------------------------------

def branch_alpha(b: float) -> float:
    """α = ((−b + √(b²+4))/2)^{1/3} > 0."""
    root = math.hypot(b, 2.0)
    # α³ = 2/(b + √(b²+4)) avoids cancellation for large positive b
    cube = 2.0 / (b + root) if b > 0 else (root - b) / 2.0
    return float(np.cbrt(cube))


def symmetric_integrals(b: float, cfg: Optional[ToleranceConfig] = None) -> Dict[str, object]:
    """I₁..I₄, J₁..J₄ and the second-kind integrals K₁, L₁ in hypergeometric form."""
    cfg = cfg or ToleranceConfig()
    alpha = branch_alpha(b)
    a6 = alpha ** 6
    F = lambda p, q, r, x: hyp2f1_real(p, q, r, x, cfg)

    I2 = 4.0 * math.pi ** 2 / (9.0 * gamma(2.0 / 3.0).real ** 3) * alpha * (1.0 + a6) ** (-1.0 / 3.0)
    I = np.array([
        -TWO_PI_3SQRT3 * alpha * F(1 / 3, 1 / 3, 1, -a6),
        I2,
        TWO_PI_3SQRT3 * alpha ** 2 * F(2 / 3, 2 / 3, 1, -a6),
        alpha ** 3 * F(2 / 3, 1, 4 / 3, -a6),
    ], dtype=complex)
    J = np.array([
        TWO_PI_3SQRT3 / alpha * F(1 / 3, 1 / 3, 1, -1.0 / a6),
        -I2,
        TWO_PI_3SQRT3 / alpha ** 2 * F(2 / 3, 2 / 3, 1, -1.0 / a6),
        -alpha ** -3 * F(2 / 3, 1, 4 / 3, -1.0 / a6),
    ], dtype=complex)
    coeff = 4.0 * SQRT3 * math.pi / 27.0
    K1 = -coeff * alpha ** 5 * F(2 / 3, 5 / 3, 2, -a6)
    L1 = coeff * alpha ** -5 * F(2 / 3, 5 / 3, 2, -1.0 / a6)
    return {"alpha": alpha, "I": I, "J": J, "K1": complex(K1), "L1": complex(L1)}


def _du3_pattern(i3: complex, j3: complex) -> np.ndarray:
    """a-periods of a differential with the deck behaviour of du₃, from its first-sheet integrals."""
    r = RHO
    return np.array([
        (1 + 2 * r) * j3 - (1 - r) * i3,
        (1 - r) * j3 + (2 + r) * i3,
        -(2 + r) * j3 - (1 + 2 * r) * i3,
        -3 * r * j3 + 3 * (1 + r) * i3,
    ])


def assemble_a_periods(I: np.ndarray, J: np.ndarray) -> np.ndarray:
    """4×4 matrix A of a-periods (rows cycles, columns differentials)."""
    r = RHO
    R = I[0] / J[0]
    rows = np.array([
        [-1 - 2 * r - (2 + r) * R, 1 + 2 * r, 1 + 2 * r + (1 - r) * R, -1 + r],
        [2 + r + (1 - r) * R, -2 - r, 1 - r - (2 + r) * R, -1 + r],
        [-1 + r + (1 + 2 * r) * R, 1 - r, -2 - r + (1 + 2 * r) * R, -1 + r],
        [3 + 3 * r - 3 * r * R, 0, -3 * r - 3 * (1 + r) * R, 0],
    ], dtype=complex)
    return rows @ np.diag([J[0], I[1], J[2], I[1]])


def periods_symmetric(b: float, cfg: Optional[ToleranceConfig] = None) -> PeriodData:
    """
    All a- and b-periods of the symmetric curve from I₁..I₄, J₁..J₄.

    Args:
        b: Real curve parameter
        cfg: Tolerances for the hypergeometric evaluations

    Returns:
        PeriodData with A, B = HAΛ, the period vectors and both period matrices
    """
    cfg = cfg or ToleranceConfig()
    data = symmetric_integrals(b, cfg)
    I, J = data["I"], data["J"]
    A = assemble_a_periods(I, J)
    B = H @ A @ np.diag(LAMBDA_PHASES)
    y = _du3_pattern(data["K1"] / 3.0, data["L1"] / 3.0)

    tau_b = PeriodMatrixTau(A @ np.linalg.inv(B))
    tau_a = B @ np.linalg.inv(A)
    logger.debug(f"periods_symmetric b={b}: alpha={data['alpha']:.12f} I1={I[0]:.12f} J1={J[0]:.12f}")
    return PeriodData(
        b=float(b),
        alpha=data["alpha"],
        A=A,
        B=B,
        x=A[:, 0].copy(),
        b_vec=A[:, 1].copy(),
        c_vec=A[:, 2].copy(),
        d_vec=A[:, 3].copy(),
        y=y,
        I=I,
        J=J,
        K1=data["K1"],
        L1=data["L1"],
        tau_a=tau_a,
        tau_b=tau_b,
    )


def period_matrix_from_x(x) -> PeriodMatrixTau:
    """τ_b = ρ(H − (1−ρ) x xᵀ / (xᵀHx)); invariant under x → λx."""
    x = np.asarray(x, dtype=complex)
    hermitian = float(np.real(np.conj(x) @ H @ x))
    if hermitian >= 0:
        raise RealityViolationError(
            "Period vector violates x̄ᵀHx < 0", {"xbar_H_x": hermitian}
        )
    delta = x @ H @ x
    if abs(delta) < 1e-14 * float(np.real(np.conj(x) @ x)):
        raise DegenerateError("xᵀHx vanishes", {"delta": str(delta)})
    return PeriodMatrixTau(RHO * (H - (1 - RHO) * np.outer(x, x) / delta))


def structure_residuals(periods: PeriodData) -> Dict[str, float]:
    """Residuals of the algebraic relations every PeriodData must satisfy."""
    x, I, J = periods.x, periods.I, periods.J
    tau_direct = periods.tau_b.entries
    return {
        "calba": float(np.max(np.abs(periods.B - H @ periods.A @ np.diag(LAMBDA_PHASES)))),
        "brr": float(max(abs(x @ H @ v) for v in (periods.b_vec, periods.c_vec, periods.d_vec))),
        "tau_inverse": float(np.max(np.abs(periods.tau_a @ tau_direct - np.eye(4)))),
        "matsumoto": float(np.max(np.abs(period_matrix_from_x(x).entries - tau_direct))),
        "ratio_13": float(abs(I[0] / J[0] + I[2] / J[2])),
        "sum_2": float(abs(I[1] + J[1])),
        "relation_4": float(abs(I[3] - J[3] - I[1])),
        "x_rotation": float(max(abs(x[1] - RHO * x[0]), abs(x[2] - RHO ** 2 * x[0]))),
        "legendre": float(abs(periods.y @ H @ x - LEGENDRE_CONSTANT)),
    }


def legendre_hypergeometric_residual(b: float, cfg: Optional[ToleranceConfig] = None) -> float:
    """
    The Legendre relation written purely in hypergeometric functions:

        27/(4√3π) = α⁴ F(⅓,⅓;1;−α⁻⁶) F(⅔,5/3;2;−α⁶) + α⁻⁴ F(⅓,⅓;1;−α⁶) F(⅔,5/3;2;−α⁻⁶)

    yᵀHx expands to 3(J₁K₁ + I₁L₁), so this is the same statement.
    """
    cfg = cfg or ToleranceConfig()
    alpha = branch_alpha(b)
    a6 = alpha ** 6
    F = lambda p, q, r, x: hyp2f1_real(p, q, r, x, cfg)
    rhs = (
        alpha ** 4 * F(1 / 3, 1 / 3, 1, -1.0 / a6) * F(2 / 3, 5 / 3, 2, -a6)
        + alpha ** -4 * F(1 / 3, 1 / 3, 1, -a6) * F(2 / 3, 5 / 3, 2, -1.0 / a6)
    )
    return float(abs(rhs - 27.0 / (4.0 * SQRT3 * math.pi)))


# ---------------------------------------------------------------------------
# Numerical quadrature on a general sextic
# ---------------------------------------------------------------------------

Endpoint = Union[int, complex, float]


def _endpoint(curve: GeneralSextic, e: Endpoint) -> Tuple[complex, Optional[int]]:
    if isinstance(e, (int, np.integer)) and not isinstance(e, bool) and 1 <= int(e) <= 6:
        return complex(curve.lam[int(e) - 1]), int(e) - 1
    return complex(e), None


def _segment_distance(p: complex, z0: complex, z1: complex) -> float:
    d = z1 - z0
    if d == 0:
        return abs(p - z0)
    u = ((p - z0) * np.conj(d)).real / abs(d) ** 2
    u = min(1.0, max(0.0, u))
    return abs(p - (z0 + u * d))


def _check_clearance(lam: np.ndarray, z0: complex, z1: complex, allowed: Sequence[int]) -> None:
    for k, p in enumerate(lam):
        if k in allowed:
            continue
        dist = _segment_distance(p, z0, z1)
        if dist < 1e-6:
            raise PathError(
                "Integration path passes too close to a branch point",
                {"branch_index": k + 1, "distance": dist, "from": str(z0), "to": str(z1)},
            )


def _continue_w(lam: np.ndarray, z_ref: complex, w_ref: complex, zs: np.ndarray) -> np.ndarray:
    """w along the straight segment from z_ref, by principal cube roots of factor ratios."""
    ratios = (zs[:, None] - lam[None, :]) / (z_ref - lam[None, :])
    return w_ref * np.prod(ratios ** (1.0 / 3.0), axis=1)


def _sheet_one_w(lam: np.ndarray, z: complex) -> complex:
    """First-sheet w at z, continued along the ray from the origin."""
    _check_clearance(lam, 0j, z, allowed=[])
    w0_cubed = complex(np.prod(-lam))
    if abs(w0_cubed.imag) <= 1e-14 * abs(w0_cubed):
        w0 = complex(np.cbrt(w0_cubed.real))
    else:
        w0 = principal_cuberoot(w0_cubed)
    return complex(_continue_w(lam, 0j, w0, np.array([z]))[0])


def _integrand(zs: np.ndarray, ws: np.ndarray) -> np.ndarray:
    inv2 = 1.0 / ws ** 2
    return np.stack([1.0 / ws, inv2, zs * inv2, zs ** 2 * inv2], axis=1)


def _half_segment(lam, z0, z1, z_mid, w_mid, side: int, nodes, weights, panels) -> np.ndarray:
    # side 0: u = ½ s³ near z0; side 1: u = 1 − ½ s³ near z1.
    edges = np.linspace(0.0, 1.0, panels + 1)
    s = (0.5 * (edges[1:] - edges[:-1])[:, None] * (nodes[None, :] + 1.0) + edges[:-1, None]).ravel()
    w_s = (0.5 * (edges[1:] - edges[:-1])[:, None] * weights[None, :]).ravel()
    if side == 0:
        u = 0.5 * s ** 3
    else:
        u = 1.0 - 0.5 * s ** 3
    du_ds = 1.5 * s ** 2
    zs = z0 + u * (z1 - z0)
    ws = _continue_w(lam, z_mid, w_mid, zs)
    vals = _integrand(zs, ws) * (z1 - z0)
    return np.sum(vals * (w_s * du_ds)[:, None], axis=0)


def quad_period(
    curve: GeneralSextic,
    start: Endpoint,
    end: Endpoint,
    sheet: int,
    cfg: Optional[ToleranceConfig] = None,
    nodes: int = 24,
    max_panels: int = 512,
) -> np.ndarray:
    """
    ∫ (dz/w, dz/w², z dz/w², z² dz/w²) along the straight segment start → end.

    Endpoints are branch indices 1..6 or complex points. w is continued from the
    segment midpoint, itself reached from the origin along a ray; sheet k
    multiplies the first-sheet w by ρ^{k−1}. Endpoint singularities are removed
    by u = ½s³ and Gauss–Legendre panels are doubled until converged.
    """
    cfg = cfg or ToleranceConfig()
    if sheet not in (1, 2, 3):
        raise PathError("Sheet must be 1, 2 or 3", {"sheet": sheet})
    lam = curve.points
    z0, i0 = _endpoint(curve, start)
    z1, i1 = _endpoint(curve, end)
    allowed = [i for i in (i0, i1) if i is not None]
    _check_clearance(lam, z0, z1, allowed)

    z_mid = 0.5 * (z0 + z1)
    w_mid = _sheet_one_w(lam, z_mid) * RHO ** (sheet - 1)

    x, wts = leggauss(nodes)
    previous = None
    panels = 1
    while panels <= max_panels:
        total = sum(
            _half_segment(lam, z0, z1, z_mid, w_mid, side, x, wts, panels) for side in (0, 1)
        )
        if previous is not None and np.max(np.abs(total - previous)) < max(cfg.abs_tol, 1e-13 * np.max(np.abs(total))):
            logger.debug(f"quad_period converged with {panels} panels")
            return total
        previous = total
        panels *= 2
    raise DivergenceError(
        "Period quadrature did not converge", {"start": str(z0), "end": str(z1), "panels": max_panels}
    )


# ---------------------------------------------------------------------------
# Branch integrals, Abel images and lattice reduction
# ---------------------------------------------------------------------------

def _combination(i: int, j: int, sheet: int) -> np.ndarray:
    """Coefficient vector (a₁..a₄, b₁..b₄) of ∫γ_sheet(λᵢ, λⱼ), as rationals over 3."""
    key = (i, j)
    if key in _PAIR_BLOCK:
        k = _PAIR_BLOCK[key]
        ca, cb = _PAIR_SHEET_COEFFS[sheet]
        coeffs = np.zeros(8)
        coeffs[k], coeffs[4 + k] = ca, cb
        return coeffs / 3.0
    if key == (1, 6):
        return _ONE_SIX_SHEET1 / 3.0 + _ONE_SIX_SHIFT[sheet]
    if key == (4, 5):
        # (4,5) ≡ (3,4) − (1,2) − (1,6) modulo the period lattice
        return _combination(3, 4, sheet) - _combination(1, 2, sheet) - _combination(1, 6, sheet)
    raise CombinationError(
        "Branch-point pair is not reachable by the known cycle combinations", {"i": i, "j": j}
    )


def branch_integral(i: int, j: int, sheet: int, periods: PeriodData) -> np.ndarray:
    """
    ∫ of (du₁..du₄) along γ_sheet(λᵢ, λⱼ) as rational combinations of periods.

    Pairs (1,2), (3,4), (5,6), (1,6) are exact; (4,5) holds modulo the
    period lattice (see MODULO_LATTICE_PAIRS). Reversed pairs negate.
    """
    if i == j:
        raise CombinationError("Branch integral needs distinct endpoints", {"i": i})
    if sheet not in (1, 2, 3):
        raise CombinationError("Sheet must be 1, 2 or 3", {"sheet": sheet})
    sign = 1.0
    if (i, j) not in _PAIR_BLOCK and (i, j) not in {(1, 6), (4, 5)}:
        i, j = j, i
        sign = -1.0
    coeffs = _combination(i, j, sheet)
    periods_8 = np.vstack([periods.A, periods.B])
    return sign * (coeffs @ periods_8)


def infinity_abel_images(periods: PeriodData) -> np.ndarray:
    """3×4 rows ∫_α^{∞ᵢ} du along the closed-form contours, i = 1, 2, 3."""
    J = periods.J
    rows = []
    for s in INFINITY_SHEETS:
        r1, r2 = RHO ** (-s), RHO ** (-2 * s)
        rows.append([r1 * J[0], -r2 * J[3], r2 * J[2], -r2 * J[1]])
    return np.array(rows, dtype=complex)


def zero_abel_images(periods: PeriodData) -> np.ndarray:
    """3×4 rows ∫_α^{0ₖ} du, where 0ₖ lies on sheet k+1 with w = −ρᵏ."""
    I = periods.I
    rows = []
    for k in range(3):
        r1, r2 = RHO ** (-k), RHO ** (-2 * k)
        rows.append([-r1 * I[0], -r2 * I[1], -r2 * I[2], -r2 * I[3]])
    return np.array(rows, dtype=complex)


def abel_infinities(periods: PeriodData) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """∫_{∞₁}^{∞₂}, ∫_{∞₁}^{∞₃}, ∫_{∞₂}^{∞₃} of du₁..du₄."""
    phi = infinity_abel_images(periods)
    return phi[1] - phi[0], phi[2] - phi[0], phi[2] - phi[1]


def normalize(values: np.ndarray, periods: PeriodData) -> np.ndarray:
    """Map du-integrals (rows) to normalized coordinates v = du·B⁻¹."""
    return np.asarray(values) @ periods.normalized_basis


def lattice_reduce(v, tau) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Split v = p + τq with real p, q; round to the nearest lattice vector.

    Returns:
        (integer coordinates (p, q), reduced vector v − (p + τq), residual norm)
    """
    tau = tau.entries if isinstance(tau, PeriodMatrixTau) else np.asarray(tau)
    v = np.asarray(v, dtype=complex)
    q = np.linalg.solve(tau.imag, v.imag)
    p = v.real - tau.real @ q
    p_int, q_int = np.round(p), np.round(q)
    reduced = v - (p_int + tau @ q_int)
    return np.concatenate([p_int, q_int]).astype(int), reduced, float(np.max(np.abs(reduced)))


# ---------------------------------------------------------------------------
# Riemann constants from the normalizing cycles
# ---------------------------------------------------------------------------

Segment = Tuple[int, int, int]

# b₁..b₄ as closed chains of straight segments (λᵢ → λⱼ on a sheet), each
# listed from its first vertex. b₄ starts at λ₁ and passes it once more.
NORMALIZING_CYCLES: Tuple[Tuple[Segment, ...], ...] = (
    ((1, 2, 3), (2, 1, 1)),
    ((3, 4, 3), (4, 3, 1)),
    ((6, 5, 1), (5, 6, 3)),
    ((1, 5, 1), (5, 6, 2), (6, 1, 3), (1, 2, 3), (2, 1, 2)),
)
# Paths from the base point λ₁ to the first vertex of each cycle.
CYCLE_LEADS: Tuple[Tuple[Segment, ...], ...] = ((), ((1, 2, 1), (2, 3, 1)), ((1, 6, 1),), ())
_EXACT_PAIRS = {(1, 2), (3, 4), (5, 6), (1, 6)}
HALF_PERIOD_TOL = 1e-6
SYMMETRIC_RIEMANN_CHAR = ThetaCharacteristic.from_halves((1, 1, 1, 1), (1, 1, 1, 1))


def _chebyshev_half(lam, z0, z1, z_mid, w_mid, side: int, deg: int) -> Tuple[np.ndarray, np.ndarray]:
    # Same substitution as _half_segment; s ∈ [0, 1] ↔ x ∈ [−1, 1].
    delta = z1 - z0

    def integrand(x: np.ndarray) -> np.ndarray:
        s = 0.5 * (x + 1.0)
        u = 0.5 * s ** 3 if side == 0 else 1.0 - 0.5 * s ** 3
        zs = z0 + u * delta
        ws = _continue_w(lam, z_mid, w_mid, zs)
        return _integrand(zs, ws) * (1.5 * s ** 2 * delta)[:, None]

    antiderivative = chebyshev.chebint(chebyshev.chebinterpolate(integrand, deg), lbnd=-1, scl=0.5)
    x, wts = leggauss(deg + 1)
    running = chebyshev.chebval(x, antiderivative).T
    total = chebyshev.chebval(1.0, antiderivative)
    moment = (integrand(x) * (0.5 * wts)[:, None]).T @ running
    return total, moment


def segment_moments(
    curve: GeneralSextic,
    segment: Segment,
    cfg: Optional[ToleranceConfig] = None,
    max_degree: int = 512,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    ∫ du and the iterated integrals ∫ duᵢ(P) ∫_{λᵢ}^P duₗ along γ_sheet(λᵢ, λⱼ).

    Sheets follow quad_period. The integrand is interpolated in Chebyshev
    polynomials on each half of the segment; the degree is doubled until the
    iterated integrals settle.
    """
    cfg = cfg or ToleranceConfig()
    i, j, sheet = segment
    if sheet not in (1, 2, 3) or i == j:
        raise PathError("Segment needs distinct branch points and a sheet 1, 2 or 3", {"segment": list(segment)})
    lam = curve.points
    z0, z1 = complex(lam[i - 1]), complex(lam[j - 1])
    _check_clearance(lam, z0, z1, [i - 1, j - 1])
    z_mid = 0.5 * (z0 + z1)
    w_mid = _sheet_one_w(lam, z_mid) * RHO ** (sheet - 1)

    previous = None
    deg = 32
    while deg <= max_degree:
        t0, m0 = _chebyshev_half(lam, z0, z1, z_mid, w_mid, 0, deg)
        t1, m1 = _chebyshev_half(lam, z0, z1, z_mid, w_mid, 1, deg)
        total = t0 + t1
        # second half runs from the midpoint: ∫ f₁ ⊗ (T₀ + T₁ − G₁)
        moment = m0 + np.outer(t1, total) - m1
        if previous is not None:
            scale = max(1.0, float(np.max(np.abs(moment))))
            if np.max(np.abs(moment - previous)) < max(cfg.abs_tol, 1e-12 * scale):
                logger.debug(f"segment_moments {segment} converged at degree {deg}")
                return total, moment
        previous = moment
        deg *= 2
    raise DivergenceError("Iterated segment integrals did not converge", {"segment": list(segment), "degree": max_degree})


def _segment_data(curve, segment: Segment, cfg, cache: Dict) -> Tuple[np.ndarray, np.ndarray]:
    i, j, sheet = segment
    key = (min(i, j), max(i, j), sheet)
    if key not in cache:
        cache[key] = segment_moments(curve, key, cfg)
    total, moment = cache[key]
    if (i, j, sheet) == key:
        return total, moment
    return -total, np.outer(total, total) - moment


def cycle_moments(
    curve: GeneralSextic,
    segments: Sequence[Segment],
    cfg: Optional[ToleranceConfig] = None,
    cache: Optional[Dict] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """∮ du and ∮ duᵢ(P) ∫_{start}^P duₗ around a chain of segments."""
    cfg = cfg or ToleranceConfig()
    cache = {} if cache is None else cache
    phi = np.zeros(4, dtype=complex)
    moment = np.zeros((4, 4), dtype=complex)
    for segment in segments:
        total, local = _segment_data(curve, segment, cfg, cache)
        moment += local + np.outer(total, phi)
        phi = phi + total
    return phi, moment


def _lead_integral(curve, periods: PeriodData, lead: Sequence[Segment], cfg, cache: Dict) -> np.ndarray:
    total = np.zeros(4, dtype=complex)
    for i, j, sheet in lead:
        if (min(i, j), max(i, j)) in _EXACT_PAIRS:
            total += branch_integral(i, j, sheet, periods)
        else:
            total += _segment_data(curve, (i, j, sheet), cfg, cache)[0]
    return total


def riemann_vector_from_cycles(
    periods: PeriodData, cfg: Optional[ToleranceConfig] = None
) -> Tuple[np.ndarray, Dict[str, float]]:
    """
    K̃ⱼ = ½(1 + τⱼⱼ) − Σ_{k≠j} ∮_{bₖ} vₖ(P) ∫_{λ₁}^P vⱼ with v = du·B⁻¹.

    The cycles are NORMALIZING_CYCLES reached from λ₁ along CYCLE_LEADS; the
    lead integrals use branch_integral where it is exact. Quadrature periods
    of the cycles must reproduce the closed-form B.

    Returns:
        (raw vector, residuals {"cycle_periods", "branch_integrals"})
    """
    cfg = cfg or ToleranceConfig()
    curve = SymmetricCurve.from_b(periods.b).to_sextic()
    tau = periods.tau_b.entries
    N = periods.normalized_basis
    cache: Dict = {}

    K = 0.5 * (1.0 + np.diag(tau))
    cycle_gap = 0.0
    for k, (lead, cycle) in enumerate(zip(CYCLE_LEADS, NORMALIZING_CYCLES)):
        period, moment = cycle_moments(curve, cycle, cfg, cache)
        cycle_gap = max(cycle_gap, float(np.max(np.abs(period - periods.B[k]))))
        term = normalize(_lead_integral(curve, periods, lead, cfg, cache), periods) + (N.T @ moment @ N)[k]
        term[k] = 0.0
        K = K - term

    scale = max(1.0, float(np.max(np.abs(periods.B))))
    if cycle_gap > 1e-8 * scale:
        raise ConsistencyError(
            "Quadrature periods of the normalizing cycles disagree with B", {"gap": cycle_gap}
        )
    branch_gap = max(
        (
            float(np.max(np.abs(_segment_data(curve, (i, j, s), cfg, cache)[0] - branch_integral(i, j, s, periods))))
            for (i, j) in sorted(_EXACT_PAIRS)
            for s in (1, 2, 3)
            if (i, j, s) in cache
        ),
        default=0.0,
    )
    logger.debug(f"riemann_vector_from_cycles: cycle gap {cycle_gap:.2e}, branch gap {branch_gap:.2e}")
    return K, {"cycle_periods": cycle_gap, "branch_integrals": branch_gap}


def _distinct(values: np.ndarray, tol: float) -> List[complex]:
    kept: List[complex] = []
    for v in values:
        if all(abs(v - k) > tol for k in kept):
            kept.append(complex(v))
    return kept


def half_period_completions(K, tau, reach: int = 2, tol: float = HALF_PERIOD_TOL) -> List[np.ndarray]:
    """
    Vectors K + Σⱼ (τnⱼ)ⱼ eⱼ, nⱼ ∈ [−reach, reach]⁴, that are half-periods.

    Moving the base corner of cycle j across the other cycles shifts only the
    j-th component, by a b-period. Results are distinct modulo the lattice.
    """
    tau = tau.entries if isinstance(tau, PeriodMatrixTau) else np.asarray(tau)
    K = lattice_reduce(K, tau)[1]
    steps = np.array(list(itertools.product(range(-reach, reach + 1), repeat=4)), dtype=float)
    shifts = steps @ tau.T
    found: List[np.ndarray] = []
    for q in itertools.product((0, 1), repeat=4):
        target = tau @ np.array(q, dtype=float)
        options = []
        for j in range(4):
            vals = 2.0 * (K[j] + shifts[:, j]) - target[j]
            ok = (np.abs(vals.imag) < tol) & (np.abs(vals.real - np.round(vals.real)) < tol)
            options.append(_distinct(K[j] + shifts[ok, j], tol))
        for combo in itertools.product(*options):
            candidate = np.array(combo, dtype=complex)
            if all(lattice_reduce(candidate - other, tau)[2] > tol for other in found):
                found.append(candidate)
    return found


def half_period_characteristic(K, tau) -> ThetaCharacteristic:
    """[a; b] ∈ {0, ½} with K ≡ b + τa; K must be a half-period."""
    tau = tau.entries if isinstance(tau, PeriodMatrixTau) else np.asarray(tau)
    coords, _, residual = lattice_reduce(2 * np.asarray(K, dtype=complex), tau)
    if residual > HALF_PERIOD_TOL:
        raise ConsistencyError("Vector is not a half-period", {"residual": residual})
    return ThetaCharacteristic.from_halves([int(v) % 2 for v in coords[4:]], [int(v) % 2 for v in coords[:4]])


def vanishing_even_characteristics(
    periods: PeriodData, cfg: Optional[ToleranceConfig] = None, rel_tol: float = 1e-9
) -> List[ThetaCharacteristic]:
    """Even half-characteristics whose theta constant vanishes at τ_b."""
    cfg = cfg or ToleranceConfig()
    candidates = riemann_theta.half_characteristics(4, Parity.EVEN)
    values = np.array([abs(riemann_theta.theta(np.zeros(4), periods.tau_b, ch, cfg=cfg)) for ch in candidates])
    scale = float(np.max(values))
    return [ch for ch, val in zip(candidates, values) if val < rel_tol * scale]


def riemann_constants(periods: PeriodData, cfg: Optional[ToleranceConfig] = None) -> np.ndarray:
    """
    K̃ for the base point λ₁ as b + τa, [a; b] ∈ {0, ½}.

    Evaluated from the normalizing cycles (riemann_vector_from_cycles). The
    base corners of the cycles are fixed by 2K̃ ∈ Λ, since 6λ₁ is a canonical
    divisor; the result must be one of the vanishing even theta constants and
    equal SYMMETRIC_RIEMANN_CHAR modulo the lattice.
    """
    cfg = cfg or ToleranceConfig()
    tau = periods.tau_b.entries
    raw, _ = riemann_vector_from_cycles(periods, cfg)
    completions = half_period_completions(raw, tau)
    if not completions:
        raise ConsistencyError(
            "No base-corner choice makes the cycle integral a half-period", {"raw": [str(v) for v in raw]}
        )
    vanishing = vanishing_even_characteristics(periods, cfg)
    chars = [half_period_characteristic(K, tau) for K in completions]
    matched = [ch for ch in chars if ch in vanishing]
    if len(completions) > 1:
        logger.warning(f"{len(completions)} half-period completions: {[str(c) for c in chars]}")
    if len(matched) != 1:
        raise ConsistencyError(
            "Riemann constant from the cycles does not match a vanishing even theta constant",
            {"cycles": [str(c) for c in chars], "vanishing": [str(c) for c in vanishing]},
        )
    char = matched[0]
    K = tau @ char.a_array() + char.b_array()
    expected = tau @ SYMMETRIC_RIEMANN_CHAR.a_array() + SYMMETRIC_RIEMANN_CHAR.b_array()
    residual = lattice_reduce(K - expected, tau)[2]
    if residual > HALF_PERIOD_TOL:
        raise ConsistencyError(
            "Riemann constant differs from the symmetric-curve half-period",
            {"char": str(char), "expected": str(SYMMETRIC_RIEMANN_CHAR), "residual": residual},
        )
    logger.info(f"Riemann constant characteristic {char}")
    return K


def riemann_constant_characteristic(
    periods: PeriodData, cfg: Optional[ToleranceConfig] = None
) -> ThetaCharacteristic:
    """Half-characteristic of riemann_constants."""
    return half_period_characteristic(riemann_constants(periods, cfg), periods.tau_b)


# ---------------------------------------------------------------------------
# Branch-point recovery and reality
# ---------------------------------------------------------------------------

def _sixth_theta_constant(label: str, tau: PeriodMatrixTau, cfg: ToleranceConfig) -> complex:
    a = np.array(_LAMBDA_CHARS[label])
    char = ThetaCharacteristic.from_sixths(a, -(a @ H).astype(int))
    return riemann_theta.theta(np.zeros(4), tau, char, cfg=cfg)


def recover_branch_points(tau_b: PeriodMatrixTau, cfg: Optional[ToleranceConfig] = None) -> Tuple[complex, complex, complex]:
    """Λ₁, Λ₂, Λ₃ of the normalized curve from sixth-order theta constants of τ_b."""
    cfg = cfg or ToleranceConfig()
    th = {label: _sixth_theta_constant(label, tau_b, cfg) for label in _LAMBDA_CHARS}
    for label in ("1133", "1155", "5111"):
        if abs(th[label]) < 1e-12:
            raise SingularConfigurationError(
                "Theta constant in a denominator vanishes", {"char": label}
            )
    lam1 = (th["3335"] / th["1133"]) ** 3
    lam2 = -(th["1533"] / th["1155"]) ** 3
    lam3 = -(th["1133"] / th["5111"]) ** 3
    return complex(lam1), complex(lam2), complex(lam3)


def cross_ratio_lambdas(lam: Sequence[complex]) -> Tuple[complex, complex, complex]:
    """Images of λ₃, λ₅, λ₆ under the Möbius map sending (λ₁, λ₂, λ₄) to (∞, 1, 0)."""
    l1, l2, _, l4 = lam[0], lam[1], lam[2], lam[3]
    result = []
    for idx in (2, 4, 5):
        lk = lam[idx]
        result.append(complex((l2 - l1) / (l2 - l4) * (lk - l4) / (lk - l1)))
    return tuple(result)


def j_invariant_of_cross_ratio(lam: complex) -> complex:
    """Klein-type invariant (λ²−λ+1)³/(λ²(λ−1)²), constant on the six-element orbit."""
    return (lam ** 2 - lam + 1) ** 3 / (lam ** 2 * (lam - 1) ** 2)


def four_point_invariants(points: Sequence[complex]) -> List[complex]:
    """j-invariants of the cross ratios of all four-point subsets, sorted by real part."""
    values = []
    for a, b, c, d in itertools.combinations([complex(p) for p in points], 4):
        lam = (a - c) * (b - d) / ((a - d) * (b - c))
        values.append(complex(j_invariant_of_cross_ratio(lam)))
    return sorted(values, key=lambda v: (v.real, v.imag))


def _is_real(x: complex, tol: float) -> bool:
    return abs(complex(x).imag) <= tol * max(1.0, abs(x))


def _mobius_case(l1: complex, l2: complex, l3: complex, tol: float) -> Optional[str]:
    if _is_real(l1, tol):
        r = l1.real
        if r < 0 and abs(l2 * np.conj(l3) - l1) <= tol * max(1.0, abs(l1)):
            return "a"
        if 0 < r < 1:
            lhs = (l2 / (l2 - 1)) * np.conj(l3 / (l3 - 1))
            if abs(lhs - l1 / (l1 - 1)) <= tol * max(1.0, abs(l1 / (l1 - 1))):
                return "b"
        if r > 1 and abs((1 - l2) * np.conj(1 - l3) - (1 - l1)) <= tol * max(1.0, abs(1 - l1)):
            return "c"
    prod = l1 * np.conj(l2)
    quot = l1 / l2
    if _is_real(prod, tol) and prod.real > 0 and _is_real(quot, tol) and quot.real > 1:
        target = l2 * (1 - np.conj(l1)) / (1 - np.conj(l2))
        if abs(l3 - target) <= tol * max(1.0, abs(l3)):
            return "d"
    return None


def mobius_reality_check(l1: complex, l2: complex, l3: complex, tol: float = 1e-8) -> Dict[str, object]:
    """
    Whether {0, 1, ∞, Λ₁, Λ₂, Λ₃} is Möbius equivalent to {αⱼ, −1/ᾱⱼ}.

    Tests the four case conditions over all relabelings of the Λ's and
    reports the first satisfied case.
    """
    lams = (complex(l1), complex(l2), complex(l3))
    for perm in itertools.permutations(range(3)):
        case = _mobius_case(*(lams[p] for p in perm), tol=tol)
        if case:
            return {"equivalent": True, "case": case, "permutation": list(perm)}
    return {"equivalent": False, "case": None, "permutation": None}


# ---------------------------------------------------------------------------
# Elliptic covers and the involution
# ---------------------------------------------------------------------------

def cover_invariants(b: float) -> Dict[str, complex]:
    """
    j-invariants of the elliptic quotients E± and their squared moduli.

    Also returns the Ramanujan parameter p with M = (1+2ρ+p)/(1+2ρ−p).
    """
    L = (b * b + 4.0) ** (1.0 / 6.0)
    L3 = L ** 3
    if abs(L3 - b) < 1e-14 or abs(L3 + b) < 1e-14:
        raise PoleError("j-invariant denominator vanishes", {"b": b})
    j_plus = 108.0 * L3 * (5 * L3 - 4 * b) ** 3 / (L3 + b) ** 2
    j_minus = 108.0 * L3 * (5 * L3 + 4 * b) ** 3 / (L3 - b) ** 2

    K = principal_cuberoot(2j - b)
    M = K / L
    r = RHO
    k_plus_sq = -r * (r * M + 1) * (r * M - 1) ** 3 / ((M + 1) * (M - 1) ** 3)
    k_minus_sq = -r * (r * M - 1) * (r * M + 1) ** 3 / ((M - 1) * (M + 1) ** 3)
    p = (1 + 2 * r) * (M - 1) / (M + 1)
    return {
        "j_plus": complex(j_plus),
        "j_minus": complex(j_minus),
        "k_plus_sq": complex(k_plus_sq),
        "k_minus_sq": complex(k_minus_sq),
        "p": complex(p),
        "M": complex(M),
    }


def ramanujan_moduli(p: complex) -> Tuple[complex, complex]:
    """(p+1)³(3−p)/(16p) and (p+1)(3−p)³/(16p³)."""
    return (p + 1) ** 3 * (3 - p) / (16 * p), (p + 1) * (3 - p) ** 3 / (16 * p ** 3)


def legendre_j(k_sq: complex) -> complex:
    """j-invariant of w² = z(1−z)(1−k²z)."""
    return 256.0 * (k_sq ** 2 - k_sq + 1) ** 3 / (k_sq ** 2 * (k_sq - 1) ** 2)


def equianharmonic_residuals(b: float, samples: int = 7) -> Dict[str, float]:
    """
    Reduce E₁: z³+w³+3z+b = 0 and E₂: w³+z²+bz−1 = 0 to Y² = X³ + D (g₂ = 0).

    Each map is validated on sampled curve points; returns the largest
    residual of Y² − X³ − D per curve.
    """
    zs = np.linspace(0.3, 2.1, samples) + 0.4j

    # E₂: u = z + b/2, (X, Y) = (−w, u)
    D2 = b * b / 4.0 + 1.0
    w2 = np.array([principal_cuberoot(-(z * z + b * z - 1)) for z in zs])
    res2 = np.max(np.abs((zs + b / 2) ** 2 - (-w2) ** 3 - D2))

    # E₁: send a root e₃ of z³+3z+b to infinity, z = e₃ + 1/u, W = w u
    e1, e2, e3 = np.roots([1.0, 0.0, 3.0, b])
    c2 = (e3 - e1) * (e3 - e2)
    c1 = 2 * e3 - e1 - e2
    D1 = c1 * c1 / (4 * c2) - 1.0
    w1 = np.array([principal_cuberoot(-(z ** 3 + 3 * z + b)) for z in zs])
    u = 1.0 / (zs - e3)
    X = -(w1 * u)
    Y_sq = c2 * (u + c1 / (2 * c2)) ** 2
    res1 = np.max(np.abs(Y_sq - X ** 3 - D1))
    return {"E1": float(res1), "E2": float(res2), "g2": 0.0}


def involution_data(chi_cuberoot: complex = 1.0) -> InvolutionData:
    """Cycle action M and the 4×4 T with κ = χ^{1/3}/conj(χ^{1/3})."""
    c = complex(chi_cuberoot)
    kappa = c / np.conj(c)
    T = np.array([
        [-kappa, 0, 0, 0],
        [0, 0, 0, kappa ** 2],
        [0, 0, -kappa ** 2, 0],
        [0, kappa ** 2, 0, 0],
    ], dtype=complex)
    return InvolutionData(M=INVOLUTION_M.copy(), T=T)


def involution_check(periods: PeriodData, inv: InvolutionData, cycle: Optional[np.ndarray] = None) -> float:
    """
    ‖M·(A;B) − conj((A;B))·T‖_max, plus exact integer checks on M.

    The integer identities M² = I and MJMᵀ = −J (and (n,m)M = −(n,m) for a
    supplied ES cycle) contribute an infinite residual if violated.
    """
    M = inv.M
    J = symplectic_form(4)
    if not np.array_equal(M @ M, np.eye(8, dtype=np.int64)):
        return float("inf")
    if not np.array_equal(M @ J @ M.T, -J):
        return float("inf")
    if cycle is not None and not np.array_equal(np.asarray(cycle) @ M, -np.asarray(cycle)):
        return float("inf")
    AB = np.vstack([periods.A, periods.B])
    return float(np.max(np.abs(M @ AB - np.conj(AB) @ inv.T)))
