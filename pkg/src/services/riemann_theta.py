"""
Riemann theta functions with rational characteristics.

θ[a,b](z; τ) = Σₙ exp(iπ(n+a)ᵀτ(n+a) + 2πi(n+a)ᵀ(z+b)), z a row vector.
Jacobi conventions: θ₁ = −θ[½,½], θ₂ = θ[½,0], θ₃ = θ[0,0], θ₄ = θ[0,½].
"""
import itertools
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, special

from src.exceptions import ConditioningError, DomainError, ReductionShapeError
from src.models.theta import PeriodMatrixTau, SymplecticTransform, ThetaCharacteristic
from src.models.tolerance import ToleranceConfig
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

MIN_IMAG_EIGENVALUE = 1e-8
# Bound on z-points per vectorized block (points × lattice offsets).
BLOCK_BUDGET = 2_000_000
MAX_Q_DENOMINATOR = 420


class Parity(str, Enum):
    EVEN = "even"
    ODD = "odd"


def _as_tau(tau) -> PeriodMatrixTau:
    if isinstance(tau, PeriodMatrixTau):
        return tau
    tau = np.atleast_2d(np.asarray(tau, dtype=complex))
    return PeriodMatrixTau(tau)


def _tail_radius(T: np.ndarray, tol: float, extra_order: int) -> float:
    """Radius R with Σ_{‖√π T(n+c)‖ > R} exp(−‖√π T(n+c)‖²) below tol."""
    g = T.shape[0]
    scaled = np.sqrt(np.pi) * T
    # shortest nonzero lattice vector, by a small box search
    box = np.array(list(itertools.product(range(-2, 3), repeat=g)))
    box = box[np.any(box != 0, axis=1)]
    shortest = float(np.min(np.linalg.norm(box @ scaled.T, axis=1)))

    def tail(R):
        x = (R - shortest / 2.0) ** 2
        bound = (g / 2.0) * (2.0 / shortest) ** g * special.gammaincc(g / 2.0, x) * special.gamma(g / 2.0)
        return bound - tol

    lo = shortest / 2.0 + 1e-6
    hi = lo + 40.0
    if tail(lo) <= 0:
        radius = lo
    else:
        radius = optimize.brentq(tail, lo, hi, xtol=1e-6)
    return radius + extra_order


@lru_cache(maxsize=64)
def _offsets_cached(T_bytes: bytes, g: int, radius: float) -> np.ndarray:
    T = np.frombuffer(T_bytes, dtype=float).reshape(g, g)
    Y = T.T @ T
    Yinv = np.linalg.inv(Y)
    # every fractional centre lies in [−½, ½]^g
    slack = 0.5 * np.sum(np.linalg.norm(T, axis=0))
    rho = radius / np.sqrt(np.pi) + slack
    bounds = np.ceil(rho * np.sqrt(np.diag(Yinv))).astype(int)
    axes = [np.arange(-k, k + 1) for k in bounds]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, g)
    norms = np.einsum("ij,kj->ik", grid, T)
    keep = np.sum(norms ** 2, axis=1) <= rho ** 2
    return grid[keep].astype(float)


def _lattice_offsets(Y: np.ndarray, cfg: ToleranceConfig, extra_order: int) -> np.ndarray:
    eig_min = float(np.linalg.eigvalsh(Y)[0])
    if eig_min < MIN_IMAG_EIGENVALUE:
        raise ConditioningError(
            "Imaginary part of τ is ill-conditioned", {"min_eigenvalue": eig_min}
        )
    T = np.linalg.cholesky(Y).T
    radius = _tail_radius(T, cfg.theta_tol, extra_order)
    offsets = _offsets_cached(np.ascontiguousarray(T).tobytes(), T.shape[0], round(radius, 6))
    logger.debug(f"theta lattice: g={T.shape[0]} radius={radius:.3f} points={len(offsets)}")
    return offsets


def theta_batch(
    Z,
    tau,
    char: Optional[ThetaCharacteristic] = None,
    deriv: Optional[Sequence[Sequence[complex]]] = None,
    cfg: Optional[ToleranceConfig] = None,
) -> np.ndarray:
    """
    Evaluate θ[a,b] (or a directional derivative) at each row of Z.

    Args:
        Z: N×g array of arguments (a single g-vector is promoted)
        tau: Period matrix
        char: Characteristic (defaults to zero)
        deriv: Up to two direction vectors; derivatives are taken termwise
        cfg: Tolerances (theta_tol bounds the truncation error)

    Returns:
        Array of N complex values
    """
    cfg = cfg or ToleranceConfig()
    tau = _as_tau(tau)
    g = tau.g
    Z = np.asarray(Z, dtype=complex)
    if Z.ndim == 1:
        Z = Z.reshape(1, -1) if g > 1 else Z.reshape(-1, 1)
    if Z.shape[1] != g:
        raise DomainError("Argument dimension does not match τ", {"g": g, "shape": list(Z.shape)})
    char = char or ThetaCharacteristic.zero(g)
    if char.g != g:
        raise DomainError("Characteristic dimension does not match τ", {"g": g, "char_g": char.g})
    deriv = [np.asarray(d, dtype=complex).reshape(g) for d in (deriv or [])]
    if len(deriv) > 2:
        raise DomainError("At most two derivative directions are supported", {"count": len(deriv)})

    a = char.a_array()
    b = char.b_array()
    Y = tau.entries.imag
    offsets = _lattice_offsets(Y, cfg, extra_order=len(deriv))

    # centre of the Gaussian: n + a ≈ −Y⁻¹ Im z
    centres = -a - np.linalg.solve(Y, Z.imag.T).T
    shifts = np.round(centres)

    # n + a = base + offset; expand the quadratic form around base
    tau_m = tau.entries
    base = shifts + a
    quad_offsets = np.einsum("mi,ij,mj->m", offsets, tau_m, offsets)

    out = np.empty(Z.shape[0], dtype=complex)
    block = max(1, BLOCK_BUDGET // max(1, len(offsets)))
    for start in range(0, Z.shape[0], block):
        sl = slice(start, start + block)
        B = base[sl]
        shifted = Z[sl] + b
        linear = B @ tau_m + shifted
        const = 1j * np.pi * np.einsum("pi,ij,pj->p", B, tau_m, B) + 2j * np.pi * np.sum(B * shifted, axis=1)
        exponent = (
            1j * np.pi * quad_offsets[None, :]
            + 2j * np.pi * (linear @ offsets.T)
            + const[:, None]
        )
        terms = np.exp(exponent)
        for d in deriv:
            terms = terms * (2j * np.pi * ((B @ d)[:, None] + (offsets @ d)[None, :]))
        out[sl] = terms.sum(axis=1)
    return out


def theta(
    z,
    tau,
    char: Optional[ThetaCharacteristic] = None,
    deriv: Optional[Sequence[Sequence[complex]]] = None,
    cfg: Optional[ToleranceConfig] = None,
) -> complex:
    """Value (or first/second directional derivative) of θ[a,b](z; τ)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    return complex(theta_batch(z.reshape(1, -1), tau, char, deriv, cfg)[0])


def theta_gradient(
    Z, tau, char: Optional[ThetaCharacteristic] = None, cfg: Optional[ToleranceConfig] = None
) -> np.ndarray:
    """N×g matrix of partial derivatives ∂θ/∂z_r at each row of Z."""
    tau = _as_tau(tau)
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    cols = [theta_batch(Z, tau, char, [np.eye(tau.g)[r]], cfg) for r in range(tau.g)]
    return np.stack(cols, axis=1)


def char_parity(char: ThetaCharacteristic) -> Parity:
    """Parity of 4a·b mod 2 for a half-characteristic."""
    if not char.is_half:
        raise DomainError("Parity is defined for half-characteristics only", {"char": str(char)})
    value = 4 * sum(x * y for x, y in zip(char.a, char.b))
    return Parity.ODD if int(value) % 2 else Parity.EVEN


def half_characteristics(g: int, parity: Optional[Parity] = None) -> List[ThetaCharacteristic]:
    """All 4^g half-characteristics ½[a; b] in lexicographic order, optionally filtered."""
    result = []
    for bits in itertools.product((0, 1), repeat=2 * g):
        char = ThetaCharacteristic.from_halves(bits[:g], bits[g:])
        if parity is None or char_parity(char) == parity:
            result.append(char)
    return result


_JACOBI = {
    1: ((Fraction(1, 2),), (Fraction(1, 2),), -1.0),
    2: ((Fraction(1, 2),), (Fraction(0),), 1.0),
    3: ((Fraction(0),), (Fraction(0),), 1.0),
    4: ((Fraction(0),), (Fraction(1, 2),), 1.0),
}


def jacobi_theta(i: int, z, tau: complex, cfg: Optional[ToleranceConfig] = None, deriv: int = 0):
    """
    Jacobi θᵢ(z | τ) for i = 1..4 as genus-1 characteristic specializations.

    z may be a scalar or an array; deriv ∈ {0, 1, 2} is the z-derivative order.
    """
    if i not in _JACOBI:
        raise DomainError("Jacobi theta index must be 1..4", {"i": i})
    tau = complex(tau)
    if tau.imag <= 0:
        raise DomainError("Jacobi theta needs Im τ > 0", {"tau": str(tau)})
    a, b, sign = _JACOBI[i]
    char = ThetaCharacteristic(a, b)
    zs = np.atleast_1d(np.asarray(z, dtype=complex))
    values = sign * theta_batch(zs.reshape(-1, 1), [[tau]], char, [[1.0]] * deriv, cfg)
    return complex(values[0]) if np.ndim(z) == 0 else values


def modular_transform_char(
    char: ThetaCharacteristic, sigma: SymplecticTransform
) -> Tuple[ThetaCharacteristic, Fraction]:
    """
    Characteristic and phase under σ = [[A, B], [C, D]].

    new = (a, b)σ⁻¹ + ½(diag(CDᵀ), diag(ABᵀ)), with the exact rational phase φ
    in θ[new](z(Cτ+D)⁻¹; σ∘τ) = κ e^{iπφ} e^{iπ z(Cτ+D)⁻¹C zᵀ} √det(Cτ+D) θ[a,b](z; τ).
    """
    A, B, C, D = (sigma.A.astype(object), sigma.B.astype(object),
                  sigma.C.astype(object), sigma.D.astype(object))
    a = np.array(char.a, dtype=object)
    b = np.array(char.b, dtype=object)
    diag_cd = np.diag(C @ D.T)
    diag_ab = np.diag(A @ B.T)
    a_new = a @ D.T - b @ C.T + Fraction(1, 2) * diag_cd
    b_new = -(a @ B.T) + b @ A.T + Fraction(1, 2) * diag_ab

    phi = -Fraction(1, 2) * (a @ D.T @ B @ a - 2 * (a @ B.T @ C @ b) + b @ C.T @ A @ b)
    phi += Fraction(1, 2) * ((a @ D.T - b @ C.T) @ diag_ab)
    return ThetaCharacteristic(tuple(a_new), tuple(b_new)), Fraction(phi)


def _rational_block(Q: np.ndarray) -> Tuple[List[Fraction], np.ndarray]:
    fracs = []
    for q in Q:
        if abs(q.imag) > 1e-9:
            raise ReductionShapeError("Off-diagonal block is not real", {"entry": str(q)})
        f = Fraction(float(q.real)).limit_denominator(MAX_Q_DENOMINATOR)
        if abs(float(f) - q.real) > 1e-9:
            raise ReductionShapeError(
                "Off-diagonal block is not rational", {"entry": float(q.real)}
            )
        fracs.append(f)
    return fracs, np.array([f.denominator for f in fracs], dtype=int)


def theta_reduce(z: complex, w, tau_prime, cfg: Optional[ToleranceConfig] = None) -> complex:
    """
    θ((z, w); τ′) for τ′ = [[τ₁, Q], [Qᵀ, τ#]] with rational Q.

    Uses θ((z,w); τ′) = Σ_{0 ≤ m < D} θ(z + Qm; τ₁) θ[D⁻¹m, 0](Dw; Dτ#D),
    D = diag of the denominators of Q.
    """
    cfg = cfg or ToleranceConfig()
    tau_prime = _as_tau(tau_prime)
    tau = tau_prime.entries
    g = tau_prime.g
    w = np.asarray(w, dtype=complex).reshape(g - 1)
    fracs, dens = _rational_block(tau[0, 1:])
    tau1 = tau[0:1, 0:1]
    tau_rest = tau[1:, 1:]
    Dm = np.diag(dens)
    tau_scaled = Dm @ tau_rest @ Dm
    q = np.array([float(f) for f in fracs])

    total = 0j
    for m in itertools.product(*[range(int(d)) for d in dens]):
        m = np.array(m)
        char = ThetaCharacteristic(tuple(Fraction(int(mi), int(di)) for mi, di in zip(m, dens)),
                                   (0,) * (g - 1))
        first = theta([z + q @ m], tau1, cfg=cfg)
        second = theta(Dm @ w, tau_scaled, char, cfg=cfg)
        total += first * second
    return total
