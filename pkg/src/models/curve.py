from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.exceptions import DomainError
from src.models.theta import PeriodMatrixTau

RHO = np.exp(2j * np.pi / 3)

H = np.diag([1.0, 1.0, 1.0, -1.0])
LAMBDA_PHASES = np.array([RHO, RHO ** 2, RHO ** 2, RHO ** 2])


@dataclass(frozen=True)
class SymmetricCurve:
    """The curve w³ = z⁶ + b z³ − 1 with real branch points α > 0 > β."""
    b: float
    alpha: float
    beta: float
    chi: float = 1.0
    chi_cuberoot: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.b):
            raise DomainError("Curve parameter b must be finite", {"b": self.b})
        if abs((self.alpha * self.beta) ** 3 + 1.0) > 1e-12:
            raise DomainError("Branch points violate α³β³ = −1", {"alpha": self.alpha, "beta": self.beta})
        if abs(self.chi_cuberoot ** 3 - self.chi) > 1e-12 * max(1.0, abs(self.chi)):
            raise DomainError("chi_cuberoot³ differs from chi")

    @classmethod
    def from_b(cls, b: float, chi_cuberoot: float = 1.0) -> "SymmetricCurve":
        # α³ = (−b + √(b²+4))/2, rewritten without cancellation for b > 0
        root = np.hypot(b, 2.0)
        alpha = np.cbrt(2.0 / (b + root)) if b > 0 else np.cbrt((root - b) / 2.0)
        return cls(b=float(b), alpha=float(alpha), beta=float(-1.0 / alpha),
                   chi=float(chi_cuberoot ** 3), chi_cuberoot=float(chi_cuberoot))

    def branch_points(self) -> np.ndarray:
        """λ₁..λ₆ ordered by argument in [0, 2π)."""
        a, be = self.alpha, self.beta
        return np.array([a, be * RHO ** 2, a * RHO, be, a * RHO ** 2, be * RHO])

    def to_sextic(self) -> "GeneralSextic":
        return GeneralSextic(tuple(complex(x) for x in self.branch_points()))


@dataclass(frozen=True)
class GeneralSextic:
    """Curve w³ = ∏(z − λᵢ) with six distinct branch points."""
    lam: Tuple[complex, ...]

    def __post_init__(self):
        lam = tuple(complex(x) for x in self.lam)
        if len(lam) != 6:
            raise DomainError("A sextic needs six branch points", {"count": len(lam)})
        pts = np.array(lam)
        gaps = np.abs(pts[:, None] - pts[None, :]) + np.eye(6)
        if np.min(gaps) < 1e-12:
            raise DomainError("Branch points must be pairwise distinct")
        args = np.mod(np.angle(pts), 2 * np.pi)
        if np.any(np.diff(args) < -1e-12):
            raise DomainError("Branch points must be ordered by argument", {"args": args.tolist()})
        object.__setattr__(self, "lam", lam)

    @property
    def points(self) -> np.ndarray:
        return np.array(self.lam)


@dataclass(frozen=True)
class PeriodData:
    """Periods of (du₁..du₄) = (dz/w, dz/w², z dz/w², z² dz/w²).

    Rows of A are the a-cycles, rows of B the b-cycles; columns are the
    differentials. tau_b = A B⁻¹ is the Riemann matrix of the canonical basis
    (a′, b′) = (b, a); tau_a = B A⁻¹ is its inverse.
    """
    b: float
    alpha: float
    A: np.ndarray
    B: np.ndarray
    x: np.ndarray
    b_vec: np.ndarray
    c_vec: np.ndarray
    d_vec: np.ndarray
    y: np.ndarray
    I: np.ndarray
    J: np.ndarray
    K1: complex
    L1: complex
    tau_a: np.ndarray
    tau_b: PeriodMatrixTau

    @property
    def delta(self) -> complex:
        """xᵀHx."""
        return complex(self.x @ H @ self.x)

    @property
    def normalized_basis(self) -> np.ndarray:
        """B⁻¹: right-multiplying a row of du-integrals gives normalized Abel coordinates."""
        return np.linalg.inv(self.B)

    @property
    def period_lattice(self) -> np.ndarray:
        """8×4 generators of the normalized lattice: rows e_k then rows of tau_b."""
        return np.vstack([np.eye(4, dtype=complex), self.tau_b.entries])


@dataclass(frozen=True)
class InvolutionData:
    """Integer action M of the antiholomorphic involution on (a; b) and the 4×4 T."""
    M: np.ndarray
    T: np.ndarray
