from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from src.models.theta import PeriodMatrixTau, SymplecticTransform, ThetaCharacteristic


@dataclass(frozen=True)
class PrimeFormFrame:
    """Odd characteristic used for the prime form and the half-differentials h(∞ⱼ)."""
    odd_char: ThetaCharacteristic
    half_diff_values: np.ndarray
    gradient_norm: float = 0.0


@dataclass(frozen=True)
class SpectralData:
    """Genus-independent ingredients of Q₀ for a spectral curve with n sheets.

    Abel images are normalized coordinates from a common base point, taken
    along one fixed family of contours. ``zero_weights[k]`` is η(0ₖ) times the
    ζ-derivative of the normalized differentials at the point 0ₖ over ζ = 0.
    """
    tau: PeriodMatrixTau
    phi_inf: np.ndarray       # n × g
    phi_zero: np.ndarray      # n × g
    inf_expansion: np.ndarray  # n × g, dv/dt at ∞ⱼ with t = 1/ζ
    zero_weights: np.ndarray  # n × g
    rho: np.ndarray           # n
    U: np.ndarray             # g
    K_tilde: np.ndarray       # g
    p_tilde: np.ndarray       # g, integers
    q_tilde: np.ndarray       # g, integers

    @property
    def n(self) -> int:
        return len(self.rho)

    @property
    def g(self) -> int:
        return self.tau.g

    @property
    def shift(self) -> np.ndarray:
        """U − K̃ = ½p̃ + ½τq̃."""
        return 0.5 * self.p_tilde + 0.5 * self.tau.entries @ self.q_tilde


@dataclass
class Q0Grid:
    """Q₀(z) sampled on nodes in (−1, 1), with an evaluator for off-grid points."""
    z_nodes: np.ndarray
    values: np.ndarray        # N × n × n
    rho: np.ndarray
    nu_diff: np.ndarray
    eps: np.ndarray
    odd_char: Optional[ThetaCharacteristic] = None
    pole_nodes: List[float] = field(default_factory=list)
    evaluate: Optional[Callable[[np.ndarray], np.ndarray]] = None
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    metadata: Dict[str, float] = field(default_factory=dict)


@dataclass
class NahmSample:
    """Nahm triple on a z-grid with per-node residuals."""
    z_nodes: np.ndarray
    T1: np.ndarray            # N × n × n
    T2: np.ndarray
    T3: np.ndarray
    residual: np.ndarray      # N
    lax_residual: Optional[np.ndarray] = None
    A_minus: Optional[np.ndarray] = None
    A_zero: Optional[np.ndarray] = None
    A_plus: Optional[np.ndarray] = None
    metadata: Dict[str, float] = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual)) if len(self.residual) else 0.0


@dataclass(frozen=True)
class ReducedForm:
    """Symplectic transform σ bringing τ_b and the ES vector to reduced block form."""
    sigma: SymplecticTransform
    tau_prime: PeriodMatrixTau
    d: int
    alpha_entry: int
    first_row_residual: float = 0.0
