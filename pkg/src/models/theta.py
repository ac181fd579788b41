from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Tuple

import numpy as np

from src.exceptions import ConditioningError, DomainError


def _as_fractions(values: Iterable) -> Tuple[Fraction, ...]:
    return tuple(Fraction(v) for v in values)


@dataclass(frozen=True)
class ThetaCharacteristic:
    """Rational characteristic (a, b) of a genus-g theta function."""
    a: Tuple[Fraction, ...]
    b: Tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "a", _as_fractions(self.a))
        object.__setattr__(self, "b", _as_fractions(self.b))
        if len(self.a) != len(self.b):
            raise DomainError(
                "Characteristic halves differ in length",
                {"len_a": len(self.a), "len_b": len(self.b)},
            )

    @property
    def g(self) -> int:
        return len(self.a)

    @classmethod
    def zero(cls, g: int) -> "ThetaCharacteristic":
        return cls((0,) * g, (0,) * g)

    @classmethod
    def from_halves(cls, a: Sequence[int], b: Sequence[int]) -> "ThetaCharacteristic":
        """Half-characteristic ½[a; b] from integer vectors."""
        return cls(tuple(Fraction(x, 2) for x in a), tuple(Fraction(x, 2) for x in b))

    @classmethod
    def from_sixths(cls, a: Sequence[int], b: Sequence[int]) -> "ThetaCharacteristic":
        return cls(tuple(Fraction(x, 6) for x in a), tuple(Fraction(x, 6) for x in b))

    @property
    def is_half(self) -> bool:
        return all(x.denominator <= 2 for x in self.a + self.b)

    def a_array(self) -> np.ndarray:
        return np.array([float(x) for x in self.a])

    def b_array(self) -> np.ndarray:
        return np.array([float(x) for x in self.b])

    def negate(self) -> "ThetaCharacteristic":
        return ThetaCharacteristic(tuple(-x for x in self.a), tuple(-x for x in self.b))

    def shifted(self, p: Sequence[int], q: Sequence[int]) -> "ThetaCharacteristic":
        return ThetaCharacteristic(
            tuple(x + int(s) for x, s in zip(self.a, p)),
            tuple(x + int(s) for x, s in zip(self.b, q)),
        )

    def __str__(self) -> str:
        fmt = lambda v: ",".join(str(x) for x in v)
        return f"[{fmt(self.a)};{fmt(self.b)}]"


@dataclass(frozen=True)
class PeriodMatrixTau:
    """Symmetric g×g period matrix with positive-definite imaginary part."""
    entries: np.ndarray
    g: int = field(init=False)

    def __post_init__(self):
        tau = np.asarray(self.entries, dtype=complex)
        if tau.ndim != 2 or tau.shape[0] != tau.shape[1]:
            raise DomainError("Period matrix must be square", {"shape": list(tau.shape)})
        if np.max(np.abs(tau - tau.T)) > 1e-10 * max(1.0, np.max(np.abs(tau))):
            raise DomainError(
                "Period matrix is not symmetric",
                {"asymmetry": float(np.max(np.abs(tau - tau.T)))},
            )
        tau = 0.5 * (tau + tau.T)
        try:
            np.linalg.cholesky(tau.imag)
        except np.linalg.LinAlgError as e:
            raise ConditioningError(
                "Imaginary part of period matrix is not positive definite",
                {"eigenvalues": np.linalg.eigvalsh(tau.imag).tolist()},
            ) from e
        object.__setattr__(self, "entries", tau)
        object.__setattr__(self, "g", tau.shape[0])

    @property
    def imag_min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries.imag)[0])


@dataclass(frozen=True)
class SymplecticTransform:
    """Integer symplectic matrix σ = [[A, B], [C, D]] acting on (τ, characteristics)."""
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        for name in ("A", "B", "C", "D"):
            block = np.asarray(getattr(self, name))
            if not np.all(np.equal(np.mod(block, 1), 0)):
                raise DomainError(f"Block {name} is not integral")
            object.__setattr__(self, name, block.astype(np.int64))
        sigma = self.matrix
        J = symplectic_form(self.g)
        if not np.array_equal(sigma @ J @ sigma.T, J):
            raise DomainError("Matrix is not symplectic", {"sigma": sigma.tolist()})

    @property
    def g(self) -> int:
        return self.A.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return np.block([[self.A, self.B], [self.C, self.D]])

    @classmethod
    def from_matrix(cls, sigma) -> "SymplecticTransform":
        sigma = np.asarray(sigma, dtype=np.int64)
        g = sigma.shape[0] // 2
        return cls(sigma[:g, :g], sigma[:g, g:], sigma[g:, :g], sigma[g:, g:])

    @classmethod
    def identity(cls, g: int) -> "SymplecticTransform":
        return cls.from_matrix(np.eye(2 * g, dtype=np.int64))

    def compose(self, other: "SymplecticTransform") -> "SymplecticTransform":
        """self ∘ other (apply other first)."""
        return SymplecticTransform.from_matrix(self.matrix @ other.matrix)

    def inverse(self) -> "SymplecticTransform":
        J = symplectic_form(self.g)
        # σ⁻¹ = -J σᵀ J for symplectic σ
        return SymplecticTransform.from_matrix(-J @ self.matrix.T @ J)


def symplectic_form(g: int) -> np.ndarray:
    """J = [[0, I], [-I, 0]]."""
    eye = np.eye(g, dtype=np.int64)
    zero = np.zeros((g, g), dtype=np.int64)
    return np.block([[zero, eye], [-eye, zero]])
