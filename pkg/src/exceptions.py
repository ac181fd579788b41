"""Error hierarchy shared by the numerical services and the CLI.

Each error carries the process exit code the CLI reports for it.
"""
from typing import Any, Dict, Optional


class MonopoleError(Exception):
    """Base class for all library errors."""

    exit_code: int = 4

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "message": self.message,
            "details": self.details,
        }


# Input errors (exit code 2)

class DomainError(MonopoleError, ValueError):
    """Argument outside the domain of an operation."""

    exit_code = 2


class InadmissibleError(DomainError):
    """Winding pair (n1, m1) fails primitivity or the sign condition."""


class BranchAmbiguityError(DomainError):
    """Evaluation requested on a branch cut without choosing a branch."""


class PathError(DomainError):
    """Integration segment runs too close to a branch point."""


class CombinationError(DomainError):
    """Branch-point pair not expressible through the known cycle combinations."""


class RealityViolationError(DomainError):
    """Period vector violates the positivity condition of the period matrix."""


# Numerical failures (exit code 4)

class PoleError(MonopoleError):
    """Evaluation at a pole."""


class DivergenceError(MonopoleError):
    """Series failed to converge within the term budget."""


class ConditioningError(MonopoleError):
    """Imaginary part of a period matrix is too close to singular."""


class ReductionShapeError(MonopoleError):
    """Period matrix is not in the block form required for theta splitting."""


class ReductionError(MonopoleError):
    """Symplectic reduction could not be completed."""


class DegenerateError(MonopoleError):
    """A quantity that must be nonzero vanished."""


class ConsistencyError(MonopoleError):
    """A computed value failed to reduce onto the period lattice."""


class InconsistencyError(MonopoleError):
    """Two independent evaluations of the same quantity disagree."""


class SingularConfigurationError(MonopoleError):
    """A theta value that must be nonzero vanishes."""


class FrameError(MonopoleError):
    """No admissible frame (characteristic, transform) could be chosen."""


class StiffnessError(MonopoleError):
    """Gauge-flow integration became ill-conditioned."""
