import math
from typing import Optional, Sequence, Tuple

from src.exceptions import DomainError, InadmissibleError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


def validate_winding_pair(n1: int, m1: int) -> Tuple[int, int]:
    """
    Validate an ES winding pair.

    Args:
        n1, m1: Integer winding numbers

    Returns:
        The pair, unchanged

    Raises:
        InadmissibleError: if the pair is not coprime or (m1 + n1)(m1 − 2n1) ≥ 0
    """
    if math.gcd(n1, m1) != 1:
        logger.warning(f"Winding pair ({n1}, {m1}) is not coprime")
        raise InadmissibleError(
            f"Winding pair ({n1}, {m1}) is inadmissible: not coprime", {"n1": n1, "m1": m1}
        )
    if (m1 + n1) * (m1 - 2 * n1) >= 0:
        logger.warning(f"Winding pair ({n1}, {m1}) fails the sign condition")
        raise InadmissibleError(
            f"Winding pair ({n1}, {m1}) is inadmissible: (m1+n1)(m1-2n1) >= 0",
            {"n1": n1, "m1": m1},
        )
    return n1, m1


def validate_modulus(k: float) -> float:
    """Elliptic modulus for the charge-2 flow, strictly inside (0, 1)."""
    if not (math.isfinite(k) and 0.0 < k < 1.0):
        raise DomainError("Elliptic modulus k must lie in (0, 1)", {"k": k})
    return k


def validate_curve_parameter(b: float) -> float:
    if not math.isfinite(b):
        raise DomainError("Curve parameter b must be finite", {"b": b})
    return b


def validate_grid(nodes: int, margin: Optional[float], floor: float = 0.0) -> Tuple[int, Optional[float]]:
    """
    Validate the z-grid flags of the nahm command.

    Args:
        nodes: Number of grid nodes (at least 3)
        margin: Distance kept from z = ±1, in [floor, 1), or None for the default
        floor: Smallest margin the flow accepts

    Returns:
        (nodes, margin)
    """
    if nodes < 3:
        raise DomainError("Grid needs at least 3 nodes", {"nodes": nodes})
    if margin is not None and not (0.0 < margin < 1.0 and margin >= floor):
        raise DomainError("Grid margin must lie in [floor, 1)", {"margin": margin, "floor": floor})
    return nodes, margin


def validate_signs(eps: Optional[Sequence[int]], n: int) -> Optional[Tuple[int, ...]]:
    """Gauge signs ε₁..ε_{n−1}, each ±1."""
    if eps is None:
        return None
    eps = tuple(int(e) for e in eps)
    if len(eps) != n - 1 or any(e not in (-1, 1) for e in eps):
        raise DomainError(f"Expected {n - 1} signs, each +1 or -1", {"eps": list(eps)})
    return eps


def validate_suite(name: str, available: Sequence[str]) -> str:
    if name not in available:
        raise DomainError(f"Unknown identity suite: {name}", {"available": sorted(available)})
    return name


def validate_scan_bound(bound: int) -> int:
    if bound < 1:
        raise DomainError("Scan bound must be a positive integer", {"bound": bound})
    return bound
