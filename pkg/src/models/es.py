from dataclasses import dataclass
from math import gcd

import numpy as np

from src.exceptions import InadmissibleError


@dataclass(frozen=True)
class ESData:
    """Winding data (n, m) of the Ercolani–Sinha cycle and the solved curve parameters."""
    n1: int
    m1: int
    n: np.ndarray
    m: np.ndarray
    d: int
    t: float
    b: float
    alpha: float
    chi: float
    chi_cuberoot: float
    xi: float

    def __post_init__(self):
        if gcd(self.n1, self.m1) != 1 or (self.m1 + self.n1) * (self.m1 - 2 * self.n1) >= 0:
            raise InadmissibleError(
                "Winding pair is not admissible",
                {"n1": self.n1, "m1": self.m1},
            )
        if self.d != 2 * (self.n1 + self.m1) * (self.m1 - 2 * self.n1):
            raise InadmissibleError("Hopf number inconsistent with (n1, m1)", {"d": self.d})

    @property
    def ratio(self) -> float:
        """(2n1 − m1)/(m1 + n1), the target of the t equation."""
        return (2 * self.n1 - self.m1) / (self.m1 + self.n1)

    @property
    def cycle(self) -> np.ndarray:
        """ES cycle (n, m) as an 8-vector of integer coordinates."""
        return np.concatenate([self.n, self.m]).astype(np.int64)

    def winding_vector(self, tau_b: np.ndarray) -> np.ndarray:
        """U = ½(m + τ_b n) in normalized coordinates."""
        return 0.5 * (self.m + tau_b @ self.n)
