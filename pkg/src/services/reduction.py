"""
Weierstrass–Poincaré reduction of τ_b along the Ercolani–Sinha cycle.

Cycles are integer 8-vectors (q, p) for γ = q·a + p·b, paired by
J = [[0, I], [−I, 0]]. The du₁-period of γ is ξ(c₁(γ) + ρ c₂(γ)) with

    c₁(γ) = p·Hm + q·(Hn − m),    c₂(γ) = p·n − q·m,

so the ES cycle S = (n, m) has (c₁, c₂) = (d, 0). A symplectic basis with
a″₁ = S and a″₂, a″₃, a″₄, b″₃, b″₄ in ker(c₁, c₂) puts τ′ = σ∘τ_b into the
form whose first row is ((c₁(b″₁) − ρ)/d, α/d, 0, 0).
"""
import math
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.exceptions import DegenerateError, FrameError, ReductionError
from src.models.curve import H, RHO
from src.models.es import ESData
from src.models.nahm import ReducedForm
from src.models.theta import PeriodMatrixTau, SymplecticTransform, ThetaCharacteristic, symplectic_form
from src.models.tolerance import ToleranceConfig
from src.services.riemann_theta import modular_transform_char
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

G = 4
_J = symplectic_form(G)

# Reducing transform for the tetrahedral pair (1, 1): rows b″₁..b″₄, a″₁..a″₄
TETRAHEDRAL_SIGMA = np.array([
    [1, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0],
    [0, 0, -1, 0, 0, 1, 0, 0],
    [2, 0, -1, 1, 0, 0, 0, -1],
    [1, 0, -1, 1, 1, -1, 0, -3],
    [5, -1, 0, 3, 0, -1, 1, -2],
    [-6, 0, 0, -3, 0, 0, -1, 2],
    [7, 0, 0, 3, 0, 0, 0, -2],
], dtype=np.int64)

TETRAHEDRAL_TAU_PRIME = np.array([
    [RHO / 4, 1 / 4, 0, 0],
    [1 / 4, 5 * RHO / 4, RHO, 0],
    [0, RHO, 2 * RHO, RHO],
    [0, 0, RHO, 2 / 7 + 6 * RHO / 7],
], dtype=complex)

TETRAHEDRAL_TAU = np.array([
    [-11 / 49 + 51 * RHO / 49, -2 / 49 - 13 * RHO / 49, 13 / 49 + 11 * RHO / 49, 1 / 7 - 4 * RHO / 7],
    [-2 / 49 - 13 * RHO / 49, 13 / 49 + 60 * RHO / 49, -11 / 49 + 2 * RHO / 49, 4 / 7 + 5 * RHO / 7],
    [13 / 49 + 11 * RHO / 49, -11 / 49 + 2 * RHO / 49, -2 / 49 + 36 * RHO / 49, -5 / 7 - RHO / 7],
    [1 / 7 - 4 * RHO / 7, 4 / 7 + 5 * RHO / 7, -5 / 7 - RHO / 7, 1 + RHO],
], dtype=complex)


# ---------------------------------------------------------------------------
# Exact integer helpers
# ---------------------------------------------------------------------------

def _pair(x: Sequence[int], y: Sequence[int]) -> int:
    """J(x, y) = q·p′ − p·q′."""
    return sum(int(x[i]) * int(y[G + i]) - int(x[G + i]) * int(y[i]) for i in range(G))


def _ext_gcd(a: int, b: int) -> Tuple[int, int, int]:
    if b == 0:
        return (abs(a), 1 if a >= 0 else -1, 0)
    g, s, t = _ext_gcd(b, a % b)
    return g, t, s - (a // b) * t


def bezout_vector(w: Sequence[int]) -> Tuple[int, List[int]]:
    """(g, x) with x·w = g = gcd(w); a unit entry of w is used directly when present."""
    w = [int(v) for v in w]
    for i, v in enumerate(w):
        if abs(v) == 1:
            x = [0] * len(w)
            x[i] = v
            return 1, x
    g, coeffs = 0, [0] * len(w)
    for i, v in enumerate(w):
        if v == 0:
            continue
        if g == 0:
            g, coeffs[i] = abs(v), (1 if v > 0 else -1)
            continue
        g_new, s, t = _ext_gcd(g, v)
        coeffs = [s * c for c in coeffs]
        coeffs[i] = t
        g = g_new
    return g, coeffs


def _content(v: Sequence[int]) -> int:
    g = 0
    for x in v:
        g = math.gcd(g, int(x))
    return g


def _solve_pairing(f: Sequence[int]) -> List[int]:
    """Integer x with J(x, f) = 1 for primitive f."""
    # J(x, f) = x·w with w = (p_f, −q_f)
    w = [int(f[G + i]) for i in range(G)] + [-int(f[i]) for i in range(G)]
    g, x = bezout_vector(w)
    if g != 1:
        raise ReductionError("Cycle is not primitive", {"cycle": [int(v) for v in f], "content": g})
    return x


def _project(x: Sequence[int], pairs: Sequence[Tuple[List[int], List[int]]]) -> List[int]:
    """Symplectic projection onto the complement of the hyperbolic pairs (e, f), J(e, f) = 1."""
    x = [int(v) for v in x]
    for e, f in pairs:
        jf, je = _pair(x, f), _pair(x, e)
        x = [xi - jf * ei + je * fi for xi, ei, fi in zip(x, e, f)]
    return x


# a-type search order: p coordinates before q coordinates
_SEARCH_ORDER = list(range(G, 2 * G)) + list(range(G))


def _first_primitive(pairs) -> List[int]:
    for idx in _SEARCH_ORDER:
        unit = [0] * (2 * G)
        unit[idx] = 1
        v = _project(unit, pairs)
        c = _content(v)
        if c:
            return [x // c for x in v]
    raise ReductionError("Symplectic complement is empty")


# ---------------------------------------------------------------------------
# Lattice map and frame
# ---------------------------------------------------------------------------

def c1_functional(n: np.ndarray, m: np.ndarray) -> List[int]:
    """Coefficient vector γ of c₁(x) = x·γ, γ = (Hn − m, Hm)."""
    h = (1, 1, 1, -1)
    return [h[i] * int(n[i]) - int(m[i]) for i in range(G)] + [h[i] * int(m[i]) for i in range(G)]


def escond_lattice_map(es: ESData) -> np.ndarray:
    """
    8×2 integer matrix M with x·M = (c₁(x), c₂(x)).

    The columns are γ and SJ; MᵀJM = d·[[0, 1], [−1, 0]].
    """
    gamma = c1_functional(es.n, es.m)
    sj = [-int(v) for v in es.m] + [int(v) for v in es.n]
    return np.array([gamma, sj], dtype=np.int64).T


def adapted_symplectic_basis(
    cycle: Sequence[int], gamma: Sequence[int]
) -> Tuple[SymplecticTransform, int, int, int]:
    """
    Symplectic σ with a″₁ = cycle and the c₁-kernel conditions above.

    Args:
        cycle: Primitive integer 8-vector S
        gamma: Coefficients of the functional c₁, with c₁(S) = d ≠ 0

    Returns:
        (σ, d, c₁(b″₁), c₁(b″₂)) with c₁(b″₁)/d ∈ [0, 1) and c₁(b″₂)/d ∈ [0, ½]
    """
    S = [int(v) for v in cycle]
    gamma = [int(v) for v in gamma]
    c1 = lambda x: sum(a * b for a, b in zip(x, gamma))
    d = c1(S)
    if d == 0:
        raise DegenerateError("Hopf number vanishes", {"cycle": S})

    b1 = _solve_pairing(S)
    shift = math.floor(Fraction(c1(b1), d))
    b1 = [x - shift * s for x, s in zip(b1, S)]
    pairs = [(b1, S)]

    # c₁ on {b″₁, S}^⊥ is α·J(·, r) with r primitive
    gamma_j = [-gamma[G + i] for i in range(G)] + [gamma[i] for i in range(G)]
    r_full = _project(gamma_j, pairs)
    alpha = _content(r_full)
    r = [x // alpha for x in r_full] if alpha else _first_primitive(pairs)
    b2 = _project(_solve_pairing(r), pairs)
    alpha_entry = c1(b2)
    # (b″₂, a″₂) → −(b″₂, a″₂) and b″₂ → b″₂ + kS move α/d into [0, ½]
    frac = Fraction(alpha_entry, d) % 1
    if frac > Fraction(1, 2):
        b2, r = [-x for x in b2], [-x for x in r]
        frac = 1 - frac
    k = int(frac - Fraction(c1(b2), d))
    b2 = [x + k * s for x, s in zip(b2, S)]
    # keeps J(b″₁, b″₂) = 0; c₁(a″₂) = 0 leaves c₁(b″₁) unchanged
    b1 = [x + k * y for x, y in zip(b1, r)]
    pairs[0] = (b1, S)
    alpha_entry = c1(b2)
    pairs.append((b2, r))

    rows_b, rows_a = [b1, b2], [S, list(r)]
    for _ in range(G - 2):
        f = _first_primitive(pairs)
        e = _project(_solve_pairing(f), pairs)
        pairs.append((e, f))
        rows_b.append(e)
        rows_a.append(f)

    sigma = SymplecticTransform.from_matrix(np.array(rows_b + rows_a, dtype=np.int64))
    return sigma, d, c1(b1), alpha_entry


def act_on_tau(sigma: SymplecticTransform, tau) -> PeriodMatrixTau:
    """(Aτ + B)(Cτ + D)⁻¹, symmetrized."""
    tau = tau.entries if isinstance(tau, PeriodMatrixTau) else np.asarray(tau, dtype=complex)
    denom = sigma.C @ tau + sigma.D
    if np.linalg.cond(denom) > 1e12:
        raise FrameError("Cτ + D is singular", {"cond": float(np.linalg.cond(denom))})
    result = (sigma.A @ tau + sigma.B) @ np.linalg.inv(denom)
    return PeriodMatrixTau(0.5 * (result + result.T))


def act_on_char(sigma: SymplecticTransform, char: ThetaCharacteristic) -> ThetaCharacteristic:
    """Characteristic carried along with τ under σ."""
    new_char, _ = modular_transform_char(char, sigma)
    return new_char


def cycle_in_frame(sigma: SymplecticTransform, cycle: Sequence[int]) -> np.ndarray:
    """Coordinates (q″, p″) of a cycle in the basis given by the rows of σ."""
    # rows of σ are the new basis: cycle = (q″, p″)·σ, σ⁻¹ = −JσᵀJ
    inverse = -_J @ sigma.matrix.T @ _J
    return np.asarray(cycle, dtype=np.int64) @ inverse


def transformed_winding(sigma: SymplecticTransform, es: ESData) -> Tuple[Fraction, ...]:
    """
    U″ = ½(p″ + τ″q″) in exact rationals.

    Requires q″ = 0, so U″ is τ″-independent; raises ReductionError otherwise.
    """
    coords = cycle_in_frame(sigma, es.cycle)
    q, p = coords[:G], coords[G:]
    if np.any(q != 0):
        raise ReductionError("ES cycle has a b″-component in the reduced frame", {"q": q.tolist()})
    return tuple(Fraction(int(v), 2) for v in p)


def alpha_gcd(n1: int, m1: int) -> int:
    """
    gcd(m1 + 4n1 − q(m1 − 2n1), n1 − 2m1 − p(m1 − 2n1)) for a Bézout pair p m1 + q n1 = 1.
    """
    g, p, q = _ext_gcd(m1, n1)
    if g != 1:
        raise DegenerateError("Winding pair is not coprime", {"n1": n1, "m1": m1})
    return math.gcd(m1 + 4 * n1 - q * (m1 - 2 * n1), n1 - 2 * m1 - p * (m1 - 2 * n1))


def reduce(tau_b, es: ESData, cfg: Optional[ToleranceConfig] = None) -> ReducedForm:
    """
    Integer symplectic σ with σ∘U = (½, 0, 0, 0) and τ′ = σ∘τ_b in reduced form.

    Args:
        tau_b: Period matrix (normalized on the b-cycles)
        es: Solved winding data
        cfg: Tolerances

    Returns:
        ReducedForm with σ, τ′, d and the integer α of τ′₁₂ = α/d
    """
    cfg = cfg or ToleranceConfig()
    if es.d == 0:
        raise DegenerateError("Hopf number vanishes", {"n1": es.n1, "m1": es.m1})
    gamma = c1_functional(es.n, es.m)
    sigma, d, c1_b1, alpha_entry = adapted_symplectic_basis(es.cycle, gamma)
    if d != es.d:
        raise ReductionError("c₁(S) differs from the Hopf number", {"c1": d, "d": es.d})

    tau_prime = act_on_tau(sigma, tau_b)
    expected = np.array([(c1_b1 - RHO) / d, alpha_entry / d, 0, 0])
    residual = float(np.max(np.abs(tau_prime.entries[0] - expected)))
    if residual > 1e-7:
        raise ReductionError(
            "Reduced period matrix lacks the expected first row",
            {"residual": residual, "first_row": [str(x) for x in tau_prime.entries[0]]},
        )
    logger.info(f"Reduced ES pair ({es.n1}, {es.m1}): d={d} alpha={alpha_entry} residual={residual:.2e}")
    return ReducedForm(
        sigma=sigma,
        tau_prime=tau_prime,
        d=d,
        alpha_entry=alpha_entry,
        first_row_residual=residual,
    )
