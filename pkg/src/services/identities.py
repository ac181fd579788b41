"""
Named identity suites behind the ``verify`` command.

Each suite returns ``{check_name: residual}``; a suite passes when every
residual is below its tolerance (SUITE_TOLERANCES).
"""
import math
from typing import Callable, Dict, Optional

import numpy as np

from src.exceptions import DomainError
from src.models.theta import PeriodMatrixTau, SymplecticTransform, ThetaCharacteristic
from src.models.tolerance import ToleranceConfig
from src.services import riemann_theta
from src.services.es_solver import ramanujan_t, signature3_ratio, solve_signature3, solve_t
from src.services.scalar_special import gamma, hyp2f1, hyp2f1_real, principal_cuberoot
from src.services.trigonal_curve import (
    cover_invariants,
    equianharmonic_residuals,
    legendre_hypergeometric_residual,
    legendre_j,
    periods_symmetric,
    ramanujan_moduli,
    structure_residuals,
)
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
LEGENDRE_SAMPLES = (0.0, 1.0, 5.0 * SQRT2, 10.0)
TABLE_PAIRS = ((1, 1), (2, 1), (1, 0), (4, -1), (5, -2))
PFAFF_SAMPLES = (-4.5, -3.0, -1.5, -0.5, 0.3, 0.6, 0.85)
TETRAHEDRAL_T = 0.5 - 5.0 * SQRT3 / 18.0

SUITE_TOLERANCES = {
    "ramanujan": 1e-10,
    "goursat": 1e-10,
    "legendre": 1e-9,
    "covers": 1e-8,
    "igusa": 1e-9,
}


def _rel(a: complex, b: complex) -> float:
    return float(abs(a - b) / max(1.0, abs(b)))


def _set_residual(pair, targets) -> float:
    """Pairing-independent distance between two unordered pairs of numbers."""
    (a, b), (c, d) = pair, targets
    return min(_rel(a, c) + _rel(b, d), _rel(a, d) + _rel(b, c))


def ramanujan_suite(cfg: Optional[ToleranceConfig] = None) -> Dict[str, float]:
    """Signature-3 cubic transformation, tabulated t values and the degree-2 modular relation."""
    cfg = cfg or ToleranceConfig()
    out = {}
    for p in np.round(np.arange(0.1, 1.0, 0.1), 1):
        lhs = (1 + p + p * p) * hyp2f1_real(0.5, 0.5, 1, p ** 3 * (2 + p) / (1 + 2 * p), cfg)
        arg = 27 * p * p * (1 + p) ** 2 / (4 * (1 + p + p * p) ** 3)
        rhs = math.sqrt(1 + 2 * p) * hyp2f1_real(1 / 3, 2 / 3, 1, arg, cfg)
        out[f"cubic_p{p}"] = _rel(lhs, rhs)
    for n1, m1 in TABLE_PAIRS:
        out[f"table_{n1}_{m1}"] = abs(solve_t(n1, m1, cfg) - ramanujan_t(n1, m1))
    for a in (0.2, 0.5, 0.7):
        beta, one_minus_beta = solve_signature3(0.5 * signature3_ratio(a, cfg), cfg)
        lhs = (a * beta) ** (1 / 3) + ((1 - a) * one_minus_beta) ** (1 / 3)
        out[f"degree2_{a}"] = abs(lhs - 1.0)
    return out


def goursat_suite(cfg: Optional[ToleranceConfig] = None) -> Dict[str, float]:
    """Quadratic and Pfaff transformations of ₂F₁ and the tetrahedral closed-form values."""
    cfg = cfg or ToleranceConfig()
    out = {}
    for b in (1.0, 5.0 * SQRT2, 10.0):
        root = math.sqrt(b * b + 4.0)
        lhs = hyp2f1(0.5, 1 / 3, 1, 4j / (2j - b), cfg)
        factor = principal_cuberoot(2 * (b - 2j) / (b + root))
        rhs = factor * hyp2f1(1 / 3, 1 / 3, 1, (b - root) / (b + root), cfg)
        out[f"quadratic_b{b:.6g}"] = _rel(lhs, rhs)
    for x in (0.05, 0.1, 0.2, 0.3, 0.4):
        lhs = hyp2f1_real(1 / 3, 2 / 3, 1, x, cfg)
        rhs = (1 - 2 * x) ** (-1 / 3) * hyp2f1_real(1 / 6, 2 / 3, 1, 4 * x * (x - 1) / (2 * x - 1) ** 2, cfg)
        out[f"sweep_x{x}"] = _rel(lhs, rhs)
    for x in PFAFF_SAMPLES:
        lhs = hyp2f1_real(1 / 3, 1 / 3, 1, x, cfg)
        rhs = (1 - x) ** (-1 / 3) * hyp2f1_real(1 / 3, 2 / 3, 1, x / (x - 1), cfg)
        out[f"pfaff_x{x:g}"] = _rel(lhs, rhs)
    gg = (gamma(1 / 6) * gamma(1 / 3)).real
    out["tetrahedral_value"] = _rel(
        hyp2f1_real(1 / 3, 2 / 3, 1, TETRAHEDRAL_T, cfg), 3 * gg / (8 * math.pi ** 1.5)
    )
    out["tetrahedral_goursat"] = _rel(
        hyp2f1_real(1 / 6, 2 / 3, 1, -2 / 25, cfg),
        5 ** (1 / 3) * 3 / 8 * gg / (SQRT3 * math.pi ** 1.5),
    )
    return out


def legendre_suite(cfg: Optional[ToleranceConfig] = None) -> Dict[str, float]:
    """y·Hx = −2π/√3 from the assembled periods and in hypergeometric form."""
    cfg = cfg or ToleranceConfig()
    out = {}
    for b in LEGENDRE_SAMPLES:
        out[f"periods_b{b:.6g}"] = structure_residuals(periods_symmetric(b, cfg))["legendre"]
        out[f"hypergeometric_b{b:.6g}"] = legendre_hypergeometric_residual(b, cfg)
    return out


def covers_suite(cfg: Optional[ToleranceConfig] = None) -> Dict[str, float]:
    """j± of the elliptic quotients, their Ramanujan parameterization and the g₂ = 0 reductions."""
    out = {}
    for b in (1.0, 5.0 * SQRT2, 10.0):
        inv = cover_invariants(b)
        moduli = (inv["k_plus_sq"], inv["k_minus_sq"])
        out[f"moduli_b{b:.6g}"] = _set_residual(ramanujan_moduli(inv["p"]), moduli)
        out[f"j_b{b:.6g}"] = _set_residual(
            (legendre_j(moduli[0]), legendre_j(moduli[1])), (inv["j_plus"], inv["j_minus"])
        )
        res = equianharmonic_residuals(b)
        out[f"equianharmonic_b{b:.6g}"] = max(res["E1"], res["E2"])
    return out


def _random_tau(rng: np.random.Generator, g: int) -> np.ndarray:
    X = rng.uniform(-0.5, 0.5, (g, g))
    M = rng.uniform(-0.4, 0.4, (g, g))
    Y = M @ M.T + (0.8 + 0.2 * g) * np.eye(g)
    return 0.5 * (X + X.T) + 1j * Y


def _random_symplectic(rng: np.random.Generator, g: int) -> SymplecticTransform:
    eye = np.eye(g, dtype=np.int64)
    zero = np.zeros((g, g), dtype=np.int64)
    S = rng.integers(-1, 2, (g, g))
    S = np.triu(S) + np.triu(S, 1).T
    A = eye + np.triu(rng.integers(-1, 2, (g, g)), 1)
    translate = np.block([[eye, S], [zero, eye]])
    # A⁻ᵀ of a unipotent integer matrix stays integral
    A_inv_t = np.rint(np.linalg.inv(A)).astype(np.int64).T
    change = np.block([[A, zero], [zero, A_inv_t]])
    flip = np.block([[zero, eye], [-eye, zero]])
    return SymplecticTransform.from_matrix(change @ flip @ translate)


def igusa_suite(
    cfg: Optional[ToleranceConfig] = None, instances: int = 100, seed: int = 20240611
) -> Dict[str, float]:
    """
    |θ[σ·char](z(Cτ+D)⁻¹; σ∘τ)| = |det(Cτ+D)|^{1/2} |e^{iπ z(Cτ+D)⁻¹Czᵀ}| |θ[char](z; τ)|

    over random (z, τ, char, σ) per genus 1..4; the largest relative gap per genus.
    """
    cfg = cfg or ToleranceConfig()
    rng = np.random.default_rng(seed)
    out = {}
    for g in range(1, 5):
        worst = 0.0
        for _ in range(instances):
            tau = _random_tau(rng, g)
            sigma = _random_symplectic(rng, g)
            char = ThetaCharacteristic.from_halves(rng.integers(0, 2, g), rng.integers(0, 2, g))
            z = rng.uniform(-0.5, 0.5, g) + 1j * rng.uniform(-0.3, 0.3, g)
            denom = sigma.C @ tau + sigma.D
            denom_inv = np.linalg.inv(denom)
            tau_new = (sigma.A @ tau + sigma.B) @ denom_inv
            tau_new = PeriodMatrixTau(0.5 * (tau_new + tau_new.T))
            new_char, _ = riemann_theta.modular_transform_char(char, sigma)
            z_new = z @ denom_inv
            lhs = abs(riemann_theta.theta(z_new, tau_new, new_char, cfg=cfg))
            rhs = (
                math.sqrt(abs(np.linalg.det(denom)))
                * abs(np.exp(1j * np.pi * z @ denom_inv @ sigma.C @ z))
                * abs(riemann_theta.theta(z, tau, char, cfg=cfg))
            )
            worst = max(worst, abs(lhs - rhs) / max(1.0, rhs))
        out[f"genus_{g}"] = worst
    return out


SUITES: Dict[str, Callable[..., Dict[str, float]]] = {
    "ramanujan": ramanujan_suite,
    "goursat": goursat_suite,
    "legendre": legendre_suite,
    "covers": covers_suite,
    "igusa": igusa_suite,
}


def run_suite(name: str, cfg: Optional[ToleranceConfig] = None) -> Dict[str, float]:
    """Run one named suite; DomainError for an unknown name."""
    if name not in SUITES:
        raise DomainError(f"Unknown identity suite: {name}", {"available": sorted(SUITES)})
    residuals = SUITES[name](cfg)
    logger.info(f"Suite {name}: worst residual {max(residuals.values()):.2e}")
    return residuals


def suite_passed(name: str, residuals: Dict[str, float]) -> bool:
    return all(r < SUITE_TOLERANCES[name] for r in residuals.values())
