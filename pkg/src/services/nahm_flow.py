"""
Nahm data from spectral curves.

Q₀(z) is assembled from theta quotients, the prime form at the points over
ζ = ∞ and the constants νᵢ − νⱼ; the gauge flow C′ = ½CQ₀, C(0) = 1, then
gives A₁ = C diag(ρ) C⁻¹, A₀ = CQ₀C⁻¹, A₋₁ = −A₁† and

    T₁ = ½(A₁ + A₋₁),   T₂ = (A₋₁ − A₁)/(2i),   T₃ = (i/2)A₀.

Charge 2 is closed form (Jacobi elliptic functions) and doubles as an oracle
for the genus-independent assembly; charge 3 covers the symmetric family
w³ = z⁶ + b z³ − 1 with η = −χ^{1/3} w.
"""
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from src.config import settings
from src.exceptions import (
    DomainError,
    FrameError,
    InconsistencyError,
    PoleError,
    SingularConfigurationError,
    StiffnessError,
)
from src.models.curve import H, RHO, PeriodData
from src.models.es import ESData
from src.models.nahm import NahmSample, PrimeFormFrame, Q0Grid, SpectralData
from src.models.theta import PeriodMatrixTau, ThetaCharacteristic
from src.models.tolerance import ToleranceConfig
from src.services import riemann_theta
from src.services.riemann_theta import Parity
from src.services.scalar_special import complementary_modulus, elliptic_K, jacobi_sn_cn_dn
from src.services.trigonal_curve import (
    infinity_abel_images,
    normalize,
    riemann_constant_characteristic,
    zero_abel_images,
)
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

SIGMA_1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_3 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA_1, SIGMA_2, SIGMA_3)

# Rotates the charge-2 flow frame onto Tⱼ = σⱼfⱼ/(2i)
ROTATION_W = (np.eye(2) - 1j * SIGMA_2) / math.sqrt(2.0)

# ρ-ordering c = ρ^{s} over the sheets of ∞₁, ∞₂, ∞₃
SHEET_PHASES = np.array([1.0, RHO ** 2, RHO], dtype=complex)

GRADIENT_FLOOR = 1e-6
STENCIL_STEP = 1e-3
SPECTRAL_SAMPLES = 16
# |z| range on which the charge-2 flow is compared with the closed form
CLOSED_FORM_WINDOW = 0.9


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------

def default_grid(nodes: int = 181, margin: Optional[float] = None) -> np.ndarray:
    """Uniform nodes on [−1 + margin, 1 − margin]."""
    margin = settings.GRID_MARGIN if margin is None else margin
    return np.linspace(-1.0 + margin, 1.0 - margin, nodes)


def _check_grid(grid, margin: Optional[float] = None) -> np.ndarray:
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    margin = settings.GRID_MARGIN if margin is None else margin
    if grid.size == 0:
        raise DomainError("Grid is empty")
    if np.any(np.abs(grid) >= 1.0):
        raise PoleError("Grid touches the poles at z = ±1", {"max_abs_z": float(np.max(np.abs(grid)))})
    if np.any(np.abs(grid) > 1.0 - margin + 1e-12):
        raise DomainError(
            "Grid is closer to z = ±1 than the margin allows",
            {"margin": margin, "max_abs_z": float(np.max(np.abs(grid)))},
        )
    return grid


def epsilon_matrix(eps: Sequence[int], n: int) -> np.ndarray:
    """εⱼₗ = εⱼⱼ₊₁ ⋯ εₗ₋₁ₗ for j < l, symmetric, unit diagonal."""
    eps = list(eps) if eps is not None else [1] * (n - 1)
    if len(eps) != n - 1 or any(e not in (1, -1) for e in eps):
        raise DomainError("Need n − 1 signs ±1", {"n": n, "eps": list(eps)})
    # εⱼ = ε₁₂ ⋯ εⱼ₋₁ⱼ with ε₁ = 1
    partial = np.cumprod([1] + eps)
    return np.outer(partial, partial).astype(float)


# ---------------------------------------------------------------------------
# Charge 2
# ---------------------------------------------------------------------------

def charge2_constants(k: float) -> Dict[str, complex]:
    """K, K′, k′ and τ = iK′/K for the charge-2 curve."""
    if not 0.0 < k < 1.0:
        raise DomainError("Charge-2 modulus must satisfy 0 < k < 1", {"k": k})
    kp = complementary_modulus(k)
    K = elliptic_K(k)
    Kp = elliptic_K(kp)
    return {"K": K, "Kp": Kp, "kp": kp, "tau": 1j * Kp / K}


def charge2_q0(k: float, z):
    """Q₀(z)₁₂ = K k′ / cn(Kz); scalar or array z in (−1, 1)."""
    c = charge2_constants(k)
    zs = np.asarray(z, dtype=float)
    if np.any(np.abs(zs) >= 1.0):
        raise PoleError("cn(Kz) vanishes at z = ±1", {"z": zs.tolist()})
    _, cn, _ = jacobi_sn_cn_dn(c["K"] * zs, k)
    return c["K"] * c["kp"] / cn


def charge2_q0_derivative(k: float, z):
    """d/dz of K k′/cn(Kz), i.e. K² k′ sn dn / cn²."""
    c = charge2_constants(k)
    zs = np.asarray(z, dtype=float)
    if np.any(np.abs(zs) >= 1.0):
        raise PoleError("cn(Kz) vanishes at z = ±1", {"z": zs.tolist()})
    sn, cn, dn = jacobi_sn_cn_dn(c["K"] * zs, k)
    return c["K"] ** 2 * c["kp"] * sn * dn / cn ** 2


def charge2_q0_theta(k: float, z, cfg: Optional[ToleranceConfig] = None):
    """Theta form (π θ₂θ₄/2)·θ₄(z/2)/θ₂(z/2) of the charge-2 Q₀₁₂."""
    cfg = cfg or ToleranceConfig()
    tau = charge2_constants(k)["tau"]
    th2 = riemann_theta.jacobi_theta(2, 0.0, tau, cfg)
    th4 = riemann_theta.jacobi_theta(4, 0.0, tau, cfg)
    half = 0.5 * np.asarray(z, dtype=float)
    ratio = riemann_theta.jacobi_theta(4, half, tau, cfg) / riemann_theta.jacobi_theta(2, half, tau, cfg)
    values = 0.5 * np.pi * th2 * th4 * ratio
    return values.real if np.ndim(values) else complex(values).real


def charge2_closed_form(k: float, grid) -> NahmSample:
    """Tⱼ(z) = σⱼfⱼ/(2i) with f₁ = K dn/cn, f₂ = K k′ sn/cn, f₃ = K k′/cn at Kz."""
    grid = _check_grid(grid, margin=0.0)
    c = charge2_constants(k)
    K, kp = c["K"], c["kp"]
    sn, cn, dn = jacobi_sn_cn_dn(K * grid, k)
    f = (K * dn / cn, K * kp * sn / cn, K * kp / cn)
    T1, T2, T3 = (np.einsum("n,ij->nij", fj, s) / 2j for fj, s in zip(f, PAULI))
    A_minus, A_zero, A_plus = _lax_matrices(T1, T2, T3)
    return NahmSample(
        z_nodes=grid, T1=T1, T2=T2, T3=T3, residual=np.zeros(len(grid)),
        A_minus=A_minus, A_zero=A_zero, A_plus=A_plus,
    )


def charge2_spectral_data(k: float, cfg: Optional[ToleranceConfig] = None) -> SpectralData:
    """
    Genus-1 spectral data of η² + (K²/4)(ζ⁴ + 2(k² − k′²)ζ² + 1) = 0.

    ∫_{∞₁}^{∞₂} v = −(1 + τ)/2, v′ = −1/(4ρᵢ) at ∞ᵢ, the points over ζ = 0 at
    ∓τ/2 with η dv/dζ = ¼, U = −½ and K̃ = ½ + τ/2.
    """
    c = charge2_constants(k)
    K, tau = c["K"], c["tau"]
    rho = np.array([-0.5j * K, 0.5j * K])
    half_period = 0.5 + 0.5 * tau
    return SpectralData(
        tau=PeriodMatrixTau(np.array([[tau]])),
        phi_inf=np.array([[0.0], [-half_period]], dtype=complex),
        phi_zero=np.array([[-0.5 * tau], [0.5 * tau]], dtype=complex),
        inf_expansion=(-1.0 / (4.0 * rho)).reshape(2, 1),
        zero_weights=np.full((2, 1), 0.25, dtype=complex),
        rho=rho,
        U=np.array([-0.5], dtype=complex),
        K_tilde=np.array([half_period]),
        p_tilde=np.array([-2]),
        q_tilde=np.array([-1]),
    )


def charge2_q0_grid(k: float, grid) -> Q0Grid:
    """Q₀ = q(z)σ₁ with q = K k′/cn(Kz) and ρ = ∓iK/2."""
    grid = _check_grid(grid)
    c = charge2_constants(k)

    def evaluate(zs):
        q = np.atleast_1d(charge2_q0(k, np.atleast_1d(zs)))
        return np.einsum("n,ij->nij", q.astype(complex), SIGMA_1)

    def derivative(zs):
        dq = np.atleast_1d(charge2_q0_derivative(k, np.atleast_1d(zs)))
        return np.einsum("n,ij->nij", dq.astype(complex), SIGMA_1)

    rho = np.array([-0.5j * c["K"], 0.5j * c["K"]])
    return Q0Grid(
        z_nodes=grid,
        values=evaluate(grid),
        rho=rho,
        nu_diff=np.array([[0, -0.5j * np.pi], [0.5j * np.pi, 0]]),
        eps=np.ones((2, 2)),
        evaluate=evaluate,
        derivative=derivative,
    )


def charge2_nahm(k: float, grid, cfg: Optional[ToleranceConfig] = None, step: Optional[float] = None) -> NahmSample:
    """
    Charge-2 Nahm triple by the gauge flow, rotated onto the closed-form frame.

    The deviation from charge2_closed_form and the Nahm residual on
    |z| <= CLOSED_FORM_WINDOW are recorded in metadata.
    """
    cfg = cfg or ToleranceConfig()
    q0 = charge2_q0_grid(k, grid)
    sample = solve_gauge_flow(q0, cfg, step=step)
    W, W_inv = ROTATION_W, ROTATION_W.conj().T
    rotate = lambda T: np.einsum("ij,njk,kl->nil", W, T, W_inv)
    sample.T1, sample.T2, sample.T3 = rotate(sample.T1), rotate(sample.T2), rotate(sample.T3)
    closed = charge2_closed_form(k, sample.z_nodes)
    inside = np.abs(sample.z_nodes) <= CLOSED_FORM_WINDOW
    if not inside.any():
        inside[:] = True
    deviation = max(
        float(np.max(np.abs(a[inside] - b[inside])))
        for a, b in ((sample.T1, closed.T1), (sample.T2, closed.T2), (sample.T3, closed.T3))
    )
    sample.metadata["closed_form_deviation"] = deviation
    sample.metadata["window_residual"] = float(np.max(sample.residual[inside]))
    logger.info(f"Charge-2 flow k={k}: closed-form deviation {deviation:.2e}, Nahm residual {sample.max_residual:.2e}")
    return sample


# ---------------------------------------------------------------------------
# Prime form and ν
# ---------------------------------------------------------------------------

def _half_differentials(grad: np.ndarray, V: np.ndarray) -> np.ndarray:
    return np.sqrt((V @ grad).astype(complex))


def _prime_form(phi: np.ndarray, tau, frame: PrimeFormFrame, cfg: ToleranceConfig) -> np.ndarray:
    n = len(phi)
    h = frame.half_diff_values
    E = np.zeros((n, n), dtype=complex)
    for j in range(n):
        for l in range(n):
            if j != l:
                E[j, l] = riemann_theta.theta(phi[j] - phi[l], tau, frame.odd_char, cfg=cfg) / (h[j] * h[l])
    asym = float(np.max(np.abs(E + E.T)))
    if asym > 1e-7 * max(1.0, float(np.max(np.abs(E)))):
        raise InconsistencyError("Prime form is not antisymmetric", {"asymmetry": asym})
    return E


def select_odd_characteristic(
    tau,
    phi_inf: np.ndarray,
    inf_expansion: np.ndarray,
    cfg: Optional[ToleranceConfig] = None,
    phi_zero: Optional[np.ndarray] = None,
) -> PrimeFormFrame:
    """
    First odd half-characteristic (lexicographic) usable for the prime form.

    Requires a gradient at 0 of norm > 1e-6, nonzero half-differentials at the
    infinities and nonzero θ[δ] at every difference the assembly evaluates.
    """
    cfg = cfg or ToleranceConfig()
    tau = tau if isinstance(tau, PeriodMatrixTau) else PeriodMatrixTau(np.asarray(tau))
    g = tau.g
    n = len(phi_inf)
    args = [phi_inf[j] - phi_inf[l] for j in range(n) for l in range(n) if j != l]
    if phi_zero is not None:
        args += [pz - pi for pz in phi_zero for pi in phi_inf]
    args = np.array(args)
    for char in riemann_theta.half_characteristics(g, Parity.ODD):
        grad = riemann_theta.theta_gradient(np.zeros(g), tau, char, cfg)[0]
        norm = float(np.linalg.norm(grad))
        if norm <= GRADIENT_FLOOR:
            continue
        h_sq = inf_expansion @ grad
        if np.min(np.abs(h_sq)) <= GRADIENT_FLOOR * norm:
            continue
        values = riemann_theta.theta_batch(args, tau, char, cfg=cfg)
        if np.min(np.abs(values)) <= GRADIENT_FLOOR:
            continue
        logger.debug(f"Odd characteristic {char} selected, gradient norm {norm:.3e}")
        return PrimeFormFrame(odd_char=char, half_diff_values=np.sqrt(h_sq.astype(complex)), gradient_norm=norm)
    raise FrameError("Every odd characteristic is singular at the required points", {"g": g})


def prime_form_matrix(spectral: SpectralData, frame: PrimeFormFrame, cfg: Optional[ToleranceConfig] = None) -> np.ndarray:
    """ℰ(∞ⱼ, ∞ₗ) = θ[δ](φ(∞ⱼ) − φ(∞ₗ)) / (h(∞ⱼ)h(∞ₗ)) in the local parameter t = 1/ζ."""
    return _prime_form(spectral.phi_inf, spectral.tau, frame, cfg or ToleranceConfig())


def nu_differences_theta(
    spectral: SpectralData, frame: PrimeFormFrame, cfg: Optional[ToleranceConfig] = None
) -> np.ndarray:
    """
    νᵢ − νⱼ = −Σₖ η(0ₖ) ∂_ζ ln[θ[δ](φ(0ₖ) − φ(∞ᵢ)) / θ[δ](φ(0ₖ) − φ(∞ⱼ))].

    ``spectral.zero_weights[k]`` carries η(0ₖ) dv/dζ(0ₖ).
    """
    cfg = cfg or ToleranceConfig()
    n = spectral.n
    log_grad = np.zeros((len(spectral.phi_zero), n), dtype=complex)
    for k, (pz, w) in enumerate(zip(spectral.phi_zero, spectral.zero_weights)):
        args = pz[None, :] - spectral.phi_inf
        values = riemann_theta.theta_batch(args, spectral.tau, frame.odd_char, cfg=cfg)
        grads = riemann_theta.theta_gradient(args, spectral.tau, frame.odd_char, cfg)
        log_grad[k] = (grads @ w) / values
    per_point = log_grad.sum(axis=0)
    return -(per_point[:, None] - per_point[None, :])


def _symmetric_abel_data(periods: PeriodData, chi_cuberoot: float) -> Dict[str, np.ndarray]:
    binv = periods.normalized_basis
    phi_inf = normalize(infinity_abel_images(periods), periods)
    phi_zero = normalize(zero_abel_images(periods), periods)
    c = SHEET_PHASES
    V = np.array([[-(ci ** 2), 0, 0, -ci] for ci in c], dtype=complex) @ binv
    weights = np.array(
        [[-1.0, RHO ** (-k), 0, 0] for k in range(3)], dtype=complex
    ) @ binv * chi_cuberoot
    rho = -chi_cuberoot * c
    return {"phi_inf": phi_inf, "phi_zero": phi_zero, "V": V, "weights": weights, "rho": rho}


def prime_form_infinities(
    periods: PeriodData, frame: PrimeFormFrame, cfg: Optional[ToleranceConfig] = None
) -> np.ndarray:
    """ℰ(∞ⱼ, ∞ₗ) for the symmetric curve, from the closed-form Abel images."""
    data = _symmetric_abel_data(periods, 1.0)
    return _prime_form(data["phi_inf"], periods.tau_b, frame, cfg or ToleranceConfig())


def _nu_primary(periods: PeriodData, phi_inf: np.ndarray, chi_cuberoot: float) -> np.ndarray:
    # 3y·∫_{∞ⱼ}^{∞ᵢ} v plus the dr₁ term ∫_α^{∞₁} dz/(z²w²) = L₁ on each sheet
    hy = H @ periods.y
    c = SHEET_PHASES
    n = len(c)
    nu = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            nu[i, j] = chi_cuberoot * (
                3.0 * RHO ** 2 * hy @ (phi_inf[i] - phi_inf[j]) - periods.L1 * (c[i] - c[j])
            )
    return nu


def nu_differences(
    periods: PeriodData,
    chi_cuberoot: float = 1.0,
    cfg: Optional[ToleranceConfig] = None,
    frame: Optional[PrimeFormFrame] = None,
    cross_check: bool = True,
) -> np.ndarray:
    """
    νᵢ − νⱼ for the symmetric curve from y, K₁, L₁ and the Abel images of ∞ᵢ.

    With cross_check the theta-logarithmic-derivative formula is evaluated
    too; a disagreement above NU_CROSS_CHECK_TOL raises InconsistencyError.
    """
    cfg = cfg or ToleranceConfig()
    data = _symmetric_abel_data(periods, chi_cuberoot)
    nu = _nu_primary(periods, data["phi_inf"], chi_cuberoot)
    if not cross_check:
        return nu
    if frame is None:
        frame = select_odd_characteristic(
            periods.tau_b, data["phi_inf"], data["V"], cfg, phi_zero=data["phi_zero"]
        )
    spectral = SpectralData(
        tau=periods.tau_b,
        phi_inf=data["phi_inf"],
        phi_zero=data["phi_zero"],
        inf_expansion=data["V"],
        zero_weights=data["weights"],
        rho=data["rho"],
        U=np.zeros(4, dtype=complex),
        K_tilde=np.zeros(4, dtype=complex),
        p_tilde=np.zeros(4, dtype=int),
        q_tilde=np.zeros(4, dtype=int),
    )
    nu_theta = nu_differences_theta(spectral, frame, cfg)
    gap = float(np.max(np.abs(nu - nu_theta)))
    tol = settings.NU_CROSS_CHECK_TOL * max(1.0, float(np.max(np.abs(nu))))
    if gap > tol:
        raise InconsistencyError(
            "ν differences disagree between the closed-form and theta formulas",
            {"gap": gap, "tolerance": tol, "odd_char": str(frame.odd_char)},
        )
    logger.debug(f"ν cross-check gap {gap:.2e}")
    return nu


# ---------------------------------------------------------------------------
# Q₀ assembly
# ---------------------------------------------------------------------------

def symmetric_spectral_data(es: ESData, periods: PeriodData, cfg: Optional[ToleranceConfig] = None) -> SpectralData:
    """Spectral data of η³ + χ(ζ⁶ + bζ³ − 1) = 0 for a solved ES pair."""
    cfg = cfg or ToleranceConfig()
    data = _symmetric_abel_data(periods, es.chi_cuberoot)
    tau = periods.tau_b
    char = riemann_constant_characteristic(periods, cfg)
    a_K, b_K = char.a_array(), char.b_array()
    K_tilde = tau.entries @ a_K + b_K
    p_tilde = np.rint(es.m - 2 * b_K).astype(int)
    q_tilde = np.rint(es.n - 2 * a_K).astype(int)
    return SpectralData(
        tau=tau,
        phi_inf=data["phi_inf"],
        phi_zero=data["phi_zero"],
        inf_expansion=data["V"],
        zero_weights=data["weights"],
        rho=data["rho"],
        U=es.winding_vector(tau.entries),
        K_tilde=K_tilde,
        p_tilde=p_tilde,
        q_tilde=q_tilde,
    )


def assemble_q0(
    spectral: SpectralData,
    nu_diff: np.ndarray,
    frame: PrimeFormFrame,
    eps: Optional[Sequence[int]],
    grid,
    cfg: Optional[ToleranceConfig] = None,
) -> Q0Grid:
    """
    (Q₀)ⱼₗ = εⱼₗ (ρⱼ − ρₗ)/ℰ(∞ⱼ,∞ₗ) · e^{iπq̃·(φₗ − φⱼ)} · θ(φₗ − φⱼ + zU + s)/θ(zU + s) · e^{z(νₗ − νⱼ)}

    with s = U − K̃ = ½p̃ + ½τq̃. Denominator zeros at grid nodes are flagged.
    """
    cfg = cfg or ToleranceConfig()
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    n, tau = spectral.n, spectral.tau
    eps_m = epsilon_matrix(eps, n)
    E = prime_form_matrix(spectral, frame, cfg)
    shift = spectral.shift
    U = spectral.U
    phi = spectral.phi_inf

    at_zero = abs(riemann_theta.theta(shift, tau, cfg=cfg))
    ref = 1.0 + abs(riemann_theta.theta(np.zeros(spectral.g), tau, cfg=cfg))
    if at_zero < 1e-8 * ref:
        raise SingularConfigurationError(
            "θ(U − K̃) vanishes: U − K̃ is a singular characteristic", {"theta": at_zero}
        )

    const = np.zeros((n, n), dtype=complex)
    for j in range(n):
        for l in range(n):
            if j != l:
                const[j, l] = (
                    eps_m[j, l]
                    * (spectral.rho[j] - spectral.rho[l])
                    / E[j, l]
                    * np.exp(1j * np.pi * spectral.q_tilde @ (phi[l] - phi[j]))
                )

    def _parts(zs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        args = zs[:, None] * U[None, :] + shift[None, :]
        den = riemann_theta.theta_batch(args, tau, cfg=cfg)
        out = np.zeros((len(zs), n, n), dtype=complex)
        for j in range(n):
            for l in range(n):
                if j == l:
                    continue
                num = riemann_theta.theta_batch(args + (phi[l] - phi[j])[None, :], tau, cfg=cfg)
                out[:, j, l] = const[j, l] * num * np.exp(zs * nu_diff[l, j])
        return out, den

    def evaluate(zs):
        zs = np.atleast_1d(np.asarray(zs, dtype=float))
        out, den = _parts(zs)
        return out / den[:, None, None]

    def derivative(zs):
        # (N e/D)′ = (N′D − N D′) e/D² + ν N e/D, with N′, D′ directional along U
        zs = np.atleast_1d(np.asarray(zs, dtype=float))
        args = zs[:, None] * U[None, :] + shift[None, :]
        den = riemann_theta.theta_batch(args, tau, cfg=cfg)
        d_den = riemann_theta.theta_batch(args, tau, deriv=[U], cfg=cfg)
        out = np.zeros((len(zs), n, n), dtype=complex)
        for j in range(n):
            for l in range(n):
                if j == l:
                    continue
                off = args + (phi[l] - phi[j])[None, :]
                num = riemann_theta.theta_batch(off, tau, cfg=cfg)
                d_num = riemann_theta.theta_batch(off, tau, deriv=[U], cfg=cfg)
                growth = np.exp(zs * nu_diff[l, j])
                out[:, j, l] = const[j, l] * growth * (
                    (d_num * den - num * d_den) / den ** 2 + nu_diff[l, j] * num / den
                )
        return out

    values, den = _parts(grid)
    scale = float(np.max(np.abs(den))) if len(den) else 1.0
    poles = [float(z) for z, d in zip(grid, den) if abs(d) < 1e-6 * scale]
    values = values / den[:, None, None]
    if poles:
        logger.warning(f"Q₀ denominator vanishes near z = {poles}")
    return Q0Grid(
        z_nodes=grid,
        values=values,
        rho=np.asarray(spectral.rho),
        nu_diff=nu_diff,
        eps=eps_m,
        odd_char=frame.odd_char,
        pole_nodes=poles,
        evaluate=evaluate,
        derivative=derivative,
        metadata={"theta_at_shift": at_zero, "odd_char": str(frame.odd_char)},
    )


def charge2_q0_generic(k: float, grid, cfg: Optional[ToleranceConfig] = None) -> Q0Grid:
    """Charge-2 Q₀ through the genus-independent assembly, ν from the theta formula."""
    cfg = cfg or ToleranceConfig()
    spectral = charge2_spectral_data(k, cfg)
    frame = select_odd_characteristic(
        spectral.tau, spectral.phi_inf, spectral.inf_expansion, cfg, phi_zero=spectral.phi_zero
    )
    nu = nu_differences_theta(spectral, frame, cfg)
    return assemble_q0(spectral, nu, frame, None, _check_grid(grid), cfg)


def charge3_q0(
    es: ESData,
    periods: PeriodData,
    eps: Optional[Sequence[int]] = None,
    grid=None,
    cfg: Optional[ToleranceConfig] = None,
) -> Q0Grid:
    """Q₀ for the symmetric charge-3 curve of a solved ES pair."""
    cfg = cfg or ToleranceConfig()
    grid = _check_grid(default_grid() if grid is None else grid)
    spectral = symmetric_spectral_data(es, periods, cfg)
    frame = select_odd_characteristic(
        spectral.tau, spectral.phi_inf, spectral.inf_expansion, cfg, phi_zero=spectral.phi_zero
    )
    nu = nu_differences(periods, es.chi_cuberoot, cfg, frame=frame)
    q0 = assemble_q0(spectral, nu, frame, eps, grid, cfg)
    logger.info(
        f"Assembled Q0 for ({es.n1}, {es.m1}) on {len(grid)} nodes, odd characteristic {frame.odd_char}"
    )
    return q0


def zero_scan(
    es: ESData,
    periods: PeriodData,
    nodes: Optional[int] = None,
    cfg: Optional[ToleranceConfig] = None,
    spectral: Optional[SpectralData] = None,
) -> List[Tuple[float, float, float]]:
    """
    Zeros of θ(sU − K̃) for s = z + 1 ∈ [0, 2].

    Local minima of |θ| on the scan grid (endpoints included) are refined by
    bounded minimization to 1e-8 in s; a minimum counts as a zero below
    1e-6 of the grid maximum. Returns (s, |θ|, min over pairs of the numerator |θ|).
    """
    cfg = cfg or ToleranceConfig()
    nodes = nodes or settings.ZERO_SCAN_NODES
    spectral = spectral or symmetric_spectral_data(es, periods, cfg)
    tau, U, shift, phi = spectral.tau, spectral.U, spectral.shift, spectral.phi_inf
    n = spectral.n
    offsets = [phi[l] - phi[j] for j in range(n) for l in range(n) if j != l]

    def den_abs(s):
        s = np.atleast_1d(s)
        args = (s - 1.0)[:, None] * U[None, :] + shift[None, :]
        return np.abs(riemann_theta.theta_batch(args, tau, cfg=cfg))

    def num_abs(s: float) -> float:
        arg = (s - 1.0) * U + shift
        return float(min(abs(riemann_theta.theta(arg + o, tau, cfg=cfg)) for o in offsets))

    s_grid = np.linspace(0.0, 2.0, nodes)
    values = den_abs(s_grid)
    scale = float(np.max(values))
    found = []
    for i in range(nodes):
        left = values[i - 1] if i > 0 else np.inf
        right = values[i + 1] if i < nodes - 1 else np.inf
        if not (values[i] <= left and values[i] <= right):
            continue
        lo, hi = s_grid[max(i - 1, 0)], s_grid[min(i + 1, nodes - 1)]
        res = optimize.minimize_scalar(
            lambda s: float(den_abs(s)[0]), bounds=(lo, hi), method="bounded", options={"xatol": 1e-8}
        )
        s_min, v_min = (float(res.x), float(res.fun)) if res.fun < values[i] else (float(s_grid[i]), float(values[i]))
        if v_min < 1e-6 * scale:
            found.append((s_min, v_min, num_abs(s_min)))
    logger.info(f"Zero scan ({es.n1}, {es.m1}): zeros at s = {[round(f[0], 8) for f in found]}")
    return found


def interior_zeros(zeros: Sequence[Tuple[float, float, float]], tol: float = 1e-5) -> List[float]:
    """Zeros strictly inside (0, 2); the endpoints are the required poles at z = ±1."""
    return [s for s, _, _ in zeros if tol < s < 2.0 - tol]


# ---------------------------------------------------------------------------
# Gauge flow and Nahm data
# ---------------------------------------------------------------------------

def _rk4_steps(targets: Sequence[float], step: float) -> Tuple[np.ndarray, np.ndarray, List[int]]:
    """Step starts and sizes from 0 through the sorted targets; index of the step ending on each target."""
    starts, sizes, marks = [], [], []
    z = 0.0
    for t in targets:
        gap = t - z
        count = int(math.ceil(abs(gap) / step - 1e-9)) if abs(gap) > 1e-15 else 0
        if count:
            h = gap / count
            starts.extend(z + i * h for i in range(count))
            sizes.extend([h] * count)
        marks.append(len(starts) - 1)
        z = t
    return np.array(starts), np.array(sizes), marks


def _integrate(evaluate: Callable, targets: Sequence[float], step: float, n: int, limit: float) -> List[np.ndarray]:
    starts, sizes, marks = _rk4_steps(targets, step)
    C = np.eye(n, dtype=complex)
    if len(starts) == 0:
        return [C.copy() for _ in targets]
    stage_z = np.stack([starts, starts + 0.5 * sizes, starts + sizes], axis=1).reshape(-1)
    Q = evaluate(stage_z).reshape(len(starts), 3, n, n)
    states = []
    mark_iter = iter(enumerate(marks))
    pending = next(mark_iter, None)
    while pending is not None and pending[1] < 0:
        states.append(C.copy())
        pending = next(mark_iter, None)
    for i, h in enumerate(sizes):
        q0, qh, q1 = Q[i]
        k1 = 0.5 * C @ q0
        k2 = 0.5 * (C + 0.5 * h * k1) @ qh
        k3 = 0.5 * (C + 0.5 * h * k2) @ qh
        k4 = 0.5 * (C + h * k3) @ q1
        C = C + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        while pending is not None and pending[1] == i:
            cond = float(np.linalg.cond(C))
            if cond > limit:
                raise StiffnessError(
                    "Gauge flow became ill-conditioned",
                    {"z": float(starts[i] + h), "cond": cond, "limit": limit},
                )
            states.append(C.copy())
            pending = next(mark_iter, None)
    return states


def _triple(A_minus, A_zero, A_plus):
    T1 = 0.5 * (A_plus + A_minus)
    T2 = (A_minus - A_plus) / 2j
    T3 = 0.5j * A_zero
    return T1, T2, T3


def _lax_matrices(T1, T2, T3):
    # inverse of _triple
    return T1 + 1j * T2, -2j * T3, T1 - 1j * T2


def _comm(X, Y):
    return X @ Y - Y @ X


def solve_gauge_flow(
    q0: Q0Grid,
    cfg: Optional[ToleranceConfig] = None,
    step: Optional[float] = None,
    stiffness_limit: Optional[float] = None,
) -> NahmSample:
    """
    Integrate C′ = ½CQ₀ from C(0) = 1 with classic RK4 and reconstruct T₁, T₂, T₃.

    Residuals per node: Nahm (T₁′ − [T₂,T₃] and cyclic) and Lax
    (A₋₁′ − ½[A₋₁,A₀], A₀′ − [A₋₁,A₁], A₁′ − ½[A₀,A₁]); derivatives use
    A₁′ = ½C[Q₀,R]C⁻¹ and A₀′ = CQ₀′C⁻¹, with Q₀′ from q0.derivative when
    present and a five-point stencil otherwise.
    """
    step = step or settings.RK4_STEP
    limit = stiffness_limit or settings.STIFFNESS_LIMIT
    if q0.evaluate is None:
        raise DomainError("Q0Grid needs an evaluator for off-grid stages")
    grid = np.asarray(q0.z_nodes, dtype=float)
    n = len(q0.rho)
    R = np.diag(q0.rho)

    order = np.argsort(grid)
    forward = [z for z in grid[order] if z >= 0]
    backward = [z for z in grid[order][::-1] if z < 0]
    states = dict(zip(forward, _integrate(q0.evaluate, forward, step, n, limit)))
    states.update(zip(backward, _integrate(q0.evaluate, backward, step, n, limit)))
    C = np.array([states[z] for z in grid])
    C_inv = np.linalg.inv(C)

    Q = q0.evaluate(grid)
    if q0.derivative is not None:
        Q_prime = q0.derivative(grid)
    else:
        hs = STENCIL_STEP
        Q_prime = (q0.evaluate(grid - 2 * hs) - 8 * q0.evaluate(grid - hs)
                   + 8 * q0.evaluate(grid + hs) - q0.evaluate(grid + 2 * hs)) / (12 * hs)

    A_zero = C @ Q @ C_inv
    A_plus = C @ R @ C_inv
    A_minus = -np.conj(np.swapaxes(A_plus, 1, 2))
    dA_plus = 0.5 * C @ (Q @ R - R @ Q) @ C_inv
    dA_zero = C @ Q_prime @ C_inv
    dA_minus = -np.conj(np.swapaxes(dA_plus, 1, 2))

    T1, T2, T3 = _triple(A_minus, A_zero, A_plus)
    dT1, dT2, dT3 = _triple(dA_minus, dA_zero, dA_plus)
    nahm = np.max(np.abs(np.stack([
        dT1 - _comm(T2, T3),
        dT2 - _comm(T3, T1),
        dT3 - _comm(T1, T2),
    ])), axis=(0, 2, 3))
    lax = np.max(np.abs(np.stack([
        dA_minus - 0.5 * _comm(A_minus, A_zero),
        dA_zero - _comm(A_minus, A_plus),
        dA_plus - 0.5 * _comm(A_zero, A_plus),
    ])), axis=(0, 2, 3))
    return NahmSample(
        z_nodes=grid,
        T1=T1,
        T2=T2,
        T3=T3,
        residual=nahm,
        lax_residual=lax,
        A_minus=A_minus,
        A_zero=A_zero,
        A_plus=A_plus,
    )


def spectral_curve_coefficients(A_minus: np.ndarray, A_zero: np.ndarray, A_plus: np.ndarray,
                                samples: int = SPECTRAL_SAMPLES) -> np.ndarray:
    """
    Coefficients of det(η − A₋₁ − A₀ζ − A₁ζ²) = ηⁿ + Σᵣ cᵣ(ζ)ηⁿ⁻ʳ.

    Returns an n × (2n + 1) array; row r − 1 holds the ζ-coefficients of cᵣ in
    ascending order, recovered by FFT from samples on |ζ| = 1.
    """
    n = A_zero.shape[0]
    zetas = np.exp(2j * np.pi * np.arange(samples) / samples)
    char = np.array([np.poly(A_minus + A_zero * z + A_plus * z * z)[1:] for z in zetas])
    coeffs = np.fft.fft(char, axis=0) / samples
    return coeffs[: 2 * n + 1].T


def spectral_curve_drift(sample: NahmSample) -> float:
    """Largest change of the spectral-curve coefficients across the grid, against the node nearest z = 0."""
    ref_index = int(np.argmin(np.abs(sample.z_nodes)))
    per_node = [
        spectral_curve_coefficients(sample.A_minus[i], sample.A_zero[i], sample.A_plus[i])
        for i in range(len(sample.z_nodes))
    ]
    ref = per_node[ref_index]
    return float(max(np.max(np.abs(c - ref)) for c in per_node))


def expected_charge3_coefficients(chi: float, b: float) -> np.ndarray:
    """Coefficient array of η³ + χ(ζ⁶ + bζ³ − 1) in the layout of spectral_curve_coefficients."""
    coeffs = np.zeros((3, 7), dtype=complex)
    coeffs[2] = [-chi, 0, 0, b * chi, 0, 0, chi]
    return coeffs


def charge3_nahm(
    es: ESData,
    periods: PeriodData,
    eps: Optional[Sequence[int]] = None,
    grid=None,
    cfg: Optional[ToleranceConfig] = None,
    step: Optional[float] = None,
) -> NahmSample:
    """Charge-3 Nahm triple for a solved ES pair, with spectral-curve checks in metadata."""
    cfg = cfg or ToleranceConfig()
    q0 = charge3_q0(es, periods, eps, grid, cfg)
    if q0.pole_nodes:
        raise PoleError("Q₀ has poles inside the grid", {"z": q0.pole_nodes})
    sample = solve_gauge_flow(q0, cfg, step=step)
    ref_index = int(np.argmin(np.abs(sample.z_nodes)))
    coeffs = spectral_curve_coefficients(
        sample.A_minus[ref_index], sample.A_zero[ref_index], sample.A_plus[ref_index]
    )
    expected = expected_charge3_coefficients(es.chi, es.b)
    sample.metadata.update({
        "spectral_drift": spectral_curve_drift(sample),
        "spectral_mismatch": float(np.max(np.abs(coeffs - expected))),
        "max_lax_residual": float(np.max(sample.lax_residual)),
    })
    logger.info(
        f"Charge-3 flow ({es.n1}, {es.m1}): Nahm residual {sample.max_residual:.2e}, "
        f"spectral drift {sample.metadata['spectral_drift']:.2e}"
    )
    return sample
