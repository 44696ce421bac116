"""
Diseño de matrices de sensado
Diseño ponderado por probabilidades (PWDSMD) con solución analítica por SVD
y los diseños de referencia: aleatorio, DCS, LG y BH
"""

from typing import Any, Dict, Literal, Optional, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, Field, field_validator
from scipy import linalg

from config import settings
from core_model import Dictionary, GramMatrix, SensingMatrix, gram
from errors import ContractViolationError, DegenerateInputError, ParameterError, UnknownKindError
from metrics import welch_bound
from prior import PriorProfile
from seeding import stream

logger = structlog.get_logger()

BaselineKind = Literal["random", "dcs", "lg", "bh"]
MatrixLike = Union[SensingMatrix, np.ndarray]

DEFAULT_GAMMA = 0.5
DEFAULT_TAU = 0.2


class SpectralDecomposition(BaseModel):
    """SVD de Ψ̂ = ΨW: U_Ψ̂ completo, valores singulares no nulos, N̄ y M̄"""
    u: np.ndarray
    sigma: np.ndarray
    n_bar: int = Field(..., ge=1)
    m_bar: int = Field(..., ge=0)

    class Config:
        arbitrary_types_allowed = True
        frozen = True


class DesignReport(BaseModel):
    """Resumen de un diseño: objetivo alcanzado y contabilidad espectral"""
    objective: float = Field(..., ge=0)
    trailing_spectrum_sum: Optional[float] = Field(None, ge=0)
    theta2_source: str = ""
    iterations: int = Field(0, ge=0)

    def sidecar(self) -> Dict[str, Any]:
        """Registro JSON que acompaña a la matriz guardada"""
        return {
            "objective": self.objective,
            "trailing_spectrum_sum": self.trailing_spectrum_sum,
            "theta2_source": self.theta2_source,
            "iterations": self.iterations,
        }


class DesignParams(BaseModel):
    """Parámetros de diseño tal como llegan en JSON o desde el CLI"""
    algo: Literal["random", "dcs", "lg", "bh", "pwdsmd"]
    m: int = Field(..., ge=1)
    tau: float = DEFAULT_TAU
    gamma: float = DEFAULT_GAMMA
    iters: Optional[int] = Field(None, ge=0)
    seed: Optional[int] = Field(None, ge=0)
    mu_bar: Optional[float] = None

    @field_validator("tau")
    @classmethod
    def _check_tau(cls, value: float) -> float:
        if not 0.0 < value <= 1.0:
            raise ParameterError(f"tau must lie in (0, 1], got {value}")
        return value


def _entries(phi: MatrixLike) -> np.ndarray:
    return phi.entries if isinstance(phi, SensingMatrix) else np.asarray(phi, dtype=float)


def _check_orthonormal(q: np.ndarray, size: int, name: str) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (size, size) or not np.allclose(q.T @ q, np.eye(size), atol=1e-10):
        raise ContractViolationError(f"{name} must be an orthonormal {size}x{size} matrix")
    return q


def spectral_decomposition(psi_hat: np.ndarray, m: int, rank_tol: Optional[float] = None) -> SpectralDecomposition:
    """SVD de Ψ̂ con el rango N̄ recortado por tolerancia relativa"""
    tol = settings.rank_tol if rank_tol is None else rank_tol
    u, s, _ = linalg.svd(psi_hat, full_matrices=True)
    if s.size == 0 or not s[0] > 0.0:
        raise DegenerateInputError("weighted dictionary has rank zero")
    n_bar = int(np.count_nonzero(s > tol * s[0]))
    return SpectralDecomposition(u=u, sigma=s[:n_bar].copy(), n_bar=n_bar, m_bar=min(int(m), n_bar))


def pwdsmd_objective(phi: MatrixLike, psi: Dictionary, prior: Optional[PriorProfile] = None) -> float:
    """f(Φ) = ‖Ψ̂ᵀΨ̂ − Ψ̂ᵀΦᵀΦΨ̂‖²_F con Ψ̂ = ΨW (W = I sin prior)"""
    p = _entries(phi)
    if p.ndim != 2 or p.shape[1] != psi.n:
        raise ContractViolationError(f"sensing matrix shape {p.shape} does not match N={psi.n}")
    weight = np.ones(psi.k) if prior is None else prior.weight
    if weight.shape[0] != psi.k:
        raise ContractViolationError(f"prior has {weight.shape[0]} weights, dictionary has {psi.k} atoms")
    psi_hat = psi.entries * weight[np.newaxis, :]
    projected = p @ psi_hat
    residual = psi_hat.T @ psi_hat - projected.T @ projected
    return float(np.sum(residual ** 2))


def dcs_objective(phi: MatrixLike, psi: Dictionary) -> float:
    """‖ΨΨᵀ − ΨΨᵀΦᵀΦΨΨᵀ‖²_F"""
    p = _entries(phi)
    outer = psi.entries @ psi.entries.T
    residual = outer - outer @ p.T @ p @ outer
    return float(np.sum(residual ** 2))


def etf_project(g: GramMatrix, mu_bar: float) -> GramMatrix:
    """Diagonal a 1 y entradas fuera de la diagonal recortadas a ±μ̄"""
    if not 0.0 < mu_bar < 1.0:
        raise ParameterError(f"mu_bar must lie in (0, 1), got {mu_bar}")
    out = np.clip(g.entries, -mu_bar, mu_bar)
    np.fill_diagonal(out, 1.0)
    return GramMatrix(entries=0.5 * (out + out.T), source=g.source)


def bh_objective(phi: MatrixLike, psi: Dictionary, gamma: float, mu_bar: float) -> float:
    """(1 − γ)‖G_d − G‖² + γ‖G_t − G‖² con G_t la proyección ETF del Gram actual"""
    g_d = psi.entries.T @ psi.entries
    g = gram(_entries(phi) @ psi.entries).entries
    g_t = etf_project(GramMatrix(entries=g), mu_bar).entries
    return float((1.0 - gamma) * np.sum((g_d - g) ** 2) + gamma * np.sum((g_t - g) ** 2))


def _default_mu_bar(m: int, k: int) -> float:
    # la cota de Welch vale 0 con M >= K y 1 con M = 1, K = 2
    return float(min(max(welch_bound(min(m, k), k), 1e-6), 1.0 - 1e-6))


def design_pwdsmd(
    psi: Dictionary,
    prior: PriorProfile,
    phi0: Optional[MatrixLike] = None,
    *,
    m: Optional[int] = None,
    seed: Optional[int] = None,
    u: Optional[np.ndarray] = None,
    v22: Optional[np.ndarray] = None,
) -> Tuple[SensingMatrix, DesignReport]:
    """
    Diseño ponderado con solución cerrada

    Φ_opt = [Θ̂₁ Θ₂] U_Ψ̂ᵀ con Θ̂₁ = U [Σ_top 0; 0 0] Ṽ Σ_Ψ̂⁻¹,
    Ṽ = diag(I_M̄, V₂₂) y Θ₂ = Φ₀ U_Ψ̂(:, N̄+1..N). U y V₂₂ son libres
    (identidad por defecto); el objetivo no depende de ellos.
    """
    if prior.k != psi.k:
        raise ContractViolationError(f"prior has {prior.k} entries, dictionary has {psi.k} atoms")
    if phi0 is not None:
        phi0_entries = _entries(phi0)
        if phi0_entries.shape[1] != psi.n:
            raise ContractViolationError(f"phi0 shape {phi0_entries.shape} does not match N={psi.n}")
        if m is not None and m != phi0_entries.shape[0]:
            raise ContractViolationError(f"m={m} disagrees with phi0, which has {phi0_entries.shape[0]} rows")
        m = phi0_entries.shape[0]
    if m is None:
        raise ContractViolationError("either phi0 or m is required")
    if not 1 <= m <= psi.n:
        raise ContractViolationError(f"M must lie in [1, N={psi.n}], got {m}")

    psi_hat = psi.entries * prior.weight[np.newaxis, :]
    spectrum = spectral_decomposition(psi_hat, m)
    n_bar, m_bar = spectrum.n_bar, spectrum.m_bar

    u_free = np.eye(m) if u is None else _check_orthonormal(u, m, "u")
    v22_free = np.eye(n_bar - m_bar) if v22 is None else _check_orthonormal(v22, n_bar - m_bar, "v22")

    block = np.zeros((m, n_bar))
    block[:m_bar, :m_bar] = np.diag(spectrum.sigma[:m_bar])
    v_tilde = np.eye(n_bar)
    v_tilde[m_bar:, m_bar:] = v22_free
    theta1 = u_free @ block @ v_tilde @ np.diag(1.0 / spectrum.sigma)

    if n_bar < psi.n:
        if phi0 is None:
            if seed is None:
                raise ParameterError("phi0 or seed is required when the weighted dictionary is rank deficient")
            phi0_entries = stream(seed, "pwdsmd:phi0").standard_normal((m, psi.n))
            theta2_source = "seeded gaussian phi0 on trailing left singular vectors"
        else:
            theta2_source = "phi0 on trailing left singular vectors"
        theta2 = phi0_entries @ spectrum.u[:, n_bar:]
    else:
        theta2 = np.zeros((m, 0))
        theta2_source = "none (full row rank)"

    entries = np.hstack([theta1, theta2]) @ spectrum.u.T
    objective = pwdsmd_objective(entries, psi, prior)
    trailing = float(np.sum(spectrum.sigma[m_bar:] ** 4))

    logger.info(
        "Sensing matrix designed",
        design="pwdsmd",
        m=m,
        n_bar=n_bar,
        m_bar=m_bar,
        tau=prior.tau,
        objective=objective,
        trailing_spectrum_sum=trailing,
    )
    phi = SensingMatrix(
        entries=entries,
        design_id="pwdsmd",
        params={"m": m, "tau": prior.tau},
        objective=objective,
    )
    return phi, DesignReport(objective=objective, trailing_spectrum_sum=trailing, theta2_source=theta2_source)


def _thin_svd(psi: Dictionary) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(U₁, σ, V₁) de Ψ restringido a su rango"""
    u, s, vh = linalg.svd(psi.entries, full_matrices=False)
    if not s[0] > 0.0:
        raise DegenerateInputError("dictionary has rank zero")
    r = int(np.count_nonzero(s > settings.rank_tol * s[0]))
    return u[:, :r], s[:r], vh[:r].T


def _design_dcs(psi: Dictionary, m: int) -> np.ndarray:
    # minimizador exacto y separable: Γ = [diag(1/σ_i) 0] sobre el espectro superior
    eigvals, eigvecs = linalg.eigh(psi.entries @ psi.entries.T)
    order = np.argsort(eigvals)[::-1]
    sigma = np.sqrt(np.clip(eigvals[order], 0.0, None))
    u_psi = eigvecs[:, order]
    rank = int(np.count_nonzero(sigma > settings.rank_tol * sigma[0]))
    gamma = np.zeros((m, psi.n))
    for i in range(min(m, rank)):
        gamma[i, i] = 1.0 / sigma[i]
    return gamma @ u_psi.T


def _design_lg(psi: Dictionary, m: int, iters: int, mu_bar: float) -> np.ndarray:
    """
    Φ = U_G [I_M 0] [V₁₁ᵀΣ⁻¹ 0; 0 0] U_Ψᵀ con U_G = I

    V₁₁ arranca en la identidad; cada ronda proyecta el Gram actual al
    conjunto ETF y toma como filas activas de V₁₁ᵀ los autovectores
    principales de V₁ᵀ G_t V₁.
    """
    u1, sigma, v1 = _thin_svd(psi)
    rank = sigma.shape[0]
    m_eff = min(m, rank)
    rows = np.eye(rank)[:m_eff]
    for _ in range(iters):
        g = gram(rows @ v1.T)
        g_t = etf_project(g, mu_bar).entries
        eigvals, eigvecs = linalg.eigh(v1.T @ g_t @ v1)
        rows = eigvecs[:, np.argsort(eigvals)[::-1][:m_eff]].T
    entries = np.zeros((m, psi.n))
    entries[:m_eff] = rows @ np.diag(1.0 / sigma) @ u1.T
    return entries


def _fit_gram(target: np.ndarray, u1: np.ndarray, sigma: np.ndarray, v1: np.ndarray, m: int) -> np.ndarray:
    """Φ que minimiza ‖target − ΨᵀΦᵀΦΨ‖_F (aproximación PSD de rango ≤ M)"""
    reduced = v1.T @ target @ v1
    eigvals, eigvecs = linalg.eigh(0.5 * (reduced + reduced.T))
    top = np.argsort(eigvals)[::-1][: min(m, sigma.shape[0])]
    half = np.sqrt(np.clip(eigvals[top], 0.0, None))[:, np.newaxis] * eigvecs[:, top].T
    entries = np.zeros((m, u1.shape[0]))
    entries[: top.shape[0]] = half @ np.diag(1.0 / sigma) @ u1.T
    return entries


def _design_bh(psi: Dictionary, m: int, gamma: float, iters: int, mu_bar: float, seed: int) -> np.ndarray:
    g_d = psi.entries.T @ psi.entries
    u1, sigma, v1 = _thin_svd(psi)
    entries = stream(seed, "bh:init").standard_normal((m, psi.n))
    for _ in range(iters):
        g_t = etf_project(gram(entries @ psi.entries), mu_bar).entries
        entries = _fit_gram((1.0 - gamma) * g_d + gamma * g_t, u1, sigma, v1, m)
    return entries


def design_baseline(
    kind: str,
    psi: Dictionary,
    params: Union[DesignParams, Dict[str, Any]],
    seed: Optional[int] = None,
) -> Tuple[SensingMatrix, DesignReport]:
    """Diseños de referencia: random, dcs, lg, bh"""
    if kind not in ("random", "dcs", "lg", "bh"):
        raise UnknownKindError(f"unknown baseline design {kind!r}")
    if isinstance(params, dict):
        params = DesignParams.model_validate({"algo": kind, **params})
    if not 0.0 <= params.gamma <= 1.0:
        raise ParameterError(f"gamma must lie in [0, 1], got {params.gamma}")
    m = params.m
    if m > psi.n:
        raise ContractViolationError(f"M must not exceed N={psi.n}, got {m}")
    seed = params.seed if seed is None else seed
    mu_bar = params.mu_bar if params.mu_bar is not None else _default_mu_bar(m, psi.k)

    iterations = 0
    if kind == "random":
        if seed is None:
            raise ParameterError("random design requires a seed")
        entries = stream(seed, "design:random").standard_normal((m, psi.n))
        objective = pwdsmd_objective(entries, psi)
    elif kind == "dcs":
        entries = _design_dcs(psi, m)
        objective = dcs_objective(entries, psi)
    elif kind == "lg":
        iterations = params.iters or 0
        entries = _design_lg(psi, m, iterations, mu_bar)
        objective = bh_objective(entries, psi, 1.0, mu_bar)
    else:
        if seed is None:
            raise ParameterError("bh design requires a seed")
        iterations = settings.bh_iters if params.iters is None else params.iters
        entries = _design_bh(psi, m, params.gamma, iterations, mu_bar, seed)
        objective = bh_objective(entries, psi, params.gamma, mu_bar)

    logger.info("Sensing matrix designed", design=kind, m=m, iterations=iterations, objective=objective)
    phi = SensingMatrix(
        entries=entries,
        design_id=kind,
        params={"m": m, "gamma": params.gamma, "iters": iterations, "mu_bar": mu_bar, "seed": seed},
        objective=objective,
    )
    return phi, DesignReport(objective=objective, iterations=iterations)


def design_matrix(
    params: DesignParams,
    psi: Dictionary,
    prior: Optional[PriorProfile] = None,
    phi0: Optional[MatrixLike] = None,
) -> Tuple[SensingMatrix, DesignReport]:
    """Despachar hacia PWDSMD o hacia un diseño de referencia"""
    if params.algo == "pwdsmd":
        if prior is None:
            raise ParameterError("pwdsmd design requires a prior profile")
        return design_pwdsmd(psi, prior, phi0, m=params.m, seed=params.seed)
    return design_baseline(params.algo, psi, params)
