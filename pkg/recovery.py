"""
Recuperación dispersa voraz
OMP, PDOMP (OMP guiado por probabilidades) y LW-OMP
"""

import math
from typing import Callable, List, Literal, Optional, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, Field

from config import settings
from core_model import Dictionary, EquivalentDictionary, SensingMatrix, equivalent_dictionary
from errors import ContractViolationError, ParameterError, UnknownKindError

logger = structlog.get_logger()

RecoveryKind = Literal["omp", "pdomp", "lwomp"]
DictionaryLike = Union[EquivalentDictionary, np.ndarray]

# E|υ| para υ ~ N(0, 1)
DEFAULT_G_BAR = math.sqrt(2.0 / math.pi)
DEFAULT_BETA = 1e-4


class RecoveryConfig(BaseModel):
    """S, β, ḡ y el recorte ε de probabilidades"""
    sparsity: int = Field(..., ge=1)
    beta: float = Field(DEFAULT_BETA, ge=0)
    g_bar: float = Field(DEFAULT_G_BAR, ge=0)
    xi_clamp: float = Field(default_factory=lambda: settings.xi_clamp, gt=0, lt=0.5)


class RecoveryResult(BaseModel):
    """α̂ en la base sin normalizar, soporte en orden de selección e historia del residuo"""
    coefficients: np.ndarray
    normalized_coefficients: np.ndarray
    support: List[int]
    residual_norms: List[float]
    rank_deficient: bool = False

    class Config:
        arbitrary_types_allowed = True
        frozen = True


def _lstsq(y: np.ndarray, atoms: np.ndarray) -> Tuple[np.ndarray, bool]:
    coef, _, rank, _ = np.linalg.lstsq(atoms, y, rcond=None)
    return coef, bool(rank < atoms.shape[1])


def least_squares_on_support(y: np.ndarray, atoms: np.ndarray) -> np.ndarray:
    """argmin ‖y − Ξα‖₂ (mínima norma si Ξ no tiene rango completo)"""
    y = np.asarray(y, dtype=float)
    atoms = np.asarray(atoms, dtype=float)
    if atoms.ndim != 2 or atoms.shape[0] != y.shape[0]:
        raise ContractViolationError(f"atoms shape {atoms.shape} does not match y of length {y.shape[0]}")
    if atoms.shape[1] > atoms.shape[0]:
        raise ContractViolationError("least squares needs at most M atoms")
    coef, rank_deficient = _lstsq(y, atoms)
    if rank_deficient:
        logger.warning("Rank deficient support, minimum-norm solution used", atoms=atoms.shape[1])
    return coef


def _greedy_pursuit(
    y: np.ndarray,
    atoms: np.ndarray,
    scale: np.ndarray,
    sparsity: int,
    bonus: Optional[Callable[[int], np.ndarray]] = None,
) -> RecoveryResult:
    """Núcleo común: S selecciones, cada una con reajuste por mínimos cuadrados"""
    y = np.asarray(y, dtype=float).reshape(-1)
    m, k = atoms.shape
    if y.shape[0] != m:
        raise ContractViolationError(f"measurement has length {y.shape[0]}, dictionary has {m} rows")
    if not 1 <= sparsity <= min(m, k):
        raise ContractViolationError(f"sparsity must lie in [1, min(M, K)={min(m, k)}], got {sparsity}")

    residual = y.copy()
    available = np.ones(k, dtype=bool)
    support: List[int] = []
    norms = [float(np.linalg.norm(residual))]
    coef = np.zeros(0)
    rank_deficient = False

    for step in range(1, sparsity + 1):
        score = np.abs(atoms.T @ residual)
        if bonus is not None:
            score = score + bonus(step)
        score[~available] = -np.inf
        # argmax devuelve el primer máximo: gana el índice más bajo
        index = int(np.argmax(score))
        support.append(index)
        available[index] = False

        selected = atoms[:, support]
        coef, deficient = _lstsq(y, selected)
        rank_deficient = rank_deficient or deficient
        residual = y - selected @ coef
        norms.append(float(np.linalg.norm(residual)))

    if rank_deficient:
        logger.warning("Rank deficient support during pursuit", support=support)

    normalized = np.zeros(k)
    normalized[support] = coef
    coefficients = np.zeros(k)
    coefficients[support] = coef * scale[support]
    return RecoveryResult(
        coefficients=coefficients,
        normalized_coefficients=normalized,
        support=support,
        residual_norms=norms,
        rank_deficient=rank_deficient,
    )


def _normalized_atoms(d: DictionaryLike) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(d, EquivalentDictionary):
        return d.normalized, d.scale
    atoms = np.asarray(d, dtype=float)
    return atoms, np.ones(atoms.shape[1])


def _raw_atoms(d: DictionaryLike) -> np.ndarray:
    return d.raw if isinstance(d, EquivalentDictionary) else np.asarray(d, dtype=float)


def _clamp(p: np.ndarray, eps: float, k: int) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape[0] != k:
        raise ContractViolationError(f"probability vector has {p.shape[0]} entries, dictionary has {k} atoms")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ParameterError("probabilities must lie in [0, 1]")
    return np.clip(p, eps, 1.0 - eps)


def omp(y: np.ndarray, d_bar: DictionaryLike, s: int) -> RecoveryResult:
    """
    OMP estándar

    Con un EquivalentDictionary selecciona sobre D̄ y reporta α̂ en la base
    sin normalizar (α̂ = S_c α̂_norm); con una matriz usa sus columnas tal cual.
    """
    atoms, scale = _normalized_atoms(d_bar)
    return _greedy_pursuit(y, atoms, scale, s)


def pdomp_equivalent(y: np.ndarray, eq: EquivalentDictionary, xi: np.ndarray, cfg: RecoveryConfig) -> RecoveryResult:
    """PDOMP sobre un diccionario equivalente ya calculado"""
    xi = _clamp(xi, cfg.xi_clamp, eq.k)
    penalty = np.tan(np.pi * xi - np.pi / 2)
    s = cfg.sparsity

    def bonus(step: int) -> np.ndarray:
        return (cfg.beta * (s + 1 - step)) * penalty

    return _greedy_pursuit(y, eq.normalized, eq.scale, s, bonus)


def pdomp(
    y: np.ndarray,
    phi: SensingMatrix,
    psi: Dictionary,
    xi: np.ndarray,
    cfg: RecoveryConfig,
) -> RecoveryResult:
    """
    OMP guiado por probabilidades

    En la iteración k elige argmax |D̄(:,i)ᵀr| + ω_k·tan(πξ(i) − π/2) sobre
    los índices no seleccionados, con ω_k = β(S + 1 − k).
    """
    return pdomp_equivalent(y, equivalent_dictionary(phi, psi), xi, cfg)


def lw_omp(y: np.ndarray, d: DictionaryLike, p: np.ndarray, cfg: RecoveryConfig) -> RecoveryResult:
    """OMP con sesgo logit: |Dᵀr| + (ḡ/2)(2S − 1)·ln(p/(1 − p)) sobre D sin normalizar"""
    atoms = _raw_atoms(d)
    p = _clamp(p, cfg.xi_clamp, atoms.shape[1])
    bias = (cfg.g_bar / 2.0) * (2 * cfg.sparsity - 1) * np.log(p / (1.0 - p))
    return _greedy_pursuit(y, atoms, np.ones(atoms.shape[1]), cfg.sparsity, lambda step: bias)


def estimate_g_bar(coeffs: np.ndarray, zero_tol: Optional[float] = None) -> float:
    """Media de |α| sobre las entradas no nulas de un lote de entrenamiento"""
    tol = settings.zero_tol if zero_tol is None else zero_tol
    magnitudes = np.abs(np.asarray(coeffs, dtype=float))
    nonzero = magnitudes[magnitudes > tol]
    if nonzero.size == 0:
        logger.warning("No nonzero training coefficients, using default g_bar", g_bar=DEFAULT_G_BAR)
        return DEFAULT_G_BAR
    return float(nonzero.mean())


def recover(
    kind: str,
    y: np.ndarray,
    eq: EquivalentDictionary,
    xi: Optional[np.ndarray],
    cfg: RecoveryConfig,
) -> RecoveryResult:
    """Despachar hacia omp, pdomp o lwomp"""
    if kind == "omp":
        return omp(y, eq, cfg.sparsity)
    if kind not in ("pdomp", "lwomp"):
        raise UnknownKindError(f"unknown recovery algorithm {kind!r}")
    if xi is None:
        raise ParameterError(f"{kind} requires a prior probability vector")
    if kind == "pdomp":
        return pdomp_equivalent(y, eq, xi, cfg)
    return lw_omp(y, eq, xi, cfg)
