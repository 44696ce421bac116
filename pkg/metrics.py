"""
Métricas de evaluación
MSE, proporción de soporte recuperado, PSNR, coherencia mutua, cota de Welch
y la condición de recuperación garantizada de OMP
"""

import math
from typing import Optional, Sequence

import numpy as np
import structlog
from pydantic import BaseModel, Field

from core_model import normalize_columns
from errors import ContractViolationError, ParameterError

logger = structlog.get_logger()

PEAK = 2 ** 8 - 1


class MetricRecord(BaseModel):
    """Métricas de un experimento o de una recuperación"""
    mse: float = Field(..., ge=0)
    e_r: Optional[float] = Field(None, ge=0, le=1)
    psnr_db: Optional[float] = None
    mu: Optional[float] = Field(None, ge=0, le=1)
    welch: Optional[float] = Field(None, ge=0, le=1)
    guarantee_holds: Optional[bool] = None


def _as_columns(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, np.newaxis] if x.ndim == 1 else x


def mse(x: np.ndarray, x_hat: np.ndarray) -> float:
    """(1/L) Σ_l ‖x_l − x̂_l‖² / N"""
    x, x_hat = _as_columns(x), _as_columns(x_hat)
    if x.shape != x_hat.shape:
        raise ContractViolationError(f"shape mismatch {x.shape} vs {x_hat.shape}")
    n, l = x.shape
    return float(np.sum((x - x_hat) ** 2) / (n * l))


def support_recovery_rate(true_supports: Sequence[Sequence[int]], est_supports: Sequence[Sequence[int]]) -> float:
    """
    e_r = (1/L) Σ |I_l ∩ Î_l| / |I_l|

    Los ensayos con soporte verdadero vacío no entran en el promedio.
    Devuelve NaN si no queda ninguno.
    """
    if len(true_supports) != len(est_supports):
        raise ContractViolationError("support lists have different lengths")
    ratios = []
    skipped = 0
    for truth, estimate in zip(true_supports, est_supports):
        truth = set(int(i) for i in truth)
        if not truth:
            skipped += 1
            continue
        ratios.append(len(truth & set(int(i) for i in estimate)) / len(truth))
    if skipped:
        logger.warning("Trials with empty true support skipped", skipped=skipped, total=len(true_supports))
    if not ratios:
        return float("nan")
    return float(math.fsum(ratios) / len(ratios))


def psnr(mse_value: float) -> float:
    """10·log₁₀((2⁸ − 1)² / MSE)"""
    if mse_value < 0:
        raise ParameterError(f"mse must be non-negative, got {mse_value}")
    if mse_value == 0:
        return math.inf
    return 10.0 * math.log10(PEAK ** 2 / mse_value)


def mutual_coherence(d: np.ndarray) -> float:
    """Máximo |⟨d_i, d_j⟩| / (‖d_i‖‖d_j‖) sobre pares distintos"""
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[1] < 2:
        raise ContractViolationError(f"mutual coherence needs at least two columns, got {d.shape}")
    normalized, _ = normalize_columns(d)
    g = np.abs(normalized.T @ normalized)
    np.fill_diagonal(g, 0.0)
    return float(min(g.max(), 1.0))


def welch_bound(m: int, k: int) -> float:
    """√((K − M) / (M(K − 1)))"""
    if not 1 <= m <= k:
        raise ParameterError(f"welch bound needs 1 <= m <= k, got m={m}, k={k}")
    if k == 1:
        return 0.0
    return math.sqrt((k - m) / (m * (k - 1)))


def omp_guarantee_holds(s: int, mu: float) -> bool:
    """S < (1 + 1/μ)/2"""
    if not 0.0 < mu <= 1.0:
        raise ParameterError(f"mu must lie in (0, 1], got {mu}")
    return s < (1.0 + 1.0 / mu) / 2.0
