"""
Información a priori basada en probabilidades
Extracción de ξ desde una matriz de coeficientes, matriz de pesos W y
resúmenes de entropía
"""

from typing import Any, Optional

import numpy as np
import structlog
from pydantic import BaseModel, field_validator, model_validator
from scipy.special import entr

from config import settings
from errors import ContractViolationError, EmptyBatchError, ParameterError

logger = structlog.get_logger()


def _probabilities(p: Any, name: str = "p") -> np.ndarray:
    arr = np.asarray(p, dtype=float).reshape(-1)
    if np.any(arr < 0.0) or np.any(arr > 1.0) or np.any(np.isnan(arr)):
        raise ParameterError(f"{name} entries must lie in [0, 1]")
    return arr


class PriorProfile(BaseModel):
    """ξ, τ y la diagonal de W(i,i) = τ + (1 − τ)ξ(i)"""
    xi: np.ndarray
    tau: float
    weight: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("xi", "weight", mode="before")
    @classmethod
    def _as_vector(cls, value: Any) -> np.ndarray:
        arr = np.array(value, dtype=float).reshape(-1)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check_weights(self) -> "PriorProfile":
        if not 0.0 < self.tau <= 1.0:
            raise ParameterError(f"tau must lie in (0, 1], got {self.tau}")
        if self.xi.shape != self.weight.shape:
            raise ContractViolationError("xi and weight lengths differ")
        expected = self.tau + (1.0 - self.tau) * self.xi
        if not np.allclose(self.weight, expected, rtol=0.0, atol=1e-12):
            raise ContractViolationError("weight does not match tau + (1 - tau) * xi")
        return self

    @property
    def k(self) -> int:
        return int(self.xi.shape[0])

    @classmethod
    def identity(cls, k: int) -> "PriorProfile":
        """Prior desactivado (τ = 1, W = I)"""
        return weight_matrix(np.full(k, 0.5), 1.0)


def extract_prior(coeffs: np.ndarray, zero_tol: Optional[float] = None) -> np.ndarray:
    """ξ(i) = proporción de entradas no nulas en la fila i de A (K×L)"""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 2:
        raise ContractViolationError(f"coefficient matrix must be K x L, got {coeffs.shape}")
    if coeffs.shape[1] == 0:
        raise EmptyBatchError("cannot extract a prior from an empty batch")
    tol = settings.zero_tol if zero_tol is None else zero_tol
    xi = np.count_nonzero(np.abs(coeffs) > tol, axis=1) / coeffs.shape[1]
    logger.debug("Prior extracted", k=coeffs.shape[0], l=coeffs.shape[1], mean_xi=float(xi.mean()))
    return xi


def weight_matrix(xi: np.ndarray, tau: float) -> PriorProfile:
    """Construir el PriorProfile con la diagonal de W"""
    if not 0.0 < tau <= 1.0:
        raise ParameterError(f"tau must lie in (0, 1], got {tau}")
    xi = _probabilities(xi, "xi")
    return PriorProfile(xi=xi, tau=float(tau), weight=tau + (1.0 - tau) * xi)


def binary_entropy(p: np.ndarray) -> np.ndarray:
    """H(ρ) en base 2, con H(0) = H(1) = 0"""
    p = _probabilities(p)
    return (entr(p) + entr(1.0 - p)) / np.log(2.0)


def average_binary_entropy(p: np.ndarray) -> float:
    """ABE: media de H(p(i))"""
    return float(np.mean(binary_entropy(p)))


def average_sparsity(p: np.ndarray) -> float:
    """S̄ = Σ p(i)"""
    return float(np.sum(_probabilities(p)))
