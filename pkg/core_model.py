"""
Modelo central de sensado comprimido
Tipos matriciales inmutables y operaciones elementales del pipeline y = ΦΨα
"""

from typing import Any, Dict, Literal, Optional, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, Field, field_validator, model_validator

from errors import ContractViolationError, DegenerateColumnError

logger = structlog.get_logger()

NORM_TOL = 1e-12
SYMMETRY_TOL = 1e-10

DesignId = Literal["random", "dcs", "lg", "bh", "pwdsmd", "external"]


def _frozen(value: Any, ndim: int, name: str) -> np.ndarray:
    """Copia float64 de solo lectura con la dimensión esperada"""
    arr = np.array(value, dtype=float)
    if arr.ndim != ndim:
        raise ContractViolationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class _ArrayModel(BaseModel):
    class Config:
        arbitrary_types_allowed = True
        frozen = True


class Dictionary(_ArrayModel):
    """Base de representación Ψ (N×K) con columnas de norma unitaria"""
    entries: np.ndarray

    @field_validator("entries", mode="before")
    @classmethod
    def _check_entries(cls, value: Any) -> np.ndarray:
        arr = _frozen(value, 2, "dictionary")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ContractViolationError(f"dictionary must be non-empty, got shape {arr.shape}")
        norms = np.linalg.norm(arr, axis=0)
        worst = int(np.argmax(np.abs(norms - 1.0)))
        if abs(norms[worst] - 1.0) > NORM_TOL:
            raise ContractViolationError(
                f"dictionary column {worst} has norm {norms[worst]!r}, expected 1"
            )
        return arr

    @classmethod
    def from_array(cls, entries: Any) -> "Dictionary":
        """Renormalizar columnas y construir el diccionario"""
        normalized, _ = normalize_columns(np.asarray(entries, dtype=float))
        return cls(entries=normalized)

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    @property
    def k(self) -> int:
        return int(self.entries.shape[1])


class SensingMatrix(_ArrayModel):
    """Matriz de sensado Φ (M×N) con su procedencia"""
    entries: np.ndarray
    design_id: DesignId = "external"
    params: Dict[str, Any] = Field(default_factory=dict)
    objective: Optional[float] = Field(None, ge=0)

    @field_validator("entries", mode="before")
    @classmethod
    def _check_entries(cls, value: Any) -> np.ndarray:
        arr = _frozen(value, 2, "sensing matrix")
        m, n = arr.shape
        if m < 1:
            raise ContractViolationError("sensing matrix needs at least one row")
        if m > n:
            raise ContractViolationError(f"sensing matrix must have M <= N, got {m}x{n}")
        if m == n:
            logger.warning("Sensing matrix without compression", m=m, n=n)
        return arr

    @property
    def m(self) -> int:
        return int(self.entries.shape[0])

    @property
    def n(self) -> int:
        return int(self.entries.shape[1])


class EquivalentDictionary(_ArrayModel):
    """D = ΦΨ, su versión normalizada D̄ y el factor S_c"""
    raw: np.ndarray
    normalized: np.ndarray
    scale: np.ndarray

    @field_validator("raw", "normalized", mode="before")
    @classmethod
    def _check_matrix(cls, value: Any) -> np.ndarray:
        return _frozen(value, 2, "equivalent dictionary")

    @field_validator("scale", mode="before")
    @classmethod
    def _check_scale(cls, value: Any) -> np.ndarray:
        arr = _frozen(value, 1, "scale")
        if np.any(arr <= 0):
            raise ContractViolationError("scale entries must be strictly positive")
        return arr

    @model_validator(mode="after")
    def _check_consistency(self) -> "EquivalentDictionary":
        if self.raw.shape != self.normalized.shape or self.scale.shape[0] != self.raw.shape[1]:
            raise ContractViolationError("raw, normalized and scale shapes disagree")
        return self

    @property
    def m(self) -> int:
        return int(self.raw.shape[0])

    @property
    def k(self) -> int:
        return int(self.raw.shape[1])


class GramMatrix(_ArrayModel):
    """Gram simétrico K×K de un diccionario o de un diccionario equivalente"""
    entries: np.ndarray
    source: Literal["dictionary", "equivalent"] = "equivalent"

    @field_validator("entries", mode="before")
    @classmethod
    def _check_entries(cls, value: Any) -> np.ndarray:
        arr = _frozen(value, 2, "gram")
        if arr.shape[0] != arr.shape[1]:
            raise ContractViolationError(f"gram must be square, got {arr.shape}")
        if not np.allclose(arr, arr.T, rtol=0.0, atol=SYMMETRY_TOL):
            raise ContractViolationError("gram must be symmetric")
        return arr


class SparseSignal(_ArrayModel):
    """Coeficientes α con soporte Λ y esparcidad S"""
    coefficients: np.ndarray
    support: Tuple[int, ...]
    sparsity: int = Field(..., ge=0)

    @field_validator("coefficients", mode="before")
    @classmethod
    def _check_coefficients(cls, value: Any) -> np.ndarray:
        return _frozen(value, 1, "coefficients")

    @model_validator(mode="after")
    def _check_support(self) -> "SparseSignal":
        if len(self.support) > self.sparsity:
            raise ContractViolationError(
                f"support size {len(self.support)} exceeds sparsity {self.sparsity}"
            )
        off = np.ones(self.coefficients.shape[0], dtype=bool)
        off[list(self.support)] = False
        if np.any(self.coefficients[off] != 0.0):
            raise ContractViolationError("coefficients must vanish off the support")
        return self


class SignalBatch(_ArrayModel):
    """Lote X = ΨA + E con L columnas"""
    signals: np.ndarray
    coefficients: np.ndarray
    noise: np.ndarray
    snr_db: Optional[float] = None
    supports: Tuple[Tuple[int, ...], ...] = ()
    zero_energy_columns: Tuple[int, ...] = ()

    @field_validator("signals", "coefficients", "noise", mode="before")
    @classmethod
    def _check_matrix(cls, value: Any) -> np.ndarray:
        return _frozen(value, 2, "batch matrix")

    @model_validator(mode="after")
    def _check_shapes(self) -> "SignalBatch":
        if self.signals.shape != self.noise.shape:
            raise ContractViolationError("signals and noise shapes disagree")
        if self.coefficients.shape[1] != self.signals.shape[1]:
            raise ContractViolationError("coefficients and signals have different column counts")
        return self

    @property
    def size(self) -> int:
        return int(self.signals.shape[1])


def normalize_columns(d: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Devolver (D·diag(scale), scale) con scale(i) = 1/‖D(:,i)‖"""
    d = np.asarray(d, dtype=float)
    if d.ndim != 2:
        raise ContractViolationError(f"expected a matrix, got shape {d.shape}")
    norms = np.linalg.norm(d, axis=0)
    zero = np.flatnonzero(~(norms > 0.0))
    if zero.size:
        logger.error("Degenerate column found", column=int(zero[0]))
        raise DegenerateColumnError(int(zero[0]))
    scale = 1.0 / norms
    return d * scale[np.newaxis, :], scale


def equivalent_dictionary(phi: SensingMatrix, psi: Dictionary) -> EquivalentDictionary:
    """Diccionario equivalente D = ΦΨ y su normalización"""
    if phi.n != psi.n:
        raise ContractViolationError(
            f"sensing matrix has {phi.n} columns but dictionary has {psi.n} rows"
        )
    raw = phi.entries @ psi.entries
    normalized, scale = normalize_columns(raw)
    return EquivalentDictionary(raw=raw, normalized=normalized, scale=scale)


def gram(d: np.ndarray, source: Literal["dictionary", "equivalent"] = "equivalent") -> GramMatrix:
    """G = DᵀD"""
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[1] < 1:
        raise ContractViolationError(f"gram needs a matrix with at least one column, got {d.shape}")
    g = d.T @ d
    return GramMatrix(entries=0.5 * (g + g.T), source=source)


def reconstruct(psi: Dictionary, coefficients: np.ndarray) -> np.ndarray:
    """x = Ψα (vector o matriz K×L)"""
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.shape[0] != psi.k:
        raise ContractViolationError(
            f"expected {psi.k} coefficients per column, got {coefficients.shape[0]}"
        )
    return psi.entries @ coefficients
