"""
Datos sintéticos
Diccionarios gaussianos normalizados, coeficientes Bernoulli por grupos y
señales con error de representación a un SNR dado
"""

import math
from typing import Dict, List, Optional

import numpy as np
import structlog
from pydantic import BaseModel, field_validator, model_validator

from core_model import Dictionary, SignalBatch, SparseSignal, normalize_columns
from errors import ContractViolationError, InfeasibleGroupError, ParameterError
from seeding import SeedLike, as_generator, stream

logger = structlog.get_logger()

# Longitudes de grupo de las cuatro simulaciones de distribución (K = 240)
GROUP_PROFILES: Dict[str, List[int]] = {
    "uniform": [60, 60, 60, 60],
    "two_level": [100, 100, 20, 20],
    "graded": [160, 50, 20, 10],
    "dominant": [204, 12, 12, 12],
}


class GroupSpec(BaseModel):
    """Grupos contiguos de átomos con probabilidad p′(j) compartida"""
    group_sizes: List[int]
    group_probs: List[float]

    @field_validator("group_sizes")
    @classmethod
    def _check_sizes(cls, value: List[int]) -> List[int]:
        if not value or any(size < 1 for size in value):
            raise ValueError("group sizes must be positive and non-empty")
        return value

    @model_validator(mode="after")
    def _check_probs(self) -> "GroupSpec":
        if len(self.group_probs) != len(self.group_sizes):
            raise ValueError("group_sizes and group_probs must have the same length")
        for j, prob in enumerate(self.group_probs):
            if not 0.0 <= prob <= 1.0:
                raise InfeasibleGroupError(f"group {j} has probability {prob} outside [0, 1]")
        return self

    @property
    def k(self) -> int:
        return int(sum(self.group_sizes))

    @property
    def j(self) -> int:
        return len(self.group_sizes)

    @classmethod
    def from_sparsity(cls, group_sizes: List[int], sparsity: float) -> "GroupSpec":
        """p′(j) = (S/J)/K_j"""
        if not group_sizes or any(size < 1 for size in group_sizes):
            raise InfeasibleGroupError(f"group sizes must be positive and non-empty, got {group_sizes}")
        per_group = sparsity / len(group_sizes)
        probs = [per_group / size for size in group_sizes]
        for j, prob in enumerate(probs):
            if prob > 1.0:
                raise InfeasibleGroupError(
                    f"group {j} of size {group_sizes[j]} cannot hold {per_group} nonzeros on average"
                )
        return cls(group_sizes=group_sizes, group_probs=probs)

    @classmethod
    def from_record(cls, record: Dict) -> "GroupSpec":
        """JSON {"group_sizes", "sparsity"} o {"group_sizes", "group_probs"}"""
        if "sparsity" in record and "group_probs" not in record:
            return cls.from_sparsity(list(record["group_sizes"]), record["sparsity"])
        return cls.model_validate(record)


class BernoulliSparseModel(BaseModel):
    """p(i) por índice con amplitudes N(0, 1)"""
    p: List[float]
    value_law: str = "N(0,1)"

    @classmethod
    def from_groups(cls, spec: GroupSpec) -> "BernoulliSparseModel":
        return cls(p=expand_groups(spec).tolist())


def expand_groups(spec: GroupSpec) -> np.ndarray:
    """Bloques contiguos de longitud K_j rellenos con p′(j)"""
    for j, prob in enumerate(spec.group_probs):
        if prob > 1.0:
            raise InfeasibleGroupError(f"group {j} has probability {prob} > 1")
    return np.repeat(np.asarray(spec.group_probs, dtype=float), spec.group_sizes)


def rescale_groups(group_sizes: List[int], k: int) -> List[int]:
    """Reescalar longitudes para que sumen k (restos mayores, empates al primero)"""
    total = sum(group_sizes)
    exact = [size * k / total for size in group_sizes]
    sizes = [max(1, math.floor(value)) for value in exact]
    remainders = sorted(range(len(exact)), key=lambda j: (-(exact[j] - math.floor(exact[j])), j))
    deficit = k - sum(sizes)
    for j in remainders:
        if deficit <= 0:
            break
        sizes[j] += 1
        deficit -= 1
    while deficit < 0:
        j = max(range(len(sizes)), key=lambda i: sizes[i])
        sizes[j] -= 1
        deficit += 1
    return sizes


def gen_sparse(p: np.ndarray, seed: SeedLike) -> SparseSignal:
    """α(i) = υ(i)b(i) con b(i) ~ Bernoulli(p(i)) y υ(i) ~ N(0, 1)"""
    p = np.asarray(p, dtype=float).reshape(-1)
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ParameterError("probabilities must lie in [0, 1]")
    rng = as_generator(seed, "sparse")
    active = rng.random(p.shape[0]) < p
    values = rng.standard_normal(p.shape[0])
    support = tuple(int(i) for i in np.flatnonzero(active))
    return SparseSignal(coefficients=np.where(active, values, 0.0), support=support, sparsity=len(support))


def gen_sparse_exact(spec: GroupSpec, sparsity: int, seed: SeedLike) -> SparseSignal:
    """
    Modo de conteo exacto: S/J no nulos por grupo en posiciones uniformes

    Si S/J no es entero, las unidades sobrantes van a los grupos con mayor p′.
    """
    rng = as_generator(seed, "sparse-exact")
    base, extra = divmod(int(sparsity), spec.j)
    counts = [base] * spec.j
    for j in sorted(range(spec.j), key=lambda g: (-spec.group_probs[g], g))[:extra]:
        counts[j] += 1

    coefficients = np.zeros(spec.k)
    offsets = np.concatenate([[0], np.cumsum(spec.group_sizes)[:-1]])
    chosen: List[int] = []
    for j, (offset, size, count) in enumerate(zip(offsets, spec.group_sizes, counts)):
        if count > size:
            raise InfeasibleGroupError(f"group {j} of size {size} cannot hold {count} nonzeros")
        picks = offset + rng.choice(size, size=count, replace=False)
        chosen.extend(int(i) for i in picks)
    chosen.sort()
    coefficients[chosen] = rng.standard_normal(len(chosen))
    return SparseSignal(coefficients=coefficients, support=tuple(chosen), sparsity=len(chosen))


def gen_dictionary(n: int, k: int, seed: int) -> Dictionary:
    """Ψ con entradas N(0, 1) y columnas normalizadas"""
    if n < 1 or k < 1:
        raise ContractViolationError(f"dictionary dimensions must be positive, got {n}x{k}")
    raw = stream(seed, "dictionary").standard_normal((n, k))
    normalized, _ = normalize_columns(raw)
    return Dictionary(entries=normalized)


def gen_batch(
    psi: Dictionary,
    p: np.ndarray,
    l: int,
    snr_db: Optional[float],
    seed: int,
    *,
    label: str = "batch",
    exact_spec: Optional[GroupSpec] = None,
    exact_sparsity: Optional[int] = None,
) -> SignalBatch:
    """
    X = ΨA + E con L columnas

    Cada columna usa su propio flujo (seed, label, l), así que el lote no
    depende del orden de generación. El ruido se escala exactamente para que
    10·log₁₀(‖Ψα_l‖²/‖e_l‖²) = snr_db en cada columna.
    """
    if l < 1:
        raise ContractViolationError(f"batch needs at least one column, got {l}")
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape[0] != psi.k:
        raise ContractViolationError(f"probability vector has {p.shape[0]} entries, dictionary has {psi.k} atoms")

    coefficients = np.zeros((psi.k, l))
    noise = np.zeros((psi.n, l))
    supports = []
    zero_energy = []
    for column in range(l):
        rng = stream(seed, label, column)
        if exact_spec is not None:
            signal = gen_sparse_exact(exact_spec, exact_sparsity or 0, rng)
        else:
            signal = gen_sparse(p, rng)
        coefficients[:, column] = signal.coefficients
        supports.append(signal.support)
        if snr_db is None:
            continue
        clean = psi.entries @ signal.coefficients
        energy = float(clean @ clean)
        if energy == 0.0:
            zero_energy.append(column)
            continue
        draw = rng.standard_normal(psi.n)
        noise[:, column] = draw * math.sqrt(energy / (10.0 ** (snr_db / 10.0) * float(draw @ draw)))

    if zero_energy:
        logger.warning("Zero-energy columns left noiseless", columns=len(zero_energy), total=l)
    signals = np.zeros((psi.n, l))
    for column in range(l):
        signals[:, column] = psi.entries @ coefficients[:, column] + noise[:, column]
    return SignalBatch(
        signals=signals,
        coefficients=coefficients,
        noise=noise,
        snr_db=snr_db,
        supports=tuple(supports),
        zero_energy_columns=tuple(zero_energy),
    )
