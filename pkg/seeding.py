"""
Flujos aleatorios reproducibles
(semilla de 64 bits, etiqueta, índices) -> generador Philox independiente
"""

import hashlib
from typing import Union

import numpy as np

from errors import ParameterError

SeedLike = Union[int, np.random.Generator]

_MAX_SEED = 2 ** 64


def _label_key(label: str) -> int:
    # estable entre procesos
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:4], "little")


def stream(seed: int, label: str, *indices: int) -> np.random.Generator:
    """
    Generador determinista para (seed, label, índices)

    Dos llamadas con los mismos argumentos producen exactamente la misma
    secuencia; cambiar la etiqueta o cualquier índice produce un flujo
    independiente (spawn_key distinto de SeedSequence).
    """
    if not 0 <= int(seed) < _MAX_SEED:
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if any(int(i) < 0 for i in indices):
        raise ParameterError(f"stream indices must be non-negative, got {indices}")
    sequence = np.random.SeedSequence(
        entropy=int(seed),
        spawn_key=(_label_key(label),) + tuple(int(i) for i in indices),
    )
    return np.random.Generator(np.random.Philox(sequence))


def as_generator(seed: SeedLike, label: str) -> np.random.Generator:
    """Aceptar una semilla entera o un generador ya construido"""
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(int(seed), label)


def derive_seed(seed: int, label: str, *indices: int) -> int:
    """Semilla entera de 64 bits derivada de (seed, label, índices)"""
    generator = stream(seed, label, *indices)
    return int(generator.integers(0, _MAX_SEED - 1, dtype=np.uint64, endpoint=True))
