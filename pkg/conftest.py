"""
Configuración compartida de pytest
Fixtures de semillas y diccionarios pequeños
"""

import numpy as np
import pytest

from core_model import Dictionary
from synthetic import gen_dictionary


@pytest.fixture
def rng() -> np.random.Generator:
    """Generador fijo para datos de prueba"""
    return np.random.default_rng(20240611)


@pytest.fixture
def small_dictionary() -> Dictionary:
    """Ψ gaussiano 8×10 con columnas normalizadas"""
    return gen_dictionary(8, 10, seed=7)
