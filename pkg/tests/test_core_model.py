"""
Tests unitarios para core_model.py
"""

import numpy as np
import pytest

from core_model import (
    Dictionary,
    GramMatrix,
    SensingMatrix,
    SparseSignal,
    equivalent_dictionary,
    gram,
    normalize_columns,
    reconstruct,
)
from errors import ContractViolationError, DegenerateColumnError


class TestEquivalentDictionary:
    """Tests para equivalent_dictionary"""

    def test_identity(self):
        """Test Φ = Ψ = I"""
        eq = equivalent_dictionary(SensingMatrix(entries=np.eye(2)), Dictionary(entries=np.eye(2)))
        assert np.array_equal(eq.raw, np.eye(2))
        assert np.array_equal(eq.scale, np.ones(2))

    def test_scaling_forces_norms(self):
        """Test Φ = 2I normaliza a la identidad"""
        eq = equivalent_dictionary(SensingMatrix(entries=2 * np.eye(2)), Dictionary(entries=np.eye(2)))
        assert np.array_equal(eq.raw, 2 * np.eye(2))
        assert np.allclose(eq.scale, [0.5, 0.5])
        assert np.allclose(eq.normalized, np.eye(2))

    def test_matches_triple_loop(self, rng):
        """Test producto contra el triple bucle"""
        phi = SensingMatrix(entries=rng.standard_normal((3, 4)))
        psi = Dictionary.from_array(rng.standard_normal((4, 5)))
        eq = equivalent_dictionary(phi, psi)
        expected = np.zeros((3, 5))
        for i in range(3):
            for j in range(5):
                for t in range(4):
                    expected[i, j] += phi.entries[i, t] * psi.entries[t, j]
        assert np.max(np.abs(eq.raw - expected)) <= 1e-12
        assert np.allclose(np.linalg.norm(eq.normalized, axis=0), 1.0, atol=1e-12)

    def test_dimension_mismatch(self):
        """Test Φ y Ψ incompatibles"""
        with pytest.raises(ContractViolationError):
            equivalent_dictionary(SensingMatrix(entries=np.ones((2, 3))), Dictionary(entries=np.eye(2)))

    def test_zero_column_names_index(self):
        """Test columna nula en D"""
        phi = SensingMatrix(entries=np.array([[1.0, 0.0, 0.0]]))
        psi = Dictionary(entries=np.eye(3))
        with pytest.raises(DegenerateColumnError) as exc:
            equivalent_dictionary(phi, psi)
        assert exc.value.column == 1

    def test_gram_associativity(self, rng):
        """Test gram(ΦΨ) == ΨᵀΦᵀΦΨ"""
        phi = SensingMatrix(entries=rng.standard_normal((4, 6)))
        psi = Dictionary.from_array(rng.standard_normal((6, 9)))
        g = gram(equivalent_dictionary(phi, psi).raw)
        expected = psi.entries.T @ phi.entries.T @ phi.entries @ psi.entries
        assert np.allclose(g.entries, expected, atol=1e-10)


class TestGram:
    """Tests para gram"""

    def test_identity(self):
        """Test D = I"""
        assert np.array_equal(gram(np.eye(3)).entries, np.eye(3))

    def test_equal_columns(self):
        """Test columnas unitarias iguales"""
        d = np.array([[1.0, 1.0], [0.0, 0.0]])
        assert gram(d).entries[0, 1] == 1.0

    def test_pairwise_inner_products(self, rng):
        """Test contra productos escalares por pares"""
        d = rng.standard_normal((3, 4))
        g = gram(d).entries
        for i in range(4):
            for j in range(4):
                assert abs(g[i, j] - float(np.dot(d[:, i], d[:, j]))) <= 1e-12

    def test_rejects_asymmetric(self):
        """Test Gram no simétrico"""
        with pytest.raises(ContractViolationError):
            GramMatrix(entries=np.array([[1.0, 0.5], [0.0, 1.0]]))


class TestNormalizeColumns:
    """Tests para normalize_columns"""

    def test_invariant_under_rescaling(self, rng):
        """Test D̄ no depende de la escala de las columnas"""
        d = rng.standard_normal((5, 7))
        normalized, _ = normalize_columns(d)
        rescaled, _ = normalize_columns(d * rng.uniform(0.1, 10.0, size=7))
        assert np.allclose(normalized, rescaled, atol=1e-12)

    def test_scale_is_inverse_norm(self):
        """Test scale(i) = 1/‖D(:,i)‖"""
        _, scale = normalize_columns(np.array([[3.0, 0.0], [4.0, 2.0]]))
        assert np.allclose(scale, [0.2, 0.5])


class TestDomainTypes:
    """Tests para los invariantes de los tipos"""

    def test_dictionary_rejects_unnormalized(self):
        """Test columnas sin norma unitaria"""
        with pytest.raises(ContractViolationError):
            Dictionary(entries=np.array([[2.0, 0.0], [0.0, 1.0]]))

    def test_dictionary_from_array_renormalizes(self):
        """Test from_array renormaliza antes de validar"""
        psi = Dictionary.from_array(np.array([[2.0, 0.0], [0.0, 5.0]]))
        assert np.allclose(psi.entries, np.eye(2))
        assert psi.n == 2 and psi.k == 2

    def test_dictionary_is_read_only(self, small_dictionary):
        """Test inmutabilidad de las entradas"""
        with pytest.raises(ValueError):
            small_dictionary.entries[0, 0] = 1.0

    def test_sensing_matrix_rejects_expansion(self):
        """Test M > N"""
        with pytest.raises(ContractViolationError):
            SensingMatrix(entries=np.ones((3, 2)))

    def test_sensing_matrix_square_allowed(self):
        """Test M == N sin compresión"""
        phi = SensingMatrix(entries=np.eye(3))
        assert phi.m == 3 and phi.n == 3
        assert phi.design_id == "external"

    def test_sparse_signal_off_support(self):
        """Test coeficientes fuera del soporte"""
        with pytest.raises(ContractViolationError):
            SparseSignal(coefficients=np.array([1.0, 2.0, 0.0]), support=(0,), sparsity=2)

    def test_sparse_signal_support_exceeds_sparsity(self):
        """Test |Λ| > S"""
        with pytest.raises(ContractViolationError):
            SparseSignal(coefficients=np.array([1.0, 2.0]), support=(0, 1), sparsity=1)


class TestReconstruct:
    """Tests para reconstruct"""

    def test_sum_over_support(self, small_dictionary, rng):
        """Test x = Σ_{i∈Λ} α(i)Ψ(:,i)"""
        alpha = np.zeros(small_dictionary.k)
        support = [1, 4, 7]
        alpha[support] = rng.standard_normal(3)
        x = reconstruct(small_dictionary, alpha)
        expected = sum(alpha[i] * small_dictionary.entries[:, i] for i in support)
        assert np.allclose(x, expected, atol=1e-12)

    def test_wrong_length(self, small_dictionary):
        """Test coeficientes de longitud incorrecta"""
        with pytest.raises(ContractViolationError):
            reconstruct(small_dictionary, np.zeros(3))
