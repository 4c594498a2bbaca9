import numpy as np
import pytest

from core.exceptions import DimensionError, NumericalError, ValidationError
from qsim.qcore import (
    CNOT,
    HADAMARD,
    IDENTITY_2,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    OperatorMatrix,
    PauliString,
    StateVector,
    apply_gate,
    average_fidelity_from_entanglement,
    check_qubit_count,
    embed_operator,
    entanglement_fidelity,
    hermitian_propagator,
    operator_two_norm,
    pauli_basis,
    pauli_decompose,
    random_state,
    random_unitary,
    sampled_average_fidelity,
    trace_distance,
)


class TestStateVector:
    def test_bit_order_qubit_zero_is_msb(self):
        state = StateVector.from_bits("0011")
        assert state.n_q == 4
        assert state.amps[3] == 1.0

    def test_wrong_length_rejected(self):
        with pytest.raises(DimensionError):
            StateVector(2, np.ones(3))

    def test_from_amplitudes_needs_power_of_two(self):
        with pytest.raises(DimensionError):
            StateVector.from_amplitudes(np.ones(6))

    def test_random_state_is_normalized(self, rng):
        assert random_state(3, rng).is_normalized()

    def test_excitation_counts(self):
        amps = np.zeros(16)
        amps[0b0011] = amps[0b1100] = 1 / np.sqrt(2)
        np.testing.assert_array_equal(StateVector(4, amps).excitation_counts(), [2, 2])

    def test_zero_vector_cannot_be_normalized(self):
        with pytest.raises(NumericalError):
            StateVector(1, np.zeros(2)).normalized()


class TestApplyGate:
    def test_x_on_qubit_zero_flips_msb(self):
        out = apply_gate(StateVector.from_bits("00"), PAULI_X, [0])
        assert abs(out.amps[0b10]) == pytest.approx(1.0)

    def test_cnot_control_first_target(self):
        out = apply_gate(StateVector.from_bits("10"), CNOT, [0, 1])
        assert abs(out.amps[0b11]) == pytest.approx(1.0)

    def test_reversed_targets_swap_roles(self):
        out = apply_gate(StateVector.from_bits("01"), CNOT, [1, 0])
        assert abs(out.amps[0b11]) == pytest.approx(1.0)

    def test_matches_dense_embedding(self, rng):
        state = random_state(3, rng)
        u = random_unitary(4, rng)
        dense = embed_operator(u, [2, 0], 3) @ state.amps
        np.testing.assert_allclose(apply_gate(state, u, [2, 0]).amps, dense, atol=1e-12)

    def test_duplicate_targets_rejected(self):
        with pytest.raises(DimensionError):
            apply_gate(StateVector.from_bits("00"), CNOT, [1, 1])

    def test_out_of_range_target_rejected(self):
        with pytest.raises(DimensionError):
            apply_gate(StateVector.from_bits("00"), PAULI_X, [2])

    def test_wrong_operator_size_rejected(self):
        with pytest.raises(DimensionError):
            apply_gate(StateVector.from_bits("00"), CNOT, [0])


class TestEmbedOperator:
    def test_single_qubit_kron(self):
        np.testing.assert_allclose(embed_operator(PAULI_X, [1], 2), np.kron(IDENTITY_2, PAULI_X))
        np.testing.assert_allclose(embed_operator(PAULI_Z, [0], 2), np.kron(PAULI_Z, IDENTITY_2))

    def test_qubit_cap(self):
        with pytest.raises(DimensionError):
            check_qubit_count(15)


class TestPauliString:
    def test_product_phase(self):
        product = PauliString("X") @ PauliString("Y")
        assert product.word == "Z"
        assert product.phase == 1j

    def test_matrix_matches_kron(self):
        np.testing.assert_allclose(PauliString("XZ").to_matrix(), np.kron(PAULI_X, PAULI_Z))
        np.testing.assert_allclose(PauliString("YI").to_matrix(), np.kron(PAULI_Y, IDENTITY_2))

    def test_product_matches_matrix_product(self):
        a, b = PauliString("XYZ"), PauliString("ZZY")
        np.testing.assert_allclose((a @ b).to_matrix(), a.to_matrix() @ b.to_matrix(), atol=1e-12)

    def test_conjugate_matches_dense(self, rng):
        p = PauliString("YX", phase=-1j)
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        dense = p.to_matrix().conj().T @ m @ p.to_matrix()
        np.testing.assert_allclose(p.conjugate(m), dense, atol=1e-12)

    def test_apply_and_right_apply(self, rng):
        p = PauliString("ZY")
        m = rng.normal(size=(4, 4))
        np.testing.assert_allclose(p.apply(m), p.to_matrix() @ m, atol=1e-12)
        np.testing.assert_allclose(p.right_apply(m), m @ p.to_matrix(), atol=1e-12)

    def test_invalid_word(self):
        with pytest.raises(ValidationError):
            PauliString("XA")

    def test_invalid_phase(self):
        with pytest.raises(ValidationError):
            PauliString("X", phase=2)

    def test_trace(self):
        assert PauliString("II").trace() == 4
        assert PauliString("IZ").trace() == 0

    def test_basis_size(self):
        basis = pauli_basis(2)
        assert len(basis) == 16
        assert basis[0].is_identity


class TestOperatorMatrix:
    def test_unitary_flag_checked(self):
        with pytest.raises(NumericalError):
            OperatorMatrix(np.array([[1, 1], [0, 1]]), unitary=True)

    def test_hermitian_flag_checked(self):
        with pytest.raises(NumericalError):
            OperatorMatrix(np.array([[0, 1], [0, 0]]), hermitian=True)

    def test_non_square_rejected(self):
        with pytest.raises(DimensionError):
            OperatorMatrix(np.ones((2, 3)))


class TestFidelities:
    def test_identical_unitaries(self, rng):
        u = random_unitary(8, rng)
        assert entanglement_fidelity(u, u) == pytest.approx(1.0)

    def test_global_phase_ignored(self, rng):
        u = random_unitary(4, rng)
        assert entanglement_fidelity(u, np.exp(0.7j) * u) == pytest.approx(1.0)

    def test_average_fidelity_relation(self, rng):
        u = random_unitary(4, rng)
        v = hermitian_propagator(np.diag([0.1, -0.2, 0.05, 0.05]), 1.0) @ u
        expected = average_fidelity_from_entanglement(entanglement_fidelity(u, v), 4)
        mean, stderr = sampled_average_fidelity(u, v, 20000, rng)
        assert abs(mean - expected) < 5 * stderr

    def test_hermitian_propagator(self):
        theta = 0.3
        np.testing.assert_allclose(
            hermitian_propagator(theta * PAULI_Z, 1.0), np.diag([np.exp(-1j * theta), np.exp(1j * theta)])
        )

    def test_trace_distance(self):
        assert trace_distance(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])) == pytest.approx(1.0)
        assert trace_distance(np.eye(2) / 2, np.eye(2) / 2) == pytest.approx(0.0)


class TestPauliDecompose:
    def test_recovers_coefficients(self):
        matrix = np.eye(4) + 0.5 * np.kron(PAULI_X, PAULI_Z)
        coefficients = pauli_decompose(matrix)
        assert set(coefficients) == {"II", "XZ"}
        assert coefficients["XZ"] == pytest.approx(0.5)

    def test_hadamard(self):
        coefficients = pauli_decompose(HADAMARD)
        assert coefficients["X"] == pytest.approx(1 / np.sqrt(2))
        assert coefficients["Z"] == pytest.approx(1 / np.sqrt(2))


class TestOperatorNorm:
    def test_diagonal(self):
        assert operator_two_norm(np.diag([0.5, -2.0, 1.0, 0.0])) == pytest.approx(2.0)

    def test_pauli_string(self):
        assert operator_two_norm(PauliString("XY").to_matrix()) == pytest.approx(1.0)

    def test_non_square_rejected(self):
        with pytest.raises(DimensionError):
            operator_two_norm(np.ones((2, 3)))
