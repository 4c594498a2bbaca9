import math
from itertools import permutations

import numpy as np
import pytest

from core.exceptions import DimensionError, NumericalError, ValidationError
from qsim.decouple import zeroth_order_average
from qsim.jumpcode import (
    CodeVariant,
    JumpCode,
    PermutationTracker,
    ProjectorKind,
    apply_permutation,
    build_code,
    code_constants,
    code_projector,
    codeword_records,
    compose_transpositions,
    encode,
    flip_decoupling_set,
    flip_operator,
    half_excitation_value,
    half_excitation_words,
    jump,
    parity_bias,
    permutation_average,
    permutation_moments,
    permutation_operator,
    random_swap_layer,
    recovery,
    recovery_operator,
    sample_swap_layer,
    sampled_permutation_average,
    state_c3,
    swap_fidelity_coefficients,
    zzzz_parity_bias,
)
from qsim.perturb import ChainModel, build_chain_hamiltonian, sample_uniform_chain
from qsim.qcore import PAULI_Z, StateVector, embed_operator, pauli_decompose, random_state


class TestBuildCode:
    @pytest.mark.parametrize("n_logical", [1, 2, 3])
    def test_sizes(self, n_logical):
        code = build_code(n_logical)
        assert code.n_physical == 2 * n_logical + 2
        assert code.n_codewords == 2 ** n_logical

    def test_words(self):
        assert build_code(1).words == ("0101", "1001")
        assert build_code(2).words[3] == "101001"

    def test_four_qubit_variant(self):
        code = build_code(variant=CodeVariant.FOUR_QUBIT)
        assert code.n_physical == 4
        assert code.n_codewords == 3
        assert code.n_logical is None

    def test_string_variant_accepted(self):
        assert build_code(1, variant="FOUR_QUBIT").variant is CodeVariant.FOUR_QUBIT

    def test_codewords_are_half_excited(self):
        for word in build_code(3).codewords:
            assert set(word.excitation_counts()) == {4}

    def test_non_orthonormal_rejected(self):
        state = StateVector(4, np.eye(16)[0b0101])
        with pytest.raises(NumericalError):
            JumpCode(CodeVariant.TENSOR, 4, (state, state))

    def test_leaving_the_subspace_rejected(self):
        with pytest.raises(ValidationError):
            JumpCode(CodeVariant.TENSOR, 4, (StateVector.from_bits("0001"),))

    def test_codeword_records(self):
        records = codeword_records(build_code(1))
        assert [entry[0] for entry in records[0]] == [0b0101, 0b1010]
        assert records[0][0][1] == pytest.approx(1 / math.sqrt(2))


class TestEncode:
    def test_linear_map(self, rng):
        code = build_code(2)
        logical = random_state(2, rng)
        encoded = encode(logical, code)
        np.testing.assert_allclose(code.codeword_matrix.conj() @ encoded.amps, logical.amps, atol=1e-14)
        assert encoded.is_normalized()

    def test_logical_size_checked(self, rng):
        with pytest.raises(DimensionError):
            encode(random_state(2, rng), build_code(1))

    def test_four_qubit_code_has_no_encoder(self, rng):
        with pytest.raises(ValidationError):
            encode(random_state(1, rng), build_code(variant=CodeVariant.FOUR_QUBIT))


class TestRecovery:
    @pytest.mark.parametrize("n_logical", [1, 2, 3])
    @pytest.mark.parametrize("phase", [0.0, math.pi])
    def test_every_jump_is_corrected(self, rng, n_logical, phase):
        code = build_code(n_logical, phase)
        encoded = encode(random_state(n_logical, rng), code)
        for qubit in range(code.n_physical):
            restored = recovery(jump(encoded, qubit), qubit, code)
            assert abs(encoded.fidelity(restored) - 1.0) < 1e-10

    def test_four_qubit_code(self, rng):
        code = build_code(variant=CodeVariant.FOUR_QUBIT)
        amps = rng.normal(size=3) + 1j * rng.normal(size=3)
        state = StateVector(4, code.codeword_matrix.T @ amps).normalized()
        for qubit in range(4):
            assert recovery(jump(state, qubit), qubit, code).fidelity(state) == pytest.approx(1.0, abs=1e-10)

    def test_permuted_and_flipped_states(self, rng):
        code = build_code(3)
        encoded = encode(random_state(3, rng), code)
        moved = apply_permutation(encoded.amps, rng.permutation(8))
        moved = flip_operator(8).apply(moved)
        state = StateVector(8, moved)
        for qubit in (0, 3, 7):
            assert recovery(jump(state, qubit), qubit, code).fidelity(state) == pytest.approx(1.0, abs=1e-10)

    def test_operator_is_unitary(self):
        assert recovery_operator(2, 6).unitary

    def test_unsupported_phase(self):
        with pytest.raises(ValidationError):
            recovery_operator(0, 4, phase=math.pi / 2)

    def test_qubit_out_of_range(self):
        with pytest.raises(DimensionError):
            recovery_operator(4, 4)
        with pytest.raises(DimensionError):
            jump(StateVector.from_bits("0101"), 5)

    def test_state_size_checked(self, rng):
        with pytest.raises(DimensionError):
            recovery(random_state(3, rng), 0, build_code(1))


class TestProjectors:
    def test_code_projector(self, rng):
        code = build_code(2)
        projector = code_projector(code)
        assert projector.is_projector()
        assert projector.rank == 4
        assert projector.contains(encode(random_state(2, rng), code))

    @pytest.mark.parametrize("n_p", [4, 6, 8])
    def test_subspace_ranks(self, n_p):
        dfs = code_projector(kind=ProjectorKind.DFS, n_physical=n_p)
        symmetric = code_projector(kind=ProjectorKind.SYMMETRIC, n_physical=n_p)
        assert dfs.rank == math.comb(n_p, n_p // 2)
        assert symmetric.rank == math.comb(n_p, n_p // 2) // 2
        assert symmetric.is_projector()

    def test_half_excitation_words(self):
        assert half_excitation_words(4) == ["0011", "0101", "0110", "1001", "1010", "1100"]

    def test_permutations_preserve_symmetric_span(self, rng):
        symmetric = code_projector(kind=ProjectorKind.SYMMETRIC, n_physical=6)
        for _ in range(3):
            assert symmetric.preserves(permutation_operator(rng.permutation(6)))

    def test_flip_preserves_symmetric_span_only_for_eight_qubits(self):
        assert code_projector(kind=ProjectorKind.SYMMETRIC, n_physical=8).preserves(flip_operator(8))
        assert not code_projector(kind=ProjectorKind.SYMMETRIC, n_physical=6).preserves(flip_operator(6))

    def test_flip_preserves_dfs(self):
        assert code_projector(kind=ProjectorKind.DFS, n_physical=6).preserves(flip_operator(6))

    def test_code_projector_needs_code(self):
        with pytest.raises(ValidationError):
            code_projector()

    def test_odd_qubit_count(self):
        with pytest.raises(ValidationError):
            code_projector(kind=ProjectorKind.DFS, n_physical=5)


class TestFlips:
    def test_word(self):
        assert flip_operator(4).word == "ZIZI"

    def test_odd_count_rejected(self):
        with pytest.raises(ValidationError):
            flip_operator(5)

    def test_cancels_transverse_couplings(self, rng):
        chain = sample_uniform_chain(4, 0.1, rng, full_heisenberg=True)
        h = build_chain_hamiltonian(chain).entries
        averaged = pauli_decompose(zeroth_order_average(h, flip_decoupling_set(4)).entries, tol=0.0)
        original = pauli_decompose(h, tol=0.0)
        for word, value in averaged.items():
            if set(word) & {"X", "Y"}:
                assert abs(value) < 1e-12
            else:
                assert value == pytest.approx(original.get(word, 0.0), abs=1e-12)


class TestPermutations:
    def test_conjugation_moves_z(self):
        perm = (2, 0, 3, 1)
        p = permutation_operator(perm).entries
        for q in range(4):
            moved = p @ embed_operator(PAULI_Z, [q], 4) @ p.conj().T
            np.testing.assert_allclose(moved, embed_operator(PAULI_Z, [perm[q]], 4), atol=1e-14)

    def test_matches_detuning_relabel(self):
        perm = (1, 2, 0)
        chain = ChainModel(3, detunings=(0.1, 0.2, 0.3))
        p = permutation_operator(perm).entries
        np.testing.assert_allclose(
            p @ build_chain_hamiltonian(chain).entries @ p.conj().T,
            build_chain_hamiltonian(chain.permuted(perm)).entries,
            atol=1e-14,
        )

    def test_apply_permutation(self, rng):
        perm = rng.permutation(4)
        state = random_state(4, rng)
        np.testing.assert_allclose(
            apply_permutation(state.amps, perm), permutation_operator(perm).entries @ state.amps, atol=1e-14
        )

    def test_compose_transpositions(self):
        assert compose_transpositions(3, [(0, 1)]) == (1, 0, 2)
        assert compose_transpositions(3, [(0, 1), (1, 2)]) == (2, 0, 1)

    def test_tracker_replays_history(self, rng):
        tracker = PermutationTracker(5)
        for _ in range(4):
            _, tracker = sample_swap_layer(tracker, rng)
        assert tracker.sigma == tracker.replay()

    def test_tracker_rejects_non_bijection(self):
        with pytest.raises(ValidationError):
            PermutationTracker(3, (0, 0, 1))

    def test_swap_layers_are_uniform(self, rng):
        tracker = PermutationTracker(3)
        counts = {}
        draws = 6000
        for _ in range(draws):
            layer, _ = sample_swap_layer(tracker, rng)
            counts[layer] = counts.get(layer, 0) + 1
        assert len(counts) == 6
        sigma = math.sqrt(draws * (1 / 6) * (5 / 6))
        assert all(abs(c - draws / 6) < 5 * sigma for c in counts.values())

    def test_random_swap_layer(self, rng):
        operator, tracker = random_swap_layer(PermutationTracker(4), rng, n_physical=4)
        assert operator.unitary
        np.testing.assert_allclose(operator.entries, permutation_operator(tracker.sigma).entries)

    def test_random_swap_layer_size_checked(self, rng):
        with pytest.raises(DimensionError):
            random_swap_layer(PermutationTracker(4), rng, n_physical=6)


class TestPermutationAverage:
    def test_dense_matches_explicit_sum(self, rng):
        a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        explicit = np.zeros((8, 8), dtype=complex)
        for perm in permutations(range(3)):
            p = permutation_operator(perm).entries
            explicit += p.conj().T @ a @ p
        np.testing.assert_allclose(permutation_average(a, 3).entries, explicit / 6, atol=1e-12)

    def test_diagonal_fast_path(self, rng):
        d = np.diag(rng.normal(size=16))
        fast = permutation_average(d, 4).entries
        explicit = sum(
            permutation_operator(p).entries.conj().T @ d @ permutation_operator(p).entries
            for p in permutations(range(4))
        ) / 24
        np.testing.assert_allclose(fast, explicit, atol=1e-12)

    def test_sampled_average(self, rng):
        a = rng.normal(size=(8, 8))
        exact = permutation_average(a, 3).entries
        sampled, stderr = sampled_permutation_average(a, 3, rng, samples=4000)
        assert np.max(np.abs(sampled.entries - exact)) < 6 * stderr

    def test_large_register_needs_generator(self):
        with pytest.raises(ValidationError):
            permutation_average(np.eye(512), 9)

    def test_shape_checked(self):
        with pytest.raises(DimensionError):
            permutation_average(np.eye(8), 4)

    def test_averaged_chain_is_constant_on_half_excitation(self, rng):
        chain = sample_uniform_chain(6, 0.1, rng)
        averaged = np.real(np.diag(permutation_average(build_chain_hamiltonian(chain), 6).entries))
        values = half_excitation_value(averaged, 6)
        c1 = code_constants(chain).c1
        assert values["min"] == pytest.approx(c1, abs=1e-12)
        assert values["max"] == pytest.approx(c1, abs=1e-12)


class TestParityBias:
    @pytest.mark.parametrize("n_p,expected", [(4, 1.0), (6, 3 / 15), (8, 3 / 35)])
    def test_closed_form_matches_counting(self, n_p, expected):
        assert parity_bias(n_p) == pytest.approx(expected, abs=1e-15)
        assert zzzz_parity_bias(n_p) == pytest.approx(expected, abs=1e-12)

    def test_small_registers(self):
        assert parity_bias(2) == 0.0
        assert zzzz_parity_bias(2) == 0.0


class TestCodeConstants:
    @pytest.mark.parametrize("n_logical", [1, 2, 3])
    def test_closed_forms_match_brute_force(self, rng, n_logical):
        code = build_code(n_logical)
        word = int(code.words[0], 2)
        for _ in range(3):
            chain = sample_uniform_chain(code.n_physical, 1e-4, rng)
            closed = code_constants(chain, code)
            moments = permutation_moments(chain, code.codewords[0])
            assert moments.mean_diagonal[word] == pytest.approx(closed.c1, rel=1e-9, abs=1e-20)
            assert moments.mean_square_diagonal[word] == pytest.approx(closed.c2, rel=1e-9, abs=1e-24)
            assert closed.c3_lower == pytest.approx(closed.c1 ** 2)

    def test_single_codeword_reaches_upper_bound(self, rng):
        code = build_code(2)
        chain = sample_uniform_chain(6, 0.1, rng)
        assert state_c3(chain, code.codewords[1]) == pytest.approx(code_constants(chain, code).c3_upper, rel=1e-9)

    def test_code_state_lies_in_interval(self, rng):
        code = build_code(2)
        chain = sample_uniform_chain(6, 0.1, rng)
        constants = code_constants(chain, code)
        c3 = state_c3(chain, encode(random_state(2, rng), code))
        assert constants.c3_lower - 1e-12 <= c3 <= constants.c3_upper + 1e-12

    def test_quadratic_coefficient_vanishes_on_code_states(self, rng):
        code = build_code(2)
        chain = sample_uniform_chain(6, 0.1, rng)
        linear, quadratic = swap_fidelity_coefficients(chain, encode(random_state(2, rng), code))
        assert abs(quadratic) < 1e-14
        assert linear >= -1e-14

    def test_chain_and_code_sizes_checked(self, rng):
        with pytest.raises(DimensionError):
            code_constants(sample_uniform_chain(4, 0.1, rng), build_code(2))

    def test_brute_force_size_limit(self, rng):
        chain = sample_uniform_chain(10, 0.1, rng)
        with pytest.raises(ValidationError):
            permutation_moments(chain, StateVector.basis(10, 0))
