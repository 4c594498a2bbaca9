"""
Detected-jump codes on the half-excitation decoherence-free subspace.

Codewords pair every basis word with its bitwise complement, so a decay on a
known qubit leaves a state that the unitary R_i maps back onto the code. Also
houses the flip/swap decoupling operators and the permutation-averaged
constants c1, c2 and c3 of swap-decoupled chains.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations, permutations
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import DimensionError, NumericalError, ValidationError
from core.logger import setup_logger
from qsim.decouple import DecouplingSet
from qsim.perturb import ChainModel, chain_diagonal
from qsim.qcore import (
    CNOT,
    HADAMARD,
    PAULI_X,
    PAULI_Z,
    OperatorLike,
    OperatorMatrix,
    PauliString,
    StateVector,
    apply_to_tensor,
    as_array,
    check_qubit_count,
)

logger = setup_logger(__name__)

CODE_TOL = 1e-12
BRUTE_FORCE_MAX_QUBITS = 8
_PERMUTATION_CHUNK = 5040


class CodeVariant(str, Enum):
    TENSOR = "TENSOR"
    FOUR_QUBIT = "FOUR_QUBIT"


class ProjectorKind(str, Enum):
    CODE = "CODE"
    DFS = "DFS"
    SYMMETRIC = "SYMMETRIC"


def _bits(word: str) -> int:
    return int(word, 2)


def _complement(word: str) -> str:
    return "".join("1" if b == "0" else "0" for b in word)


def _pair_state(word: str, phase: float) -> np.ndarray:
    amps = np.zeros(2 ** len(word), dtype=complex)
    amps[_bits(word)] = 1.0 / math.sqrt(2.0)
    amps[_bits(_complement(word))] = np.exp(1j * phase) / math.sqrt(2.0)
    return amps


@dataclass(frozen=True)
class JumpCode:
    """
    Complementary-pair code on n_physical qubits.

    TENSOR codes carry n_logical qubits in n_physical = 2 n_logical + 2; the
    FOUR_QUBIT code spans three codewords and has no logical qubit structure.
    """
    variant: CodeVariant
    n_physical: int
    codewords: Tuple[StateVector, ...]
    n_logical: Optional[int] = None
    phase: float = 0.0
    words: Tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        matrix = self.codeword_matrix
        gram = matrix.conj() @ matrix.T
        deviation = float(np.max(np.abs(gram - np.eye(len(self.codewords)))))
        if deviation > CODE_TOL:
            raise NumericalError(
                "Codewords are not orthonormal",
                details={"deviation": deviation, "variant": self.variant.value},
            )
        for k, word in enumerate(self.codewords):
            counts = word.excitation_counts()
            if np.any(counts != self.n_physical // 2):
                raise ValidationError(
                    f"Codeword {k} leaves the half-excitation subspace",
                    details={"counts": sorted(set(counts.tolist()))},
                )

    @property
    def dim(self) -> int:
        return 2 ** self.n_physical

    @property
    def n_codewords(self) -> int:
        return len(self.codewords)

    @property
    def codeword_matrix(self) -> np.ndarray:
        """Codewords as rows, shape (n_codewords, 2^n_physical)."""
        return np.array([c.amps for c in self.codewords])


def build_code(
    n_logical: int = 1,
    phase: float = 0.0,
    variant: CodeVariant = CodeVariant.TENSOR,
) -> JumpCode:
    """
    Build a detected-jump code.

    TENSOR: each logical bit maps 0 -> 01 and 1 -> 10, the ancilla pair reads 01,
    and every word is superposed with its complement, (|w> + e^{i phase}|~w>)/sqrt(2).
    FOUR_QUBIT: the three pair states on 0011, 0101 and 0110.

    Args:
        n_logical: Logical qubits (TENSOR only)
        phase: Relative phase of the complement
        variant: Code family

    Returns:
        JumpCode with orthonormal codewords
    """
    variant = CodeVariant(variant)
    if variant is CodeVariant.FOUR_QUBIT:
        words = ("0011", "0101", "0110")
        return JumpCode(
            variant=variant,
            n_physical=4,
            codewords=tuple(StateVector(4, _pair_state(w, phase)) for w in words),
            phase=phase,
            words=words,
        )

    if n_logical < 1:
        raise ValidationError(f"A tensor code needs at least one logical qubit, got {n_logical}")
    n_physical = 2 * n_logical + 2
    check_qubit_count(n_physical)
    words = []
    for k in range(2 ** n_logical):
        bits = format(k, f"0{n_logical}b")
        words.append("".join("01" if b == "0" else "10" for b in bits) + "01")
    codewords = tuple(StateVector(n_physical, _pair_state(w, phase)) for w in words)
    logger.debug(f"Built tensor jump code n_L={n_logical}, n_P={n_physical}")
    return JumpCode(
        variant=variant,
        n_physical=n_physical,
        codewords=codewords,
        n_logical=n_logical,
        phase=phase,
        words=tuple(words),
    )


def encode(logical: StateVector, code: JumpCode) -> StateVector:
    """Map logical basis state k to codeword k, extended linearly."""
    if code.variant is not CodeVariant.TENSOR:
        raise ValidationError("Encoding needs a code with tensor-product structure")
    if logical.n_q != code.n_logical:
        raise DimensionError(
            f"Logical state has {logical.n_q} qubits, code expects {code.n_logical}",
            details={"state": logical.n_q, "code": code.n_logical},
        )
    return StateVector(code.n_physical, code.codeword_matrix.T @ logical.amps)


def codeword_records(code: JumpCode) -> List[List[List[float]]]:
    """Codewords as lists of [basis index, real, imag] over their support."""
    records = []
    for word in code.codewords:
        support = np.nonzero(np.abs(word.amps) > CODE_TOL)[0]
        records.append([[int(k), float(word.amps[k].real), float(word.amps[k].imag)] for k in support])
    return records


# ---------------------------------------------------------------------------
# Projectors
# ---------------------------------------------------------------------------

def half_excitation_words(n_p: int) -> List[str]:
    """Bit strings with exactly n_p/2 ones, ascending by basis index."""
    words = []
    for ones in combinations(range(n_p), n_p // 2):
        chars = ["0"] * n_p
        for k in ones:
            chars[k] = "1"
        words.append("".join(chars))
    return sorted(words, key=_bits)


@dataclass(frozen=True)
class CodespaceProjector:
    """Orthogonal projector onto the code span, the DFS, or the symmetric pair span."""
    kind: ProjectorKind
    n_physical: int
    matrix: np.ndarray = field(repr=False)

    def is_projector(self, tol: float = CODE_TOL) -> bool:
        p = self.matrix
        return bool(
            np.max(np.abs(p @ p - p)) < tol and np.max(np.abs(p - p.conj().T)) < tol
        )

    def project(self, state: StateVector) -> StateVector:
        return StateVector(state.n_q, self.matrix @ state.amps)

    def contains(self, state: StateVector, tol: float = 1e-9) -> bool:
        return float(np.linalg.norm(self.matrix @ state.amps - state.amps)) < tol

    def preserves(self, op: OperatorLike, tol: float = 1e-10) -> bool:
        """True when op maps the subspace into itself: op P = P op P."""
        u = op.to_matrix() if isinstance(op, PauliString) else as_array(op)
        p = self.matrix
        return bool(np.max(np.abs(u @ p - p @ u @ p)) < tol)

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.matrix).real))


def code_projector(
    code: Optional[JumpCode] = None,
    kind: ProjectorKind = ProjectorKind.CODE,
    n_physical: Optional[int] = None,
    phase: float = 0.0,
) -> CodespaceProjector:
    """
    Projector of the requested kind.

    CODE needs a code. DFS and SYMMETRIC only need the physical qubit count; the
    symmetric span holds every complementary-pair state with the given phase.
    """
    kind = ProjectorKind(kind)
    if kind is ProjectorKind.CODE:
        if code is None:
            raise ValidationError("A code projector needs a code")
        m = code.codeword_matrix
        return CodespaceProjector(kind, code.n_physical, m.T @ m.conj())

    n_p = n_physical if n_physical is not None else getattr(code, "n_physical", None)
    if n_p is None or n_p % 2:
        raise ValidationError(f"Subspace projectors need an even qubit count, got {n_p}")
    words = half_excitation_words(n_p)
    dim = 2 ** n_p
    if kind is ProjectorKind.DFS:
        diag = np.zeros(dim)
        diag[[_bits(w) for w in words]] = 1.0
        return CodespaceProjector(kind, n_p, np.diag(diag).astype(complex))

    vectors = [_pair_state(w, phase) for w in words if w[0] == "0"]
    basis = np.array(vectors)
    return CodespaceProjector(kind, n_p, basis.T @ basis.conj())


# ---------------------------------------------------------------------------
# Recovery and flips
# ---------------------------------------------------------------------------

def _recovery_phase_correction(phase: float) -> bool:
    if math.isclose(phase % (2 * math.pi), 0.0, abs_tol=1e-12):
        return False
    if math.isclose(phase % (2 * math.pi), math.pi, abs_tol=1e-12):
        return True
    raise ValidationError(
        f"Recovery supports codeword phases 0 and pi, got {phase}",
        details={"phase": phase},
    )


def recovery_operator(jump_qubit: int, n_physical: int, phase: float = 0.0) -> OperatorMatrix:
    """
    R_i = X_i * prod_{j != i} CNOT_{i,j} * H_i.

    Phase-pi codes need a trailing -Z_i to restore the antisymmetric words exactly.
    """
    if not 0 <= jump_qubit < n_physical:
        raise DimensionError(
            f"Jump qubit {jump_qubit} out of range for {n_physical} qubits",
            details={"jump_qubit": jump_qubit, "n_physical": n_physical},
        )
    flip_sign = _recovery_phase_correction(phase)
    m = np.eye(2 ** n_physical, dtype=complex)
    m = apply_to_tensor(m, HADAMARD, [jump_qubit], n_physical)
    for j in range(n_physical):
        if j != jump_qubit:
            m = apply_to_tensor(m, CNOT, [jump_qubit, j], n_physical)
    m = apply_to_tensor(m, PAULI_X, [jump_qubit], n_physical)
    if flip_sign:
        m = -apply_to_tensor(m, PAULI_Z, [jump_qubit], n_physical)
    return OperatorMatrix(m, unitary=True, label=f"R_{jump_qubit}")


def recovery(state: StateVector, jump_qubit: int, code: JumpCode) -> StateVector:
    """Apply R_i to the normalized post-jump state L_i|psi>/||L_i psi||."""
    if state.n_q != code.n_physical:
        raise DimensionError(
            "State and code have different qubit counts",
            details={"state": state.n_q, "code": code.n_physical},
        )
    r = recovery_operator(jump_qubit, code.n_physical, code.phase)
    return StateVector(state.n_q, r.entries @ state.amps)


def jump(state: StateVector, qubit: int) -> StateVector:
    """Normalized L_i|psi> with L_i = |0><1| on qubit i."""
    if not 0 <= qubit < state.n_q:
        raise DimensionError(f"Jump qubit {qubit} out of range", details={"qubit": qubit})
    lowering = np.array([[0, 1], [0, 0]], dtype=complex)
    amps = apply_to_tensor(state.amps, lowering, [qubit], state.n_q)
    return StateVector(state.n_q, amps).normalized()


def flip_operator(n_physical: int) -> PauliString:
    """U_F = Z (x) I (x) Z (x) I ... on an even number of qubits."""
    if n_physical < 2 or n_physical % 2:
        raise ValidationError(
            f"Flip decoupling needs an even qubit count, got {n_physical}",
            details={"n_physical": n_physical},
        )
    return PauliString("".join("Z" if k % 2 == 0 else "I" for k in range(n_physical)))


def flip_decoupling_set(n_physical: int) -> DecouplingSet:
    return DecouplingSet(
        (PauliString.identity(n_physical), flip_operator(n_physical)), name="flip"
    )


# ---------------------------------------------------------------------------
# Permutations
# ---------------------------------------------------------------------------

def _bit_matrix(n: int) -> np.ndarray:
    idx = np.arange(2 ** n)
    return np.array([(idx >> (n - 1 - p)) & 1 for p in range(n)], dtype=np.int64).T


def permutation_indices(perm: Sequence[int]) -> np.ndarray:
    """idx with P|b> = |idx[b]>, where the bit on position p moves to perm[p]."""
    n = len(perm)
    weights = np.array([1 << (n - 1 - perm[p]) for p in range(n)], dtype=np.int64)
    return _bit_matrix(n) @ weights


def permutation_operator(perm: Sequence[int]) -> OperatorMatrix:
    idx = permutation_indices(perm)
    dim = idx.size
    m = np.zeros((dim, dim), dtype=complex)
    m[idx, np.arange(dim)] = 1.0
    return OperatorMatrix(m, unitary=True, label="P")


def apply_permutation(amps: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    out = np.empty_like(amps)
    out[permutation_indices(perm)] = amps
    return out


def _fisher_yates(n: int, rng: np.random.Generator) -> List[Tuple[int, int]]:
    """Uniform permutation as at most n - 1 transpositions."""
    swaps = []
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        if j != i:
            swaps.append((j, i))
    return swaps


def compose_transpositions(n: int, swaps: Sequence[Tuple[int, int]]) -> Tuple[int, ...]:
    """Position map after applying the transpositions in order."""
    location = list(range(n))
    for a, b in swaps:
        location = [b if p == a else a if p == b else p for p in location]
    return tuple(location)


@dataclass(frozen=True)
class PermutationTracker:
    """
    Where the qubit originally at position q currently sits: sigma[q].

    `history` lists every applied transposition of physical positions.
    """
    n_physical: int
    sigma: Tuple[int, ...] = ()
    history: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        if not self.sigma:
            object.__setattr__(self, "sigma", tuple(range(self.n_physical)))
        if sorted(self.sigma) != list(range(self.n_physical)):
            raise ValidationError("Tracked permutation is not a bijection", details={"sigma": self.sigma})

    def replay(self) -> Tuple[int, ...]:
        return compose_transpositions(self.n_physical, self.history)

    def applied(self, swaps: Sequence[Tuple[int, int]]) -> "PermutationTracker":
        layer = compose_transpositions(self.n_physical, swaps)
        sigma = tuple(layer[s] for s in self.sigma)
        return PermutationTracker(self.n_physical, sigma, self.history + tuple(swaps))

    def logical_position(self, q: int) -> int:
        return self.sigma[q]


def sample_swap_layer(
    tracker: PermutationTracker, rng: np.random.Generator
) -> Tuple[Tuple[int, ...], PermutationTracker]:
    """Draw a uniform swap layer; returns its position map and the updated tracker."""
    swaps = _fisher_yates(tracker.n_physical, rng)
    return compose_transpositions(tracker.n_physical, swaps), tracker.applied(swaps)


def random_swap_layer(
    tracker: PermutationTracker, rng: np.random.Generator, n_physical: Optional[int] = None
) -> Tuple[OperatorMatrix, PermutationTracker]:
    """Uniformly random permutation layer as a basis-permutation unitary."""
    if n_physical is not None and n_physical != tracker.n_physical:
        raise DimensionError(
            "Tracker and requested qubit count differ",
            details={"tracker": tracker.n_physical, "n_physical": n_physical},
        )
    layer, tracker = sample_swap_layer(tracker, rng)
    return permutation_operator(layer), tracker


def _permutation_index_chunks(n: int) -> Iterator[np.ndarray]:
    """All n! basis index maps in chunks of shape (k, 2^n)."""
    bits = _bit_matrix(n)
    chunk = []
    for perm in permutations(range(n)):
        chunk.append([1 << (n - 1 - perm[p]) for p in range(n)])
        if len(chunk) == _PERMUTATION_CHUNK:
            yield np.array(chunk, dtype=np.int64) @ bits.T
            chunk = []
    if chunk:
        yield np.array(chunk, dtype=np.int64) @ bits.T


def sampled_permutation_average(
    a: OperatorLike, n_physical: int, rng: np.random.Generator, samples: int = 2000
) -> Tuple[OperatorMatrix, float]:
    """
    Monte-Carlo <A>_P over uniformly drawn permutations.

    Returns:
        (mean operator, largest entrywise standard error)
    """
    matrix = as_array(a)
    total = np.zeros_like(matrix)
    total_sq = np.zeros(matrix.shape)
    for _ in range(samples):
        perm = rng.permutation(n_physical)
        idx = permutation_indices(perm)
        term = matrix[np.ix_(idx, idx)]
        total += term
        total_sq += np.abs(term) ** 2
    mean = total / samples
    var = np.maximum(total_sq / samples - np.abs(mean) ** 2, 0.0)
    stderr = float(np.max(np.sqrt(var / max(samples - 1, 1))))
    return OperatorMatrix(mean, label="<A>_P"), stderr


def permutation_average(
    a: OperatorLike,
    n_physical: int,
    rng: Optional[np.random.Generator] = None,
    samples: int = 2000,
) -> OperatorMatrix:
    """
    <A>_P = (1/n!) sum_P P^dagger A P over all qubit permutations.

    Exact for n_physical <= 8, with an O(n! N) path for diagonal A. Larger
    registers fall back to sampling and need rng.
    """
    matrix = as_array(a)
    if matrix.shape != (2 ** n_physical, 2 ** n_physical):
        raise DimensionError(
            "Operator does not act on the given register",
            details={"shape": matrix.shape, "n_physical": n_physical},
        )
    if n_physical > BRUTE_FORCE_MAX_QUBITS:
        if rng is None:
            raise ValidationError(
                f"Sampled permutation average for {n_physical} qubits needs a generator"
            )
        mean, stderr = sampled_permutation_average(matrix, n_physical, rng, samples)
        logger.info(f"Sampled permutation average over {samples} draws, max stderr {stderr:.3e}")
        return mean

    count = math.factorial(n_physical)
    diag = np.diag(matrix)
    if np.count_nonzero(matrix - np.diag(diag)) == 0:
        acc = np.zeros(matrix.shape[0], dtype=complex)
        for chunk in _permutation_index_chunks(n_physical):
            acc += diag[chunk].sum(axis=0)
        return OperatorMatrix(np.diag(acc / count), label="<A>_P")

    acc = np.zeros_like(matrix)
    for chunk in _permutation_index_chunks(n_physical):
        for idx in chunk:
            acc += matrix[np.ix_(idx, idx)]
    return OperatorMatrix(acc / count, label="<A>_P")


# ---------------------------------------------------------------------------
# Swap-averaged constants
# ---------------------------------------------------------------------------

class CodeConstants(NamedTuple):
    c1: float
    c2: float
    c3_lower: float
    c3_upper: float
    parity_bias: float


def parity_bias(n_physical: int) -> float:
    """p'_+ - p'_- = 3 / (n^2 - 4n + 3); zero below four qubits."""
    if n_physical < 4:
        return 0.0
    return 3.0 / (n_physical ** 2 - 4 * n_physical + 3)


def zzzz_parity_bias(n_physical: int) -> float:
    """
    Counting oracle for p'_+ - p'_-: mean ZZZZ eigenvalue over every
    half-excitation word and every four-qubit subset.
    """
    if n_physical < 4:
        return 0.0
    words = half_excitation_words(n_physical)
    z = np.array([[1 - 2 * int(b) for b in w] for w in words])
    subsets = np.array(list(combinations(range(n_physical), 4)))
    return float(np.prod(z[:, subsets], axis=2).mean())


def _z_chain(chain: ChainModel) -> ChainModel:
    """Keep only detunings and ZZ couplings."""
    return ChainModel(chain.n_q, detunings=chain.detunings, couplings_z=chain.couplings_z)


def _check_chain(chain: ChainModel, code: Optional[JumpCode]) -> None:
    if code is not None and chain.n_q != code.n_physical:
        raise DimensionError(
            "Chain and code act on different qubit counts",
            details={"chain": chain.n_q, "code": code.n_physical},
        )


def code_constants(chain: ChainModel, code: Optional[JumpCode] = None) -> CodeConstants:
    """
    Closed forms of the swap-averaged constants on the half-excitation subspace.

    c1 = -(1/(n-1)) sum_j J_j
    c2 = sum d_i^2 - 2/(n-1) sum_{i<j} d_i d_j + sum J_j^2
         - 2/(n-1) sum_j J_j J_{j+1} + 2 (p'_+ - p'_-) sum_{k >= j+2} J_j J_k
    c3 lies in [c1^2, c2 - (detuning part of c2)].
    """
    _check_chain(chain, code)
    n = chain.n_q
    d = np.asarray(chain.detunings)
    j = np.asarray(chain.couplings_z)
    bias = parity_bias(n)

    c1 = -float(j.sum()) / (n - 1)
    d_pairs = 0.5 * (d.sum() ** 2 - np.sum(d ** 2))
    detuning_part = float(np.sum(d ** 2) - 2.0 / (n - 1) * d_pairs)
    adjacent = float(np.sum(j[:-1] * j[1:]))
    distant = float(sum(j[a] * j[b] for a in range(len(j)) for b in range(a + 2, len(j))))
    coupling_part = float(np.sum(j ** 2)) - 2.0 / (n - 1) * adjacent + 2.0 * bias * distant
    c2 = detuning_part + coupling_part
    return CodeConstants(c1=c1, c2=c2, c3_lower=c1 ** 2, c3_upper=coupling_part, parity_bias=bias)


@dataclass(frozen=True)
class PermutationMoments:
    """Brute-force permutation moments of a diagonal H' for one state."""
    mean_diagonal: np.ndarray
    mean_square_diagonal: np.ndarray
    c3: float


def permutation_moments(chain: ChainModel, state: StateVector) -> PermutationMoments:
    """
    Diagonals of <H'>_P and <H'^2>_P, and c3 = <<psi|P^dagger H' P|psi>^2>_P.

    H' keeps the detunings and ZZ couplings of the chain.
    """
    n = chain.n_q
    if state.n_q != n:
        raise DimensionError("State and chain act on different qubit counts")
    if n > BRUTE_FORCE_MAX_QUBITS:
        raise ValidationError(
            f"Brute-force permutation moments limited to {BRUTE_FORCE_MAX_QUBITS} qubits",
            details={"n_q": n},
        )
    diag = chain_diagonal(_z_chain(chain))
    probs = np.abs(state.amps) ** 2
    mean = np.zeros_like(diag)
    mean_sq = np.zeros_like(diag)
    c3 = 0.0
    for chunk in _permutation_index_chunks(n):
        values = diag[chunk]
        mean += values.sum(axis=0)
        mean_sq += (values ** 2).sum(axis=0)
        c3 += float(np.sum((values @ probs) ** 2))
    count = math.factorial(n)
    return PermutationMoments(mean / count, mean_sq / count, c3 / count)


def state_c3(chain: ChainModel, state: StateVector) -> float:
    return permutation_moments(chain, state).c3


def swap_fidelity_coefficients(chain: ChainModel, state: StateVector) -> Tuple[float, float]:
    """
    Coefficients of N dt^2 and (N^2 - N) dt^2 in the swap-averaged infidelity.

    linear = <psi|<H'^2>_P|psi> - c3
    quadratic = <psi|<H'>_P^2|psi> - <psi|<H'>_P|psi>^2, zero on code states
    """
    moments = permutation_moments(chain, state)
    probs = np.abs(state.amps) ** 2
    linear = float(probs @ moments.mean_square_diagonal) - moments.c3
    quadratic = float(probs @ moments.mean_diagonal ** 2) - float(probs @ moments.mean_diagonal) ** 2
    return linear, quadratic


def half_excitation_value(diagonal: np.ndarray, n_physical: int) -> Dict[str, float]:
    """Min and max of a diagonal over the half-excitation words (constant when averaged)."""
    values = diagonal[[_bits(w) for w in half_excitation_words(n_physical)]].real
    return {"min": float(values.min()), "max": float(values.max())}
